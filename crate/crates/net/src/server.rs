//! Thread-per-connection aggregator.
//!
//! Each connection carries one SUBMIT and receives either a NACK or, once the
//! round's last worker has submitted, a RESULT holding the merged payload.
//! Every participant of a round receives the same bytes.

use std::collections::HashMap;
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use lhc_core::frame::{Frame, FrameType, NackReason};
use lhc_core::CompressedGradient;

use crate::state::{AggregatorState, Submission};
use crate::{DEFAULT_MAX_PAYLOAD, DEFAULT_TIMEOUT};

#[derive(Debug, Clone, Copy)]
pub struct ServerConfig {
    /// Submissions that complete a round.
    pub workers: u16,
    /// How long a round may stay open, and how long a connection may take to
    /// deliver its frame.
    pub timeout: Duration,
    pub max_payload: u32,
}

impl ServerConfig {
    pub fn new(workers: u16) -> Self {
        Self { workers, timeout: DEFAULT_TIMEOUT, max_payload: DEFAULT_MAX_PAYLOAD }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

type Waiter = (u16, Sender<Arc<Vec<u8>>>);

struct Shared {
    state: AggregatorState,
    waiters: HashMap<u64, Vec<Waiter>>,
    completed: u64,
}

pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    shared: Arc<Mutex<Shared>>,
    accept: Option<JoinHandle<()>>,
    reaper: Option<JoinHandle<()>>,
}

impl Server {
    /// Binds and starts serving in background threads.
    pub fn bind(addr: impl ToSocketAddrs, cfg: ServerConfig) -> io::Result<Server> {
        if cfg.workers == 0 {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "an aggregator needs at least one worker"));
        }
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let shared = Arc::new(Mutex::new(Shared {
            state: AggregatorState::new(cfg.workers, cfg.timeout),
            waiters: HashMap::new(),
            completed: 0,
        }));

        let accept = {
            let (stop, shared) = (stop.clone(), shared.clone());
            thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = conn else { continue };
                    let shared = shared.clone();
                    thread::spawn(move || {
                        // Failures only affect this connection; the worker sees a closed socket.
                        let _ = handle(stream, &shared, cfg);
                    });
                }
            })
        };

        let reaper = {
            let (stop, shared) = (stop.clone(), shared.clone());
            let tick = (cfg.timeout / 4).clamp(Duration::from_millis(5), Duration::from_millis(250));
            thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    thread::sleep(tick);
                    let mut sh = shared.lock().unwrap();
                    for round in sh.state.expire(Instant::now()) {
                        // Dropping the senders releases the waiting connections.
                        sh.waiters.remove(&round);
                    }
                }
            })
        };

        Ok(Server { addr, stop, shared, accept: Some(accept), reaper: Some(reaper) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Rounds whose result has been broadcast.
    pub fn completed_rounds(&self) -> u64 {
        self.shared.lock().unwrap().completed
    }

    pub fn open_rounds(&self) -> usize {
        self.shared.lock().unwrap().state.open_rounds()
    }

    /// Blocks until the accept loop exits, which only happens on shutdown.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    /// Stops accepting, abandons open rounds and joins the service threads.
    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
        if let Some(h) = self.reaper.take() {
            let _ = h.join();
        }
        self.shared.lock().unwrap().waiters.clear();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if self.accept.is_some() {
            self.stop_threads();
        }
    }
}

fn handle(mut stream: TcpStream, shared: &Mutex<Shared>, cfg: ServerConfig) -> lhc_core::Result<()> {
    stream.set_read_timeout(Some(cfg.timeout))?;
    let Some(frame) = Frame::read_from(&mut stream, cfg.max_payload)? else {
        return Ok(());
    };
    if frame.kind != FrameType::Submit {
        return Ok(());
    }
    let (round, worker) = (frame.round_id, frame.worker_id);
    // Parse outside the lock; only the merge itself is serialized.
    let cg = match CompressedGradient::from_bytes(&frame.payload) {
        Ok(cg) => cg,
        Err(_) => return Frame::nack(round, worker, NackReason::SizeMismatch).write_to(&mut stream),
    };

    let (tx, rx) = channel();
    {
        let mut sh = shared.lock().unwrap();
        match sh.state.submit(round, worker, cg, Instant::now()) {
            Submission::Rejected(reason) => {
                drop(sh);
                return Frame::nack(round, worker, reason).write_to(&mut stream);
            }
            Submission::Pending { .. } => sh.waiters.entry(round).or_default().push((worker, tx)),
            Submission::Complete { merged, .. } => {
                let bytes = Arc::new(merged.to_bytes());
                for (_, waiter) in sh.waiters.remove(&round).unwrap_or_default() {
                    let _ = waiter.send(bytes.clone());
                }
                let _ = tx.send(bytes);
                sh.completed += 1;
            }
        }
    }
    match rx.recv() {
        Ok(bytes) => Frame::result(round, worker, bytes.to_vec()).write_to(&mut stream),
        // Round expired or the server is shutting down.
        Err(_) => Ok(()),
    }
}
