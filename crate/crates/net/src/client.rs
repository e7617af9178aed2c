use std::io::ErrorKind;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use lhc_core::frame::{Frame, FrameType};
use lhc_core::CompressedGradient;

use crate::error::NetError;
use crate::DEFAULT_MAX_PAYLOAD;

/// Submits `cg` for `round` and blocks until the merged result arrives.
///
/// `timeout` bounds the connect and each wait for data from the aggregator.
pub fn submit(
    addr: impl ToSocketAddrs,
    round: u64,
    worker: u16,
    cg: &CompressedGradient,
    timeout: Duration,
) -> Result<CompressedGradient, NetError> {
    let addr = addr
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| NetError::Protocol("address resolved to nothing".into()))?;
    let mut stream = TcpStream::connect_timeout(&addr, timeout).map_err(timeout_or_io)?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    stream.set_nodelay(true)?;
    Frame::submit(round, worker, cg.to_bytes()).write_to(&mut stream).map_err(core_timeout)?;

    let frame = Frame::read_from(&mut stream, DEFAULT_MAX_PAYLOAD)
        .map_err(core_timeout)?
        .ok_or_else(|| NetError::Protocol("aggregator closed the connection without a reply".into()))?;
    if frame.round_id != round || frame.worker_id != worker {
        return Err(NetError::Protocol(format!(
            "reply addressed to round {} worker {}",
            frame.round_id, frame.worker_id
        )));
    }
    match frame.kind {
        FrameType::Result => Ok(CompressedGradient::from_bytes(&frame.payload)?),
        FrameType::Nack => Err(NetError::Nack(frame.nack_reason()?)),
        FrameType::Submit => Err(NetError::Protocol("unexpected SUBMIT from aggregator".into())),
    }
}

fn timeout_or_io(e: std::io::Error) -> NetError {
    match e.kind() {
        ErrorKind::WouldBlock | ErrorKind::TimedOut => NetError::Timeout,
        _ => NetError::Io(e),
    }
}

fn core_timeout(e: lhc_core::Error) -> NetError {
    match e {
        lhc_core::Error::Io(io) => timeout_or_io(io),
        other => NetError::Core(other),
    }
}
