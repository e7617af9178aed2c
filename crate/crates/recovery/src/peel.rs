//! Bulk-synchronous peeling over sketch cells.
//!
//! Every candidate parameter (a position the index claims) occupies three
//! cells. Each cell tracks how many unresolved candidates land in it and the
//! XOR of their positions, so a cell of degree one names its sole occupant.
//! A round reads every degree-one cell, resolves the named parameters, then
//! subtracts them from all of their cells. Peeling stops when a round starts
//! with no degree-one cell.

use lhc_core::sketch::{map_row, RowMapping, SketchConfig};
use lhc_core::{CountSketch, NzIndex};

use crate::error::RecoveryError;
use crate::table::table;

/// Per-cell decoder state.
#[derive(Debug, Clone)]
pub struct PeelState {
    degree: Vec<u32>,
    ids: Vec<u64>,
    residual: Vec<f64>,
}

impl PeelState {
    /// Unresolved candidates mapped to each cell.
    pub fn degree(&self) -> &[u32] {
        &self.degree
    }

    /// XOR of the positions of the unresolved candidates in each cell.
    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    /// Sketch cells minus every contribution peeled so far.
    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    /// Cells still holding two or more unresolved candidates.
    pub fn core_cells(&self) -> usize {
        self.degree.iter().filter(|d| **d >= 2).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub position: u64,
    pub value: f64,
    /// 1-based round in which the position was peeled.
    pub round: u32,
}

#[derive(Debug, Clone)]
pub struct Peeled {
    pub resolved: Vec<Resolved>,
    /// Claimed positions that peeling could not resolve, ascending.
    pub unresolved: Vec<u64>,
    pub candidates: u64,
    pub iterations: u32,
    pub state: PeelState,
}

/// Bitset over parameter positions.
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: u64) -> Self {
        Bits(vec![0; len.div_ceil(64) as usize])
    }

    #[inline]
    fn get(&self, i: u64) -> bool {
        self.0[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: u64) {
        self.0[(i / 64) as usize] |= 1 << (i % 64);
    }

    #[inline]
    fn clear(&mut self, i: u64) {
        self.0[(i / 64) as usize] &= !(1 << (i % 64));
    }
}

/// Row mappings of every batch holding a candidate, computed once.
struct Mapper {
    maps: Vec<RowMapping>,
}

impl Mapper {
    fn new(cfg: &SketchConfig, n_params: u64, candidates: &[u64]) -> Self {
        let c = cfg.batch_width as u64;
        let empty = RowMapping([lhc_core::Slot { row: 0, negative: false, bias: 0 }; lhc_core::sketch::NUM_HASHES]);
        let mut maps = vec![empty; n_params.div_ceil(c) as usize];
        let mut last = u64::MAX;
        for &p in candidates {
            let b = p / c;
            if b != last {
                maps[b as usize] = map_row(b, cfg);
                last = b;
            }
        }
        Self { maps }
    }

    #[inline]
    fn get(&self, batch: u64) -> RowMapping {
        self.maps[batch as usize]
    }
}

pub fn peel(sketch: &CountSketch, index: &NzIndex) -> Result<Peeled, RecoveryError> {
    Decoder::new(sketch, index)?.run()
}

struct Decoder {
    n_params: u64,
    batch_width: u32,
    candidates: Vec<u64>,
    is_candidate: Bits,
    pending: Bits,
    mapper: Mapper,
    state: PeelState,
}

impl Decoder {
    /// One pass over the claimed positions builds the degree and id tables.
    fn new(sketch: &CountSketch, index: &NzIndex) -> Result<Self, RecoveryError> {
        let cfg = sketch.config();
        let c = cfg.batch_width;
        let n_params = index.len();
        let cells = cfg.cells();
        let candidates = index.candidates();

        let mut degree = table(0u32, cells);
        let mut ids = table(0u64, cells);
        let mut residual = table(0f64, cells);
        for (r, v) in residual.iter_mut().zip(sketch.cells()) {
            *r = *v as f64;
        }
        let mut is_candidate = Bits::new(n_params);
        let mapper = Mapper::new(cfg, n_params, &candidates);

        for &p in &candidates {
            is_candidate.set(p);
            let m = mapper.get(p / c as u64);
            let t = (p % c as u64) as u32;
            for s in &m.0 {
                let cell = s.cell(t, c);
                degree[cell] += 1;
                ids[cell] ^= p;
            }
        }
        let pending = Bits(is_candidate.0.clone());
        Ok(Self {
            n_params,
            batch_width: c,
            candidates,
            is_candidate,
            pending,
            mapper,
            state: PeelState { degree, ids, residual },
        })
    }

    fn run(mut self) -> Result<Peeled, RecoveryError> {
        let c = self.batch_width;
        let state = &mut self.state;
        let mut frontier: Vec<usize> = (0..state.degree.len()).filter(|&k| state.degree[k] == 1).collect();
        let mut resolved = Vec::new();
        let mut iterations = 0u32;
        let mut round_items: Vec<(u64, f64)> = Vec::new();

        while !frontier.is_empty() {
            round_items.clear();
            // Read phase: every degree-one cell sees the state at the start of the round.
            for &cell in &frontier {
                if state.degree[cell] != 1 {
                    continue;
                }
                let p = state.ids[cell];
                if p >= self.n_params || !self.is_candidate.get(p) {
                    return Err(RecoveryError::Inconsistent { cell, position: p });
                }
                let m = self.mapper.get(p / c as u64);
                let t = (p % c as u64) as u32;
                let Some(slot) = m.0.iter().find(|s| s.cell(t, c) == cell) else {
                    return Err(RecoveryError::Inconsistent { cell, position: p });
                };
                if !self.pending.get(p) {
                    // Already claimed through another of its cells this round.
                    continue;
                }
                self.pending.clear(p);
                round_items.push((p, slot.sign() as f64 * state.residual[cell]));
            }
            if round_items.is_empty() {
                break;
            }
            iterations += 1;

            // Removal phase.
            let mut next = Vec::new();
            for &(p, value) in &round_items {
                let m = self.mapper.get(p / c as u64);
                let t = (p % c as u64) as u32;
                for s in &m.0 {
                    let cell = s.cell(t, c);
                    state.residual[cell] -= s.sign() as f64 * value;
                    state.degree[cell] -= 1;
                    state.ids[cell] ^= p;
                    if state.degree[cell] == 1 {
                        next.push(cell);
                    }
                }
                resolved.push(Resolved { position: p, value, round: iterations });
            }
            frontier = next;
        }

        let unresolved = self.candidates.iter().copied().filter(|&p| self.pending.get(p)).collect();
        Ok(Peeled {
            resolved,
            unresolved,
            candidates: self.candidates.len() as u64,
            iterations,
            state: self.state,
        })
    }
}
