//! Batched signed Count Sketch with three hash rows per input batch.
//!
//! Parameters are grouped into batches of `batch_width` consecutive values.
//! Batch `i` is mapped to three distinct sketch rows `h_j(i)`, each with a
//! sign `g_j(i)` and a column rotation `bias_j(i)`. Column `t` of the batch
//! lands in column `(t + bias_j) mod batch_width` of row `h_j`. With
//! `batch_width = 1` this is the classic per-parameter Count Sketch.

use crate::error::{Error, Result};
use crate::hash::{hash3, reduce32};

/// Number of hash rows per batch. Fixed: the peeling threshold depends on it.
pub const NUM_HASHES: usize = 3;

pub const DEFAULT_BATCH_WIDTH: u32 = 1024;
pub const DEFAULT_GAMMA: f64 = 1.23;
pub const DEFAULT_BLOCK_ROWS: u32 = 4096;
/// Cells per expected candidate in blocked layout. Below ~1.4 the slowest
/// block dominates and the round count creeps up with the number of blocks.
pub const DEFAULT_BLOCK_OVERPROVISION: f64 = 1.5;

const BLOCK_SALT: u64 = 0x6c6f_636b;
const MAX_REHASH: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchConfig {
    pub rows: u32,
    pub batch_width: u32,
    pub seed: u64,
    /// Provisioning constant used by the sizing helpers; not part of the layout.
    pub gamma: f64,
    /// When set, batches are hashed into independent blocks of this many rows.
    pub block_rows: Option<u32>,
}

impl SketchConfig {
    pub fn new(rows: u32, batch_width: u32, seed: u64) -> Result<Self> {
        let cfg = Self { rows, batch_width, seed, gamma: DEFAULT_GAMMA, block_rows: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Switches to blocked layout. `rows` must be a multiple of `block_rows`.
    pub fn with_blocks(mut self, block_rows: u32) -> Result<Self> {
        self.block_rows = Some(block_rows);
        self.validate()?;
        Ok(self)
    }

    /// Blocked layout giving `candidates` parameters `overprovision` cells
    /// each, rounded up to whole blocks of `block_rows` rows.
    pub fn blocked(candidates: u64, batch_width: u32, seed: u64, block_rows: u32, overprovision: f64) -> Result<Self> {
        if !(overprovision > 0.0 && overprovision.is_finite()) {
            return Err(Error::InvalidConfig(format!("overprovision must be positive, got {overprovision}")));
        }
        if batch_width == 0 {
            return Err(Error::InvalidConfig("batch width must be at least 1".into()));
        }
        let rows = round_to_blocks(rows_for_candidates(candidates, batch_width, overprovision), block_rows);
        Self::new(rows, batch_width, seed)?.with_blocks(block_rows)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_width == 0 {
            return Err(Error::InvalidConfig("batch width must be at least 1".into()));
        }
        if (self.rows as usize) < NUM_HASHES {
            return Err(Error::InvalidConfig(format!("need at least {NUM_HASHES} sketch rows, got {}", self.rows)));
        }
        if let Some(block) = self.block_rows {
            if (block as usize) < NUM_HASHES || !self.rows.is_multiple_of(block) {
                return Err(Error::InvalidConfig(format!(
                    "block of {block} rows must hold {NUM_HASHES} rows and divide {}",
                    self.rows
                )));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.rows as usize * self.batch_width as usize
    }

    /// True when two configs place every parameter in the same cells.
    pub fn same_layout(&self, other: &SketchConfig) -> bool {
        self.rows == other.rows
            && self.batch_width == other.batch_width
            && self.seed == other.seed
            && self.block_rows == other.block_rows
    }

    /// Number of input batches covering `n_params` parameters.
    pub fn batches(&self, n_params: u64) -> u64 {
        n_params.div_ceil(self.batch_width as u64)
    }
}

/// Rows needed so the sketch holds `fraction * n_params` cells.
pub fn rows_for_fraction(n_params: u64, batch_width: u32, fraction: f64) -> u32 {
    let rows = (fraction * n_params as f64 / batch_width as f64).ceil();
    (rows as u32).max(NUM_HASHES as u32)
}

/// Rows needed to give each of `candidates` parameters `overprovision` cells.
pub fn rows_for_candidates(candidates: u64, batch_width: u32, overprovision: f64) -> u32 {
    rows_for_fraction(candidates, batch_width, overprovision)
}

/// Rounds `rows` up to a whole number of blocks.
pub fn round_to_blocks(rows: u32, block_rows: u32) -> u32 {
    rows.div_ceil(block_rows).max(1) * block_rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub row: u32,
    pub negative: bool,
    pub bias: u32,
}

impl Slot {
    #[inline]
    pub fn sign(&self) -> f32 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }

    /// Flat cell index of batch column `t`.
    #[inline]
    pub fn cell(&self, t: u32, batch_width: u32) -> usize {
        let col = (t as u64 + self.bias as u64) % batch_width as u64;
        self.row as usize * batch_width as usize + col as usize
    }
}

/// The three (row, sign, rotation) slots of one input batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowMapping(pub [Slot; NUM_HASHES]);

/// Deterministic mapping of input batch `i`. Rows are pairwise distinct.
///
/// Each slot comes from one mixed word: bits 32..64 choose the row, bit 0
/// the sign and bits 1..32 the rotation. A row collision re-mixes that slot
/// with the next salt.
pub fn map_row(i: u64, cfg: &SketchConfig) -> RowMapping {
    let (base, span) = match cfg.block_rows {
        Some(block) => {
            let blocks = cfg.rows / block;
            let b = reduce32((hash3(cfg.seed, i, BLOCK_SALT) >> 32) as u32, blocks);
            (b * block, block)
        }
        None => (0, cfg.rows),
    };
    let mut slots = [Slot { row: 0, negative: false, bias: 0 }; NUM_HASHES];
    for j in 0..NUM_HASHES {
        let mut salt = 0u64;
        let slot = loop {
            let w = hash3(cfg.seed, i, ((j as u64) << 32) | salt);
            let mut row = base + reduce32((w >> 32) as u32, span);
            if salt >= MAX_REHASH {
                // Deterministic fallback: probe to the next free row in range.
                while slots[..j].iter().any(|s| s.row == row) {
                    row = base + (row - base + 1) % span;
                }
            }
            if !slots[..j].iter().any(|s| s.row == row) {
                let bias = ((((w as u32) >> 1) as u64 * cfg.batch_width as u64) >> 31) as u32;
                break Slot { row, negative: w & 1 == 1, bias };
            }
            salt += 1;
        };
        slots[j] = slot;
    }
    RowMapping(slots)
}

/// `rows x batch_width` matrix of signed accumulators, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSketch {
    config: SketchConfig,
    cells: Vec<f32>,
}

impl CountSketch {
    pub fn new(config: SketchConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { cells: vec![0.0; config.cells()], config })
    }

    pub fn from_cells(config: SketchConfig, cells: Vec<f32>) -> Result<Self> {
        config.validate()?;
        if cells.len() != config.cells() {
            return Err(Error::Format(format!("expected {} cells, found {}", config.cells(), cells.len())));
        }
        if let Some(pos) = cells.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(pos as u64));
        }
        Ok(Self { config, cells })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn cells(&self) -> &[f32] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<f32> {
        self.cells
    }

    pub fn is_zero(&self) -> bool {
        self.cells.iter().all(|c| *c == 0.0)
    }

    /// Adds batch `i`, skipping zero entries (the zero entries are exactly the
    /// columns a non-zero index leaves unmarked).
    pub fn insert_row(&mut self, i: u64, row: &[f32]) {
        let c = self.config.batch_width;
        debug_assert_eq!(row.len(), c as usize);
        let m = map_row(i, &self.config);
        for slot in &m.0 {
            let start = slot.row as usize * c as usize;
            let dst = &mut self.cells[start..start + c as usize];
            let bias = slot.bias as usize;
            let split = c as usize - bias;
            // Columns t < split land at t + bias, the rest wrap to t - split.
            let (head, tail) = row.split_at(split);
            let (dst_lo, dst_hi) = dst.split_at_mut(bias);
            add_signed(dst_hi, head, slot.negative);
            add_signed(dst_lo, tail, slot.negative);
        }
    }

    /// Adds the columns of batch `i` selected by `mask`; other columns are untouched.
    pub fn insert_row_masked(&mut self, i: u64, row: &[f32], mask: &[bool]) {
        let c = self.config.batch_width;
        assert_eq!(row.len(), c as usize, "row length must equal batch width");
        assert_eq!(mask.len(), c as usize, "mask length must equal batch width");
        let m = map_row(i, &self.config);
        for slot in &m.0 {
            let sign = slot.sign();
            for (t, (&x, &keep)) in row.iter().zip(mask).enumerate() {
                if keep {
                    self.cells[slot.cell(t as u32, c)] += sign * x;
                }
            }
        }
    }

    /// Element-wise sum of two sketches with identical layouts.
    pub fn merge_sum(&self, other: &CountSketch) -> Result<CountSketch> {
        let mut out = self.clone();
        out.merge_into(other)?;
        Ok(out)
    }

    pub fn merge_into(&mut self, other: &CountSketch) -> Result<()> {
        if !self.config.same_layout(&other.config) {
            return Err(Error::Incompatible(format!(
                "sketch layouts differ: {:?} vs {:?}",
                self.config, other.config
            )));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += *b;
        }
        Ok(())
    }

    /// Median of the three signed reads for column `t` of batch `i`.
    pub fn estimate(&self, i: u64, t: u32) -> f32 {
        estimate_from(&self.cells, &map_row(i, &self.config), t, self.config.batch_width)
    }
}

/// Median-of-three estimate against an arbitrary cell buffer with the sketch layout.
pub fn estimate_from(cells: &[f32], mapping: &RowMapping, t: u32, batch_width: u32) -> f32 {
    let mut reads = mapping.0.map(|s| s.sign() * cells[s.cell(t, batch_width)]);
    reads.sort_by(f32::total_cmp);
    reads[1]
}

#[inline]
fn add_signed(dst: &mut [f32], src: &[f32], negative: bool) {
    if negative {
        for (d, s) in dst.iter_mut().zip(src) {
            if *s != 0.0 {
                *d -= *s;
            }
        }
    } else {
        for (d, s) in dst.iter_mut().zip(src) {
            if *s != 0.0 {
                *d += *s;
            }
        }
    }
}
