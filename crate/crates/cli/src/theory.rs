//! Achievable size against the lower bound over a grid of bit widths and zero ratios.

use std::io::{self, Write};

use lhc_core::theory::{theory_row, TheoryRow};

use crate::CliError;

pub const THEORY_SCHEMA: &str = "homagg-theory/1";

pub fn theory_grid(nonzeros: f64, bit_widths: &[u32], lambdas: &[f64], gamma: f64) -> Result<Vec<TheoryRow>, CliError> {
    let mut rows = Vec::with_capacity(bit_widths.len() * lambdas.len());
    for &c in bit_widths {
        for &l in lambdas {
            rows.push(theory_row(nonzeros, c, l, gamma)?);
        }
    }
    Ok(rows)
}

pub fn write_csv(w: &mut dyn Write, nonzeros: f64, gamma: f64, rows: &[TheoryRow]) -> io::Result<()> {
    writeln!(w, "# {THEORY_SCHEMA} nonzeros={nonzeros} gamma={gamma}")?;
    writeln!(w, "bit_width,lambda,epsilon,index_bits,sketch_bits,s_min,ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.9e},{:.3},{:.3},{:.3},{:.6}",
            r.bit_width,
            r.lambda,
            r.epsilon,
            r.index_bits,
            r.sketch_bits,
            r.s_min,
            r.ratio()
        )?;
    }
    Ok(())
}
