//! Bandwidth sweeps over the sub-packetization level and CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::codec::{GeneralizedCode, VerifyLevel};
use crate::error::{Error, Result};
use crate::layout::CodeParams;
use crate::repair::{average_repair_bandwidth, lower_bound, upper_bound, Rational};

pub const CSV_HEADER: &str = "alpha,avg_gamma,lower_bound,upper_bound,reduction_vs_rs_pct,avg_gamma_rat";

/// Repair bandwidth of an `(n, k)` Reed-Solomon code in node units: the
/// whole file, `k` nodes' worth.
pub fn rs_baseline(n: usize, k: usize) -> Rational {
    debug_assert!(k < n);
    Rational::from_integer(k as u64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub alpha: usize,
    pub avg_gamma: Rational,
    pub lower_bound: Rational,
    pub upper_bound: Rational,
    /// `(rs - avg_gamma) / rs` as a fraction, not a percentage.
    pub reduction_vs_rs: Rational,
}

impl SweepRow {
    pub fn reduction_pct(&self) -> Rational {
        self.reduction_vs_rs * Rational::from_integer(100)
    }

    /// Whether the row is inside the bandwidth bounds. The `alpha = 1` row is
    /// the RS baseline, which the bounds do not describe.
    pub fn within_bounds(&self) -> bool {
        self.lower_bound <= self.avg_gamma && self.avg_gamma <= self.upper_bound
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}/{}",
            self.alpha,
            decimal(self.avg_gamma),
            decimal(self.lower_bound),
            decimal(self.upper_bound),
            decimal(self.reduction_pct()),
            self.avg_gamma.numer(),
            self.avg_gamma.denom()
        )
    }
}

/// A sweep entry that could not be produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepFailure {
    pub alpha: usize,
    pub error: Error,
}

/// Builds, verifies and measures one code per `alpha`. Failures are reported
/// per entry; the sweep always covers every requested value, in ascending
/// order.
pub fn sweep_alpha(
    n: usize,
    k: usize,
    alphas: &[usize],
    w: u8,
    seed: u64,
    level: VerifyLevel,
) -> Vec<std::result::Result<SweepRow, SweepFailure>> {
    let mut alphas = alphas.to_vec();
    alphas.sort_unstable();
    alphas.dedup();
    alphas
        .into_iter()
        .map(|alpha| sweep_one(n, k, alpha, w, seed, level).map_err(|error| SweepFailure { alpha, error }))
        .collect()
}

fn sweep_one(n: usize, k: usize, alpha: usize, w: u8, seed: u64, level: VerifyLevel) -> Result<SweepRow> {
    let params = CodeParams::new(n, k, alpha, w, seed)?;
    let rs = rs_baseline(n, k);
    let avg_gamma = if alpha == 1 {
        rs
    } else {
        let (code, _) = GeneralizedCode::construct(&params, level)?;
        average_repair_bandwidth(code.layout())?
    };
    Ok(SweepRow {
        alpha,
        avg_gamma,
        lower_bound: lower_bound(&params),
        upper_bound: upper_bound(&params),
        reduction_vs_rs: (rs - avg_gamma) / rs,
    })
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    out.flush()
}

pub fn emit_csv(rows: &[SweepRow], destination: &Path) -> Result<()> {
    let file = File::create(destination).map_err(|e| Error::io(destination, e))?;
    write_csv(rows, BufWriter::new(file)).map_err(|e| Error::io(destination, e))
}

/// Six significant digits, trailing zeros dropped.
pub fn decimal(x: Rational) -> String {
    let v = *x.numer() as f64 / *x.denom() as f64;
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let places = (5 - magnitude).max(0) as usize;
    let s = format!("{v:.places$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
