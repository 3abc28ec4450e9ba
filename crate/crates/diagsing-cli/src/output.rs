//! CSV tables with fixed headers. Floats are written in Rust's shortest
//! round-trip form, so identical inputs give byte-identical files.

use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const EVOLVE_HEADER: [&str; 7] = ["t", "observable", "re_mean", "im_mean", "trace", "energy", "offdiag_mag"];
pub const VERIFY_HEADER: [&str; 4] = ["check_name", "residual", "tolerance", "pass"];
pub const FINAL_HEADER: [&str; 4] = ["omega", "weight", "density_initial", "density_final"];
pub const IRREVERSIBILITY_HEADER: [&str; 2] = ["metric", "value"];
pub const REAL_SPECTRAL_HEADER: [&str; 8] =
    ["check_name", "omega", "omega_prime", "re_value", "im_value", "re_expected", "im_expected", "residual"];
pub const COMPLEX_SPECTRAL_HEADER: [&str; 14] = [
    "t",
    "observable",
    "re_invariant",
    "im_invariant",
    "re_gamov",
    "im_gamov",
    "re_mixed_left",
    "im_mixed_left",
    "re_mixed_right",
    "im_mixed_right",
    "re_background",
    "im_background",
    "re_total",
    "im_total",
];

/// A header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path, file: &str) -> Result<PathBuf, CliError> {
        let path = dir.join(file);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Plain notation in [1e-4, 1e15), exponent notation elsewhere.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
