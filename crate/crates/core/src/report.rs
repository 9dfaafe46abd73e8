//! Deterministic tabular output.
//!
//! Every CLI artifact is written through this module so that repeated runs
//! produce byte-identical files: floats are printed with a fixed
//! round-trip format (`{:.17e}`), column order is the insertion order, and
//! no timestamps or environment data are emitted.

use std::fmt::Write as _;

/// A column-ordered table of f64 rows with string headers.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: Vec<S>) -> Self {
        Table { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    /// Appends a row; the length must match the header count.
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.headers.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// Round-trip-exact CSV (comma separated, header line first).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.headers.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Whitespace-separated columns with a `#`-prefixed header, for direct
    /// use by plotting tools.
    pub fn to_plotdata(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.headers.join(" "));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }
}

/// Fixed float format: 17 significant digits round-trips every f64.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        // Avoid "-0" discrepancies across code paths.
        return "0.00000000000000000e0".to_string();
    }
    format!("{v:.17e}")
}
