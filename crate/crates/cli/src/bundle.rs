//! Output bundles: every command writes its artifacts through this module.
//!
//! A bundle collects metadata lines, a human-readable report, named data
//! tables, and analysis failures. `write` materializes the bundle under the
//! output directory — one file per table, `report.txt`, and `manifest.txt`
//! listing every emitted file — and then verifies the manifest invariant:
//! each listed file exists on disk. Floats go through the fixed round-trip
//! format, so repeated runs with the same configuration and seed produce
//! byte-identical files except for the timestamp header line.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use lorentzkit::report::format_float;

use crate::CliError;

/// Output format for data tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutFormat {
    /// Comma-separated values with `#` metadata lines before the header.
    Csv,
    /// Whitespace-separated columns with `#`-prefixed metadata and header,
    /// for direct consumption by plotting tools.
    Plotdata,
}

impl OutFormat {
    fn extension(self) -> &'static str {
        match self {
            OutFormat::Csv => "csv",
            OutFormat::Plotdata => "dat",
        }
    }
}

/// One table cell: a float (fixed format), an integer, or a label.
#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format_float(*v),
            Cell::I(v) => v.to_string(),
            // Labels must not break the column structure.
            Cell::S(v) => v.replace([',', '\n'], " "),
        }
    }
}

/// Float cell.
pub fn f(v: f64) -> Cell {
    Cell::F(v)
}

/// Optional float cell; absent values render as NaN.
pub fn fo(v: Option<f64>) -> Cell {
    Cell::F(v.unwrap_or(f64::NAN))
}

/// Integer cell.
pub fn i(v: usize) -> Cell {
    Cell::I(v as i64)
}

/// Label cell.
pub fn s(v: impl Into<String>) -> Cell {
    Cell::S(v.into())
}

/// A named table with string headers (units or defining symbols included
/// in the header text) and mixed rows.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, headers: &[&str]) -> Self {
        Table { name, headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.headers.len(), "row width mismatch in table {}", self.name);
        self.rows.push(row);
    }
}

/// Collected output of one command run.
pub struct Bundle {
    command: &'static str,
    out: PathBuf,
    format: OutFormat,
    meta: Vec<(String, String)>,
    lines: Vec<String>,
    tables: Vec<Table>,
    failures: Vec<String>,
}

impl Bundle {
    pub fn new(command: &'static str, out: &std::path::Path, format: OutFormat, seed: u64) -> Self {
        let mut b = Bundle {
            command,
            out: out.to_path_buf(),
            format,
            meta: Vec::new(),
            lines: Vec::new(),
            tables: Vec::new(),
            failures: Vec::new(),
        };
        b.meta("seed", seed.to_string());
        b
    }

    /// Adds a metadata line carried in every emitted file header.
    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.meta.push((key.to_string(), value.into()));
    }

    /// Adds a line to the human-readable report (and to stdout).
    pub fn line(&mut self, text: impl Into<String>) {
        self.lines.push(text.into());
    }

    /// Records an analysis failure; the run still writes its files but the
    /// process exits nonzero.
    pub fn fail(&mut self, text: impl Into<String>) {
        self.failures.push(text.into());
    }

    pub fn push_table(&mut self, table: Table) {
        self.tables.push(table);
    }

    fn header(&self, stem: &str, timestamp: u64) -> String {
        let mut h = String::new();
        let _ = writeln!(h, "# lorentzkit {} report: {}", self.command, stem);
        let _ = writeln!(h, "# timestamp: {timestamp}");
        for (k, v) in &self.meta {
            let _ = writeln!(h, "# {k}: {v}");
        }
        h
    }

    fn render_table(&self, t: &Table, timestamp: u64) -> String {
        let mut out = self.header(t.name, timestamp);
        let (head_prefix, sep) = match self.format {
            OutFormat::Csv => ("", ","),
            OutFormat::Plotdata => ("# ", " "),
        };
        let _ = writeln!(out, "{head_prefix}{}", t.headers.join(sep));
        for row in &t.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(sep));
        }
        out
    }

    /// Writes every file, prints the report to stdout, checks the manifest
    /// invariant, and turns recorded failures into an analysis error.
    pub fn write(self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", self.out.display())))?;
        let timestamp =
            SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let io_err = |name: &str, e: std::io::Error| {
            CliError::Analysis(format!("cannot write {name}: {e}"))
        };

        let mut names: Vec<String> = Vec::new();
        for t in &self.tables {
            let name = format!("{}.{}", t.name, self.format.extension());
            fs::write(self.out.join(&name), self.render_table(t, timestamp))
                .map_err(|e| io_err(&name, e))?;
            names.push(name);
        }

        let mut report = self.header("summary", timestamp);
        report.push('\n');
        for l in &self.lines {
            report.push_str(l);
            report.push('\n');
        }
        if self.failures.is_empty() {
            report.push_str("\nstatus: ok\n");
        } else {
            report.push_str("\nANALYSIS FAILURES:\n");
            for f in &self.failures {
                let _ = writeln!(report, "  - {f}");
            }
            report.push_str("status: failed\n");
        }
        fs::write(self.out.join("report.txt"), &report).map_err(|e| io_err("report.txt", e))?;
        names.push("report.txt".to_string());

        let mut manifest = String::new();
        for n in &names {
            manifest.push_str(n);
            manifest.push('\n');
        }
        fs::write(self.out.join("manifest.txt"), &manifest)
            .map_err(|e| io_err("manifest.txt", e))?;

        // Manifest invariant: every claimed output file exists.
        for n in &names {
            let path = self.out.join(n);
            if !path.is_file() {
                return Err(CliError::Analysis(format!(
                    "manifest lists {n} but {} is missing",
                    path.display()
                )));
            }
        }

        for l in &self.lines {
            println!("{l}");
        }
        println!("wrote {} files to {}", names.len() + 1, self.out.display());
        if self.failures.is_empty() {
            Ok(())
        } else {
            Err(CliError::Analysis(self.failures.join("; ")))
        }
    }
}
