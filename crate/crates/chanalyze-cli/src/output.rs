//! Output routing and formatting.
//!
//! Every command produces either a CSV table (always with a header row) or a
//! JSON report carrying `spec_version`, a model echo, and the tolerances
//! that were in force. `--out file.csv` / `--out file.json` selects the
//! format by extension; without `--out` the command's native format goes to
//! stdout. Numbers are written with Rust's shortest round-trip `Display`,
//! so byte-identical reruns mean bit-identical numerics.

use std::io::Write;
use std::path::Path;

use chanalyze::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Pick the output format from the `--out` extension, falling back to the
/// command's native default when writing to stdout.
pub fn format_for(out: Option<&Path>, default: Format) -> Result<Format> {
    match out {
        None => Ok(default),
        Some(p) => match p.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            _ => Err(Error::InvalidInput(format!(
                "--out {}: the extension must be .csv or .json",
                p.display()
            ))),
        },
    }
}

/// Write `content` to the file behind `--out`, or to stdout without it.
pub fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| Error::InvalidInput(format!("cannot write to stdout: {e}")))
        }
        Some(p) => std::fs::write(p, content)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", p.display()))),
    }
}

/// Render a CSV table with a mandatory header row.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("csv header");
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "ragged csv row");
        w.write_record(row).expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf-8")
}

/// Pretty JSON plus a trailing newline (reports are line-terminated).
pub fn json_text(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Shortest round-trip decimal form of a float.
pub fn fnum(v: f64) -> String {
    format!("{v}")
}

/// Like [`fnum`], but non-finite values become an empty CSV cell (used for
/// columns that are only defined when an optional stage ran).
pub fn fnum_or_empty(v: f64) -> String {
    if v.is_finite() {
        fnum(v)
    } else {
        String::new()
    }
}

/// `[re, im]` pairs for eigenvalue lists in JSON reports.
pub fn complex_pairs(zs: &[num_complex::Complex64]) -> Vec<[f64; 2]> {
    zs.iter().map(|z| [z.re, z.im]).collect()
}
