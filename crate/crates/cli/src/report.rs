//! Report envelope and atomic output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Result record shared by every subcommand.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub status: &'static str,
    pub tool_version: &'static str,
    pub spec_hash: Option<String>,
    pub seed: Option<u64>,
    /// Tolerances and thresholds behind the numbers in `result`.
    pub tolerances: Value,
    pub result: Value,
}

impl Report {
    pub fn new(command: &'static str, spec_hash: Option<String>, seed: Option<u64>, tolerances: Value, result: Value) -> Self {
        Report { command, status: "ok", tool_version: env!("CARGO_PKG_VERSION"), spec_hash, seed, tolerances, result }
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> std::io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let tmp = temp_path(path);
    let result = (|| {
        let mut file = std::io::BufWriter::new(fs::File::create(&tmp)?);
        fill(&mut file)?;
        file.flush()?;
        file.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Emits a report as pretty JSON to `out`, or to stdout when no path is
/// given.
pub fn emit_json(report: &Report, out: Option<&Path>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serialises");
    match out {
        Some(path) => write_atomic(path, |w| writeln!(w, "{text}")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Writes rows as CSV with a header and `#` comment lines in front.
pub fn write_csv(path: &Path, comments: &[String], header: &[&str], rows: &[Vec<f64>]) -> std::io::Result<()> {
    write_atomic(path, |w| {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    })
}
