//! Writing a [`Report`] to disk and rendering its summary.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::format::format_float;
use crate::run::Report;

/// `<stem>_<suffix>.<ext>` next to `out`.
pub fn sibling_path(out: &Path, suffix: &str, extension: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}_{suffix}.{extension}"))
}

/// Metadata and summary scalars as `key = value` lines. `timestamp` is an
/// ISO-8601 string or `None` to omit the line.
pub fn render_summary(config: &RunConfig, report: &Report, timestamp: Option<&str>) -> String {
    let mut out = String::new();
    out.push_str(&format!("# occtime {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("experiment = {}\n", report.experiment));
    if let Some(ts) = timestamp {
        out.push_str(&format!("timestamp = {ts}\n"));
    }
    out.push_str("\n[parameters]\n");
    for (k, v) in &config.resolved {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out.push_str("\n[tolerances]\n");
    let q = &config.quadrature;
    for (k, v) in [("quadrature_abs_tol", q.abs_tol), ("quadrature_rel_tol", q.rel_tol)] {
        out.push_str(&format!("{k} = {}\n", format_float(v, 17)));
    }
    out.push_str(&format!("quadrature_max_evals = {}\n", q.max_evals));
    out.push_str(&format!("support_eps = {}\n", format_float(occtime::linalg::SUPPORT_EPS, 17)));
    out.push_str("\n[summary]\n");
    for (k, v) in &report.summary {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Writes the main CSV to `out`, extra tables and the summary beside it.
/// Returns the paths written, main CSV first.
pub fn write_report(config: &RunConfig, report: &Report, out: &Path, timestamp: Option<&str>) -> Result<Vec<PathBuf>> {
    let mut written = vec![out.to_path_buf()];
    write(out, &report.table.to_csv())?;
    for (suffix, table) in &report.extra_tables {
        let path = sibling_path(out, suffix, "csv");
        write(&path, &table.to_csv())?;
        written.push(path);
    }
    let path = sibling_path(out, "summary", "txt");
    write(&path, &render_summary(config, report, timestamp))?;
    written.push(path);
    Ok(written)
}
