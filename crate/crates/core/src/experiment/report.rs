use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{Certificate, RunManifest, SlopeRow};
use super::run::render_summary;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: String,
    pub all_certified: bool,
    pub certificates: Vec<Certificate>,
    pub slopes: Vec<SlopeRow>,
    /// Rendered table, as printed.
    pub summary: String,
}

/// `<run_dir>.report.json`, next to (not inside) the run directory.
pub fn report_path(run_dir: &Path) -> PathBuf {
    let mut name = run_dir
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "run".into());
    name.push(".report.json");
    run_dir.with_file_name(name)
}

/// Summarize a finished run from its manifest alone.
pub fn build_report(run_dir: &Path) -> Result<RunReport> {
    let m = RunManifest::load(run_dir)?;
    Ok(RunReport {
        run: m.config.name.clone(),
        all_certified: m.all_certified(),
        summary: render_summary(&m),
        certificates: m.certificates,
        slopes: m.slopes,
    })
}

/// Build the report and write it as JSON; returns the report and its path.
pub fn write_report(run_dir: &Path) -> Result<(RunReport, PathBuf)> {
    let dir = run_dir.canonicalize()?;
    let r = build_report(&dir)?;
    let path = report_path(&dir);
    let text = serde_json::to_string_pretty(&r).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&path, text)?;
    Ok((r, path))
}
