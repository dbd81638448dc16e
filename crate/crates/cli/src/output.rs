//! Writing results to an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::recipes::{ExperimentResult, RunError};

/// Paths of the files produced by [`write_outputs`].
#[derive(Clone, Debug)]
pub struct OutputFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub timing: PathBuf,
}

fn io_other(e: impl std::fmt::Display) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

/// Write `<recipe>.csv`, the summary JSON (without timing) and `timing.json`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<OutputFiles, RunError> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(result.config.output.csv_name(&result.recipe));
    let mut w = csv::Writer::from_path(&csv).map_err(io_other)?;
    w.write_record(&result.columns).map_err(io_other)?;
    for row in &result.rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io_other)?;
    }
    w.flush()?;

    let summary = dir.join(result.config.output.summary_name());
    let mut stable = result.clone();
    stable.timing = None;
    let mut text = serde_json::to_string_pretty(&stable).map_err(io_other)?;
    text.push('\n');
    fs::write(&summary, text)?;

    let timing = dir.join("timing.json");
    let t = serde_json::to_string_pretty(&result.timing).map_err(io_other)?;
    fs::write(&timing, t + "\n")?;
    Ok(OutputFiles { csv, summary, timing })
}
