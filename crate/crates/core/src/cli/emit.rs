use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::config::{Format, RunConfig};
use super::report::{LevelRow, ScenarioReport};
use crate::rigidity::Verdict;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// 17 significant digits, round-trip exact.
pub fn format_value(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn render_csv(report: &ScenarioReport) -> Result<String, EmitError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(LevelRow::HEADER)?;
    for row in &report.rows {
        w.write_record(row.values().iter().map(|&v| format_value(v)))?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a RunConfig,
    constants: &'a BTreeMap<String, f64>,
    failed_hypothesis: &'a Option<String>,
    model: &'a str,
    p: f64,
    summary: &'a str,
    verdicts: &'a BTreeMap<String, Verdict>,
}

// serde_json::Value keeps object keys in a BTreeMap, so keys come out sorted at every depth.
fn sorted<T: Serialize>(value: &T) -> Result<String, EmitError> {
    Ok(serde_json::to_string_pretty(&serde_json::to_value(value)?)? + "\n")
}

/// Verdicts, constants and the config echo, without the per-level rows.
pub fn render_sidecar(report: &ScenarioReport) -> Result<String, EmitError> {
    let sidecar = Sidecar {
        config: &report.config,
        constants: &report.constants,
        failed_hypothesis: &report.failed_hypothesis,
        model: &report.model,
        p: report.p,
        summary: &report.summary,
        verdicts: &report.verdicts,
    };
    sorted(&sidecar)
}

pub fn render_json(report: &ScenarioReport) -> Result<String, EmitError> {
    sorted(report)
}

fn write(path: &Path, text: &str) -> Result<(), EmitError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| EmitError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| EmitError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the report. CSV output gets a `.json` sidecar next to it; JSON
/// output is a single file. Returns the paths written.
pub fn emit(report: &ScenarioReport, format: Format, path: &Path) -> Result<Vec<PathBuf>, EmitError> {
    match format {
        Format::Csv => {
            let sidecar = path.with_extension("json");
            write(path, &render_csv(report)?)?;
            write(&sidecar, &render_sidecar(report)?)?;
            Ok(vec![path.to_path_buf(), sidecar])
        }
        Format::Json => {
            write(path, &render_json(report)?)?;
            Ok(vec![path.to_path_buf()])
        }
    }
}
