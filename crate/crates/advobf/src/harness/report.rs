//! Report files: attack JSONL and evaluation reports.
//!
//! Every report begins with the fully-resolved configuration (first JSONL
//! line, or the `config` field of a JSON report) plus the tool version and
//! a sha256 over the canonical config text. Wall-clock time is printed to
//! the console, never serialized, so identical seeds produce byte-identical
//! report files.

use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::attack::AttackResult;

use super::sweep::EvalReport;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed report ({context}): {message}")]
    Format { context: String, message: String },
}

/// First line of every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub tool_version: String,
    pub config_sha256: String,
    pub config: serde_json::Value,
}

impl ReportHeader {
    pub fn new(config: serde_json::Value) -> Self {
        let canonical = serde_json::to_string(&config).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        ReportHeader {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: hex,
            config,
        }
    }
}

/// Write an attack report: header line, then one record per program.
pub fn write_attack_report(
    path: &Path,
    header: &ReportHeader,
    results: &[AttackResult],
) -> Result<(), ReportError> {
    let mut buf = Vec::new();
    serde_json::to_writer(&mut buf, header).expect("header serializes");
    buf.push(b'\n');
    for r in results {
        serde_json::to_writer(&mut buf, r).expect("result serializes");
        buf.push(b'\n');
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_attack_report(
    path: &Path,
) -> Result<(ReportHeader, Vec<AttackResult>), ReportError> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| ReportError::Format {
            context: "header".into(),
            message: "empty report".into(),
        })??;
    let header: ReportHeader =
        serde_json::from_str(&first).map_err(|e| ReportError::Format {
            context: "header".into(),
            message: e.to_string(),
        })?;
    let mut results = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: AttackResult = serde_json::from_str(&line).map_err(|e| ReportError::Format {
            context: format!("record {}", i + 1),
            message: e.to_string(),
        })?;
        results.push(r);
    }
    Ok((header, results))
}

/// Write an evaluation report as JSON plus an aligned text table beside it
/// (`<path>.txt`).
pub fn write_eval_report(path: &Path, report: &EvalReport) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    fs::write(path, text)?;
    let table_path = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.txt", ext.to_string_lossy()),
        None => "txt".to_string(),
    });
    fs::write(table_path, report.text_table())?;
    Ok(())
}

pub fn read_eval_report(path: &Path) -> Result<EvalReport, ReportError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| ReportError::Format {
        context: "eval report".into(),
        message: e.to_string(),
    })
}
