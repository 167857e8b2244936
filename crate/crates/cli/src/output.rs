//! Artifact writers.

use std::fs;
use std::path::Path;

use byitfl::fl::RoundMetrics;
use byitfl::net::Transcript;
use serde_json::Value;

use crate::{CliError, CliResult};

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(io(path))
}

/// `round,aggregator,attack,loss,accuracy,excluded_count`.
pub fn write_metrics(path: &Path, rows: &[RoundMetrics]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "round",
        "aggregator",
        "attack",
        "loss",
        "accuracy",
        "excluded_count",
    ])?;
    for r in rows {
        w.write_record([
            r.round.to_string(),
            r.aggregator.clone(),
            r.attack.clone(),
            format!("{:.6}", r.loss),
            format!("{:.6}", r.accuracy),
            r.excluded_count.to_string(),
        ])?;
    }
    w.flush().map_err(io(path))
}

/// `<stem>.bin` plus `<stem>.json` holding the record index and `meta`.
pub fn write_transcript(dir: &Path, stem: &str, tr: &Transcript, meta: Value) -> CliResult<()> {
    let bin = dir.join(format!("{stem}.bin"));
    fs::write(&bin, tr.to_bytes()).map_err(io(&bin))?;
    let mut index = tr.index_json();
    index["meta"] = meta;
    write_json(&dir.join(format!("{stem}.json")), &index)
}
