//! `history.jsonl`: one JSON object per member per outer step.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ipbt_core::history::StepRecord;
use ipbt_core::hpspace::HyperparameterSpace;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryLine {
    /// Outer step (job completion index for ASHA).
    pub step: u64,
    pub iteration: u32,
    pub iter_step: u32,
    pub inner_steps: u64,
    pub step_size: u64,
    pub member_id: u64,
    pub lineage_root: u64,
    /// Member whose weights this slot copied before the step.
    pub parent: Option<u64>,
    /// Hyperparameters by name, in search-space order.
    pub hps: Map<String, Value>,
    pub score: f64,
    pub score_delta: f64,
    pub restart: bool,
}

impl HistoryLine {
    pub fn from_record(r: &StepRecord, space: &HyperparameterSpace) -> Self {
        let hps = space
            .dims()
            .iter()
            .zip(r.hps.values())
            .map(|(d, v)| (d.name.clone(), Value::from(*v)))
            .collect();
        HistoryLine {
            step: r.outer_step,
            iteration: r.iteration,
            iter_step: r.iter_step,
            inner_steps: r.inner_steps,
            step_size: r.step_size,
            member_id: r.member_id,
            lineage_root: r.lineage_root,
            parent: r.parent,
            hps,
            score: r.score,
            score_delta: r.score_delta,
            restart: r.restart,
        }
    }

    pub fn hp(&self, name: &str) -> Option<f64> {
        self.hps.get(name).and_then(Value::as_f64)
    }
}

/// Appends records to a history file.
pub struct HistoryWriter {
    out: BufWriter<File>,
}

impl HistoryWriter {
    /// Starts a new file, replacing any previous one.
    pub fn create(path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| CliError::io(path, e))?;
        Ok(HistoryWriter { out: BufWriter::new(f) })
    }

    pub fn append_to(path: &Path) -> Result<Self> {
        let f = OpenOptions::new()
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| CliError::io(path, e))?;
        Ok(HistoryWriter { out: BufWriter::new(f) })
    }

    pub fn write(&mut self, records: &[StepRecord], space: &HyperparameterSpace) -> Result<()> {
        for r in records {
            let line = serde_json::to_string(&HistoryLine::from_record(r, space))
                .map_err(|e| CliError::Runtime(format!("cannot serialize history: {e}")))?;
            writeln!(self.out, "{line}").map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        self.out.flush().map_err(|e| CliError::Runtime(e.to_string()))
    }
}

pub fn read(path: &Path) -> Result<Vec<HistoryLine>> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| CliError::Runtime(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
