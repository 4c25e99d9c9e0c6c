//! Run logs shared by every optimizer.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hpspace::HpVector;
use crate::stagnation::RestartReason;
use crate::trainable::WeightState;

/// One member's result for one outer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based outer step (or job completion index for ASHA).
    pub outer_step: u64,
    pub iteration: u32,
    /// Outer steps since the iteration began, 1-based; the GP time index.
    pub iter_step: u32,
    /// Inner steps consumed once this outer step finished.
    pub inner_steps: u64,
    pub step_size: u64,
    pub member_id: u64,
    pub lineage_root: u64,
    /// Set when the slot copied another member's weights just before this
    /// step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<u64>,
    pub hps: HpVector,
    pub score: f64,
    /// Score minus the previous score of the same slot.
    pub score_delta: f64,
    /// Set on every record of an outer step that triggered a restart.
    pub restart: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterStepSummary {
    pub outer_step: u64,
    pub iteration: u32,
    pub step_size: u64,
    pub inner_steps: u64,
    pub best_score: f64,
    pub best_so_far: f64,
    pub restart: Option<RestartReason>,
}

/// The selected model of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestModel {
    pub score: f64,
    pub outer_step: u64,
    pub member_id: u64,
    pub hps: HpVector,
    /// Stored separately in checkpoints.
    #[serde(skip)]
    pub weights: WeightState,
}

/// Append-only log of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub optimizer: String,
    pub records: Vec<StepRecord>,
    pub steps: Vec<OuterStepSummary>,
    pub best: Option<BestModel>,
    pub inner_steps: u64,
}

impl RunHistory {
    pub fn new(optimizer: &str) -> Self {
        RunHistory {
            optimizer: optimizer.into(),
            ..Default::default()
        }
    }

    pub fn restart_count(&self) -> usize {
        self.steps.iter().filter(|s| s.restart.is_some()).count()
    }

    /// Step size of each iteration, in order.
    pub fn step_size_schedule(&self) -> Vec<u64> {
        let mut out: Vec<u64> = Vec::new();
        let mut last_iter = None;
        for s in &self.steps {
            if last_iter != Some(s.iteration) {
                out.push(s.step_size);
                last_iter = Some(s.iteration);
            }
        }
        out
    }

    pub fn best_score(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.score)
    }

    /// Records of one iteration.
    pub fn iteration_records(&self, iteration: u32) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(move |r| r.iteration == iteration)
    }
}

/// Maximum score reached by the descendants of each iteration-initial member.
pub fn lineage_best_scores(history: &RunHistory, iteration: u32) -> BTreeMap<u64, f64> {
    let mut out: BTreeMap<u64, f64> = BTreeMap::new();
    for r in history.iteration_records(iteration) {
        out.entry(r.lineage_root)
            .and_modify(|v| *v = v.max(r.score))
            .or_insert(r.score);
    }
    out
}
