//! Thread pool for member training.

use std::panic::{self, AssertUnwindSafe};

use ipbt_core::engine::{run_job, TrainJob, TrainPool};
use ipbt_core::trainable::{Trainable, SENTINEL_SCORE};
use ipbt_core::WeightState;
use rayon::prelude::*;

use crate::{CliError, Result};

/// Trains jobs on a rayon pool. A job that panics keeps its input weights
/// and scores the sentinel, so selection drops it like a diverged member.
pub struct RayonPool {
    pool: rayon::ThreadPool,
}

impl RayonPool {
    /// `threads == 0` picks the number of cores.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))?;
        Ok(RayonPool { pool })
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

pub fn guarded_job(trainable: &dyn Trainable, job: &TrainJob<'_>) -> (WeightState, f64) {
    panic::catch_unwind(AssertUnwindSafe(|| run_job(trainable, job))).unwrap_or_else(|_| (job.weights.clone(), SENTINEL_SCORE))
}

impl TrainPool for RayonPool {
    fn train_all(&self, trainable: &dyn Trainable, jobs: &[TrainJob<'_>]) -> Vec<(WeightState, f64)> {
        self.pool
            .install(|| jobs.par_iter().map(|j| guarded_job(trainable, j)).collect())
    }
}
