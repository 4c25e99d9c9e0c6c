//! Data-driven restart criteria over the best-score trajectory.
//!
//! Two checks run on the z-scored, GP-smoothed trajectory of the population's
//! best score per outer step:
//!
//! 1. the smoothed value has not increased for `t_patience` consecutive steps;
//! 2. it has gained less than one standard deviation over the last
//!    `t_interval` steps.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::gp::smooth_trajectory;
use crate::{Error, Result};

/// Whether standardization sees only the current iteration or the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryScope {
    #[default]
    Iteration,
    Run,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StagnationConfig {
    pub t_patience: usize,
    pub t_interval: usize,
    /// Minimum outer steps in an iteration before a restart may fire; the
    /// effective value is never below `t_patience + 1`.
    pub min_steps: usize,
    pub scope: TrajectoryScope,
}

impl Default for StagnationConfig {
    fn default() -> Self {
        StagnationConfig {
            t_patience: 3,
            t_interval: 15,
            min_steps: 4,
            scope: TrajectoryScope::Iteration,
        }
    }
}

impl StagnationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_patience < 1 {
            return Err(Error::Config("stagnation.t_patience must be >= 1".into()));
        }
        if self.t_interval < 2 {
            return Err(Error::Config("stagnation.t_interval must be >= 2".into()));
        }
        Ok(())
    }

    pub fn effective_min_steps(&self) -> usize {
        self.min_steps.max(4).max(self.t_patience + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartReason {
    /// Criterion 1: no smoothed improvement for `t_patience` steps.
    NoImprovement,
    /// Criterion 2: less than one standard deviation gained over `t_interval` steps.
    SlowImprovement,
    /// The iteration used up its fixed inner-step allowance.
    Forced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Continue,
    Restart(RestartReason),
}

/// Best score per outer step, plus the criterion-1 streak.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub best_scores: Vec<f64>,
    pub no_improve_streak: usize,
    /// Steps recorded since the last restart (equals `best_scores.len()` in
    /// iteration scope).
    pub steps_in_iteration: usize,
}

impl TrajectoryState {
    pub fn push(&mut self, best: f64) {
        self.best_scores.push(best);
        self.steps_in_iteration += 1;
    }

    /// Called on restart.
    pub fn reset(&mut self, scope: TrajectoryScope) {
        if scope == TrajectoryScope::Iteration {
            self.best_scores.clear();
        }
        self.no_improve_streak = 0;
        self.steps_in_iteration = 0;
    }
}

/// Evaluates both criteria after the newest best score was pushed.
pub fn check_restart(state: &mut TrajectoryState, cfg: &StagnationConfig) -> Decision {
    let n = state.best_scores.len();
    if n < 2 {
        return Decision::Continue;
    }
    let smoothed = match smooth_trajectory(&state.best_scores) {
        Ok(s) => s,
        Err(_) => return Decision::Continue,
    };
    let last = n - 1;
    if smoothed[last] <= smoothed[last - 1] {
        state.no_improve_streak += 1;
    } else {
        state.no_improve_streak = 0;
    }
    if state.steps_in_iteration < cfg.effective_min_steps() {
        return Decision::Continue;
    }
    if state.no_improve_streak >= cfg.t_patience {
        return Decision::Restart(RestartReason::NoImprovement);
    }
    if state.steps_in_iteration > cfg.t_interval
        && smoothed[last] - smoothed[last - cfg.t_interval] < 1.0
    {
        return Decision::Restart(RestartReason::SlowImprovement);
    }
    Decision::Continue
}

/// Replays a whole trajectory and returns the first step index (0-based) at
/// which a restart fires.
pub fn first_restart(scores: &[f64], cfg: &StagnationConfig) -> Option<(usize, RestartReason)> {
    let mut state = TrajectoryState::default();
    for (i, &s) in scores.iter().enumerate() {
        state.push(s);
        if let Decision::Restart(r) = check_restart(&mut state, cfg) {
            return Some((i, r));
        }
    }
    None
}
