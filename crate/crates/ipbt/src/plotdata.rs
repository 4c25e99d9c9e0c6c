//! Plot-ready series from a history file.
//!
//! `best_curve.csv` has one row per outer step with the step's best score,
//! the running best and a restart marker. `hp_schedule.csv` follows the
//! best record back through the members it copied from, giving the
//! hyperparameters that produced it step by step.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::checkpoint::write_atomic;
use crate::history_file::{self, HistoryLine};
use crate::runner::HISTORY_FILE;
use crate::Result;

pub const BEST_CURVE_FILE: &str = "best_curve.csv";
pub const HP_SCHEDULE_FILE: &str = "hp_schedule.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    pub iteration: u32,
    pub inner_steps: u64,
    pub step_size: u64,
    pub best_score: f64,
    pub best_so_far: f64,
    pub restart: bool,
}

pub fn best_curve(lines: &[HistoryLine]) -> Vec<CurvePoint> {
    let mut out: Vec<CurvePoint> = Vec::new();
    let mut best_so_far = f64::NEG_INFINITY;
    for l in lines {
        best_so_far = best_so_far.max(l.score);
        match out.last_mut() {
            Some(p) if p.step == l.step => {
                p.best_score = p.best_score.max(l.score);
                p.best_so_far = best_so_far;
                p.restart |= l.restart;
                p.inner_steps = p.inner_steps.max(l.inner_steps);
            }
            _ => out.push(CurvePoint {
                step: l.step,
                iteration: l.iteration,
                inner_steps: l.inner_steps,
                step_size: l.step_size,
                best_score: l.score,
                best_so_far,
                restart: l.restart,
            }),
        }
    }
    out
}

/// The best record (earliest on ties) and its ancestors, oldest first.
pub fn best_lineage(lines: &[HistoryLine]) -> Vec<&HistoryLine> {
    let Some(mut i) = (0..lines.len()).reduce(|b, i| if lines[i].score > lines[b].score { i } else { b }) else {
        return Vec::new();
    };
    let mut out = vec![&lines[i]];
    loop {
        let cur = &lines[i];
        let source = cur.parent.unwrap_or(cur.member_id);
        match (0..i)
            .rev()
            .find(|&j| lines[j].step < cur.step && lines[j].member_id == source && lines[j].iteration == cur.iteration)
        {
            Some(j) => {
                out.push(&lines[j]);
                i = j;
            }
            None => break,
        }
    }
    out.reverse();
    out
}

/// Writes both files into `out_dir` and returns their paths.
pub fn export(history: &Path, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let history = if history.is_dir() { history.join(HISTORY_FILE) } else { history.to_path_buf() };
    let lines = history_file::read(&history)?;
    std::fs::create_dir_all(out_dir).map_err(|e| crate::CliError::io(out_dir, e))?;

    let mut curve = String::from("step,iteration,inner_steps,step_size,best_score,best_so_far,restart\n");
    for p in best_curve(&lines) {
        let _ = writeln!(
            curve,
            "{},{},{},{},{},{},{}",
            p.step,
            p.iteration,
            p.inner_steps,
            p.step_size,
            p.best_score,
            p.best_so_far,
            u8::from(p.restart)
        );
    }
    let lineage = best_lineage(&lines);
    let names: Vec<&String> = lineage.first().map(|l| l.hps.keys().collect()).unwrap_or_default();
    let mut sched = String::from("step,iteration,iter_step,inner_steps,step_size,member_id,score");
    for n in &names {
        let _ = write!(sched, ",{n}");
    }
    sched.push('\n');
    for l in lineage {
        let _ = write!(
            sched,
            "{},{},{},{},{},{},{}",
            l.step, l.iteration, l.iter_step, l.inner_steps, l.step_size, l.member_id, l.score
        );
        for n in &names {
            let _ = write!(sched, ",{}", l.hp(n).unwrap_or(f64::NAN));
        }
        sched.push('\n');
    }
    let a = out_dir.join(BEST_CURVE_FILE);
    let b = out_dir.join(HP_SCHEDULE_FILE);
    write_atomic(&a, curve.as_bytes())?;
    write_atomic(&b, sched.as_bytes())?;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Map;

    fn line(step: u64, member: u64, parent: Option<u64>, score: f64, restart: bool) -> HistoryLine {
        let mut hps = Map::new();
        hps.insert("lr".into(), (member as f64).into());
        HistoryLine {
            step,
            iteration: 0,
            iter_step: step as u32,
            inner_steps: step * 10,
            step_size: 10,
            member_id: member,
            lineage_root: member,
            parent,
            hps,
            score,
            score_delta: 0.0,
            restart,
        }
    }

    #[test]
    fn curve_and_lineage() {
        let lines = vec![
            line(1, 0, None, 0.1, false),
            line(1, 1, None, 0.3, false),
            line(2, 0, Some(1), 0.5, false),
            line(2, 1, None, 0.4, false),
            line(3, 0, None, 0.2, true),
            line(3, 1, Some(0), 0.9, true),
        ];
        let c = best_curve(&lines);
        assert_eq!(c.iter().map(|p| p.best_score).collect::<Vec<_>>(), vec![0.3, 0.5, 0.9]);
        assert_eq!(c.iter().filter(|p| p.restart).count(), 1);
        let lin: Vec<(u64, u64)> = best_lineage(&lines).iter().map(|l| (l.step, l.member_id)).collect();
        assert_eq!(lin, vec![(1, 1), (2, 0), (3, 1)]);
    }
}
