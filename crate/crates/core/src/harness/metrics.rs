//! Error statistics over trial logs and across trials.

use rayon::prelude::*;

use crate::observation::angle_diff_90;

use super::config::{ControllerKind, TrialConfig};
use super::trial::{landing_offset, run_trial, TrialLog};
use super::HarnessError;

/// Mean, population standard deviation and RMSE of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub rmse: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let ms = values.iter().map(|v| v * v).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt(), rmse: ms.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    pub controller: ControllerKind,
    pub seed: u64,
    /// Mean of `e_x`, `e_y`, `e_theta`.
    pub avg: [f64; 3],
    pub std: [f64; 3],
    pub rmse: [f64; 3],
    /// Absolute world-frame offset from the pad center at the end (m).
    pub land_offset: [f64; 2],
    /// Absolute heading difference to the pad, modulo 90 (deg).
    pub land_angle_deg: f64,
    /// `None` when the trial timed out.
    pub touchdown_s: Option<f64>,
    pub samples: usize,
}

impl ErrorSummary {
    pub fn success(&self) -> bool {
        self.touchdown_s.is_some()
    }

    pub fn planar_offset(&self) -> f64 {
        self.land_offset[0].hypot(self.land_offset[1])
    }
}

/// Error statistics of one trial over every step with a track, up to and
/// including touchdown.
pub fn summarize_errors(log: &TrialLog) -> Result<ErrorSummary, HarnessError> {
    if log.records.is_empty() {
        return Err(HarnessError::EmptyLog);
    }
    let mut channels: [Vec<f64>; 3] = Default::default();
    for e in log.records.iter().filter_map(|r| r.e) {
        for (c, v) in channels.iter_mut().zip(e.iter()) {
            c.push(*v);
        }
    }
    let mut avg = [f64::NAN; 3];
    let mut std = [f64::NAN; 3];
    let mut rmse = [f64::NAN; 3];
    for i in 0..3 {
        if let Some(s) = Stats::of(&channels[i]) {
            (avg[i], std[i], rmse[i]) = (s.mean, s.std, s.rmse);
        }
    }
    let off = landing_offset(&log.final_state, &log.pad);
    Ok(ErrorSummary {
        controller: log.controller,
        seed: log.seed,
        avg,
        std,
        rmse,
        land_offset: [off.x.abs(), off.y.abs()],
        land_angle_deg: angle_diff_90(log.final_state.psi, log.pad.yaw_deg).abs(),
        touchdown_s: log.touchdown.map(|t| t.t),
        samples: channels[0].len(),
    })
}

/// Column-wise mean and standard deviation of the per-trial summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Numeric summary columns, in export order.
pub fn summary_values(s: &ErrorSummary) -> Vec<f64> {
    vec![
        s.rmse[0],
        s.rmse[1],
        s.rmse[2],
        s.std[0],
        s.std[1],
        s.std[2],
        s.land_offset[0],
        s.land_offset[1],
        s.land_angle_deg,
        s.touchdown_s.unwrap_or(f64::NAN),
        if s.success() { 1.0 } else { 0.0 },
    ]
}

pub fn aggregate(summaries: &[ErrorSummary]) -> Option<Aggregate> {
    let rows: Vec<Vec<f64>> = summaries.iter().map(summary_values).collect();
    let width = rows.first()?.len();
    let (mut mean, mut std) = (Vec::with_capacity(width), Vec::with_capacity(width));
    for c in 0..width {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        let s = Stats::of(&col).expect("non-empty");
        mean.push(s.mean);
        std.push(s.std);
    }
    Some(Aggregate { mean, std })
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub logs: Vec<TrialLog>,
    pub summaries: Vec<ErrorSummary>,
    pub aggregate: Aggregate,
    pub success_rate: f64,
}

impl Experiment {
    pub fn mean_touchdown_s(&self) -> f64 {
        let t: Vec<f64> = self.summaries.iter().filter_map(|s| s.touchdown_s).collect();
        Stats::of(&t).map_or(f64::NAN, |s| s.mean)
    }

    pub fn mean_planar_offset(&self) -> f64 {
        self.summaries.iter().map(ErrorSummary::planar_offset).sum::<f64>() / self.summaries.len() as f64
    }

    pub fn mean_angle_error(&self) -> f64 {
        self.summaries.iter().map(|s| s.land_angle_deg).sum::<f64>() / self.summaries.len() as f64
    }
}

/// Seeds used by an experiment: the given list, or `n_trials` consecutive
/// seeds starting at the config seed.
pub fn experiment_seeds(base: &TrialConfig, n_trials: usize, seeds: &[u64]) -> Result<Vec<u64>, HarnessError> {
    if n_trials == 0 {
        return Err(HarnessError::Config("n_trials must be at least 1".into()));
    }
    if seeds.is_empty() {
        return Ok((0..n_trials as u64).map(|i| base.seed + i).collect());
    }
    if seeds.len() != n_trials {
        return Err(HarnessError::Config(format!("{} seeds given for {n_trials} trials", seeds.len())));
    }
    Ok(seeds.to_vec())
}

/// Runs one trial per seed in parallel; results are in seed-list order.
pub fn run_experiment(base: &TrialConfig, n_trials: usize, seeds: &[u64]) -> Result<Experiment, HarnessError> {
    let seeds = experiment_seeds(base, n_trials, seeds)?;
    let logs: Vec<TrialLog> = seeds
        .par_iter()
        .map(|&seed| run_trial(&TrialConfig { seed, ..base.clone() }))
        .collect::<Result<_, _>>()?;
    let summaries = logs.iter().map(summarize_errors).collect::<Result<Vec<_>, _>>()?;
    let aggregate = aggregate(&summaries).expect("at least one trial");
    let success_rate = summaries.iter().filter(|s| s.success()).count() as f64 / summaries.len() as f64;
    Ok(Experiment { logs, summaries, aggregate, success_rate })
}
