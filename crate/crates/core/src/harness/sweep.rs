//! Static-hover detector comparison and wind robustness sweeps.

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::observation::{angle_diff_90, compute_angle, compute_object_dims, CornerQuad, ObservationVector};
use crate::simworld::{camera_project, NoiseModel, VehicleState};
use crate::tracker::{initialize_filter, track_step, FilterState};

use super::config::TrialConfig;
use super::metrics::{summarize_errors, Stats};
use super::trial::{run_trial, Detector};
use super::HarnessError;

pub const VARIABLES: [&str; 5] = ["x_c", "y_c", "o_w", "o_h", "theta"];

pub const MIN_SWEEP_FRAMES: usize = 100;

/// Raw and filtered absolute error of one observed variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRow {
    pub preset: String,
    pub variable: &'static str,
    /// Over frames with a valid detection.
    pub raw: Stats,
    /// Over every frame after the filter was initialized.
    pub filtered: Stats,
    pub valid_frames: usize,
    pub frames: usize,
}

const EMPTY: Stats = Stats { mean: f64::NAN, std: f64::NAN, rmse: f64::NAN };

/// Observation vector computed directly from the vehicle pose.
pub fn truth_observation(cfg: &TrialConfig, pose: &VehicleState) -> Result<ObservationVector, HarnessError> {
    let proj = camera_project(pose, &cfg.pad_model(), &cfg.camera_model()?)?;
    let quad = CornerQuad::from_projection(&proj.points)
        .map_err(|e| HarnessError::Config(format!("degenerate pad projection: {e}")))?;
    let (w, h) = compute_object_dims(&quad);
    let c = quad.centroid();
    Ok(ObservationVector::new(c.x, c.y, w, h, compute_angle(&quad)))
}

fn abs_errors(z: &ObservationVector, truth: &ObservationVector) -> [f64; 5] {
    let (a, b) = (z.to_array(), truth.to_array());
    [
        (a[0] - b[0]).abs(),
        (a[1] - b[1]).abs(),
        (a[2] - b[2]).abs(),
        (a[3] - b[3]).abs(),
        angle_diff_90(a[4], b[4]).abs(),
    ]
}

/// Holds the vehicle at `hold` and runs detection plus filtering for
/// `n_frames` frames per preset. Each preset is reseeded with `seed`.
pub fn detector_noise_sweep(
    base: &TrialConfig,
    presets: &[(String, NoiseModel)],
    hold: &VehicleState,
    n_frames: usize,
    seed: u64,
) -> Result<Vec<DetectorRow>, HarnessError> {
    if n_frames < MIN_SWEEP_FRAMES {
        return Err(HarnessError::Config(format!("at least {MIN_SWEEP_FRAMES} frames are required")));
    }
    let cfg = TrialConfig { seed, ..base.clone() };
    let truth = truth_observation(&cfg, hold)?;
    let filter_cfg = cfg.filter_config()?;
    let pad = cfg.pad_model();

    let mut rows = Vec::new();
    for (name, nm) in presets {
        let mut detector = Detector::from_config(&cfg)?;
        detector.noise = NoiseModel { seed, ..*nm };
        let mut raw: [Vec<f64>; 5] = Default::default();
        let mut filtered: [Vec<f64>; 5] = Default::default();
        let mut filter: Option<FilterState> = None;
        for k in 0..n_frames {
            let valid = detector.detect(hold, &pad, k as u64)?.filter(|o| o.valid);
            if let Some(obs) = &valid {
                for (v, e) in raw.iter_mut().zip(abs_errors(&obs.z, &truth)) {
                    v.push(e);
                }
            }
            filter = match (&filter, &valid) {
                (None, Some(obs)) => Some(initialize_filter(&obs.z, &filter_cfg)),
                (None, None) => None,
                (Some(state), obs) => Some(track_step(state, obs.as_ref(), cfg.dt, &filter_cfg)?),
            };
            if let Some(state) = &filter {
                for (v, e) in filtered.iter_mut().zip(abs_errors(&state.observed(), &truth)) {
                    v.push(e);
                }
            }
        }
        for (i, variable) in VARIABLES.iter().enumerate() {
            rows.push(DetectorRow {
                preset: name.clone(),
                variable,
                raw: Stats::of(&raw[i]).unwrap_or(EMPTY),
                filtered: Stats::of(&filtered[i]).unwrap_or(EMPTY),
                valid_frames: raw[i].len(),
                frames: n_frames,
            });
        }
    }
    Ok(rows)
}

/// Hover pose used by the detector sweep: above the pad center at the
/// configured initial height and heading.
pub fn hover_pose(cfg: &TrialConfig) -> VehicleState {
    VehicleState::hovering(cfg.pad.x, cfg.pad.y, cfg.initial.z, cfg.initial.psi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindRow {
    /// Bias wind speed (m/s).
    pub bias: f64,
    pub seed: u64,
    pub touchdown_s: Option<f64>,
    /// Planar distance to the pad center at the end (m).
    pub land_offset_m: f64,
    pub land_angle_deg: f64,
}

/// Runs one trial per `(bias, seed)` pair with the bias wind blowing along
/// `wind.sweep_direction_deg`. Rows are ordered by bias, then seed.
pub fn wind_sweep(base: &TrialConfig, biases: &[f64], seeds: &[u64]) -> Result<Vec<WindRow>, HarnessError> {
    if biases.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(HarnessError::Config("wind biases must be finite and non-negative".into()));
    }
    let (s, c) = base.wind.sweep_direction_deg.to_radians().sin_cos();
    let jobs: Vec<(f64, u64)> = biases.iter().flat_map(|&b| seeds.iter().map(move |&s| (b, s))).collect();
    jobs.par_iter()
        .map(|&(bias, seed)| {
            let mut cfg = TrialConfig { seed, ..base.clone() };
            cfg.wind.bias = (Vector2::new(c, s) * bias).into();
            let summary = summarize_errors(&run_trial(&cfg)?)?;
            Ok(WindRow {
                bias,
                seed,
                touchdown_s: summary.touchdown_s,
                land_offset_m: summary.planar_offset(),
                land_angle_deg: summary.land_angle_deg,
            })
        })
        .collect()
}
