//! Closed-loop landing trial.

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::controller::{ControlCommand, LandingController};
use crate::homography::{match_descriptors, project_template, ransac_homography, FeatureSet, TemplateSpec};
use crate::observation::{build_observation, CornerQuad, Observation, ObservationVector, ValidityGate};
use crate::simworld::{
    camera_project, synthesize_frame, vehicle_step, CameraModel, FeatureLayout, NoiseModel, Pad, VehicleState,
};
use crate::tracker::{initialize_filter, track_step, FilterState};

use super::config::{ControllerKind, TrialConfig};
use super::HarnessError;

/// Ground-truth height below which the vehicle counts as down (m).
pub const GROUND_CONTACT_M: f64 = 0.05;

const WIND_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    DescentStart,
    Touchdown,
    Timeout,
}

impl Event {
    pub fn as_str(&self) -> &'static str {
        match self {
            Event::DescentStart => "descent_start",
            Event::Touchdown => "touchdown",
            Event::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// Vehicle state when the frame was taken.
    pub truth: VehicleState,
    /// Raw detection, if the detector produced a quadrilateral at all.
    pub raw: Option<Observation>,
    /// Filter state after this step's update.
    pub kf: Option<ObservationVector>,
    pub e: Option<Vector3<f64>>,
    pub cmd: ControlCommand,
    /// Trace of the filter covariance after this step.
    pub p_trace: Option<f64>,
    pub events: Vec<Event>,
}

impl StepRecord {
    pub fn z_valid(&self) -> bool {
        self.raw.is_some_and(|o| o.valid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Touchdown {
    pub t: f64,
    /// The controller's landing check fired.
    pub landed_flag: bool,
    /// Ground-truth height dropped below [`GROUND_CONTACT_M`].
    pub ground_contact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub controller: ControllerKind,
    pub seed: u64,
    pub pad: Pad,
    pub initial_z: f64,
    pub records: Vec<StepRecord>,
    /// Vehicle state after the last step.
    pub final_state: VehicleState,
    pub touchdown: Option<Touchdown>,
}

impl TrialLog {
    pub fn timed_out(&self) -> bool {
        self.touchdown.is_none()
    }
}

/// Everything needed to turn one camera frame into an observation.
#[derive(Debug, Clone)]
pub struct Detector {
    pub template: TemplateSpec,
    pub layout: FeatureLayout,
    pub camera: CameraModel,
    pub noise: NoiseModel,
    pub ratio: f64,
    pub ransac: crate::homography::RansacParams,
    pub min_inliers: usize,
    pub gate: ValidityGate,
}

impl Detector {
    pub fn from_config(cfg: &TrialConfig) -> Result<Self, HarnessError> {
        Ok(Self {
            template: cfg.template_spec()?,
            layout: cfg.layout(),
            camera: cfg.camera_model()?,
            noise: cfg.noise_model()?,
            ratio: cfg.detector.ratio,
            ransac: cfg.ransac_params(),
            min_inliers: cfg.detector.min_inliers,
            gate: cfg.gate(),
        })
    }

    /// Detection pipeline on synthetic features: match, RANSAC, project the
    /// template, build Z. `None` when no homography is found.
    pub fn observe(&self, template: &FeatureSet, scene: &FeatureSet) -> Option<Observation> {
        let matches = match_descriptors(template, scene, self.ratio).ok()?;
        let fit = ransac_homography(&matches.correspondences(template, scene), &self.ransac).ok()?;
        let projected = project_template(&fit.homography, &self.template).ok()?;
        let quad = CornerQuad::from_projection(&projected).ok()?;
        let mut obs = build_observation(&quad, self.camera.image_w, self.camera.image_h, &self.gate);
        obs.valid &= fit.inlier_count() >= self.min_inliers;
        Some(obs)
    }

    /// Renders and detects the pad as seen from `truth`.
    pub fn detect(&self, truth: &VehicleState, pad: &Pad, frame_index: u64) -> Result<Option<Observation>, HarnessError> {
        let proj = match camera_project(truth, pad, &self.camera) {
            Ok(p) => p,
            Err(_) => return Ok(None),
        };
        let (template, scene) = synthesize_frame(&proj, &self.template, &self.layout, &self.noise, &self.camera, frame_index)?;
        Ok(self.observe(&template, &scene))
    }
}

/// Runs one trial until touchdown or `max_duration`.
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialLog, HarnessError> {
    cfg.validate()?;
    let detector = Detector::from_config(cfg)?;
    let filter_cfg = cfg.filter_config()?;
    let pad = cfg.pad_model();
    let params = cfg.vehicle_params();
    let wind = cfg.wind.model();
    let mut wind_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    wind_rng.set_stream(WIND_STREAM);

    let mut controller = LandingController::new(cfg.setpoint(), cfg.controller_gains(), cfg.altitude(), Default::default());
    let mut filter: Option<FilterState> = None;
    let mut truth = cfg.initial_state();
    let mut records = Vec::new();
    let mut touchdown = None;
    let mut descending = false;
    let mut prev_u_z = cfg.initial.z;
    let steps = (cfg.max_duration / cfg.dt).ceil() as u64;

    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let raw = detector.detect(&truth, &pad, k)?;
        let valid = raw.filter(|o| o.valid);
        filter = match (&filter, valid) {
            (None, Some(obs)) => Some(initialize_filter(&obs.z, &filter_cfg)),
            (None, None) => None,
            (Some(state), obs) => Some(track_step(state, obs.as_ref(), cfg.dt, &filter_cfg)?),
        };
        let (cmd, e) = match &filter {
            Some(state) => {
                let e = crate::controller::compute_error(&controller.setpoint, state);
                (controller.step(state, cfg.dt), Some(e))
            }
            None => (controller.hold(), None),
        };

        let mut events = Vec::new();
        if !descending && cmd.u_z < prev_u_z {
            descending = true;
            events.push(Event::DescentStart);
        }
        prev_u_z = cmd.u_z;

        let record_truth = truth;
        truth = vehicle_step(&truth, &cmd, &wind.sample(&mut wind_rng), &params, cfg.dt);
        if cmd.landed || truth.z < GROUND_CONTACT_M {
            touchdown = Some(Touchdown { t, landed_flag: cmd.landed, ground_contact: truth.z < GROUND_CONTACT_M });
            events.push(Event::Touchdown);
        } else if k + 1 == steps {
            events.push(Event::Timeout);
        }
        records.push(StepRecord {
            t,
            truth: record_truth,
            raw,
            kf: filter.as_ref().map(FilterState::observed),
            e,
            cmd,
            p_trace: filter.as_ref().map(|s| s.p.trace()),
            events,
        });
        if touchdown.is_some() {
            break;
        }
    }

    Ok(TrialLog {
        controller: cfg.controller,
        seed: cfg.seed,
        pad,
        initial_z: cfg.initial.z,
        records,
        final_state: truth,
        touchdown,
    })
}

/// World-frame planar offset of the vehicle from the pad center (m).
pub fn landing_offset(state: &VehicleState, pad: &Pad) -> Vector2<f64> {
    Vector2::new(state.x, state.y) - pad.center
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(mut cfg: TrialConfig) -> TrialConfig {
        cfg.max_duration = 20.0;
        cfg
    }

    #[test]
    fn full_dropout_never_descends() {
        let mut cfg = quick(TrialConfig::default());
        cfg.noise.dropout_rate = Some(1.0);
        let log = run_trial(&cfg).unwrap();
        assert!(log.touchdown.is_none());
        assert!(log.records.iter().all(|r| !r.z_valid() && r.kf.is_none()));
        assert!(log.records.iter().all(|r| r.cmd.u_z == cfg.initial.z));
        assert_eq!(log.records.last().unwrap().events, vec![Event::Timeout]);
    }

    #[test]
    fn time_strictly_increases() {
        let log = run_trial(&quick(TrialConfig::default())).unwrap();
        assert!(log.records.windows(2).all(|w| w[1].t > w[0].t));
        let touchdowns = log.records.iter().filter(|r| r.events.contains(&Event::Touchdown)).count();
        assert!(touchdowns <= 1);
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = quick(TrialConfig::default());
        assert_eq!(run_trial(&cfg).unwrap(), run_trial(&cfg).unwrap());
    }
}
