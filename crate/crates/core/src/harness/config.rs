//! Trial configuration, read from TOML.
//!
//! Every field has a default, so a config file only lists what it changes.
//! Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::controller::{AltitudeState, PidGains, Setpoint};
use crate::homography::{RansacParams, TemplateSpec};
use crate::observation::ValidityGate;
use crate::simworld::{CameraModel, FeatureLayout, NoiseModel, Pad, VehicleParams, VehicleState, WindModel};
use crate::tracker::FilterConfig;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    P,
    Pd,
    Pid,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::P => "p",
            ControllerKind::Pd => "pd",
            ControllerKind::Pid => "pid",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Symmetric output bound.
    pub limit: f64,
    /// Derivative low-pass time constant (s).
    pub tau_d: f64,
}

impl Default for GainConfig {
    fn default() -> Self {
        Self { kp: 0.0, ki: 0.0, kd: 0.0, limit: 1.0, tau_d: 0.0 }
    }
}

impl GainConfig {
    fn new(kp: f64, ki: f64, kd: f64, limit: f64, tau_d: f64) -> Self {
        Self { kp, ki, kd, limit, tau_d }
    }

    pub fn to_gains(&self) -> PidGains {
        PidGains { tau_d: self.tau_d, ..PidGains::new(self.kp, self.ki, self.kd, self.limit) }
    }
}

/// Gains of the three channels. `x` and `y` output m/s per px, `yaw`
/// outputs deg/s per deg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelGains {
    pub x: GainConfig,
    pub y: GainConfig,
    pub yaw: GainConfig,
}

impl ChannelGains {
    fn planar(xy: GainConfig, yaw: GainConfig) -> Self {
        Self { x: xy, y: xy, yaw }
    }

    pub fn to_gains(&self) -> [PidGains; 3] {
        [self.x.to_gains(), self.y.to_gains(), self.yaw.to_gains()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainSets {
    pub p: ChannelGains,
    pub pd: ChannelGains,
    pub pid: ChannelGains,
}

impl Default for GainSets {
    fn default() -> Self {
        Self {
            p: ChannelGains::planar(GainConfig::new(0.001, 0.0, 0.0, 1.0, 0.0), GainConfig::new(0.5, 0.0, 0.0, 30.0, 0.0)),
            pd: ChannelGains::planar(
                GainConfig::new(0.03, 0.0, 0.02, 1.0, 0.05),
                GainConfig::new(1.0, 0.0, 0.05, 30.0, 0.1),
            ),
            pid: ChannelGains::planar(
                GainConfig::new(0.025, 0.002, 0.02, 1.0, 0.05),
                GainConfig::new(0.8, 0.05, 0.05, 30.0, 0.1),
            ),
        }
    }
}

impl GainSets {
    pub fn get(&self, kind: ControllerKind) -> &ChannelGains {
        match kind {
            ControllerKind::P => &self.p,
            ControllerKind::Pd => &self.pd,
            ControllerKind::Pid => &self.pid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub image_w: f64,
    pub image_h: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { f: 300.0, cx: 320.0, cy: 160.0, image_w: 640.0, image_h: 320.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateConfig {
    pub width: f64,
    pub height: f64,
    /// Pad side length (m).
    pub physical_side: f64,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        Self { width: 200.0, height: 200.0, physical_side: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PadConfig {
    pub x: f64,
    pub y: f64,
    pub yaw_deg: f64,
}

impl Default for PadConfig {
    fn default() -> Self {
        Self { x: 0.0, y: 0.0, yaw_deg: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Template features per side.
    pub grid: usize,
    pub descriptor_dim: usize,
    pub ratio: f64,
    pub ransac_threshold_px: f64,
    pub ransac_iters: usize,
    /// RANSAC inliers needed to accept a detection.
    pub min_inliers: usize,
    pub min_area_px2: f64,
    pub max_aspect: f64,
    pub bounds_inflation: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let gate = ValidityGate::default();
        Self {
            grid: 8,
            descriptor_dim: 32,
            ratio: 0.8,
            ransac_threshold_px: 3.0,
            ransac_iters: 200,
            min_inliers: 8,
            min_area_px2: gate.min_area_px2,
            max_aspect: gate.max_aspect,
            bounds_inflation: gate.bounds_inflation,
        }
    }
}

/// Noise preset with optional per-field overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub preset: String,
    pub sigma_px: Option<f64>,
    pub outlier_rate: Option<f64>,
    pub dropout_rate: Option<f64>,
    pub descriptor_sigma: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            preset: "sift-like".into(),
            sigma_px: None,
            outlier_rate: None,
            dropout_rate: None,
            descriptor_sigma: None,
        }
    }
}

impl NoiseConfig {
    pub fn model(&self, seed: u64) -> Result<NoiseModel, HarnessError> {
        let base = NoiseModel::preset(&self.preset, seed)
            .ok_or_else(|| HarnessError::Config(format!("unknown noise preset {:?}", self.preset)))?;
        let nm = NoiseModel {
            sigma_px: self.sigma_px.unwrap_or(base.sigma_px),
            outlier_rate: self.outlier_rate.unwrap_or(base.outlier_rate),
            dropout_rate: self.dropout_rate.unwrap_or(base.dropout_rate),
            descriptor_sigma: self.descriptor_sigma.unwrap_or(base.descriptor_sigma),
            seed,
        };
        nm.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(nm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindConfig {
    /// World-frame mean wind (m/s).
    pub bias: [f64; 2],
    pub gust_sigma: f64,
    /// Direction used by the wind sweep, counter-clockwise from +x (deg).
    pub sweep_direction_deg: f64,
}

impl Default for WindConfig {
    fn default() -> Self {
        Self { bias: [0.0, 0.0], gust_sigma: 0.0, sweep_direction_deg: 45.0 }
    }
}

impl WindConfig {
    pub fn model(&self) -> WindModel {
        WindModel { bias: Vector2::from(self.bias), gust_sigma: self.gust_sigma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleConfig {
    pub tau_v: f64,
    pub tau_z: f64,
    pub tau_psi: f64,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        let p = VehicleParams::default();
        Self { tau_v: p.tau_v, tau_z: p.tau_z, tau_psi: p.tau_psi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
}

impl Default for InitialPose {
    fn default() -> Self {
        Self { x: 0.8, y: 0.6, z: 3.5, psi: 20.0 }
    }
}

/// Diagonals of the filter matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterDiagonals {
    pub q: [f64; 10],
    pub r: [f64; 5],
    pub p0: [f64; 10],
}

impl Default for FilterDiagonals {
    fn default() -> Self {
        Self {
            q: [0.1, 0.1, 0.1, 0.1, 0.01, 3.0, 3.0, 3.0, 3.0, 0.5],
            r: [4.0, 4.0, 4.0, 4.0, 4.0],
            p0: [100.0; 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub controller: ControllerKind,
    pub seed: u64,
    /// Control period (s).
    pub dt: f64,
    pub max_duration: f64,
    /// Height removed per descending step (m).
    pub descent_step: f64,
    pub gains: GainSets,
    pub filter: FilterDiagonals,
    pub noise: NoiseConfig,
    pub wind: WindConfig,
    pub vehicle: VehicleConfig,
    pub initial: InitialPose,
    pub camera: CameraConfig,
    pub template: TemplateConfig,
    pub pad: PadConfig,
    pub detector: DetectorConfig,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            controller: ControllerKind::Pd,
            seed: 1,
            dt: 1.0 / 15.0,
            max_duration: 120.0,
            descent_step: 0.02,
            gains: GainSets::default(),
            filter: FilterDiagonals::default(),
            noise: NoiseConfig::default(),
            wind: WindConfig::default(),
            vehicle: VehicleConfig::default(),
            initial: InitialPose::default(),
            camera: CameraConfig::default(),
            template: TemplateConfig::default(),
            pad: PadConfig::default(),
            detector: DetectorConfig::default(),
        }
    }
}

impl TrialConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.max_duration > 0.0) {
            return bad("max_duration must be positive");
        }
        if !(self.descent_step > 0.0) {
            return bad("descent_step must be positive");
        }
        if !(self.initial.z > crate::simworld::MIN_CAMERA_HEIGHT_M) {
            return bad("initial height must exceed the camera minimum");
        }
        let v = &self.vehicle;
        if !(v.tau_v > 0.0 && v.tau_z > 0.0 && v.tau_psi > 0.0) {
            return bad("vehicle time constants must be positive");
        }
        if !(self.wind.gust_sigma >= 0.0) {
            return bad("gust_sigma must be non-negative");
        }
        let d = &self.detector;
        if d.grid < 2 || d.descriptor_dim == 0 {
            return bad("detector grid must be at least 2 and descriptors non-empty");
        }
        if !(d.ratio > 0.0 && d.ratio <= 1.0) {
            return bad("ratio must lie in (0, 1]");
        }
        if !(d.ransac_threshold_px > 0.0) || d.ransac_iters == 0 || d.min_inliers < 4 {
            return bad("RANSAC needs a positive threshold, iterations and at least 4 inliers");
        }
        for kind in [ControllerKind::P, ControllerKind::Pd, ControllerKind::Pid] {
            if !self.gains.get(kind).to_gains().iter().all(PidGains::is_valid) {
                return Err(HarnessError::Config(format!("invalid {kind} gains")));
            }
        }
        self.camera_model()?;
        self.template_spec()?;
        self.noise_model()?;
        self.filter_config()?;
        Ok(())
    }

    pub fn camera_model(&self) -> Result<CameraModel, HarnessError> {
        let c = &self.camera;
        CameraModel::new(c.f, c.cx, c.cy, c.image_w, c.image_h).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn template_spec(&self) -> Result<TemplateSpec, HarnessError> {
        let t = &self.template;
        TemplateSpec::new(t.width, t.height, t.physical_side).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn noise_model(&self) -> Result<NoiseModel, HarnessError> {
        self.noise.model(self.seed)
    }

    pub fn filter_config(&self) -> Result<FilterConfig, HarnessError> {
        let f = &self.filter;
        FilterConfig::from_diagonals(f.q, f.r, f.p0, self.dt).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn pad_model(&self) -> Pad {
        Pad {
            center: Vector2::new(self.pad.x, self.pad.y),
            side: self.template.physical_side,
            yaw_deg: self.pad.yaw_deg,
        }
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout { grid: self.detector.grid, descriptor_dim: self.detector.descriptor_dim }
    }

    pub fn ransac_params(&self) -> RansacParams {
        RansacParams {
            inlier_threshold_px: self.detector.ransac_threshold_px,
            max_iters: self.detector.ransac_iters,
            seed: self.seed,
        }
    }

    pub fn gate(&self) -> ValidityGate {
        ValidityGate {
            min_area_px2: self.detector.min_area_px2,
            max_aspect: self.detector.max_aspect,
            bounds_inflation: self.detector.bounds_inflation,
        }
    }

    pub fn vehicle_params(&self) -> VehicleParams {
        VehicleParams { tau_v: self.vehicle.tau_v, tau_z: self.vehicle.tau_z, tau_psi: self.vehicle.tau_psi }
    }

    pub fn initial_state(&self) -> VehicleState {
        let i = &self.initial;
        VehicleState::hovering(i.x, i.y, i.z, i.psi)
    }

    pub fn setpoint(&self) -> Setpoint {
        Setpoint::image_center(self.camera.image_w, self.camera.image_h)
    }

    pub fn altitude(&self) -> AltitudeState {
        AltitudeState { z_p: self.initial.z, z_f: self.descent_step }
    }

    pub fn controller_gains(&self) -> [PidGains; 3] {
        self.gains.get(self.controller).to_gains()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = TrialConfig::default();
        cfg.validate().unwrap();
        let back = TrialConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = TrialConfig::from_toml_str("controller = \"p\"\nseed = 7\n[wind]\nbias = [0.25, 0.0]\n").unwrap();
        assert_eq!(cfg.controller, ControllerKind::P);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.wind.bias, [0.25, 0.0]);
        assert_eq!(cfg.camera, CameraConfig::default());
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "max_duration = 0.0",
            "dt = -1.0",
            "[noise]\npreset = \"akaze-like\"",
            "[noise]\noutlier_rate = 2.0",
            "[camera]\nf = -3.0",
            "[filter]\nr = [0.0, 1.0, 1.0, 1.0, 1.0]",
            "unknown_key = 1",
            "controller = \"lqr\"",
        ] {
            assert!(matches!(TrialConfig::from_toml_str(text), Err(HarnessError::Config(_))), "{text}");
        }
    }

    #[test]
    fn noise_overrides() {
        let cfg = TrialConfig::from_toml_str("seed = 3\n[noise]\npreset = \"zero\"\nsigma_px = 0.5\n").unwrap();
        let nm = cfg.noise_model().unwrap();
        assert_eq!(nm, NoiseModel { sigma_px: 0.5, ..NoiseModel::zero(3) });
    }
}
