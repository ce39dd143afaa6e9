//! Kinematic stand-in for the vehicle, camera and detector.
//!
//! World frame: x, y on the ground plane, z up, yaw `psi` counter-clockwise
//! from +x in degrees. Body frame: x forward, y left. The camera looks
//! straight down and is mounted so that the image x axis points along body
//! -x and the image y axis along body +y, which keeps the image right-handed
//! (x right, y down) with the optical axis pointing at the ground.
//!
//! The flight controller's cascaded loops are replaced by first-order lags
//! on body velocity, yaw rate and height.

use nalgebra::{Point2, Vector2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::controller::ControlCommand;
use crate::homography::{estimate_homography_dlt, Correspondence, FeatureSet, Homography, HomographyError, TemplateSpec};

/// Lowest height at which the camera model is evaluated (m).
pub const MIN_CAMERA_HEIGHT_M: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("camera height {0} m is below the {MIN_CAMERA_HEIGHT_M} m minimum")]
    TooLow(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
    #[error("invalid noise model: {0}")]
    InvalidNoise(&'static str),
    #[error(transparent)]
    Homography(#[from] HomographyError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Yaw (deg).
    pub psi: f64,
    /// Realized body-frame velocity (m/s), wind included.
    pub vx: f64,
    pub vy: f64,
    /// Realized yaw rate (deg/s).
    pub psi_rate: f64,
    pub landed: bool,
}

impl VehicleState {
    pub fn hovering(x: f64, y: f64, z: f64, psi: f64) -> Self {
        Self { x, y, z, psi, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    /// Focal length (px).
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub image_w: f64,
    pub image_h: f64,
}

impl CameraModel {
    pub fn new(f: f64, cx: f64, cy: f64, image_w: f64, image_h: f64) -> Result<Self, SimError> {
        if !(f > 0.0) {
            return Err(SimError::InvalidCamera("focal length must be positive"));
        }
        if !(image_w > 0.0 && image_h > 0.0) {
            return Err(SimError::InvalidCamera("image size must be positive"));
        }
        if !(cx >= 0.0 && cx <= image_w && cy >= 0.0 && cy <= image_h) {
            return Err(SimError::InvalidCamera("principal point outside the image"));
        }
        Ok(Self { f, cx, cy, image_w, image_h })
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        p.x >= 0.0 && p.x < self.image_w && p.y >= 0.0 && p.y < self.image_h
    }
}

/// Square landing pad lying on the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pad {
    pub center: Vector2<f64>,
    pub side: f64,
    pub yaw_deg: f64,
}

impl Pad {
    /// World corners in the order of [`TemplateSpec::points`]; the template's
    /// x axis runs along the pad's +x and its y axis (down) along the pad's -y.
    pub fn world_corners(&self) -> [Vector2<f64>; 4] {
        let h = self.side / 2.0;
        let (s, c) = self.yaw_deg.to_radians().sin_cos();
        [(-h, h), (h, h), (h, -h), (-h, -h)]
            .map(|(x, y)| self.center + Vector2::new(c * x - s * y, s * x + c * y))
    }
}

fn rotate(v: Vector2<f64>, deg: f64) -> Vector2<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Pixel of a ground point seen from the vehicle.
pub fn world_to_pixel(v: &VehicleState, p: &Vector2<f64>, cam: &CameraModel) -> Point2<f64> {
    let body = rotate(p - Vector2::new(v.x, v.y), -v.psi);
    Point2::new(cam.cx - cam.f * body.x / v.z, cam.cy + cam.f * body.y / v.z)
}

/// Ground-truth image of the pad: corners in template order, then center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadProjection {
    pub points: [Point2<f64>; 5],
    /// True when no corner lies inside the image.
    pub out_of_view: bool,
}

pub fn camera_project(v: &VehicleState, pad: &Pad, cam: &CameraModel) -> Result<PadProjection, SimError> {
    if !(v.z > MIN_CAMERA_HEIGHT_M) {
        return Err(SimError::TooLow(v.z));
    }
    let corners = pad.world_corners();
    let mut points = [Point2::origin(); 5];
    for (p, w) in points.iter_mut().zip(corners.iter()) {
        *p = world_to_pixel(v, w, cam);
    }
    points[4] = world_to_pixel(v, &pad.center, cam);
    let out_of_view = !points[..4].iter().any(|p| cam.contains(p));
    Ok(PadProjection { points, out_of_view })
}

/// Template-to-image homography implied by a ground-truth projection.
pub fn truth_homography(proj: &PadProjection, template: &TemplateSpec) -> Result<Homography, HomographyError> {
    let src = template.points();
    let pairs: Vec<Correspondence> = (0..4).map(|i| Correspondence::new(src[i], proj.points[i])).collect();
    estimate_homography_dlt(&pairs)
}

/// Detector surrogate parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Per-feature Gaussian pixel noise (px).
    pub sigma_px: f64,
    /// Decoy features added per frame, as a fraction of the template features.
    pub outlier_rate: f64,
    /// Probability that a frame contains only decoys.
    pub dropout_rate: f64,
    /// Per-component Gaussian descriptor perturbation.
    pub descriptor_sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn zero(seed: u64) -> Self {
        Self { sigma_px: 0.0, outlier_rate: 0.0, dropout_rate: 0.0, descriptor_sigma: 0.0, seed }
    }

    pub fn sift_like(seed: u64) -> Self {
        Self { sigma_px: 1.5, outlier_rate: 0.2, dropout_rate: 0.05, descriptor_sigma: 0.15, seed }
    }

    pub fn orb_like(seed: u64) -> Self {
        Self { sigma_px: 2.5, outlier_rate: 0.4, dropout_rate: 0.1, descriptor_sigma: 0.3, seed }
    }

    pub fn surf_like(seed: u64) -> Self {
        Self { sigma_px: 4.0, outlier_rate: 0.6, dropout_rate: 0.15, descriptor_sigma: 0.4, seed }
    }

    /// Looks up a named preset: `zero`, `sift-like`, `orb-like`, `surf-like`.
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "zero" => Some(Self::zero(seed)),
            "sift-like" => Some(Self::sift_like(seed)),
            "orb-like" => Some(Self::orb_like(seed)),
            "surf-like" => Some(Self::surf_like(seed)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sigma_px >= 0.0 && self.descriptor_sigma >= 0.0) {
            return Err(SimError::InvalidNoise("sigmas must be non-negative"));
        }
        if !((0.0..=1.0).contains(&self.outlier_rate) && (0.0..=1.0).contains(&self.dropout_rate)) {
            return Err(SimError::InvalidNoise("rates must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Template keypoint grid and descriptor size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureLayout {
    /// Features per template side; `grid * grid` in total.
    pub grid: usize,
    pub descriptor_dim: usize,
}

impl Default for FeatureLayout {
    fn default() -> Self {
        Self { grid: 8, descriptor_dim: 32 }
    }
}

fn frame_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_descriptor(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Template features: a regular grid with descriptors that depend only on
/// the noise seed.
pub fn template_features(template: &TemplateSpec, layout: &FeatureLayout, seed: u64) -> FeatureSet {
    let mut rng = frame_rng(seed, 0);
    let g = layout.grid as f64;
    let mut points = Vec::with_capacity(layout.grid * layout.grid);
    let mut descriptors = Vec::with_capacity(points.capacity());
    for r in 0..layout.grid {
        for c in 0..layout.grid {
            points.push(Point2::new(
                (c as f64 + 0.5) / g * template.width,
                (r as f64 + 0.5) / g * template.height,
            ));
            descriptors.push(gaussian_descriptor(&mut rng, layout.descriptor_dim));
        }
    }
    FeatureSet::new(points, descriptors).expect("grid features are well formed")
}

/// Synthesizes the template and scene feature sets for one frame.
///
/// Scene features are the template grid mapped through the true homography
/// with pixel and descriptor noise, cropped to the image, plus
/// `ceil(outlier_rate * N)` random decoys. A dropout frame holds only decoys.
/// The result depends only on `(nm.seed, frame_index)`.
pub fn synthesize_frame(
    truth: &PadProjection,
    template: &TemplateSpec,
    layout: &FeatureLayout,
    nm: &NoiseModel,
    cam: &CameraModel,
    frame_index: u64,
) -> Result<(FeatureSet, FeatureSet), SimError> {
    nm.validate()?;
    let h = truth_homography(truth, template)?;
    let tmpl = template_features(template, layout, nm.seed);
    let n = tmpl.len();

    let mut rng = frame_rng(nm.seed, frame_index.wrapping_add(1));
    let pixel_noise = Normal::new(0.0, nm.sigma_px).map_err(|_| SimError::InvalidNoise("sigma_px"))?;
    let desc_noise =
        Normal::new(0.0, nm.descriptor_sigma).map_err(|_| SimError::InvalidNoise("descriptor_sigma"))?;

    let dropout = rng.random_bool(nm.dropout_rate);
    let mut scene: Vec<(Point2<f64>, Vec<f64>)> = Vec::new();
    if !dropout {
        for i in 0..n {
            let mapped = h.apply(&tmpl.point(i))?;
            let p = Point2::new(
                mapped.x + pixel_noise.sample(&mut rng),
                mapped.y + pixel_noise.sample(&mut rng),
            );
            let d: Vec<f64> = tmpl.descriptor(i).iter().map(|v| v + desc_noise.sample(&mut rng)).collect();
            if cam.contains(&p) {
                scene.push((p, d));
            }
        }
    }
    let decoys = if dropout { n } else { (nm.outlier_rate * n as f64).ceil() as usize };
    for _ in 0..decoys {
        let p = Point2::new(rng.random_range(0.0..cam.image_w), rng.random_range(0.0..cam.image_h));
        scene.push((p, gaussian_descriptor(&mut rng, layout.descriptor_dim)));
    }
    scene.shuffle(&mut rng);

    let (points, descriptors): (Vec<_>, Vec<_>) = scene.into_iter().unzip();
    let scene = FeatureSet::new(points, descriptors)?;
    Ok((tmpl, scene))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindModel {
    /// Mean wind velocity in the world frame (m/s).
    pub bias: Vector2<f64>,
    /// Per-axis gust standard deviation (m/s).
    pub gust_sigma: f64,
}

impl Default for WindModel {
    fn default() -> Self {
        Self { bias: Vector2::zeros(), gust_sigma: 0.0 }
    }
}

impl WindModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<f64> {
        if self.gust_sigma > 0.0 {
            let gx: f64 = StandardNormal.sample(rng);
            let gy: f64 = StandardNormal.sample(rng);
            self.bias + Vector2::new(gx, gy) * self.gust_sigma
        } else {
            self.bias
        }
    }
}

/// Response time constants of the vehicle surrogate (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    pub tau_v: f64,
    pub tau_z: f64,
    pub tau_psi: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self { tau_v: 0.5, tau_z: 0.8, tau_psi: 0.5 }
    }
}

/// Advances the vehicle by one explicit Euler step.
///
/// The realized body velocity relaxes towards `command + wind` (wind rotated
/// into the body frame); position integrates the updated velocity rotated
/// back into the world frame. A landing command puts the vehicle on the
/// ground where it is and freezes it.
pub fn vehicle_step(
    v: &VehicleState,
    cmd: &ControlCommand,
    wind: &Vector2<f64>,
    params: &VehicleParams,
    dt: f64,
) -> VehicleState {
    debug_assert!(dt > 0.0);
    if v.landed {
        return *v;
    }
    if cmd.landed {
        return VehicleState { z: 0.0, vx: 0.0, vy: 0.0, psi_rate: 0.0, landed: true, ..*v };
    }
    let wind_body = rotate(*wind, -v.psi);
    let mut next = *v;
    next.vx += (cmd.u[0] + wind_body.x - v.vx) * dt / params.tau_v;
    next.vy += (cmd.u[1] + wind_body.y - v.vy) * dt / params.tau_v;
    next.psi_rate += (cmd.u[2] - v.psi_rate) * dt / params.tau_psi;

    let world_v = rotate(Vector2::new(next.vx, next.vy), v.psi);
    next.x += world_v.x * dt;
    next.y += world_v.y * dt;
    next.psi += next.psi_rate * dt;
    next.z = (v.z + (cmd.u_z - v.z) * dt / params.tau_z).max(0.0);
    next
}
