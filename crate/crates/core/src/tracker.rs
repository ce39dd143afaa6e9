//! Linear Kalman filter over the pad's image-plane state.
//!
//! State layout (10): `[x_c, y_c, O_w, O_h, theta, rates of the same five]`,
//! pixels and degrees, rates per second. The observation selects the first
//! five states. The model is constant velocity:
//!
//! ```text
//! A = | I5  dt*I5 |      H = [ I5 | 0 ]
//!     | 0   I5    |
//! ```
//!
//! The angle lives on a 90-degree circle (the pad is square), so the angle
//! innovation is wrapped to the shortest signed difference.

use nalgebra::{DMatrix, SMatrix, SVector, SymmetricEigen};
use thiserror::Error;

use crate::observation::{angle_diff_90, Observation, ObservationVector};

pub const STATE_DIM: usize = 10;
pub const OBS_DIM: usize = 5;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type ObsVector = SVector<f64, OBS_DIM>;
pub type ObsMatrix = SMatrix<f64, OBS_DIM, OBS_DIM>;
pub type GainMatrix = SMatrix<f64, STATE_DIM, OBS_DIM>;
pub type ObservationModel = SMatrix<f64, OBS_DIM, STATE_DIM>;

/// Innovation covariances with a larger condition number are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

const SYMMETRY_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("innovation covariance is singular (condition number {0:e})")]
    SingularInnovation(f64),
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Noise model of the filter.
///
/// `q_rate` is the process-noise intensity: the covariance added over one
/// step is `q_rate * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub q_rate: StateMatrix,
    pub r: ObsMatrix,
    pub p0: StateMatrix,
    pub dt_default: f64,
}

fn is_symmetric<const N: usize>(m: &SMatrix<f64, N, N>) -> bool {
    (m - m.transpose()).abs().max() < SYMMETRY_TOL
}

fn min_eigenvalue<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    SymmetricEigen::new(DMatrix::from_column_slice(N, N, m.as_slice())).eigenvalues.min()
}

impl FilterConfig {
    pub fn new(q_rate: StateMatrix, r: ObsMatrix, p0: StateMatrix, dt_default: f64) -> Result<Self, TrackerError> {
        if !(dt_default > 0.0) {
            return Err(TrackerError::NonPositiveDt(dt_default));
        }
        if !is_symmetric(&q_rate) || min_eigenvalue(&q_rate) < -PSD_TOL {
            return Err(TrackerError::InvalidConfig("Q must be symmetric positive semidefinite"));
        }
        if !is_symmetric(&p0) || min_eigenvalue(&p0) < -PSD_TOL {
            return Err(TrackerError::InvalidConfig("P0 must be symmetric positive semidefinite"));
        }
        if !is_symmetric(&r) || r.cholesky().is_none() {
            return Err(TrackerError::InvalidConfig("R must be symmetric positive definite"));
        }
        Ok(Self { q_rate, r, p0, dt_default })
    }

    pub fn from_diagonals(q_rate: [f64; 10], r: [f64; 5], p0: [f64; 10], dt_default: f64) -> Result<Self, TrackerError> {
        Self::new(
            StateMatrix::from_diagonal(&StateVector::from(q_rate)),
            ObsMatrix::from_diagonal(&ObsVector::from(r)),
            StateMatrix::from_diagonal(&StateVector::from(p0)),
            dt_default,
        )
    }

    /// Process noise for one step of length `dt`.
    pub fn process_noise(&self, dt: f64) -> StateMatrix {
        self.q_rate * dt
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self::from_diagonals(
            [1.0, 1.0, 1.0, 1.0, 0.1, 10.0, 10.0, 10.0, 10.0, 1.0],
            [25.0, 25.0, 25.0, 25.0, 4.0],
            [100.0; 10],
            1.0 / 15.0,
        )
        .expect("default filter configuration is valid")
    }
}

/// Mean and covariance of the filter belief.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x: StateVector,
    pub p: StateMatrix,
}

impl FilterState {
    /// The observed block `[x_c, y_c, O_w, O_h, theta]`.
    pub fn observed(&self) -> ObservationVector {
        ObservationVector::new(self.x[0], self.x[1], self.x[2], self.x[3], self.x[4])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Innovation {
    pub y: ObsVector,
    pub s: ObsMatrix,
    pub k: GainMatrix,
}

pub fn observation_model() -> ObservationModel {
    ObservationModel::identity()
}

pub fn make_transition(dt: f64) -> Result<StateMatrix, TrackerError> {
    if !(dt > 0.0) {
        return Err(TrackerError::NonPositiveDt(dt));
    }
    let mut a = StateMatrix::identity();
    for i in 0..OBS_DIM {
        a[(i, i + OBS_DIM)] = dt;
    }
    Ok(a)
}

fn symmetrize(p: &StateMatrix) -> StateMatrix {
    (p + p.transpose()) * 0.5
}

pub fn initialize_filter(first: &ObservationVector, cfg: &FilterConfig) -> FilterState {
    let mut x = StateVector::zeros();
    x.fixed_rows_mut::<OBS_DIM>(0).copy_from(&ObsVector::from(first.to_array()));
    FilterState { x, p: cfg.p0 }
}

/// `x <- A x`, `P <- A P A^T + Q`.
pub fn predict(state: &FilterState, dt: f64, cfg: &FilterConfig) -> Result<FilterState, TrackerError> {
    let a = make_transition(dt)?;
    let x = a * state.x;
    let p = symmetrize(&(a * state.p * a.transpose() + cfg.process_noise(dt)));
    Ok(FilterState { x, p })
}

/// Measurement update with the observed block.
///
/// `P <- (I - K H) P` followed by symmetrization.
pub fn correct(
    predicted: &FilterState,
    z: &ObservationVector,
    cfg: &FilterConfig,
) -> Result<(FilterState, Innovation), TrackerError> {
    let h = observation_model();
    let mut y = ObsVector::from(z.to_array()) - h * predicted.x;
    y[4] = angle_diff_90(z.theta, predicted.x[4]);

    let s = h * predicted.p * h.transpose() + cfg.r;
    let s = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo > MAX_INNOVATION_CONDITION {
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        return Err(TrackerError::SingularInnovation(cond));
    }
    let chol = s.cholesky().ok_or(TrackerError::SingularInnovation(f64::INFINITY))?;
    // K = P H^T S^-1, solved as S K^T = H P (S and P symmetric).
    let k: GainMatrix = chol.solve(&(h * predicted.p)).transpose();

    let x = predicted.x + k * y;
    let p = symmetrize(&((StateMatrix::identity() - k * h) * predicted.p));
    Ok((FilterState { x, p }, Innovation { y, s, k }))
}

/// One tracker step: always predict, correct only on a valid detection.
pub fn track_step(
    state: &FilterState,
    detection: Option<&Observation>,
    dt: f64,
    cfg: &FilterConfig,
) -> Result<FilterState, TrackerError> {
    let predicted = predict(state, dt, cfg)?;
    match detection {
        Some(obs) if obs.valid => Ok(correct(&predicted, &obs.z, cfg)?.0),
        _ => Ok(predicted),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(x: [f64; 10], p: StateMatrix) -> FilterState {
        FilterState { x: StateVector::from(x), p }
    }

    #[test]
    fn transition_layout() {
        assert_eq!(make_transition(0.0), Err(TrackerError::NonPositiveDt(0.0)));
        assert!(make_transition(-1.0).is_err());
        let a = make_transition(1.0).unwrap();
        assert_eq!(a[(0, 5)], 1.0);
        assert_eq!(a[(4, 9)], 1.0);
        assert!((0..10).all(|i| a[(i, i)] == 1.0));
        assert_eq!(a[(5, 0)], 0.0);
        let a = make_transition(0.1).unwrap();
        let x = a * StateVector::from([100.0, 100.0, 50.0, 50.0, 0.0, 10.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(x.as_slice(), &[101.0, 100.0, 50.0, 50.0, 0.0, 10.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn predict_static_state() {
        let cfg = FilterConfig::default();
        let s0 = state([320.0, 160.0, 50.0, 50.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0], cfg.p0);
        let s1 = predict(&s0, 0.2, &cfg).unwrap();
        assert_eq!(s1.x, s0.x);
        // Velocity variances grow by exactly Q.
        let q = cfg.process_noise(0.2);
        for i in 5..10 {
            assert!((s1.p[(i, i)] - (s0.p[(i, i)] + q[(i, i)])).abs() < 1e-12);
        }
        let moving = state([100.0, 100.0, 50.0, 50.0, 0.0, 10.0, 0.0, 0.0, 0.0, 0.0], cfg.p0);
        assert!((predict(&moving, 0.1, &cfg).unwrap().x[0] - 101.0).abs() < 1e-12);
    }

    #[test]
    fn zero_innovation_leaves_state() {
        let cfg = FilterConfig::default();
        let s0 = state([320.0, 160.0, 50.0, 52.0, 10.0, 1.0, -2.0, 0.0, 0.0, 0.5], cfg.p0);
        let pred = predict(&s0, cfg.dt_default, &cfg).unwrap();
        let (post, inn) = correct(&pred, &pred.observed(), &cfg).unwrap();
        assert!(inn.y.norm() == 0.0);
        assert_eq!(post.x, pred.x);
    }

    #[test]
    fn noiseless_measurement_is_adopted() {
        let mut cfg = FilterConfig::default();
        cfg.r = ObsMatrix::identity() * 1e-12;
        let s0 = state([300.0, 150.0, 40.0, 40.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0], cfg.p0);
        let pred = predict(&s0, cfg.dt_default, &cfg).unwrap();
        let z = ObservationVector::new(310.0, 140.0, 44.0, 41.0, 7.5);
        let (post, _) = correct(&pred, &z, &cfg).unwrap();
        for (a, b) in post.x.iter().take(5).zip(z.to_array()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_innovation_detected() {
        let mut cfg = FilterConfig::default();
        cfg.r = ObsMatrix::zeros();
        let s0 = FilterState { x: StateVector::zeros(), p: StateMatrix::zeros() };
        let z = ObservationVector::new(1.0, 1.0, 1.0, 1.0, 1.0);
        assert!(matches!(correct(&s0, &z, &cfg), Err(TrackerError::SingularInnovation(_))));
    }

    #[test]
    fn angle_innovation_wraps() {
        let cfg = FilterConfig::default();
        let s0 = state([0.0, 0.0, 10.0, 10.0, 89.0, 0.0, 0.0, 0.0, 0.0, 0.0], cfg.p0);
        let (_, inn) = correct(&s0, &ObservationVector::new(0.0, 0.0, 10.0, 10.0, 1.0), &cfg).unwrap();
        assert!((inn.y[4] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn initialization() {
        let cfg = FilterConfig::default();
        let s = initialize_filter(&ObservationVector::new(320.0, 160.0, 50.0, 50.0, 0.0), &cfg);
        assert_eq!(s.x.as_slice(), &[320.0, 160.0, 50.0, 50.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.p, cfg.p0);
        let t = initialize_filter(&ObservationVector::new(10.0, 20.0, 30.0, 40.0, 50.0), &cfg);
        assert!((5..10).all(|i| s.x[i] == t.x[i]));
        assert!((0..5).all(|i| s.x[i] != t.x[i]));
    }

    #[test]
    fn missing_detection_is_pure_prediction() {
        let cfg = FilterConfig::default();
        let s0 = state([320.0, 160.0, 50.0, 50.0, 0.0, 3.0, 1.0, 0.0, 0.0, 0.0], cfg.p0);
        assert_eq!(track_step(&s0, None, 0.1, &cfg).unwrap(), predict(&s0, 0.1, &cfg).unwrap());
        let invalid = Observation { z: ObservationVector::new(0.0, 0.0, 1.0, 1.0, 0.0), valid: false };
        assert_eq!(track_step(&s0, Some(&invalid), 0.1, &cfg).unwrap(), predict(&s0, 0.1, &cfg).unwrap());
    }

    #[test]
    fn converges_on_constant_detections() {
        let cfg = FilterConfig::default();
        let z = ObservationVector::new(320.0, 160.0, 50.0, 50.0, 0.0);
        let obs = Observation { z, valid: true };
        let mut s = initialize_filter(&ObservationVector::new(300.0, 180.0, 40.0, 60.0, 10.0), &cfg);
        let target = ObsVector::from(z.to_array());
        let mut errs = Vec::new();
        for _ in 0..100 {
            s = track_step(&s, Some(&obs), cfg.dt_default, &cfg).unwrap();
            let mut d = s.x.fixed_rows::<5>(0) - target;
            d[4] = angle_diff_90(s.x[4], 0.0);
            errs.push(d.norm());
        }
        assert!(errs[99] < 0.5, "final error {}", errs[99]);
        // The constant-velocity model may overshoot, but each 20-step window
        // peaks lower than the one before.
        let peaks: Vec<f64> = errs.chunks(20).map(|c| c.iter().cloned().fold(0.0, f64::max)).collect();
        for w in peaks.windows(2) {
            assert!(w[1] < w[0], "{peaks:?}");
        }
    }

    #[test]
    fn dropouts_inflate_covariance() {
        let cfg = FilterConfig::default();
        let z = ObservationVector::new(320.0, 160.0, 50.0, 50.0, 0.0);
        let obs = Observation { z, valid: true };
        let mut s = initialize_filter(&z, &cfg);
        for k in 0..40 {
            let corrected = k % 2 == 0;
            let next = track_step(&s, if corrected { Some(&obs) } else { None }, cfg.dt_default, &cfg).unwrap();
            if !corrected {
                assert!(next.p.trace() > s.p.trace());
            }
            s = next;
        }
        // Long outage: trace grows every step.
        for _ in 0..100 {
            let next = track_step(&s, None, cfg.dt_default, &cfg).unwrap();
            assert!(next.p.trace() > s.p.trace());
            s = next;
        }
    }

    #[test]
    fn correction_contracts_observed_block() {
        let cfg = FilterConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let l = StateMatrix::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let p = l * l.transpose() + StateMatrix::identity();
            let s = FilterState { x: StateVector::from_fn(|_, _| rng.random_range(0.0..300.0)), p };
            let z = ObservationVector::new(100.0, 100.0, 50.0, 50.0, 10.0);
            let (post, _) = correct(&s, &z, &cfg).unwrap();
            let h = observation_model();
            let before = (h * s.p * h.transpose()).trace();
            let after = (h * post.p * h.transpose()).trace();
            assert!(after <= before);
        }
    }

    #[test]
    fn config_validation() {
        let mut bad = StateMatrix::identity();
        bad[(0, 1)] = 1.0;
        assert!(FilterConfig::new(bad, ObsMatrix::identity(), StateMatrix::identity(), 0.1).is_err());
        assert!(FilterConfig::new(StateMatrix::identity(), ObsMatrix::zeros(), StateMatrix::identity(), 0.1).is_err());
        assert!(FilterConfig::new(StateMatrix::identity(), ObsMatrix::identity(), -StateMatrix::identity(), 0.1).is_err());
        assert!(FilterConfig::new(StateMatrix::identity(), ObsMatrix::identity(), StateMatrix::identity(), 0.0).is_err());
    }
}
