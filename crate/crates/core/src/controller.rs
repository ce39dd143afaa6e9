//! Image-based landing controller: three PID loops on the tracked pad
//! centroid and heading, an ON/OFF descent law, and the touchdown check.

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::observation::angle_diff_90;
use crate::tracker::FilterState;

/// Descent is allowed only while `|O_w - O_h|` is below this (px).
pub const SQUARE_TOLERANCE_PX: f64 = 5.0;
/// Commanded altitude at or below which landing may be triggered (m).
pub const LANDING_ALTITUDE_M: f64 = 0.2;
/// Centroid error allowed on each axis when triggering the landing (px).
pub const LANDING_CENTER_TOLERANCE_PX: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub out_min: f64,
    pub out_max: f64,
    /// Time constant of the derivative low-pass filter (s); 0 disables it.
    pub tau_d: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64, limit: f64) -> Self {
        Self { kp, ki, kd, out_min: -limit, out_max: limit, tau_d: 0.0 }
    }

    pub fn is_valid(&self) -> bool {
        self.kp.is_finite()
            && self.ki.is_finite()
            && self.kd.is_finite()
            && self.tau_d >= 0.0
            && self.out_min < self.out_max
    }

    fn integral_bounds(&self) -> (f64, f64) {
        let (a, b) = (self.out_min / self.ki, self.out_max / self.ki);
        (a.min(b), a.max(b))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub derivative: f64,
    pub initialized: bool,
}

/// One PID update with trapezoidal integration and a backward-difference
/// derivative.
///
/// On the first call the previous error is taken equal to the current one,
/// so the derivative starts at zero. The integral is clamped so that the
/// integral term alone cannot exceed the output bounds.
pub fn pid_step(gains: &PidGains, st: &PidState, error: f64, dt: f64) -> (f64, PidState) {
    debug_assert!(dt > 0.0);
    let prev = if st.initialized { st.prev_error } else { error };

    let mut integral = st.integral + (error + prev) * dt / 2.0;
    if gains.ki != 0.0 {
        let (lo, hi) = gains.integral_bounds();
        integral = integral.clamp(lo, hi);
    }

    let raw = (error - prev) / dt;
    let derivative = if gains.tau_d > 0.0 && st.initialized {
        st.derivative + (raw - st.derivative) * dt / (gains.tau_d + dt)
    } else {
        raw
    };

    let out = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    let out = out.clamp(gains.out_min, gains.out_max);
    (out, PidState { integral, prev_error: error, derivative, initialized: true })
}

/// `[I_w / 2, I_h / 2, 0]`: image center and zero relative heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub sp: Vector3<f64>,
}

impl Setpoint {
    pub fn image_center(image_w: f64, image_h: f64) -> Self {
        Self { sp: Vector3::new(image_w / 2.0, image_h / 2.0, 0.0) }
    }
}

/// `e = S_p - (x_c, y_c, theta)`, heading error wrapped into `(-45, 45]`.
pub fn compute_error(sp: &Setpoint, x: &FilterState) -> Vector3<f64> {
    Vector3::new(sp.sp[0] - x.x[0], sp.sp[1] - x.x[1], angle_diff_90(sp.sp[2], x.x[4]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltitudeState {
    /// Current commanded height (m).
    pub z_p: f64,
    /// Height removed per qualifying step (m).
    pub z_f: f64,
}

/// ON/OFF descent law: step down by `z_f` while the tracked pad looks
/// square and the vehicle is above the landing altitude.
pub fn altitude_step(alt: &AltitudeState, x: &FilterState) -> f64 {
    let error_size = (x.x[2] - x.x[3]).abs();
    if error_size < SQUARE_TOLERANCE_PX && alt.z_p > LANDING_ALTITUDE_M {
        alt.z_p - alt.z_f
    } else {
        alt.z_p
    }
}

pub fn landing_check(u_z: f64, e: &Vector3<f64>) -> bool {
    u_z <= LANDING_ALTITUDE_M
        && e[0].abs() < LANDING_CENTER_TOLERANCE_PX
        && e[1].abs() < LANDING_CENTER_TOLERANCE_PX
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ControlCommand {
    /// Body-frame `[vx (m/s), vy (m/s), yaw rate (deg/s)]`.
    pub u: Vector3<f64>,
    /// Commanded altitude (m).
    pub u_z: f64,
    pub landed: bool,
}

/// Maps the image-plane PID outputs `(x, y)` to body-frame velocities.
///
/// The default suits a nadir camera whose image x axis points to body -x and
/// whose image y axis points to body +y: a positive x error (pad left of
/// center) asks for forward motion, a positive y error (pad above center)
/// for motion to the right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisMap(pub Matrix2<f64>);

impl Default for AxisMap {
    fn default() -> Self {
        Self(Matrix2::new(1.0, 0.0, 0.0, -1.0))
    }
}

/// Gains and memory of the three channels `[x, y, yaw]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidBank {
    pub gains: [PidGains; 3],
    pub states: [PidState; 3],
}

impl PidBank {
    pub fn new(gains: [PidGains; 3]) -> Self {
        Self { gains, states: [PidState::default(); 3] }
    }
}

/// One controller update.
///
/// Runs the three PIDs on `e`, steps the altitude law, and commits the new
/// altitude. Once the landing check fires the command is latched at zero.
pub fn control_step(
    sp: &Setpoint,
    x: &FilterState,
    pids: &mut PidBank,
    alt: &mut AltitudeState,
    axes: &AxisMap,
    dt: f64,
) -> ControlCommand {
    let e = compute_error(sp, x);

    let mut u = Vector3::zeros();
    for i in 0..3 {
        let (out, st) = pid_step(&pids.gains[i], &pids.states[i], e[i], dt);
        pids.states[i] = st;
        u[i] = out;
    }
    let planar = axes.0 * Vector2::new(u[0], u[1]);
    for i in 0..2 {
        u[i] = planar[i].clamp(pids.gains[i].out_min, pids.gains[i].out_max);
    }

    let mut u_z = altitude_step(alt, x);
    let landed = landing_check(u_z, &e);
    if landed {
        u_z = 0.0;
        u = Vector3::zeros();
    }
    alt.z_p = u_z;
    ControlCommand { u, u_z, landed }
}

/// Stateful wrapper around [`control_step`] that latches touchdown.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingController {
    pub setpoint: Setpoint,
    pub pids: PidBank,
    pub altitude: AltitudeState,
    pub axes: AxisMap,
    landed: bool,
}

impl LandingController {
    pub fn new(setpoint: Setpoint, gains: [PidGains; 3], altitude: AltitudeState, axes: AxisMap) -> Self {
        Self { setpoint, pids: PidBank::new(gains), altitude, axes, landed: false }
    }

    pub fn landed(&self) -> bool {
        self.landed
    }

    pub fn step(&mut self, x: &FilterState, dt: f64) -> ControlCommand {
        if self.landed {
            return ControlCommand { u: Vector3::zeros(), u_z: 0.0, landed: true };
        }
        let cmd = control_step(&self.setpoint, x, &mut self.pids, &mut self.altitude, &self.axes, dt);
        self.landed = cmd.landed;
        cmd
    }

    /// Command used while no track exists: hold position and height.
    pub fn hold(&self) -> ControlCommand {
        ControlCommand { u: Vector3::zeros(), u_z: self.altitude.z_p, landed: self.landed }
    }
}
