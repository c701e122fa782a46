//! Velocity command synthesis for differential-drive robots.
//!
//! The controlled point is `p_d`, a distance `d_f` ahead of the wheel axle
//! center. Commanding its planar velocity directly and mapping back through
//! the unicycle model linearizes the kinematics.

use std::f64::consts::PI;

use crate::{Point, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    /// Heading in (-π, π].
    pub theta: f64,
    /// Current forward speed, m/s.
    pub v: f64,
}

impl RobotPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta), v: 0.0 }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }

    /// The lookahead point `p_d`.
    pub fn lookahead(&self, d_f: f64) -> Point {
        self.position() + self.heading() * d_f
    }
}

/// Wraps an angle into (-π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    /// Lookahead distance, m.
    pub d_f: f64,
    /// Tracking gain, 1/s.
    pub c_s: f64,
    /// Repulsion gain, m²/s.
    pub c_a: f64,
    /// Cancellation gain.
    pub c_e: f64,
    /// Obstacle activation distance, m.
    pub d_e: f64,
    /// Collision-cone radius, m.
    pub r_c: f64,
    /// Collision-cone half-angle, rad.
    pub alpha_c: f64,
    /// Wheel separation, m.
    pub wheel_base: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            d_f: 0.2,
            c_s: 4.0,
            c_a: 0.15,
            c_e: 1.0,
            d_e: 0.4,
            r_c: 1.0,
            alpha_c: 60f64.to_radians(),
            wheel_base: 0.3,
        }
    }
}

/// `c_s·(target − p_d)`.
pub fn tracking_velocity(pose: &RobotPose, target: &Point, params: &ControllerParams) -> Vec2 {
    (target - pose.lookahead(params.d_f)) * params.c_s
}

/// Whether `other` lies inside the forward collision cone.
pub fn in_cone(pose: &RobotPose, other: &Point, params: &ControllerParams) -> bool {
    let d = other - pose.position();
    let dist = d.norm();
    if dist == 0.0 || dist > params.r_c {
        return false;
    }
    normalize_angle(d.y.atan2(d.x) - pose.theta).abs() <= params.alpha_c
}

/// Sum of `−c_a·(p_agent − p_c)/‖p_agent − p_c‖²` over agents in the cone.
pub fn cone_repulsion(pose: &RobotPose, agents: &[Point], params: &ControllerParams) -> Vec2 {
    agents
        .iter()
        .filter(|a| in_cone(pose, a, params))
        .map(|a| {
            let d = a - pose.position();
            -d * (params.c_a / d.norm_squared())
        })
        .fold(Vec2::zeros(), |acc, v| acc + v)
}

/// Removes the component of `v_avoid` toward a nearby obstacle. Activation
/// requires the obstacle within `d_e` and the tracking velocity `v_track`
/// pointing toward it.
pub fn obstacle_cancel(
    v_track: &Vec2,
    v_avoid: &Vec2,
    pose: &RobotPose,
    nearest_obstacle: &Point,
    params: &ControllerParams,
) -> (Vec2, bool) {
    let v_env = nearest_obstacle - pose.position();
    let n2 = v_env.norm_squared();
    if n2 == 0.0 || v_env.norm() >= params.d_e || v_track.dot(&v_env) <= 0.0 {
        return (*v_avoid, false);
    }
    (v_avoid - v_env * (params.c_e * v_avoid.dot(&v_env) / n2), true)
}

/// Scales `v` down to at most `v_max` in norm.
pub fn saturate(v: &Vec2, v_max: f64) -> Vec2 {
    let n = v.norm();
    if n > v_max {
        v * (v_max / n)
    } else {
        *v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelCommand {
    /// Forward speed, m/s.
    pub u: f64,
    /// Turn rate, rad/s.
    pub omega: f64,
    pub v_left: f64,
    pub v_right: f64,
}

pub fn to_wheel_speeds(v: &Vec2, pose: &RobotPose, params: &ControllerParams) -> WheelCommand {
    let (s, c) = pose.theta.sin_cos();
    let u = v.x * c + v.y * s;
    let omega = (v.y * c - v.x * s) / params.d_f;
    WheelCommand {
        u,
        omega,
        v_left: u - omega * params.wheel_base / 2.0,
        v_right: u + omega * params.wheel_base / 2.0,
    }
}

/// Inverse of [`to_wheel_speeds`]: the lookahead-point velocity produced by
/// `(u, ω)`.
pub fn from_unicycle(u: f64, omega: f64, pose: &RobotPose, params: &ControllerParams) -> Vec2 {
    let (s, c) = pose.theta.sin_cos();
    Vec2::new(u * c - omega * params.d_f * s, u * s + omega * params.d_f * c)
}

/// Euler step of the unicycle model.
pub fn integrate_unicycle(pose: &RobotPose, cmd: &WheelCommand, dt: f64) -> RobotPose {
    RobotPose {
        x: pose.x + cmd.u * pose.theta.cos() * dt,
        y: pose.y + cmd.u * pose.theta.sin() * dt,
        theta: normalize_angle(pose.theta + cmd.omega * dt),
        v: cmd.u,
    }
}

/// Full command for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub v_track: Vec2,
    pub v_final: Vec2,
    pub wheels: WheelCommand,
    pub repulsion_active: bool,
    pub cancel_active: bool,
}

/// Tracking, then cone repulsion, then obstacle cancellation, then
/// saturation and the wheel map.
pub fn command(
    pose: &RobotPose,
    target: &Point,
    agents: &[Point],
    nearest_obstacle: Option<&Point>,
    v_max: f64,
    params: &ControllerParams,
) -> ControlOutput {
    let v_track = tracking_velocity(pose, target, params);
    let repulsion = cone_repulsion(pose, agents, params);
    let v_avoid = v_track + repulsion;
    let (v_cancel, cancel_active) = match nearest_obstacle {
        Some(o) => obstacle_cancel(&v_track, &v_avoid, pose, o, params),
        None => (v_avoid, false),
    };
    let v_final = saturate(&v_cancel, v_max);
    ControlOutput {
        v_track,
        v_final,
        wheels: to_wheel_speeds(&v_final, pose, params),
        repulsion_active: repulsion != Vec2::zeros(),
        cancel_active,
    }
}
