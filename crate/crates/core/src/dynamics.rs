//! Traversability-scaled unicycle: λ multiplies both the linear and angular rate.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, Grid, GridGeometry, Interpolation};
use crate::traversability::{risk_value, RiskConfig, TravField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Radians in (−π, π].
    pub theta: f64,
    pub t: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        RobotState {
            x,
            y,
            theta: wrap_angle(theta),
            t: 0.0,
        }
    }

    pub fn distance_to(&self, p: (f64, f64)) -> f64 {
        (self.x - p.0).hypot(self.y - p.1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    /// m/s
    pub v: f64,
    /// rad/s
    pub omega: f64,
}

impl Action {
    pub const STOP: Action = Action { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Action { v, omega }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub v_max: f64,
    pub omega_max: f64,
    /// Interpolation planners use for predicted traversability.
    pub interpolation: Interpolation,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.1,
            v_max: 1.0,
            omega_max: 1.0,
            interpolation: Interpolation::Bilinear,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dt > 0.0 && self.v_max > 0.0 && self.omega_max > 0.0 {
            Ok(())
        } else {
            Err(Error::Config("dt, v_max and omega_max must be positive".into()))
        }
    }

    pub fn clamp(&self, a: Action) -> Action {
        Action {
            v: a.v.clamp(-self.v_max, self.v_max),
            omega: a.omega.clamp(-self.omega_max, self.omega_max),
        }
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let a = (theta + PI).rem_euclid(TAU) - PI;
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}

/// One explicit Euler step; the action is clamped to the configured limits first.
pub fn step(s: &RobotState, a: Action, lambda: f64, cfg: &SimConfig) -> Result<RobotState> {
    let finite = [s.x, s.y, s.theta, s.t, a.v, a.omega, lambda]
        .iter()
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::Numeric("non-finite state, action or traversability".into()));
    }
    Ok(step_clamped(s, cfg.clamp(a), lambda, cfg.dt))
}

/// Euler step for an already-clamped action, without input checks.
#[inline]
pub fn step_clamped(s: &RobotState, a: Action, lambda: f64, dt: f64) -> RobotState {
    let (sin, cos) = s.theta.sin_cos();
    RobotState {
        x: s.x + dt * lambda * a.v * cos,
        y: s.y + dt * lambda * a.v * sin,
        theta: wrap_angle(s.theta + dt * lambda * a.omega),
        t: s.t + dt,
    }
}

/// `true` iff the traversability is at or below the stuck threshold.
pub fn is_stuck(lambda: f64, lambda_stuck: f64) -> bool {
    lambda <= lambda_stuck
}

/// Traversability of a raster at a world position.
pub fn lookup_lambda(
    raster: &Grid<f64>,
    geom: &GridGeometry,
    x: f64,
    y: f64,
    interp: Interpolation,
) -> Result<f64> {
    grid::sample(raster, geom, x, y, interp)
}

/// Risk-evaluated predicted traversability at a world position; bilinear mode
/// interpolates the risk values of the surrounding cell centers.
pub fn lookup_risk(
    field: &TravField,
    cfg: &RiskConfig,
    x: f64,
    y: f64,
    interp: Interpolation,
) -> Result<f64> {
    let geom = field.geometry();
    let (col, row) = geom.cell_of(x, y).ok_or(Error::OutOfBounds { x, y })?;
    let value = |c: usize, r: usize| risk_value(field, r * geom.width + c, cfg);
    match interp {
        Interpolation::Nearest => value(col, row),
        Interpolation::Bilinear => {
            let u = (x / geom.resolution - 0.5).clamp(0.0, (geom.width - 1) as f64);
            let v = (y / geom.resolution - 0.5).clamp(0.0, (geom.height - 1) as f64);
            let c0 = (u.floor() as usize).min(geom.width.saturating_sub(2));
            let r0 = (v.floor() as usize).min(geom.height.saturating_sub(2));
            let c1 = (c0 + 1).min(geom.width - 1);
            let r1 = (r0 + 1).min(geom.height - 1);
            let (fu, fv) = (u - c0 as f64, v - r0 as f64);
            let a = value(c0, r0)? * (1.0 - fu) + value(c1, r0)? * fu;
            let b = value(c0, r1)? * (1.0 - fu) + value(c1, r1)? * fu;
            Ok(a * (1.0 - fv) + b * fv)
        }
    }
}
