//! Agent models: planar point mass and kinematic unicycle.
//!
//! Axis convention used throughout the crate: `px` is the axis a car at zero
//! heading drives along (its road axis), `py` is the perpendicular in-plane
//! axis (lane offsets, curbs). A car state is `(px, py, v, heading)` with
//! heading measured from the `px` axis; a pedestrian state is
//! `(px, py, vx, vy)`.
//!
//! The unicycle position update advances with the *updated* heading and
//! speed, then scales by the timestep so positions stay in meters:
//! `px+ = px + cos(heading+) * v+ * dt`.

use thiserror::Error;

use crate::autodiff::{Real, VectorMap};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid params: {0}")]
    InvalidParams(&'static str),
}

/// Box limits on pedestrian velocity and acceleration (per axis).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMassParams {
    pub dt: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl PointMassParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0) {
            return Err(DynamicsError::InvalidParams("dt must be positive"));
        }
        if !(self.v_min < self.v_max) || !(self.a_min < self.a_max) {
            return Err(DynamicsError::InvalidParams("min must be below max"));
        }
        Ok(())
    }
}

/// Box limits on car speed, acceleration and yaw rate.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnicycleParams {
    pub dt: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl UnicycleParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0) {
            return Err(DynamicsError::InvalidParams("dt must be positive"));
        }
        if !(self.v_min < self.v_max)
            || !(self.a_min < self.a_max)
            || !(self.omega_min < self.omega_max)
        {
            return Err(DynamicsError::InvalidParams("min must be below max"));
        }
        Ok(())
    }
}

pub const POINT_MASS_STATE_DIM: usize = 4;
pub const POINT_MASS_CONTROL_DIM: usize = 2;
pub const UNICYCLE_STATE_DIM: usize = 4;
pub const UNICYCLE_CONTROL_DIM: usize = 2;

/// One step of the point-mass map: positions gain `dt * v + dt^2/2 * a`,
/// velocities gain `dt * a`.
pub fn point_mass_step(x: &[f64; 4], u: &[f64; 2], params: &PointMassParams) -> [f64; 4] {
    let mut out = [0.0; 4];
    let map = PointMassMap { dt: params.dt };
    let xin: Vec<f64> = x.iter().chain(u.iter()).copied().collect();
    map.eval(&xin, &mut out);
    out
}

/// One backward-Euler step of the unicycle map.
pub fn unicycle_step(x: &[f64; 4], u: &[f64; 2], params: &UnicycleParams) -> [f64; 4] {
    let mut out = [0.0; 4];
    let map = UnicycleMap { dt: params.dt };
    let xin: Vec<f64> = x.iter().chain(u.iter()).copied().collect();
    map.eval(&xin, &mut out);
    out
}

/// Point-mass step as a differentiable map over `(x, u)`.
#[derive(Debug, Clone, Copy)]
pub struct PointMassMap {
    pub dt: f64,
}

impl VectorMap for PointMassMap {
    fn arity(&self) -> usize {
        POINT_MASS_STATE_DIM + POINT_MASS_CONTROL_DIM
    }
    fn codim(&self) -> usize {
        POINT_MASS_STATE_DIM
    }
    fn eval<S: Real>(&self, z: &[S], out: &mut [S]) {
        let dt = self.dt;
        let half_dt2 = 0.5 * dt * dt;
        let (px, py, vx, vy) = (&z[0], &z[1], &z[2], &z[3]);
        let (ax, ay) = (&z[4], &z[5]);
        out[0] = px.clone() + vx.clone() * dt + ax.clone() * half_dt2;
        out[1] = py.clone() + vy.clone() * dt + ay.clone() * half_dt2;
        out[2] = vx.clone() + ax.clone() * dt;
        out[3] = vy.clone() + ay.clone() * dt;
    }
    fn is_affine(&self) -> bool {
        true
    }
}

/// Unicycle step as a differentiable map over `(x, u)`.
#[derive(Debug, Clone, Copy)]
pub struct UnicycleMap {
    pub dt: f64,
}

impl VectorMap for UnicycleMap {
    fn arity(&self) -> usize {
        UNICYCLE_STATE_DIM + UNICYCLE_CONTROL_DIM
    }
    fn codim(&self) -> usize {
        UNICYCLE_STATE_DIM
    }
    // Position updates are nonlinear in (v, heading, accel, omega) only.
    fn hess_sparsity(&self) -> Option<Vec<(usize, usize)>> {
        let p = [2, 3, 4, 5];
        Some(
            p.iter()
                .flat_map(|&i| p.iter().map(move |&j| (i, j)))
                .collect(),
        )
    }
    fn eval<S: Real>(&self, z: &[S], out: &mut [S]) {
        let dt = self.dt;
        let (px, py, v, heading) = (&z[0], &z[1], &z[2], &z[3]);
        let (accel, omega) = (&z[4], &z[5]);
        let heading_next = heading.clone() + omega.clone() * dt;
        let v_next = v.clone() + accel.clone() * dt;
        out[0] = px.clone() + heading_next.cos() * v_next.clone() * dt;
        out[1] = py.clone() + heading_next.sin() * v_next.clone() * dt;
        out[2] = v_next;
        out[3] = heading_next;
    }
}

/// Two-sided bound rows `(val - min, max - val)` for one bounded quantity.
/// Infinite ends are skipped so only finite limits produce rows.
#[derive(Debug, Clone, Copy)]
pub struct BoundRow {
    /// Index of the bounded scalar within the stage vector.
    pub index: usize,
    pub min: f64,
    pub max: f64,
}

/// Stacks `(val - min, max - val) >= 0` entries for each bounded quantity of
/// a trajectory laid out stage-major (`vars_per_stage` scalars per step).
pub fn bound_constraints(rows: &[BoundRow], vars_per_stage: usize, trajectory: &[f64]) -> Vec<f64> {
    assert_eq!(trajectory.len() % vars_per_stage, 0);
    let steps = trajectory.len() / vars_per_stage;
    let mut out = Vec::new();
    for t in 0..steps {
        let stage = &trajectory[t * vars_per_stage..(t + 1) * vars_per_stage];
        for row in rows {
            let val = stage[row.index];
            if row.min.is_finite() {
                out.push(val - row.min);
            }
            if row.max.is_finite() {
                out.push(row.max - val);
            }
        }
    }
    out
}
