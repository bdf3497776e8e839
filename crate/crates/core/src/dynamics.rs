//! Closed-loop error dynamics in the Serret-Frenet frame.
//!
//! With the virtual target advancing at `v_des cos(theta) + k1 s` and the
//! auxiliary state `phi = tanh(k2 s_p)`, the error
//! `zeta = (s, y, theta, phi)` obeys the control-affine system
//! `zeta_dot = f(zeta) + g(zeta) u` with `u = (v_e, w_e)`.

use nalgebra::{Matrix4, Matrix4x2, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, PathSpec, WorldPose};

/// Largest `|phi|` accepted when mapping back to a path parameter.
pub const PHI_LIMIT: f64 = 1.0 - 1e-12;

/// `zeta = (s, y, theta, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorState {
    pub s: f64,
    pub y: f64,
    pub theta: f64,
    pub phi: f64,
}

impl ErrorState {
    /// Builds a state with `theta` wrapped to `(-pi, pi]`.
    pub fn new(s: f64, y: f64, theta: f64, phi: f64) -> Self {
        Self {
            s,
            y,
            theta: wrap_angle(theta),
            phi,
        }
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            s: v[0],
            y: v[1],
            theta: v[2],
            phi: v[3],
        }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.s, self.y, self.theta, self.phi)
    }

    /// The tracking error `e = (s, y, theta)`.
    pub fn e(&self) -> Vector3<f64> {
        Vector3::new(self.s, self.y, self.theta)
    }

    pub fn check_phi(&self) -> Result<()> {
        if self.phi.abs() < 1.0 {
            Ok(())
        } else {
            Err(Error::PhiOutOfRange { phi: self.phi })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSet {
    pub k1: f64,
    pub k2: f64,
    pub v_des: f64,
}

impl Default for GainSet {
    fn default() -> Self {
        Self {
            k1: 0.1,
            k2: 0.05,
            v_des: 0.5,
        }
    }
}

impl GainSet {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gains.k1", self.k1),
            ("gains.k2", self.k2),
            ("gains.v_des", self.v_des),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Auxiliary control `u = (v_e, w_e)`, the deviation from steady state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub v_e: f64,
    pub w_e: f64,
}

impl ControlInput {
    pub fn new(v_e: f64, w_e: f64) -> Self {
        Self { v_e, w_e }
    }

    pub fn to_vector(&self) -> nalgebra::Vector2<f64> {
        nalgebra::Vector2::new(self.v_e, self.w_e)
    }
}

/// Nominal inputs `(v_ss, w_ss)` that keep the vehicle on the path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SteadyState {
    pub v_ss: f64,
    pub w_ss: f64,
}

/// Linear and angular speed actually applied to the unicycle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleCommand {
    pub v: f64,
    pub w: f64,
}

/// Path parameter of the virtual target, `atanh(phi) / k2`.
pub fn sp_from_phi(phi: f64, gains: &GainSet) -> Result<f64> {
    if phi.abs() < PHI_LIMIT {
        // std's atanh is not exactly odd; evaluate on |phi|
        Ok((phi.abs().atanh() / gains.k2).copysign(phi))
    } else {
        Err(Error::PhiOutOfRange { phi })
    }
}

/// Curvature at the virtual target recovered from `phi`.
pub fn curvature_at(phi: f64, path: &PathSpec, gains: &GainSet) -> Result<f64> {
    path.curvature(sp_from_phi(phi, gains)?)
}

/// Virtual target progression `v_des cos(theta) + k1 s`.
pub fn virtual_target_rate(zeta: &ErrorState, gains: &GainSet) -> f64 {
    gains.v_des * zeta.theta.cos() + gains.k1 * zeta.s
}

/// `k2 (1 - phi^2) (v_des cos(theta) + k1 s)`; `sech^2(atanh(phi)) = 1 - phi^2`.
pub fn phi_rate(zeta: &ErrorState, gains: &GainSet) -> Result<f64> {
    zeta.check_phi()?;
    Ok(gains.k2 * (1.0 - zeta.phi * zeta.phi) * virtual_target_rate(zeta, gains))
}

pub fn drift_f(zeta: &ErrorState, path: &PathSpec, gains: &GainSet) -> Result<Vector4<f64>> {
    zeta.check_phi()?;
    let kappa = curvature_at(zeta.phi, path, gains)?;
    Ok(drift_with_curvature(zeta, kappa, gains))
}

fn drift_with_curvature(zeta: &ErrorState, kappa: f64, gains: &GainSet) -> Vector4<f64> {
    let GainSet { k1, k2, v_des } = *gains;
    let ErrorState { s, y, theta, phi } = *zeta;
    let (sin_t, cos_t) = theta.sin_cos();
    let target = v_des * cos_t + k1 * s;
    Vector4::new(
        kappa * y * v_des * cos_t + k1 * kappa * s * y - k1 * s,
        v_des * sin_t - kappa * s * v_des * cos_t - k1 * kappa * s * s,
        kappa * v_des - kappa * target,
        k2 * (1.0 - phi * phi) * target,
    )
}

/// Input matrix with columns `(cos theta, sin theta, 0, 0)` and `(0, 0, 1, 0)`.
pub fn input_g(zeta: &ErrorState) -> Matrix4x2<f64> {
    let (sin_t, cos_t) = zeta.theta.sin_cos();
    Matrix4x2::new(cos_t, 0.0, sin_t, 0.0, 0.0, 1.0, 0.0, 0.0)
}

/// `f(zeta) + g(zeta) u`.
pub fn closed_loop_rate(
    zeta: &ErrorState,
    u: &ControlInput,
    path: &PathSpec,
    gains: &GainSet,
) -> Result<Vector4<f64>> {
    Ok(drift_f(zeta, path, gains)? + input_g(zeta) * u.to_vector())
}

/// Jacobian of `f(zeta) + g(zeta) u` with respect to `zeta`.
pub fn closed_loop_jacobian(
    zeta: &ErrorState,
    u: &ControlInput,
    path: &PathSpec,
    gains: &GainSet,
) -> Result<Matrix4<f64>> {
    zeta.check_phi()?;
    let GainSet { k1, k2, v_des } = *gains;
    let ErrorState { s, y, theta, phi } = *zeta;
    let sp = sp_from_phi(phi, gains)?;
    let kappa = path.curvature(sp)?;
    let one_m = 1.0 - phi * phi;
    // d kappa / d phi through s_p = atanh(phi) / k2
    let dkappa = path.curvature_slope(sp)? / (k2 * one_m);
    let (sin_t, cos_t) = theta.sin_cos();
    let target = v_des * cos_t + k1 * s;

    let mut j = Matrix4::zeros();
    j[(0, 0)] = k1 * kappa * y - k1;
    j[(0, 1)] = kappa * v_des * cos_t + k1 * kappa * s;
    j[(0, 2)] = -kappa * y * v_des * sin_t - sin_t * u.v_e;
    j[(0, 3)] = dkappa * (y * v_des * cos_t + k1 * s * y);

    j[(1, 0)] = -kappa * v_des * cos_t - 2.0 * k1 * kappa * s;
    j[(1, 2)] = v_des * cos_t + kappa * s * v_des * sin_t + cos_t * u.v_e;
    j[(1, 3)] = dkappa * (-s * v_des * cos_t - k1 * s * s);

    j[(2, 0)] = -kappa * k1;
    j[(2, 2)] = kappa * v_des * sin_t;
    j[(2, 3)] = dkappa * (v_des - target);

    j[(3, 0)] = k2 * one_m * k1;
    j[(3, 2)] = -k2 * one_m * v_des * sin_t;
    j[(3, 3)] = -2.0 * k2 * phi * target;
    Ok(j)
}

/// `(v_des, kappa v_des)` with the curvature taken at the virtual target.
pub fn steady_state_control(
    zeta: &ErrorState,
    path: &PathSpec,
    gains: &GainSet,
) -> Result<SteadyState> {
    let kappa = curvature_at(zeta.phi, path, gains)?;
    Ok(SteadyState {
        v_ss: gains.v_des,
        w_ss: kappa * gains.v_des,
    })
}

pub fn total_control(u: &ControlInput, ss: &SteadyState) -> VehicleCommand {
    VehicleCommand {
        v: u.v_e + ss.v_ss,
        w: u.w_e + ss.w_ss,
    }
}

/// Unicycle kinematics `(v cos theta_b, v sin theta_b, w)`.
pub fn world_kinematics(pose: &WorldPose, v: f64, w: f64) -> Vector3<f64> {
    let (sin_b, cos_b) = pose.theta_b.sin_cos();
    Vector3::new(v * cos_b, v * sin_b, w)
}
