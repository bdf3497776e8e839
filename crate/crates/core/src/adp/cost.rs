use nalgebra::{Matrix2, Matrix3, Matrix4, SymmetricEigen};

use crate::dynamics::{ControlInput, ErrorState};
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Quadratic running cost `r = zeta' Qbar zeta + u' R u`, where `Qbar` embeds
/// `Q` on the tracking error and leaves `phi` unweighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSpec {
    pub q: Matrix3<f64>,
    pub r: Matrix2<f64>,
}

impl Default for CostSpec {
    fn default() -> Self {
        Self {
            q: Matrix3::identity(),
            r: Matrix2::identity(),
        }
    }
}

impl CostSpec {
    pub fn validate(&self) -> Result<()> {
        check_spd("cost.Q", self.q.as_slice(), 3)?;
        check_spd("cost.R", self.r.as_slice(), 2)
    }

    pub fn q_bar(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.q);
        m
    }

    /// Smallest eigenvalue of `Q`.
    pub fn q_lower(&self) -> f64 {
        SymmetricEigen::new(self.q).eigenvalues.min()
    }

    /// Largest eigenvalue of `Q`.
    pub fn q_upper(&self) -> f64 {
        SymmetricEigen::new(self.q).eigenvalues.max()
    }

    pub fn r_inverse(&self) -> Matrix2<f64> {
        self.r.try_inverse().unwrap_or_else(Matrix2::zeros)
    }

    pub fn local_cost(&self, zeta: &ErrorState, u: &ControlInput) -> f64 {
        let e = zeta.e();
        let u = u.to_vector();
        (e.transpose() * self.q * e)[0] + (u.transpose() * self.r * u)[0]
    }
}

fn check_spd(name: &'static str, data: &[f64], n: usize) -> Result<()> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(name, "entries must be finite"));
    }
    let m = nalgebra::DMatrix::from_column_slice(n, n, data);
    let scale = m.amax().max(1.0);
    if (&m - m.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::invalid(name, "must be symmetric"));
    }
    let min_eig = m.symmetric_eigenvalues().min();
    if min_eig <= 0.0 {
        return Err(Error::invalid(
            name,
            format!("must be positive definite (smallest eigenvalue {min_eig})"),
        ));
    }
    Ok(())
}

/// `r(zeta, u)` for the given cost weights.
pub fn local_cost(zeta: &ErrorState, u: &ControlInput, cost: &CostSpec) -> f64 {
    cost.local_cost(zeta, u)
}
