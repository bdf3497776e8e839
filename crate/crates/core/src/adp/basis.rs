//! Quadratic-order basis for the value function.
//!
//! The six cross terms `z1 z2, z1 z3, z1 z4, z2 z3, z2 z4, z3 z4` are shared by
//! both variants. The three trailing terms are either the squares
//! `z1^2, z2^2, z3^2` ([`BasisKind::Quadratic`], default) or the bare
//! coordinates `z1, z2, z3` ([`BasisKind::Linear`]). With linear trailing
//! terms the value gradient is nonzero at the origin, so the greedy policy
//! commands a constant input on the path.

use std::fmt;
use std::str::FromStr;

use nalgebra::{SMatrix, SVector};

use crate::dynamics::ErrorState;

pub const BASIS_LEN: usize = 9;

pub type BasisVector = SVector<f64, BASIS_LEN>;
pub type BasisJacobian = SMatrix<f64, BASIS_LEN, 4>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisKind {
    #[default]
    Quadratic,
    Linear,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Quadratic => "quadratic",
            BasisKind::Linear => "linear",
        })
    }
}

impl FromStr for BasisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quadratic" => Ok(BasisKind::Quadratic),
            "linear" => Ok(BasisKind::Linear),
            other => Err(format!(
                "unknown basis `{other}` (expected quadratic or linear)"
            )),
        }
    }
}

impl BasisKind {
    pub fn sigma(self, zeta: &ErrorState) -> BasisVector {
        let [a, b, c, d] = [zeta.s, zeta.y, zeta.theta, zeta.phi];
        let (t1, t2, t3) = match self {
            BasisKind::Quadratic => (a * a, b * b, c * c),
            BasisKind::Linear => (a, b, c),
        };
        BasisVector::from([a * b, a * c, a * d, b * c, b * d, c * d, t1, t2, t3])
    }

    /// Row `i` is the gradient of basis element `i` with respect to `zeta`.
    pub fn jacobian(self, zeta: &ErrorState) -> BasisJacobian {
        let [a, b, c, d] = [zeta.s, zeta.y, zeta.theta, zeta.phi];
        let (t1, t2, t3) = match self {
            BasisKind::Quadratic => (2.0 * a, 2.0 * b, 2.0 * c),
            BasisKind::Linear => (1.0, 1.0, 1.0),
        };
        #[rustfmt::skip]
        let j = BasisJacobian::from_row_slice(&[
            b,   a,   0.0, 0.0,
            c,   0.0, a,   0.0,
            d,   0.0, 0.0, a,
            0.0, c,   b,   0.0,
            0.0, d,   0.0, b,
            0.0, 0.0, d,   c,
            t1,  0.0, 0.0, 0.0,
            0.0, t2,  0.0, 0.0,
            0.0, 0.0, t3,  0.0,
        ]);
        j
    }
}
