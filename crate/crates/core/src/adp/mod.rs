//! Actor-critic approximation of the optimal value function and policy.
//!
//! The critic `V = Wc' sigma(zeta)` and the actor
//! `u = -1/2 R^-1 g' sigma'(zeta)' Wa` share one basis. The critic descends
//! the normalized squared Bellman error at the current state and at a fixed
//! grid of sampled states (concurrent learning); the actor tracks the critic
//! through a smooth projection that keeps it inside a ball.

mod basis;
mod bellman;
mod cost;
mod diagnostics;
mod update;

pub use basis::{BasisJacobian, BasisKind, BasisVector, BASIS_LEN};
pub use bellman::{BellmanSample, ControlProblem};
pub use cost::{local_cost, CostSpec};
pub use diagnostics::{
    gain_condition_check, lipschitz_estimate, rank_check, GainConditionReport, RankReport,
};
pub(crate) use update::concurrent_term;
pub use update::{actor_rate, critic_rate, project, LearningGains, DEFAULT_PROJECTION_LAYER};

use crate::dynamics::ErrorState;
use crate::error::{Error, Result};

/// Initial weights for both critic and actor in the reference scenario.
pub const INITIAL_WEIGHTS: [f64; BASIS_LEN] = [0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.5, 0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticWeights(pub BasisVector);

/// Actor weights together with the radius of the ball they are kept in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorWeights {
    pub w: BasisVector,
    pub bound: f64,
}

impl CriticWeights {
    pub fn zeros() -> Self {
        Self(BasisVector::zeros())
    }
}

impl ActorWeights {
    pub fn new(w: BasisVector, bound: f64) -> Self {
        Self { w, bound }
    }
}

/// Sampled states used for concurrent learning.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub points: Vec<ErrorState>,
}

/// Default axis values of the 3x3x3x3 sampling grid.
pub const DEFAULT_GRID_AXES: [[f64; 3]; 4] = [
    [-0.75, 0.0, 0.75],
    [-0.75, 0.0, 0.75],
    [
        -std::f64::consts::FRAC_PI_6,
        0.0,
        std::f64::consts::FRAC_PI_6,
    ],
    [-0.9, 0.0, 0.9],
];

impl Default for SampleGrid {
    fn default() -> Self {
        Self::tensor(&DEFAULT_GRID_AXES)
    }
}

impl SampleGrid {
    pub fn from_points(points: Vec<ErrorState>) -> Self {
        Self { points }
    }

    /// Tensor-product grid over `(s, y, theta, phi)` axes, `s` varying slowest.
    pub fn tensor<A: AsRef<[f64]>>(axes: &[A; 4]) -> Self {
        let mut points = Vec::new();
        for &s in axes[0].as_ref() {
            for &y in axes[1].as_ref() {
                for &theta in axes[2].as_ref() {
                    for &phi in axes[3].as_ref() {
                        points.push(ErrorState { s, y, theta, phi });
                    }
                }
            }
        }
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Every point's negation is also a grid point.
    pub fn is_symmetric(&self) -> bool {
        self.points.iter().all(|p| {
            self.points
                .iter()
                .any(|q| q.s == -p.s && q.y == -p.y && q.theta == -p.theta && q.phi == -p.phi)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.len() < BASIS_LEN {
            return Err(Error::invalid(
                "adp.grid",
                format!("needs at least {BASIS_LEN} points, got {}", self.len()),
            ));
        }
        if !self.is_symmetric() {
            return Err(Error::invalid(
                "adp.grid",
                "must be symmetric about the origin",
            ));
        }
        if let Some(p) = self.points.iter().find(|p| p.phi.abs() >= 1.0) {
            return Err(Error::invalid(
                "adp.grid.phi",
                format!("phi = {} is outside (-1, 1)", p.phi),
            ));
        }
        Ok(())
    }
}
