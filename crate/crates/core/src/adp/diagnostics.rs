//! Runtime checks of the rank condition on the sampled grid and of the
//! sufficient gain conditions for bounded convergence.

use nalgebra::{SMatrix, SymmetricEigen};

use super::basis::{BasisVector, BASIS_LEN};
use super::bellman::ControlProblem;
use super::cost::CostSpec;
use super::update::LearningGains;
use super::{ActorWeights, SampleGrid};
use crate::dynamics::{drift_f, ErrorState};
use crate::error::Result;

/// Eigenvalues below this fraction of the largest count as zero.
pub const RANK_RELATIVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    /// Smallest eigenvalue of `sum_j omega_j omega_j' / p_j`.
    pub c_lower: f64,
    pub c_upper: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

impl RankReport {
    pub fn is_full(&self) -> bool {
        self.rank == BASIS_LEN && self.c_lower > 0.0
    }
}

/// `sum_j omega_j omega_j' / p_j` over the grid, in grid order.
pub fn concurrent_gram(
    problem: &ControlProblem,
    grid: &SampleGrid,
    wa: &BasisVector,
) -> Result<SMatrix<f64, BASIS_LEN, BASIS_LEN>> {
    let mut m = SMatrix::<f64, BASIS_LEN, BASIS_LEN>::zeros();
    // omega does not depend on the critic weights
    let wc = BasisVector::zeros();
    for point in &grid.points {
        let b = problem.bellman_raw(&wc, wa, point)?;
        m += b.omega * b.omega.transpose() / b.p;
    }
    Ok(m)
}

pub fn rank_check(
    problem: &ControlProblem,
    grid: &SampleGrid,
    wa: &ActorWeights,
) -> Result<RankReport> {
    let m = concurrent_gram(problem, grid, &wa.w)?;
    let m = (m + m.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let largest = eigenvalues.last().copied().unwrap_or(0.0);
    let rank = if largest > 0.0 {
        eigenvalues
            .iter()
            .filter(|&&e| e > RANK_RELATIVE_TOL * largest)
            .count()
    } else {
        0
    };
    Ok(RankReport {
        rank,
        c_lower: eigenvalues[0],
        c_upper: largest,
        eigenvalues,
    })
}

/// Estimate of the drift's linear growth constant, `max ||f(zeta)|| / ||zeta||`
/// over the given samples (the origin is skipped).
pub fn lipschitz_estimate(problem: &ControlProblem, samples: &[ErrorState]) -> Result<f64> {
    let mut best = 0.0f64;
    for z in samples {
        let n = z.to_vector().norm();
        if n == 0.0 {
            continue;
        }
        let f = drift_f(z, &problem.path, &problem.gains)?;
        best = best.max(f.norm() / n);
    }
    Ok(best)
}

/// Evaluation of the two sufficient gain conditions:
///
/// 1. `q_lower > eta_c1 * eps * L_f / 2`
/// 2. `c_lower > N eta_a / (2 eta_c2) + N eta_c1 eps L_f / (2 eta_c2)`
///
/// `eps` bounds the gradient of the reconstruction error and must be
/// supplied by the user; `L_f` is an estimate. Purely diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainConditionReport {
    pub q_lower: f64,
    pub condition1_rhs: f64,
    pub condition1_margin: f64,
    pub c_lower: f64,
    pub condition2_rhs: f64,
    pub condition2_margin: f64,
}

impl GainConditionReport {
    pub fn condition1_holds(&self) -> bool {
        self.condition1_margin > 0.0
    }

    pub fn condition2_holds(&self) -> bool {
        self.condition2_margin > 0.0
    }
}

pub fn gain_condition_check(
    cost: &CostSpec,
    gains: &LearningGains,
    c_lower: f64,
    n: usize,
    eps_bound: f64,
    lf_estimate: f64,
) -> GainConditionReport {
    let n = n as f64;
    let q_lower = cost.q_lower();
    let condition1_rhs = gains.eta_c1 * eps_bound * lf_estimate / 2.0;
    let condition2_rhs = n * gains.eta_a / (2.0 * gains.eta_c2)
        + n * gains.eta_c1 * eps_bound * lf_estimate / (2.0 * gains.eta_c2);
    GainConditionReport {
        q_lower,
        condition1_rhs,
        condition1_margin: q_lower - condition1_rhs,
        c_lower,
        condition2_rhs,
        condition2_margin: c_lower - condition2_rhs,
    }
}
