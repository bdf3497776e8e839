use super::basis::BasisVector;
use super::bellman::ControlProblem;
use super::{ActorWeights, CriticWeights, SampleGrid};
use crate::dynamics::ErrorState;
use crate::error::{Error, Result};

/// Width of the projection boundary layer as a fraction of the bound.
pub const DEFAULT_PROJECTION_LAYER: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningGains {
    pub eta_c1: f64,
    pub eta_c2: f64,
    pub eta_a: f64,
}

impl Default for LearningGains {
    fn default() -> Self {
        Self {
            eta_c1: 0.5,
            eta_c2: 10.0,
            eta_a: 5.0,
        }
    }
}

impl LearningGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("adp.eta_c1", self.eta_c1),
            ("adp.eta_c2", self.eta_c2),
            ("adp.eta_a", self.eta_a),
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

/// Concurrent-learning critic law:
/// `-eta_c1 (omega/p) delta - eta_c2/N sum_j (omega_j/p_j) delta_j`.
///
/// The grid sum runs in a fixed order so results are bit-reproducible.
pub fn critic_rate(
    problem: &ControlProblem,
    wc: &CriticWeights,
    wa: &ActorWeights,
    zeta: &ErrorState,
    grid: &SampleGrid,
    gains: &LearningGains,
) -> Result<BasisVector> {
    critic_rate_raw(problem, &wc.0, &wa.w, zeta, grid, gains)
}

pub(crate) fn critic_rate_raw(
    problem: &ControlProblem,
    wc: &BasisVector,
    wa: &BasisVector,
    zeta: &ErrorState,
    grid: &SampleGrid,
    gains: &LearningGains,
) -> Result<BasisVector> {
    let here = problem.bellman_raw(wc, wa, zeta)?;
    let grid_term = concurrent_term(problem, wc, wa, grid)?;
    Ok(-gains.eta_c1 * here.omega * (here.delta / here.p) - gains.eta_c2 * grid_term)
}

/// `(1/N) sum_j (omega_j / p_j) delta_j`, summed in grid order.
pub(crate) fn concurrent_term(
    problem: &ControlProblem,
    wc: &BasisVector,
    wa: &BasisVector,
    grid: &SampleGrid,
) -> Result<BasisVector> {
    if grid.is_empty() {
        return Err(Error::invalid("adp.grid", "sample grid is empty"));
    }
    let mut acc = BasisVector::zeros();
    for point in &grid.points {
        let b = problem.bellman_raw(wc, wa, point)?;
        acc += b.omega * (b.delta / b.p);
    }
    Ok(acc / grid.len() as f64)
}

/// Smooth ball projection of a weight rate.
///
/// Inside `bound * (1 - layer)` the rate passes through. In the boundary
/// layer an outward-pointing rate loses a fraction of its radial component
/// that grows linearly from 0 to 1 across the layer; at and beyond the bound
/// the radial component is removed completely.
pub fn project(w: &BasisVector, raw: &BasisVector, bound: f64, layer: f64) -> BasisVector {
    let norm_sq = w.norm_squared();
    let inner = bound * (1.0 - layer);
    let outward = w.dot(raw);
    if norm_sq <= inner * inner || outward <= 0.0 {
        return *raw;
    }
    let norm = norm_sq.sqrt();
    let scale = if bound > inner {
        ((norm - inner) / (bound - inner)).min(1.0)
    } else {
        1.0
    };
    raw - w * (scale * outward / norm_sq)
}

/// Actor law `proj{-eta_a (Wa - Wc)}`.
pub fn actor_rate(wa: &ActorWeights, wc: &CriticWeights, eta_a: f64, layer: f64) -> BasisVector {
    let raw = -eta_a * (wa.w - wc.0);
    project(&wa.w, &raw, wa.bound, layer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adp::{BasisKind, BASIS_LEN, INITIAL_WEIGHTS};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn initial() -> BasisVector {
        BasisVector::from(INITIAL_WEIGHTS)
    }

    fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> BasisVector {
        BasisVector::from_fn(|_, _| rng.random_range(-r..r))
    }

    #[test]
    fn zero_gains_give_zero_rate() {
        let p = ControlProblem::default();
        let gains = LearningGains {
            eta_c1: 0.0,
            eta_c2: 0.0,
            eta_a: 1.0,
        };
        let wc = CriticWeights(initial());
        let wa = ActorWeights::new(initial(), 20.0);
        let z = ErrorState::new(0.1, 0.2, 0.3, 0.4);
        let r = critic_rate(&p, &wc, &wa, &z, &SampleGrid::default(), &gains).unwrap();
        assert_eq!(r, BasisVector::zeros());
    }

    #[test]
    fn empty_grid_is_rejected() {
        let p = ControlProblem::default();
        let r = critic_rate(
            &p,
            &CriticWeights::zeros(),
            &ActorWeights::new(BasisVector::zeros(), 1.0),
            &ErrorState::default(),
            &SampleGrid::from_points(vec![]),
            &LearningGains::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn grid_term_is_gradient_of_normalized_squared_error() {
        // With eta_c1 = 0 the rate equals -grad_Wc of
        // (eta_c2 / 2N) sum_j delta_j^2 / p_j; p_j does not depend on Wc.
        let p = ControlProblem::default();
        let grid = SampleGrid::default();
        let gains = LearningGains {
            eta_c1: 0.0,
            eta_c2: 10.0,
            eta_a: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let wa = random_vec(&mut rng, 1.0);
        let wc = random_vec(&mut rng, 1.0);
        let objective = |w: &BasisVector| -> f64 {
            let n = grid.len() as f64;
            grid.points
                .iter()
                .map(|z| {
                    let b = p.bellman_raw(w, &wa, z).unwrap();
                    b.delta * b.delta / b.p
                })
                .sum::<f64>()
                * gains.eta_c2
                / (2.0 * n)
        };
        let rate = critic_rate_raw(&p, &wc, &wa, &ErrorState::default(), &grid, &gains).unwrap();
        let h = 1e-6;
        for i in 0..BASIS_LEN {
            let mut wp = wc;
            let mut wm = wc;
            wp[i] += h;
            wm[i] -= h;
            let fd = (objective(&wp) - objective(&wm)) / (2.0 * h);
            assert!(
                (rate[i] + fd).abs() < 1e-6 * (1.0 + fd.abs()),
                "{i}: {} vs {}",
                rate[i],
                -fd
            );
        }
    }

    #[test]
    fn single_point_grid_substitution() {
        let p = ControlProblem {
            basis: BasisKind::Linear,
            ..Default::default()
        };
        let z = ErrorState::new(-0.2, 0.6, 0.9, -0.3);
        let grid = SampleGrid::from_points(vec![z]);
        let gains = LearningGains {
            eta_c1: 0.5,
            eta_c2: 1.0,
            eta_a: 1.0,
        };
        let wc = initial() * 0.7;
        let wa = initial();
        let b = p.bellman_raw(&wc, &wa, &z).unwrap();
        let want = -(gains.eta_c1 + 1.0) * b.omega * (b.delta / b.p);
        let got = critic_rate_raw(&p, &wc, &wa, &z, &grid, &gains).unwrap();
        assert!((got - want).amax() < 1e-14);
    }

    #[test]
    fn actor_rate_interior() {
        let w = initial();
        let wa = ActorWeights::new(w, 100.0);
        assert_eq!(
            actor_rate(&wa, &CriticWeights(w), 5.0, 0.01),
            BasisVector::zeros()
        );
        let wc = CriticWeights(w * 0.5);
        let r = actor_rate(&wa, &wc, 5.0, 0.01);
        assert_eq!(r, -5.0 * (wa.w - wc.0));
    }

    #[test]
    fn projection_never_points_outward_at_the_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let bound = rng.random_range(0.5..5.0);
            let w = random_vec(&mut rng, 1.0);
            let w = w * (bound / w.norm());
            let mut target = random_vec(&mut rng, 10.0);
            // make the raw rate point outward
            if (target - w).dot(&w) <= 0.0 {
                target = w * 3.0;
            }
            let wa = ActorWeights::new(w, bound);
            let raw = -2.0 * (w - target);
            let r = actor_rate(&wa, &CriticWeights(target), 2.0, 0.01);
            assert!(r.dot(&w) <= 1e-12 * raw.norm() * bound, "{}", r.dot(&w));
            assert!(r.norm() <= raw.norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn projection_is_continuous_across_the_layer() {
        let w0 = initial();
        let raw = w0 * 2.0;
        let bound = 10.0;
        let inner = bound * (1.0 - 0.01);
        let at_inner = w0 * (inner / w0.norm());
        let just_in = project(&(at_inner * (1.0 - 1e-12)), &raw, bound, 0.01);
        let just_out = project(&(at_inner * (1.0 + 1e-12)), &raw, bound, 0.01);
        assert!((just_in - just_out).amax() < 1e-9);
        let at_bound = w0 * (bound / w0.norm());
        let r = project(&at_bound, &raw, bound, 0.01);
        assert_abs_diff_eq!(r.dot(&at_bound), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn learning_gain_validation() {
        assert!(LearningGains::default().validate().is_ok());
        let bad = LearningGains {
            eta_a: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
