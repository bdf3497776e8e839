use nalgebra::Vector4;

use super::basis::{BasisKind, BasisVector};
use super::cost::CostSpec;
use super::{ActorWeights, CriticWeights};
use crate::dynamics::{closed_loop_rate, input_g, ControlInput, ErrorState, GainSet};
use crate::error::Result;
use crate::geometry::PathSpec;

/// Everything needed to evaluate the approximate HJB quantities at a state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlProblem {
    pub path: PathSpec,
    pub gains: GainSet,
    pub cost: CostSpec,
    pub basis: BasisKind,
}

/// Bellman error at one state, with its regressor and normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellmanSample {
    /// `r(zeta, u) + Wc' omega`.
    pub delta: f64,
    /// `sigma'(zeta) (f + g u)`, the gradient of `delta` in `Wc`.
    pub omega: BasisVector,
    /// `sqrt(1 + omega' omega)`.
    pub p: f64,
    pub u: ControlInput,
    pub r: f64,
    /// `f + g u`.
    pub zeta_dot: Vector4<f64>,
}

impl ControlProblem {
    pub fn validate(&self) -> Result<()> {
        self.path.validate()?;
        self.gains.validate()?;
        self.cost.validate()
    }

    /// `V = Wc' sigma(zeta)`.
    pub fn value(&self, wc: &CriticWeights, zeta: &ErrorState) -> f64 {
        wc.0.dot(&self.basis.sigma(zeta))
    }

    /// `u = -1/2 R^-1 g' sigma'' Wa`.
    pub fn policy(&self, wa: &ActorWeights, zeta: &ErrorState) -> ControlInput {
        self.policy_raw(&wa.w, zeta)
    }

    pub(crate) fn policy_raw(&self, wa: &BasisVector, zeta: &ErrorState) -> ControlInput {
        let grad = self.basis.jacobian(zeta).transpose() * wa;
        let u = -0.5 * self.cost.r_inverse() * input_g(zeta).transpose() * grad;
        ControlInput::new(u[0], u[1])
    }

    /// `r(zeta, u) + dV/dzeta (f + g u)` with `u` from the actor. The optimal
    /// Hamiltonian is identically zero, so this is also the Bellman error.
    pub fn hamiltonian(
        &self,
        wc: &CriticWeights,
        wa: &ActorWeights,
        zeta: &ErrorState,
    ) -> Result<f64> {
        Ok(self.bellman_raw(&wc.0, &wa.w, zeta)?.delta)
    }

    pub fn bellman_error(
        &self,
        wc: &CriticWeights,
        wa: &ActorWeights,
        zeta: &ErrorState,
    ) -> Result<BellmanSample> {
        self.bellman_raw(&wc.0, &wa.w, zeta)
    }

    pub(crate) fn bellman_raw(
        &self,
        wc: &BasisVector,
        wa: &BasisVector,
        zeta: &ErrorState,
    ) -> Result<BellmanSample> {
        let u = self.policy_raw(wa, zeta);
        let zeta_dot = closed_loop_rate(zeta, &u, &self.path, &self.gains)?;
        let omega = self.basis.jacobian(zeta) * zeta_dot;
        let r = self.cost.local_cost(zeta, &u);
        Ok(BellmanSample {
            delta: r + wc.dot(&omega),
            p: (1.0 + omega.norm_squared()).sqrt(),
            omega,
            u,
            r,
            zeta_dot,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adp::{BASIS_LEN, INITIAL_WEIGHTS};
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix2, Matrix4x2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn initial() -> BasisVector {
        BasisVector::from(INITIAL_WEIGHTS)
    }

    fn random_state(rng: &mut ChaCha8Rng) -> ErrorState {
        ErrorState::new(
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(-PI..PI),
            rng.random_range(-0.95..0.95),
        )
    }

    fn random_weights(rng: &mut ChaCha8Rng) -> BasisVector {
        BasisVector::from_fn(|_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn value_examples() {
        let p = ControlProblem::default();
        let wc = CriticWeights(initial());
        assert_eq!(p.value(&wc, &ErrorState::default()), 0.0);
        // hand evaluation at zeta(0): 0.5*y*theta + 0.5*s^2 + theta^2
        let z = ErrorState::new(-0.5, 0.25, -PI / 6.0, 0.0);
        let th = -PI / 6.0;
        assert_abs_diff_eq!(
            p.value(&wc, &z),
            0.5 * 0.25 * th + 0.5 * 0.25 + th * th,
            epsilon = 1e-15
        );
        let lin = ControlProblem {
            basis: BasisKind::Linear,
            ..p
        };
        assert_abs_diff_eq!(
            lin.value(&wc, &z),
            0.5 * 0.25 * th + 0.5 * -0.5 + th,
            epsilon = 1e-15
        );
        let a = CriticWeights(BasisVector::from_element(0.3));
        let sum = CriticWeights(wc.0 + a.0);
        assert_abs_diff_eq!(
            p.value(&sum, &z),
            p.value(&wc, &z) + p.value(&a, &z),
            epsilon = 1e-14
        );
    }

    #[test]
    fn policy_examples() {
        let p = ControlProblem::default();
        let zero = ActorWeights::new(BasisVector::zeros(), 1.0);
        let z = ErrorState::new(0.3, -0.2, 0.4, 0.1);
        assert_eq!(p.policy(&zero, &z), ControlInput::default());

        // linear trailing terms: sigma'(0)' Wa = (0.5, 0, 1, 0)
        let lin = ControlProblem {
            basis: BasisKind::Linear,
            ..p
        };
        let wa = ActorWeights::new(initial(), 20.0);
        let u = lin.policy(&wa, &ErrorState::default());
        // matrix oracle
        let g: Matrix4x2<f64> = Matrix4x2::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let grad = Vector4::new(0.5, 0.0, 1.0, 0.0);
        let want = -0.5 * Matrix2::<f64>::identity() * g.transpose() * grad;
        assert_abs_diff_eq!(u.v_e, want[0], epsilon = 1e-15);
        assert_abs_diff_eq!(u.w_e, want[1], epsilon = 1e-15);
        assert_abs_diff_eq!(u.v_e, -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(u.w_e, -0.5, epsilon = 1e-15);

        // quadratic trailing terms: the initial gains command nothing on the path
        assert_eq!(
            p.policy(&wa, &ErrorState::default()),
            ControlInput::default()
        );

        let twice = ActorWeights::new(2.0 * initial(), 20.0);
        let u1 = p.policy(&wa, &z);
        let u2 = p.policy(&twice, &z);
        assert_abs_diff_eq!(u2.v_e, 2.0 * u1.v_e, epsilon = 1e-15);
        assert_abs_diff_eq!(u2.w_e, 2.0 * u1.w_e, epsilon = 1e-15);
    }

    #[test]
    fn hamiltonian_examples() {
        let p = ControlProblem::default();
        let z = ErrorState::new(-0.5, 0.25, -PI / 6.0, 0.0);
        let h0 = p
            .hamiltonian(
                &CriticWeights::zeros(),
                &ActorWeights::new(BasisVector::zeros(), 1.0),
                &z,
            )
            .unwrap();
        assert_abs_diff_eq!(
            h0,
            p.cost.local_cost(&z, &ControlInput::default()),
            epsilon = 1e-15
        );

        // term-wise oracle at zeta(0) with the initial weights
        let wc = CriticWeights(initial());
        let wa = ActorWeights::new(initial(), 20.0);
        let (s, y, th) = (-0.5, 0.25, -PI / 6.0);
        let dv = [2.0 * 0.5 * s, 0.5 * th, 0.5 * y + 2.0 * th, 0.0];
        let v_e = -0.5 * (th.cos() * dv[0] + th.sin() * dv[1]);
        let w_e = -0.5 * dv[2];
        let (k1, k2, vd) = (0.1, 0.05, 0.5);
        let fdot = [
            -k1 * s + th.cos() * v_e,
            vd * th.sin() + th.sin() * v_e,
            w_e,
            k2 * (vd * th.cos() + k1 * s),
        ];
        let r = s * s + y * y + th * th + v_e * v_e + w_e * w_e;
        let want = r + (0..4).map(|i| dv[i] * fdot[i]).sum::<f64>();
        assert_abs_diff_eq!(p.hamiltonian(&wc, &wa, &z).unwrap(), want, epsilon = 1e-14);
        let b = p.bellman_error(&wc, &wa, &z).unwrap();
        assert_eq!(b.delta, p.hamiltonian(&wc, &wa, &z).unwrap());
    }

    #[test]
    fn bellman_with_zero_critic_is_running_cost() {
        let p = ControlProblem::default();
        let wa = ActorWeights::new(initial(), 20.0);
        let z = ErrorState::new(0.4, -0.3, 0.2, 0.5);
        let b = p.bellman_error(&CriticWeights::zeros(), &wa, &z).unwrap();
        assert_eq!(b.delta, p.cost.local_cost(&z, &p.policy(&wa, &z)));
        assert_eq!(b.delta, b.r);
    }

    #[test]
    fn bellman_gradient_is_omega() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for basis in [BasisKind::Quadratic, BasisKind::Linear] {
            let p = ControlProblem {
                basis,
                ..Default::default()
            };
            for _ in 0..50 {
                let z = random_state(&mut rng);
                let wc = random_weights(&mut rng);
                let wa = random_weights(&mut rng);
                let b = p.bellman_raw(&wc, &wa, &z).unwrap();
                let h = 1e-6;
                for i in 0..BASIS_LEN {
                    let mut wp = wc;
                    let mut wm = wc;
                    wp[i] += h;
                    wm[i] -= h;
                    let fd = (p.bellman_raw(&wp, &wa, &z).unwrap().delta
                        - p.bellman_raw(&wm, &wa, &z).unwrap().delta)
                        / (2.0 * h);
                    assert!((fd - b.omega[i]).abs() <= 1e-6 * (1.0 + b.omega[i].abs()));
                }
            }
        }
    }

    #[test]
    fn bellman_is_quadratic_in_actor_weights() {
        // delta(Wa) along a line is a parabola: third differences vanish
        let p = ControlProblem::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let z = random_state(&mut rng);
            let wc = random_weights(&mut rng);
            let wa = random_weights(&mut rng);
            let dir = random_weights(&mut rng);
            let d = |t: f64| p.bellman_raw(&wc, &(wa + t * dir), &z).unwrap().delta;
            let third = d(3.0) - 3.0 * d(2.0) + 3.0 * d(1.0) - d(0.0);
            assert!(third.abs() < 1e-9 * (1.0 + d(3.0).abs()));
        }
    }

    #[test]
    fn bellman_rejects_saturated_phi() {
        let p = ControlProblem::default();
        let z = ErrorState::new(0.0, 0.0, 0.0, 1.0);
        let r = p.bellman_error(
            &CriticWeights::zeros(),
            &ActorWeights::new(BasisVector::zeros(), 1.0),
            &z,
        );
        assert!(r.is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn normalized_regressor_is_bounded(
                s in -5.0f64..5.0, y in -5.0f64..5.0, th in -PI..PI, phi in -0.999f64..0.999,
                scale in -50.0f64..50.0,
            ) {
                let p = ControlProblem::default();
                let z = ErrorState::new(s, y, th, phi);
                let w = scale * BasisVector::from(INITIAL_WEIGHTS);
                let b = p.bellman_raw(&w, &w, &z).unwrap();
                prop_assert!((b.omega / b.p).norm() <= 1.0);
            }
        }
    }
}
