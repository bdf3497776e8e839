//! Offline trapezoidal direct-collocation oracle.
//!
//! States and controls at every node are decision variables, with the first
//! state pinned to the initial condition. Dynamics enter through the
//! trapezoidal defects, which are squared into a quadratic penalty. The
//! penalized objective is minimized with L-BFGS and the penalty weight is
//! raised tenfold between rounds.

use std::collections::VecDeque;
use std::io::{self, Write};

use log::{debug, info};
use nalgebra::{DVector, Vector2, Vector4};

use crate::adp::{ControlProblem, CostSpec};
use crate::dynamics::{
    closed_loop_jacobian, closed_loop_rate, input_g, sp_from_phi, steady_state_control,
    total_control, ControlInput, ErrorState, GainSet,
};
use crate::error::{Error, Result};
use crate::geometry::{world_from_frenet, wrap_angle, FrameOffset, PathSpec, WorldPose};
use crate::sim::{accumulated_cost, fmt_num, TrajectoryLog, CSV_STATE_COLUMNS};

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationProblem {
    pub nodes: usize,
    pub horizon: f64,
    pub zeta0: ErrorState,
    /// Penalty weight of the first round.
    pub penalty0: f64,
    pub penalty_growth: f64,
    pub rounds: usize,
    /// Inner stopping tolerance on the max-norm of the penalized gradient.
    pub grad_tol: f64,
    /// L-BFGS iteration cap per round.
    pub max_iters: usize,
    pub memory: usize,
}

impl Default for CollocationProblem {
    fn default() -> Self {
        Self {
            nodes: 120,
            horizon: 60.0,
            zeta0: ErrorState::new(-0.5, 0.25, -std::f64::consts::FRAC_PI_6, 0.0),
            penalty0: 1.0,
            penalty_growth: 10.0,
            rounds: 8,
            grad_tol: 1e-6,
            max_iters: 20_000,
            memory: 10,
        }
    }
}

/// Acceptance thresholds of a returned solution.
pub const DEFECT_TOL: f64 = 1e-6;
pub const FINAL_GRADIENT_TOL: f64 = 1e-3;

impl CollocationProblem {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::invalid("baseline.nodes", "must be at least 2"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid(
                "baseline.horizon",
                "must be positive and finite",
            ));
        }
        if !(self.penalty0.is_finite() && self.penalty0 > 0.0) {
            return Err(Error::invalid(
                "baseline.penalty0",
                "must be positive and finite",
            ));
        }
        if !(self.penalty_growth.is_finite() && self.penalty_growth >= 1.0) {
            return Err(Error::invalid(
                "baseline.penalty_growth",
                "must be at least 1",
            ));
        }
        if self.rounds == 0 {
            return Err(Error::invalid("baseline.rounds", "must be at least 1"));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(Error::invalid(
                "baseline.grad_tol",
                "must be positive and finite",
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("baseline.max_iters", "must be at least 1"));
        }
        if self.memory == 0 {
            return Err(Error::invalid("baseline.memory", "must be at least 1"));
        }
        self.zeta0.check_phi().map_err(|_| {
            Error::invalid(
                "baseline.zeta0",
                format!("phi = {} is outside (-1, 1)", self.zeta0.phi),
            )
        })
    }

    pub fn step(&self) -> f64 {
        self.horizon / (self.nodes - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.nodes).map(|k| k as f64 * h).collect()
    }
}

/// Starting point of the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// Zero control, states from an open-loop RK4 rollout.
    ZeroControl,
    /// States and controls sampled at the node times.
    Nodes {
        zeta: Vec<ErrorState>,
        u: Vec<ControlInput>,
    },
}

impl InitialGuess {
    /// Linear interpolation of a closed-loop log onto the collocation nodes.
    pub fn from_log(log: &TrajectoryLog, problem: &CollocationProblem) -> Result<Self> {
        if log.is_empty() {
            return Err(Error::MismatchedScenario("empty trajectory log".into()));
        }
        let t: Vec<f64> = log.records.iter().map(|r| r.t).collect();
        let channel = |get: &dyn Fn(&crate::sim::LogRecord) -> f64| -> Vec<f64> {
            let v: Vec<f64> = log.records.iter().map(get).collect();
            problem
                .times()
                .iter()
                .map(|&tq| interpolate(&t, &v, tq))
                .collect()
        };
        let s = channel(&|r| r.zeta.s);
        let y = channel(&|r| r.zeta.y);
        let th = channel(&|r| r.zeta.theta);
        let ph = channel(&|r| r.zeta.phi);
        let ve = channel(&|r| r.u.v_e);
        let we = channel(&|r| r.u.w_e);
        let zeta = (0..problem.nodes)
            .map(|k| ErrorState {
                s: s[k],
                y: y[k],
                theta: th[k],
                phi: ph[k],
            })
            .collect();
        let u = (0..problem.nodes)
            .map(|k| ControlInput::new(ve[k], we[k]))
            .collect();
        Ok(Self::Nodes { zeta, u })
    }
}

/// Piecewise-linear interpolation, clamped at the ends. `t` must be sorted.
pub fn interpolate(t: &[f64], v: &[f64], tq: f64) -> f64 {
    let n = t.len();
    if tq <= t[0] {
        return v[0];
    }
    if tq >= t[n - 1] {
        return v[n - 1];
    }
    let i = t.partition_point(|&ti| ti <= tq) - 1;
    let w = (tq - t[i]) / (t[i + 1] - t[i]);
    v[i] + w * (v[i + 1] - v[i])
}

/// Solution returned by the collocation solver.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTrajectory {
    pub t: Vec<f64>,
    pub zeta: Vec<ErrorState>,
    pub u: Vec<ControlInput>,
    /// Trapezoidal cost over the horizon.
    pub cost: f64,
    /// Cost at the end of every penalty round.
    pub round_costs: Vec<f64>,
    pub defect_max: f64,
    pub gradient_norm: f64,
}

impl BaselineTrajectory {
    pub fn running_cost(&self, cost: &CostSpec) -> Vec<f64> {
        self.zeta
            .iter()
            .zip(&self.u)
            .map(|(z, u)| cost.local_cost(z, u))
            .collect()
    }

    /// World pose recovered from each node's error state.
    pub fn world_poses(&self, path: &PathSpec, gains: &GainSet) -> Result<Vec<WorldPose>> {
        self.zeta
            .iter()
            .map(|z| pose_from_error(z, path, gains))
            .collect()
    }

    /// Same columns as the closed-loop log without weights; `delta` is NaN.
    pub fn write_csv<W: Write>(
        &self,
        mut out: W,
        path: &PathSpec,
        gains: &GainSet,
        cost: &CostSpec,
    ) -> io::Result<()> {
        writeln!(out, "{}", CSV_STATE_COLUMNS.join(","))?;
        let r = self.running_cost(cost);
        let mut acc = 0.0;
        for k in 0..self.t.len() {
            if k > 0 {
                acc += 0.5 * (self.t[k] - self.t[k - 1]) * (r[k - 1] + r[k]);
            }
            let z = &self.zeta[k];
            let u = &self.u[k];
            let row = (|| -> Result<Vec<f64>> {
                let sp = sp_from_phi(z.phi, gains)?;
                let pose = pose_from_error(z, path, gains)?;
                let cmd = total_control(u, &steady_state_control(z, path, gains)?);
                Ok(vec![
                    self.t[k],
                    z.s,
                    z.y,
                    z.theta,
                    z.phi,
                    pose.x,
                    pose.y,
                    pose.theta_b,
                    sp,
                    u.v_e,
                    u.w_e,
                    cmd.v,
                    cmd.w,
                    f64::NAN,
                    r[k],
                    acc,
                ])
            })()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            let cells: Vec<String> = row.into_iter().map(fmt_num).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn pose_from_error(z: &ErrorState, path: &PathSpec, gains: &GainSet) -> Result<WorldPose> {
    let sp = sp_from_phi(z.phi, gains)?;
    world_from_frenet(
        path,
        sp,
        &FrameOffset {
            s: z.s,
            y: z.y,
            theta: z.theta,
        },
    )
}

/// Penalized collocation objective over the free variables
/// `[zeta_1 .. zeta_{N-1}, u_0 .. u_{N-1}]`.
pub struct PenaltyObjective<'a> {
    pub problem: &'a CollocationProblem,
    pub path: &'a PathSpec,
    pub gains: &'a GainSet,
    pub cost: &'a CostSpec,
    pub penalty: f64,
}

impl PenaltyObjective<'_> {
    pub fn dim(&self) -> usize {
        4 * (self.problem.nodes - 1) + 2 * self.problem.nodes
    }

    fn unpack(&self, x: &DVector<f64>) -> (Vec<ErrorState>, Vec<ControlInput>) {
        let n = self.problem.nodes;
        let mut zeta = Vec::with_capacity(n);
        zeta.push(self.problem.zeta0);
        for k in 0..n - 1 {
            zeta.push(ErrorState {
                s: x[4 * k],
                y: x[4 * k + 1],
                theta: x[4 * k + 2],
                phi: x[4 * k + 3],
            });
        }
        let off = 4 * (n - 1);
        let u = (0..n)
            .map(|k| ControlInput::new(x[off + 2 * k], x[off + 2 * k + 1]))
            .collect();
        (zeta, u)
    }

    fn pack(&self, zeta: &[ErrorState], u: &[ControlInput]) -> DVector<f64> {
        let n = self.problem.nodes;
        let mut x = DVector::zeros(self.dim());
        for (k, z) in zeta.iter().enumerate().skip(1) {
            x.fixed_rows_mut::<4>(4 * (k - 1)).copy_from(&z.to_vector());
        }
        let off = 4 * (n - 1);
        for (k, uk) in u.iter().enumerate() {
            x[off + 2 * k] = uk.v_e;
            x[off + 2 * k + 1] = uk.w_e;
        }
        x
    }

    fn weight(&self, k: usize) -> f64 {
        let h = self.problem.step();
        if k == 0 || k + 1 == self.problem.nodes {
            0.5 * h
        } else {
            h
        }
    }

    fn trapezoid_cost(&self, zeta: &[ErrorState], u: &[ControlInput]) -> f64 {
        (0..zeta.len())
            .map(|k| self.weight(k) * self.cost.local_cost(&zeta[k], &u[k]))
            .sum()
    }

    fn defects(&self, zeta: &[ErrorState], u: &[ControlInput]) -> Result<Vec<Vector4<f64>>> {
        let h = self.problem.step();
        let rates = zeta
            .iter()
            .zip(u)
            .map(|(z, uk)| closed_loop_rate(z, uk, self.path, self.gains))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..zeta.len() - 1)
            .map(|k| {
                zeta[k + 1].to_vector() - zeta[k].to_vector() - 0.5 * h * (rates[k] + rates[k + 1])
            })
            .collect())
    }

    /// Objective value, `+inf` where the dynamics are undefined.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let (zeta, u) = self.unpack(x);
        match self.defects(&zeta, &u) {
            Ok(d) => {
                self.trapezoid_cost(&zeta, &u)
                    + self.penalty * d.iter().map(|v| v.norm_squared()).sum::<f64>()
            }
            Err(_) => f64::INFINITY,
        }
    }

    /// Objective value and analytic gradient.
    pub fn value_and_gradient(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let n = self.problem.nodes;
        let h = self.problem.step();
        let (zeta, u) = self.unpack(x);
        let d = self.defects(&zeta, &u)?;
        let q_bar = self.cost.q_bar();

        let mut gz = vec![Vector4::zeros(); n];
        let mut gu = vec![Vector2::zeros(); n];
        for k in 0..n {
            let w = self.weight(k);
            gz[k] += 2.0 * w * q_bar * zeta[k].to_vector();
            gu[k] += 2.0 * w * self.cost.r * u[k].to_vector();
        }
        let jac = (0..n)
            .map(|k| closed_loop_jacobian(&zeta[k], &u[k], self.path, self.gains))
            .collect::<Result<Vec<_>>>()?;
        let g: Vec<_> = zeta.iter().map(input_g).collect();
        for k in 0..n - 1 {
            let lam = 2.0 * self.penalty * d[k];
            gz[k + 1] += lam - 0.5 * h * jac[k + 1].transpose() * lam;
            gz[k] += -lam - 0.5 * h * jac[k].transpose() * lam;
            gu[k] -= 0.5 * h * g[k].transpose() * lam;
            gu[k + 1] -= 0.5 * h * g[k + 1].transpose() * lam;
        }

        let value = self.trapezoid_cost(&zeta, &u)
            + self.penalty * d.iter().map(|v| v.norm_squared()).sum::<f64>();
        let mut grad = DVector::zeros(self.dim());
        for (k, gzk) in gz.iter().enumerate().skip(1) {
            grad.fixed_rows_mut::<4>(4 * (k - 1)).copy_from(gzk);
        }
        let off = 4 * (n - 1);
        for (k, guk) in gu.iter().enumerate() {
            grad.fixed_rows_mut::<2>(off + 2 * k).copy_from(guk);
        }
        Ok((value, grad))
    }
}

struct LbfgsOutcome {
    x: DVector<f64>,
    grad_norm: f64,
    iters: usize,
}

/// Limited-memory BFGS with a backtracking Armijo line search. Points where
/// the objective is undefined are rejected by the line search.
fn lbfgs(
    obj: &PenaltyObjective<'_>,
    mut x: DVector<f64>,
    tol: f64,
    max_iters: usize,
    memory: usize,
) -> Result<LbfgsOutcome> {
    let (mut fx, mut gx) = obj.value_and_gradient(&x)?;
    let mut hist: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::with_capacity(memory);
    let mut iters = 0;
    while iters < max_iters && gx.amax() >= tol {
        iters += 1;
        let mut q = gx.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * s.dot(&q);
            q.axpy(-a, y, 1.0);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            q *= s.dot(y) / y.norm_squared();
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * y.dot(&q);
            q.axpy(a - b, s, 1.0);
        }
        let mut dir = -q;
        let mut slope = gx.dot(&dir);
        if slope >= 0.0 || slope.is_nan() {
            hist.clear();
            dir = -gx.clone();
            slope = -gx.norm_squared();
        }

        let mut step = if hist.is_empty() {
            (1.0 / gx.amax()).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + step * &dir;
            let ft = obj.value(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        let Some(x_new) = accepted else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let (f_new, g_new) = obj.value_and_gradient(&x_new)?;
        let s = &x_new - &x;
        let y = &g_new - &gx;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if hist.len() == memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        fx = f_new;
        gx = g_new;
    }
    Ok(LbfgsOutcome {
        grad_norm: gx.amax(),
        x,
        iters,
    })
}

/// Open-loop zero-control rollout sampled at the nodes.
fn rollout_guess(
    problem: &CollocationProblem,
    path: &PathSpec,
    gains: &GainSet,
) -> Result<Vec<ErrorState>> {
    const SUBSTEPS: usize = 20;
    let h = problem.step() / SUBSTEPS as f64;
    let u = ControlInput::default();
    let rate = |z: &Vector4<f64>| closed_loop_rate(&ErrorState::from_vector(z), &u, path, gains);
    let mut z = problem.zeta0.to_vector();
    let mut out = vec![problem.zeta0];
    for _ in 1..problem.nodes {
        for _ in 0..SUBSTEPS {
            let k1 = rate(&z)?;
            let k2 = rate(&(z + 0.5 * h * k1))?;
            let k3 = rate(&(z + 0.5 * h * k2))?;
            let k4 = rate(&(z + h * k3))?;
            z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push(ErrorState::from_vector(&z));
    }
    Ok(out)
}

/// Solve from the zero-control rollout.
pub fn solve_collocation(
    problem: &CollocationProblem,
    path: &PathSpec,
    gains: &GainSet,
    cost: &CostSpec,
) -> Result<BaselineTrajectory> {
    solve_collocation_from(problem, path, gains, cost, &InitialGuess::ZeroControl)
}

pub fn solve_collocation_from(
    problem: &CollocationProblem,
    path: &PathSpec,
    gains: &GainSet,
    cost: &CostSpec,
    guess: &InitialGuess,
) -> Result<BaselineTrajectory> {
    problem.validate()?;
    path.validate()?;
    gains.validate()?;
    cost.validate()?;

    let (mut zeta, u) = match guess {
        InitialGuess::ZeroControl => (
            rollout_guess(problem, path, gains)?,
            vec![ControlInput::default(); problem.nodes],
        ),
        InitialGuess::Nodes { zeta, u } => {
            if zeta.len() != problem.nodes || u.len() != problem.nodes {
                return Err(Error::MismatchedScenario(format!(
                    "initial guess has {} states and {} controls for {} nodes",
                    zeta.len(),
                    u.len(),
                    problem.nodes
                )));
            }
            (zeta.clone(), u.clone())
        }
    };
    zeta[0] = problem.zeta0;

    let mut obj = PenaltyObjective {
        problem,
        path,
        gains,
        cost,
        penalty: problem.penalty0,
    };
    let mut x = obj.pack(&zeta, &u);
    let mut round_costs = Vec::with_capacity(problem.rounds);
    let mut grad_norm = f64::INFINITY;
    for round in 0..problem.rounds {
        let out = lbfgs(&obj, x, problem.grad_tol, problem.max_iters, problem.memory)?;
        x = out.x;
        grad_norm = out.grad_norm;
        let (z, u) = obj.unpack(&x);
        let c = obj.trapezoid_cost(&z, &u);
        let dmax = max_defect(&obj.defects(&z, &u)?);
        debug!(
            "round {round}: penalty {:.1e}, cost {c:.6}, defect {dmax:.2e}, gradient {grad_norm:.2e}, {} iterations",
            obj.penalty, out.iters
        );
        round_costs.push(c);
        if round + 1 < problem.rounds {
            obj.penalty *= problem.penalty_growth;
        }
    }

    let (zeta, u) = obj.unpack(&x);
    let defect_max = max_defect(&obj.defects(&zeta, &u)?);
    let total = obj.trapezoid_cost(&zeta, &u);
    info!("collocation cost {total:.6}, defect {defect_max:.2e}, gradient {grad_norm:.2e}");
    if !(defect_max < DEFECT_TOL && grad_norm < FINAL_GRADIENT_TOL) {
        return Err(Error::NotConverged {
            defect_norm: defect_max,
            gradient_norm: grad_norm,
        });
    }
    Ok(BaselineTrajectory {
        t: problem.times(),
        zeta,
        u,
        cost: total,
        round_costs,
        defect_max,
        gradient_norm: grad_norm,
    })
}

fn max_defect(d: &[Vector4<f64>]) -> f64 {
    d.iter().map(|v| v.amax()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDeviation {
    pub name: &'static str,
    pub max: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMetrics {
    /// `s, y, theta, phi, v_e, w_e` in that order.
    pub channels: Vec<ChannelDeviation>,
    /// Position deviation of the poses recovered from each error trajectory.
    pub world_max: f64,
    pub world_rms: f64,
    pub adp_cost: f64,
    pub baseline_cost: f64,
    pub cost_ratio: f64,
}

impl ComparisonMetrics {
    pub fn channel(&self, name: &str) -> Option<&ChannelDeviation> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn max_state_rms(&self) -> f64 {
        self.channels[..4].iter().map(|c| c.rms).fold(0.0, f64::max)
    }

    /// `key=value` lines.
    pub fn write_summary<W: Write>(&self, mut out: W) -> io::Result<()> {
        for c in &self.channels {
            writeln!(out, "{}_max={}", c.name, fmt_num(c.max))?;
            writeln!(out, "{}_rms={}", c.name, fmt_num(c.rms))?;
        }
        writeln!(out, "world_max={}", fmt_num(self.world_max))?;
        writeln!(out, "world_rms={}", fmt_num(self.world_rms))?;
        writeln!(out, "adp_cost={}", fmt_num(self.adp_cost))?;
        writeln!(out, "baseline_cost={}", fmt_num(self.baseline_cost))?;
        writeln!(out, "cost_ratio={}", fmt_num(self.cost_ratio))
    }
}

const TIME_MATCH_TOL: f64 = 1e-9;
const STATE_MATCH_TOL: f64 = 1e-9;

/// Deviation of a closed-loop log from a baseline at the baseline's nodes.
pub fn compare_trajectories(
    adp_log: &TrajectoryLog,
    baseline: &BaselineTrajectory,
    problem: &ControlProblem,
) -> Result<ComparisonMetrics> {
    let (Some(first), Some(last)) = (adp_log.records.first(), adp_log.last()) else {
        return Err(Error::MismatchedScenario("empty trajectory log".into()));
    };
    if baseline.t.is_empty()
        || baseline.zeta.len() != baseline.t.len()
        || baseline.u.len() != baseline.t.len()
    {
        return Err(Error::MismatchedScenario(
            "malformed baseline trajectory".into(),
        ));
    }
    if (first.t - baseline.t[0]).abs() > TIME_MATCH_TOL
        || (last.t - baseline.t[baseline.t.len() - 1]).abs() > TIME_MATCH_TOL
    {
        return Err(Error::MismatchedScenario(format!(
            "horizons differ: log covers [{}, {}], baseline covers [{}, {}]",
            first.t,
            last.t,
            baseline.t[0],
            baseline.t[baseline.t.len() - 1]
        )));
    }
    let gap = (first.zeta.to_vector() - baseline.zeta[0].to_vector()).amax();
    if gap > STATE_MATCH_TOL {
        return Err(Error::MismatchedScenario(format!(
            "initial states differ by {gap:e}"
        )));
    }

    let t: Vec<f64> = adp_log.records.iter().map(|r| r.t).collect();
    type Get = fn(&crate::sim::LogRecord) -> f64;
    type GetB = fn(&ErrorState, &ControlInput) -> f64;
    let spec: [(&'static str, Get, GetB, bool); 6] = [
        ("s", |r| r.zeta.s, |z, _| z.s, false),
        ("y", |r| r.zeta.y, |z, _| z.y, false),
        ("theta", |r| r.zeta.theta, |z, _| z.theta, true),
        ("phi", |r| r.zeta.phi, |z, _| z.phi, false),
        ("v_e", |r| r.u.v_e, |_, u| u.v_e, false),
        ("w_e", |r| r.u.w_e, |_, u| u.w_e, false),
    ];
    let n = baseline.t.len() as f64;
    let mut channels = Vec::with_capacity(spec.len());
    let mut adp_states = vec![[0.0; 4]; baseline.t.len()];
    for (c, (name, get, get_b, angular)) in spec.iter().enumerate() {
        let v: Vec<f64> = if *angular {
            unwrap_series(adp_log.records.iter().map(get))
        } else {
            adp_log.records.iter().map(get).collect()
        };
        let (mut max, mut sq) = (0.0f64, 0.0);
        for (k, &tk) in baseline.t.iter().enumerate() {
            let a = interpolate(&t, &v, tk);
            let b = get_b(&baseline.zeta[k], &baseline.u[k]);
            let diff = if *angular { wrap_angle(a - b) } else { a - b };
            if c < 4 {
                adp_states[k][c] = a;
            }
            max = max.max(diff.abs());
            sq += diff * diff;
        }
        channels.push(ChannelDeviation {
            name,
            max,
            rms: (sq / n).sqrt(),
        });
    }

    let (mut world_max, mut world_sq) = (0.0f64, 0.0);
    for (k, zb) in baseline.zeta.iter().enumerate() {
        let [s, y, theta, phi] = adp_states[k];
        let za = ErrorState { s, y, theta, phi };
        let pa = pose_from_error(&za, &problem.path, &problem.gains)?;
        let pb = pose_from_error(zb, &problem.path, &problem.gains)?;
        let d = (pa.position() - pb.position()).norm();
        world_max = world_max.max(d);
        world_sq += d * d;
    }

    let adp_cost = accumulated_cost(adp_log);
    Ok(ComparisonMetrics {
        channels,
        world_max,
        world_rms: (world_sq / n).sqrt(),
        adp_cost,
        baseline_cost: baseline.cost,
        cost_ratio: adp_cost / baseline.cost,
    })
}

/// Removes the 2π jumps introduced by angle wrapping.
fn unwrap_series(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        match out.last() {
            Some(&prev) => out.push(prev + wrap_angle(v - prev)),
            None => out.push(v),
        }
    }
    out
}
