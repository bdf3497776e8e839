//! Deterministic fixed-step closed-loop simulation.
//!
//! The error state, the world pose, the virtual-target parameter, both weight
//! vectors and the running cost are stacked into one flat state and advanced
//! together with a single classical RK4 step. After every step `theta` and
//! `theta_b` are wrapped, `phi` is checked against `(-1, 1)` and the actor
//! weights are returned to their ball if the discrete step overshot it.

use std::io::{self, Write};

use thiserror::Error;

use crate::adp::{
    actor_rate, concurrent_term, ActorWeights, BasisVector, ControlProblem, CriticWeights,
    LearningGains, SampleGrid, BASIS_LEN, DEFAULT_PROJECTION_LAYER, INITIAL_WEIGHTS,
};
use crate::dynamics::{
    sp_from_phi, steady_state_control, total_control, virtual_target_rate, world_kinematics,
    ControlInput, ErrorState, VehicleCommand,
};
use crate::error::{Error, Result};
use crate::geometry::{
    frenet_error, world_from_frenet, wrap_angle, FrameOffset, PathSpec, WorldPose,
};

/// One classical fourth-order Runge-Kutta step of `x' = rate(x)`.
pub fn rk4_step<F>(state: &[f64], dt: f64, mut rate: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = state.len();
    let mut eval = |x: &[f64]| -> Result<Vec<f64>> {
        let k = rate(x)?;
        if k.len() != n || k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRate { t: None });
        }
        Ok(k)
    };
    let stage =
        |k: &[f64], h: f64| -> Vec<f64> { state.iter().zip(k).map(|(x, k)| x + h * k).collect() };
    let k1 = eval(state)?;
    let k2 = eval(&stage(&k1, 0.5 * dt))?;
    let k3 = eval(&stage(&k2, 0.5 * dt))?;
    let k4 = eval(&stage(&k3, dt))?;
    Ok((0..n)
        .map(|i| state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub log_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            duration: 60.0,
            log_stride: 10,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("sim.dt", "must be positive and finite"));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(Error::invalid(
                "sim.duration",
                "must be finite and at least sim.dt",
            ));
        }
        if self.log_stride == 0 {
            return Err(Error::invalid("sim.log_stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Learning configuration of the actor-critic.
#[derive(Debug, Clone, PartialEq)]
pub struct AdpConfig {
    pub learning: LearningGains,
    pub grid: SampleGrid,
    pub wc0: BasisVector,
    pub wa0: BasisVector,
    /// Radius of the actor ball; `None` means ten times `||wa0||`.
    pub proj_bound: Option<f64>,
    pub proj_layer: f64,
}

impl Default for AdpConfig {
    fn default() -> Self {
        Self {
            learning: LearningGains::default(),
            grid: SampleGrid::default(),
            wc0: BasisVector::from(INITIAL_WEIGHTS),
            wa0: BasisVector::from(INITIAL_WEIGHTS),
            proj_bound: None,
            proj_layer: DEFAULT_PROJECTION_LAYER,
        }
    }
}

impl AdpConfig {
    pub fn bound(&self) -> f64 {
        self.proj_bound.unwrap_or_else(|| 10.0 * self.wa0.norm())
    }

    pub fn validate(&self) -> Result<()> {
        self.learning.validate()?;
        self.grid.validate()?;
        if self
            .wc0
            .iter()
            .chain(self.wa0.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("adp.wc0", "initial weights must be finite"));
        }
        let b = self.bound();
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::invalid(
                "adp.proj_bound",
                "must be positive and finite",
            ));
        }
        if !(self.proj_layer > 0.0 && self.proj_layer < 1.0) {
            return Err(Error::invalid("adp.proj_layer", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// A complete closed-loop scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub problem: ControlProblem,
    pub adp: AdpConfig,
    pub zeta0: ErrorState,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            problem: ControlProblem::default(),
            adp: AdpConfig::default(),
            zeta0: ErrorState::new(-0.5, 0.25, -std::f64::consts::FRAC_PI_6, 0.0),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.adp.validate()?;
        let z = self.zeta0;
        if ![z.s, z.y, z.theta].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("sim.zeta0", "must be finite"));
        }
        z.check_phi()
            .map_err(|_| Error::invalid("sim.zeta0", format!("phi = {} is outside (-1, 1)", z.phi)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub zeta: ErrorState,
    pub pose: WorldPose,
    pub sp: f64,
    pub u: ControlInput,
    pub cmd: VehicleCommand,
    pub delta: f64,
    pub r: f64,
    /// Running cost integrated alongside the state.
    pub cost: f64,
    pub wc: BasisVector,
    pub wa: BasisVector,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub records: Vec<LogRecord>,
}

pub const CSV_STATE_COLUMNS: [&str; 16] = [
    "t", "s", "y", "theta", "phi", "x", "y_world", "theta_b", "sp", "v_e", "w_e", "v", "w",
    "delta", "r", "cost",
];

/// Seventeen significant digits.
pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&LogRecord> {
        self.records.last()
    }

    pub fn csv_header() -> String {
        let mut cols: Vec<String> = CSV_STATE_COLUMNS.iter().map(|c| c.to_string()).collect();
        cols.extend((1..=BASIS_LEN).map(|i| format!("wc{i}")));
        cols.extend((1..=BASIS_LEN).map(|i| format!("wa{i}")));
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::csv_header())?;
        for rec in &self.records {
            let mut row: Vec<String> = [
                rec.t,
                rec.zeta.s,
                rec.zeta.y,
                rec.zeta.theta,
                rec.zeta.phi,
                rec.pose.x,
                rec.pose.y,
                rec.pose.theta_b,
                rec.sp,
                rec.u.v_e,
                rec.u.w_e,
                rec.cmd.v,
                rec.cmd.w,
                rec.delta,
                rec.r,
                rec.cost,
            ]
            .iter()
            .map(|&v| fmt_num(v))
            .collect();
            row.extend(rec.wc.iter().chain(rec.wa.iter()).map(|&v| fmt_num(v)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Trapezoidal integral of the logged running cost.
pub fn accumulated_cost(log: &TrajectoryLog) -> f64 {
    log.records
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].r + w[1].r))
        .sum()
}

/// Largest discrepancy between the integrated error state and the error
/// recomputed from the integrated world pose and virtual-target parameter.
pub fn frenet_world_consistency(log: &TrajectoryLog, path: &PathSpec) -> Result<f64> {
    let mut worst = 0.0f64;
    for rec in &log.records {
        let e = frenet_error(path, rec.sp, &rec.pose)?;
        worst = worst
            .max((e.s - rec.zeta.s).abs())
            .max((e.y - rec.zeta.y).abs())
            .max(wrap_angle(e.theta - rec.zeta.theta).abs());
    }
    Ok(worst)
}

/// A run that stopped early, with everything logged up to that point.
#[derive(Debug, Clone, Error)]
#[error("simulation aborted at t = {t} s: {error}")]
pub struct SimAbort {
    pub error: Error,
    pub t: f64,
    pub log: TrajectoryLog,
}

// flat state layout
const ZETA: usize = 0;
const POSE: usize = 4;
const SP: usize = 7;
const WC: usize = 8;
const WA: usize = WC + BASIS_LEN;
const COST: usize = WA + BASIS_LEN;
const STATE_LEN: usize = COST + 1;

struct ClosedLoop<'a> {
    scenario: &'a Scenario,
    bound: f64,
}

impl ClosedLoop<'_> {
    fn unpack(x: &[f64]) -> (ErrorState, WorldPose, BasisVector, BasisVector) {
        let zeta = ErrorState {
            s: x[ZETA],
            y: x[ZETA + 1],
            theta: x[ZETA + 2],
            phi: x[ZETA + 3],
        };
        let pose = WorldPose {
            x: x[POSE],
            y: x[POSE + 1],
            theta_b: x[POSE + 2],
        };
        let wc = BasisVector::from_column_slice(&x[WC..WC + BASIS_LEN]);
        let wa = BasisVector::from_column_slice(&x[WA..WA + BASIS_LEN]);
        (zeta, pose, wc, wa)
    }

    fn rate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let problem = &self.scenario.problem;
        let adp = &self.scenario.adp;
        let (zeta, pose, wc, wa) = Self::unpack(x);
        zeta.check_phi()?;

        let here = problem.bellman_raw(&wc, &wa, &zeta)?;
        let ss = steady_state_control(&zeta, &problem.path, &problem.gains)?;
        let cmd = total_control(&here.u, &ss);
        let pose_dot = world_kinematics(&pose, cmd.v, cmd.w);
        let wc_dot = -adp.learning.eta_c1 * here.omega * (here.delta / here.p)
            - adp.learning.eta_c2 * concurrent_term(problem, &wc, &wa, &adp.grid)?;
        let wa_dot = actor_rate(
            &ActorWeights::new(wa, self.bound),
            &CriticWeights(wc),
            adp.learning.eta_a,
            adp.proj_layer,
        );

        let mut k = vec![0.0; STATE_LEN];
        k[ZETA..ZETA + 4].copy_from_slice(here.zeta_dot.as_slice());
        k[POSE..POSE + 3].copy_from_slice(pose_dot.as_slice());
        k[SP] = virtual_target_rate(&zeta, &problem.gains);
        k[WC..WC + BASIS_LEN].copy_from_slice(wc_dot.as_slice());
        k[WA..WA + BASIS_LEN].copy_from_slice(wa_dot.as_slice());
        k[COST] = here.r;
        Ok(k)
    }

    fn record(&self, t: f64, x: &[f64]) -> Result<LogRecord> {
        let problem = &self.scenario.problem;
        let (zeta, pose, wc, wa) = Self::unpack(x);
        let b = problem.bellman_raw(&wc, &wa, &zeta)?;
        let ss = steady_state_control(&zeta, &problem.path, &problem.gains)?;
        Ok(LogRecord {
            t,
            zeta,
            pose,
            sp: x[SP],
            u: b.u,
            cmd: total_control(&b.u, &ss),
            delta: b.delta,
            r: b.r,
            cost: x[COST],
            wc,
            wa,
        })
    }
}

/// Integrate the closed loop from `scenario.zeta0` for `sim.duration`.
///
/// The initial pose is placed by [`world_from_frenet`] at the virtual target
/// encoded by `phi(0)`. Initial actor weights outside the projection ball are
/// scaled onto it.
pub fn run_simulation(scenario: &Scenario, sim: &SimConfig) -> Result<TrajectoryLog, SimAbort> {
    let abort = |error: Error, t: f64, log: TrajectoryLog| SimAbort { error, t, log };
    if let Err(e) = scenario.validate().and_then(|_| sim.validate()) {
        return Err(abort(e, 0.0, TrajectoryLog::default()));
    }
    let problem = &scenario.problem;
    let z0 = scenario.zeta0;
    let sp0 = match sp_from_phi(z0.phi, &problem.gains) {
        Ok(v) => v,
        Err(e) => return Err(abort(e, 0.0, TrajectoryLog::default())),
    };
    let offset = FrameOffset {
        s: z0.s,
        y: z0.y,
        theta: z0.theta,
    };
    let pose0 = match world_from_frenet(&problem.path, sp0, &offset) {
        Ok(p) => p,
        Err(e) => return Err(abort(e, 0.0, TrajectoryLog::default())),
    };

    let bound = scenario.adp.bound();
    let mut wa0 = scenario.adp.wa0;
    if wa0.norm() > bound {
        wa0 *= bound / wa0.norm();
    }

    let mut x = vec![0.0; STATE_LEN];
    x[ZETA..ZETA + 4].copy_from_slice(&[z0.s, z0.y, wrap_angle(z0.theta), z0.phi]);
    x[POSE..POSE + 3].copy_from_slice(&[pose0.x, pose0.y, pose0.theta_b]);
    x[SP] = sp0;
    x[WC..WC + BASIS_LEN].copy_from_slice(scenario.adp.wc0.as_slice());
    x[WA..WA + BASIS_LEN].copy_from_slice(wa0.as_slice());

    let cl = ClosedLoop { scenario, bound };
    let steps = sim.steps();
    let mut log = TrajectoryLog {
        records: Vec::with_capacity(steps / sim.log_stride + 2),
    };
    match cl.record(0.0, &x) {
        Ok(r) => log.records.push(r),
        Err(e) => return Err(abort(e, 0.0, log)),
    }

    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * sim.dt;
        let t = k as f64 * sim.dt;
        x = match rk4_step(&x, sim.dt, |s| cl.rate(s)) {
            Ok(next) => next,
            Err(Error::NonFiniteRate { .. }) => {
                return Err(abort(Error::NonFiniteRate { t: Some(t_prev) }, t_prev, log))
            }
            Err(e) => return Err(abort(e, t_prev, log)),
        };
        x[ZETA + 2] = wrap_angle(x[ZETA + 2]);
        x[POSE + 2] = wrap_angle(x[POSE + 2]);
        if x[ZETA + 3].abs() >= 1.0 {
            return Err(abort(Error::PhiOutOfRange { phi: x[ZETA + 3] }, t, log));
        }
        let wa_norm = x[WA..WA + BASIS_LEN]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        if wa_norm > bound {
            x[WA..WA + BASIS_LEN]
                .iter_mut()
                .for_each(|v| *v *= bound / wa_norm);
        }
        if k % sim.log_stride == 0 || k == steps {
            match cl.record(t, &x) {
                Ok(r) => log.records.push(r),
                Err(e) => return Err(abort(e, t, log)),
            }
        }
    }
    Ok(log)
}
