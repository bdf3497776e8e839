//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, lists are comma separated.
//! Every key is optional; missing keys take the reference-scenario values.
//!
//! ```text
//! path.kind = lissajous        # lissajous | circle | line
//! gains.k1 = 0.1
//! cost.Q = 1, 0, 0, 0, 1, 0, 0, 0, 1
//! adp.grid.theta = -0.5236, 0, 0.5236
//! adp.proj_bound = auto        # or a radius
//! sim.zeta0 = -0.5, 0.25, -0.5235987755982988, 0
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix3};
use pathfollow::adp::{
    BasisKind, BasisVector, ControlProblem, CostSpec, LearningGains, SampleGrid, BASIS_LEN,
    DEFAULT_GRID_AXES, DEFAULT_PROJECTION_LAYER, INITIAL_WEIGHTS,
};
use pathfollow::baseline::CollocationProblem;
use pathfollow::dynamics::{ErrorState, GainSet};
use pathfollow::geometry::PathSpec;
use pathfollow::sim::{AdpConfig, Scenario, SimConfig};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
}

impl From<pathfollow::Error> for ConfigError {
    fn from(e: pathfollow::Error) -> Self {
        match e {
            pathfollow::Error::InvalidParameter { name, reason } => ConfigError::InvalidValue {
                key: name.to_string(),
                reason,
            },
            other => ConfigError::InvalidValue {
                key: "scenario".into(),
                reason: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Lissajous,
    Circle,
    Line,
}

impl FromStr for PathKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lissajous" => Ok(PathKind::Lissajous),
            "circle" => Ok(PathKind::Circle),
            "line" => Ok(PathKind::Line),
            other => Err(format!(
                "unknown path kind `{other}` (expected lissajous, circle or line)"
            )),
        }
    }
}

impl PathKind {
    fn as_str(self) -> &'static str {
        match self {
            PathKind::Lissajous => "lissajous",
            PathKind::Circle => "circle",
            PathKind::Line => "line",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub kind: PathKind,
    pub radius: f64,
    pub ax: f64,
    pub ay: f64,
    pub fx: f64,
    pub fy: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        let PathSpec::Lissajous { ax, ay, fx, fy } = PathSpec::default() else {
            unreachable!("default path is a Lissajous curve")
        };
        Self {
            kind: PathKind::Lissajous,
            radius: 10.0,
            ax,
            ay,
            fx,
            fy,
        }
    }
}

impl PathConfig {
    pub fn spec(&self) -> PathSpec {
        match self.kind {
            PathKind::Lissajous => PathSpec::Lissajous {
                ax: self.ax,
                ay: self.ay,
                fx: self.fx,
                fy: self.fy,
            },
            PathKind::Circle => PathSpec::Circle {
                radius: self.radius,
            },
            PathKind::Line => PathSpec::Line,
        }
    }

    fn keys(kind: PathKind) -> &'static [&'static str] {
        match kind {
            PathKind::Lissajous => &["path.ax", "path.ay", "path.fx", "path.fy"],
            PathKind::Circle => &["path.radius"],
            PathKind::Line => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub nodes: usize,
    /// `None` follows `sim.duration`.
    pub horizon: Option<f64>,
    pub penalty0: f64,
    pub penalty_growth: f64,
    pub rounds: usize,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub memory: usize,
    /// Start the solver from the closed-loop trajectory.
    pub warm_start: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let p = CollocationProblem::default();
        Self {
            nodes: p.nodes,
            horizon: None,
            penalty0: p.penalty0,
            penalty_growth: p.penalty_growth,
            rounds: p.rounds,
            grad_tol: p.grad_tol,
            max_iters: p.max_iters,
            memory: p.memory,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub path: PathConfig,
    pub gains: GainSet,
    pub cost: CostSpec,
    pub basis: BasisKind,
    pub learning: LearningGains,
    pub grid_axes: [Vec<f64>; 4],
    pub wc0: BasisVector,
    pub wa0: BasisVector,
    pub proj_bound: Option<f64>,
    pub proj_layer: f64,
    pub sim: SimConfig,
    pub zeta0: ErrorState,
    pub baseline: BaselineConfig,
    /// User bound on the gradient of the reconstruction error, used only by
    /// the gain-condition report.
    pub eps_bound: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scenario = Scenario::default();
        Self {
            path: PathConfig::default(),
            gains: GainSet::default(),
            cost: CostSpec::default(),
            basis: BasisKind::default(),
            learning: LearningGains::default(),
            grid_axes: DEFAULT_GRID_AXES.map(|a| a.to_vec()),
            wc0: BasisVector::from(INITIAL_WEIGHTS),
            wa0: BasisVector::from(INITIAL_WEIGHTS),
            proj_bound: None,
            proj_layer: DEFAULT_PROJECTION_LAYER,
            sim: SimConfig::default(),
            zeta0: scenario.zeta0,
            baseline: BaselineConfig::default(),
            eps_bound: 0.0,
        }
    }
}

const GRID_KEYS: [&str; 4] = ["adp.grid.s", "adp.grid.y", "adp.grid.theta", "adp.grid.phi"];

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .map_err(|_| format!("`{v}` is not a number"))
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.parse::<usize>()
        .map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{v}` is not true or false")),
    }
}

fn parse_list(v: &str, len: Option<usize>) -> Result<Vec<f64>, String> {
    let out = v
        .split(',')
        .map(|x| parse_f64(x.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    match len {
        Some(n) if out.len() != n => Err(format!("expected {n} values, got {}", out.len())),
        _ => Ok(out),
    }
}

fn parse_auto(v: &str) -> Result<Option<f64>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_f64(v).map(Some)
    }
}

fn fmt_list(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl RunConfig {
    fn set(&mut self, key: &str, v: &str) -> Option<Result<(), String>> {
        let r = match key {
            "path.kind" => v.parse().map(|k| self.path.kind = k),
            "path.radius" => parse_f64(v).map(|x| self.path.radius = x),
            "path.ax" => parse_f64(v).map(|x| self.path.ax = x),
            "path.ay" => parse_f64(v).map(|x| self.path.ay = x),
            "path.fx" => parse_f64(v).map(|x| self.path.fx = x),
            "path.fy" => parse_f64(v).map(|x| self.path.fy = x),
            "gains.k1" => parse_f64(v).map(|x| self.gains.k1 = x),
            "gains.k2" => parse_f64(v).map(|x| self.gains.k2 = x),
            "gains.v_des" => parse_f64(v).map(|x| self.gains.v_des = x),
            "cost.Q" => parse_list(v, Some(9)).map(|x| self.cost.q = Matrix3::from_row_slice(&x)),
            "cost.R" => parse_list(v, Some(4)).map(|x| self.cost.r = Matrix2::from_row_slice(&x)),
            "adp.basis" => v.parse().map(|b| self.basis = b),
            "adp.eta_c1" => parse_f64(v).map(|x| self.learning.eta_c1 = x),
            "adp.eta_c2" => parse_f64(v).map(|x| self.learning.eta_c2 = x),
            "adp.eta_a" => parse_f64(v).map(|x| self.learning.eta_a = x),
            "adp.wc0" => {
                parse_list(v, Some(BASIS_LEN)).map(|x| self.wc0 = BasisVector::from_vec(x))
            }
            "adp.wa0" => {
                parse_list(v, Some(BASIS_LEN)).map(|x| self.wa0 = BasisVector::from_vec(x))
            }
            "adp.proj_bound" => parse_auto(v).map(|x| self.proj_bound = x),
            "adp.proj_layer" => parse_f64(v).map(|x| self.proj_layer = x),
            "sim.dt" => parse_f64(v).map(|x| self.sim.dt = x),
            "sim.duration" => parse_f64(v).map(|x| self.sim.duration = x),
            "sim.log_stride" => parse_usize(v).map(|x| self.sim.log_stride = x),
            "sim.zeta0" => parse_list(v, Some(4)).map(|x| {
                self.zeta0 = ErrorState {
                    s: x[0],
                    y: x[1],
                    theta: x[2],
                    phi: x[3],
                }
            }),
            "baseline.nodes" => parse_usize(v).map(|x| self.baseline.nodes = x),
            "baseline.horizon" => parse_auto(v).map(|x| self.baseline.horizon = x),
            "baseline.penalty0" => parse_f64(v).map(|x| self.baseline.penalty0 = x),
            "baseline.penalty_growth" => parse_f64(v).map(|x| self.baseline.penalty_growth = x),
            "baseline.rounds" => parse_usize(v).map(|x| self.baseline.rounds = x),
            "baseline.grad_tol" => parse_f64(v).map(|x| self.baseline.grad_tol = x),
            "baseline.max_iters" => parse_usize(v).map(|x| self.baseline.max_iters = x),
            "baseline.memory" => parse_usize(v).map(|x| self.baseline.memory = x),
            "baseline.warm_start" => parse_bool(v).map(|x| self.baseline.warm_start = x),
            "diag.eps_bound" => parse_f64(v).map(|x| self.eps_bound = x),
            _ => {
                let i = GRID_KEYS.iter().position(|k| *k == key)?;
                parse_list(v, None).map(|x| self.grid_axes[i] = x)
            }
        };
        Some(r)
    }

    /// All settings in a fixed order, as written by [`RunConfig::dump`].
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("path.kind", self.path.kind.as_str().to_string())];
        for &k in PathConfig::keys(self.path.kind) {
            let v = match k {
                "path.radius" => self.path.radius,
                "path.ax" => self.path.ax,
                "path.ay" => self.path.ay,
                "path.fx" => self.path.fx,
                _ => self.path.fy,
            };
            out.push((k, v.to_string()));
        }
        let b = &self.baseline;
        out.extend([
            ("gains.k1", self.gains.k1.to_string()),
            ("gains.k2", self.gains.k2.to_string()),
            ("gains.v_des", self.gains.v_des.to_string()),
            ("cost.Q", fmt_list(self.cost.q.transpose().iter().copied())),
            ("cost.R", fmt_list(self.cost.r.transpose().iter().copied())),
            ("adp.basis", self.basis.to_string()),
            ("adp.eta_c1", self.learning.eta_c1.to_string()),
            ("adp.eta_c2", self.learning.eta_c2.to_string()),
            ("adp.eta_a", self.learning.eta_a.to_string()),
        ]);
        for (k, axis) in GRID_KEYS.iter().zip(&self.grid_axes) {
            out.push((k, fmt_list(axis.iter().copied())));
        }
        let z = self.zeta0;
        out.extend([
            ("adp.wc0", fmt_list(self.wc0.iter().copied())),
            ("adp.wa0", fmt_list(self.wa0.iter().copied())),
            ("adp.proj_bound", fmt_auto(self.proj_bound)),
            ("adp.proj_layer", self.proj_layer.to_string()),
            ("sim.dt", self.sim.dt.to_string()),
            ("sim.duration", self.sim.duration.to_string()),
            ("sim.log_stride", self.sim.log_stride.to_string()),
            ("sim.zeta0", fmt_list([z.s, z.y, z.theta, z.phi])),
            ("baseline.nodes", b.nodes.to_string()),
            ("baseline.horizon", fmt_auto(b.horizon)),
            ("baseline.penalty0", b.penalty0.to_string()),
            ("baseline.penalty_growth", b.penalty_growth.to_string()),
            ("baseline.rounds", b.rounds.to_string()),
            ("baseline.grad_tol", b.grad_tol.to_string()),
            ("baseline.max_iters", b.max_iters.to_string()),
            ("baseline.memory", b.memory.to_string()),
            ("baseline.warm_start", b.warm_start.to_string()),
            ("diag.eps_bound", self.eps_bound.to_string()),
        ]);
        out
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn problem(&self) -> ControlProblem {
        ControlProblem {
            path: self.path.spec(),
            gains: self.gains,
            cost: self.cost,
            basis: self.basis,
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            problem: self.problem(),
            adp: AdpConfig {
                learning: self.learning,
                grid: SampleGrid::tensor(&self.grid_axes),
                wc0: self.wc0,
                wa0: self.wa0,
                proj_bound: self.proj_bound,
                proj_layer: self.proj_layer,
            },
            zeta0: self.zeta0,
        }
    }

    pub fn collocation(&self) -> CollocationProblem {
        let b = &self.baseline;
        CollocationProblem {
            nodes: b.nodes,
            horizon: b.horizon.unwrap_or(self.sim.duration),
            zeta0: self.zeta0,
            penalty0: b.penalty0,
            penalty_growth: b.penalty_growth,
            rounds: b.rounds,
            grad_tol: b.grad_tol,
            max_iters: b.max_iters,
            memory: b.memory,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, axis) in GRID_KEYS.iter().zip(&self.grid_axes) {
            if axis.is_empty() || axis.iter().any(|v| !v.is_finite()) {
                return Err(ConfigError::InvalidValue {
                    key: key.to_string(),
                    reason: "must be a non-empty list of finite values".into(),
                });
            }
        }
        if !(self.eps_bound.is_finite() && self.eps_bound >= 0.0) {
            return Err(ConfigError::InvalidValue {
                key: "diag.eps_bound".into(),
                reason: "must be non-negative and finite".into(),
            });
        }
        self.scenario().validate()?;
        self.sim.validate()?;
        self.collocation().validate()?;
        Ok(())
    }
}

/// Parse configuration text; absent keys keep their defaults.
pub fn load_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen = BTreeSet::new();
    let mut path_keys = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                message: format!("expected `key = value`, got `{body}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line,
                message: "missing key before `=`".into(),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        match cfg.set(key, value) {
            None => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
            Some(Err(reason)) => {
                return Err(ConfigError::InvalidValue {
                    key: key.to_string(),
                    reason,
                })
            }
            Some(Ok(())) => {
                if key.starts_with("path.") && key != "path.kind" {
                    path_keys.push(key.to_string());
                }
            }
        }
    }
    let allowed = PathConfig::keys(cfg.path.kind);
    if let Some(k) = path_keys.iter().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ConfigError::InvalidValue {
            key: k.clone(),
            reason: format!("does not apply to path.kind = {}", cfg.path.kind.as_str()),
        });
    }
    cfg.validate()?;
    Ok(cfg)
}
