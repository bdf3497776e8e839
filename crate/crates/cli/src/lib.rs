//! Run configuration, scenario execution and reporting for `adp-pf`.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use pathfollow::adp::{
    gain_condition_check, lipschitz_estimate, rank_check, ActorWeights, GainConditionReport,
    RankReport,
};
use pathfollow::baseline::{
    compare_trajectories, solve_collocation_from, BaselineTrajectory, ComparisonMetrics,
    InitialGuess,
};
use pathfollow::sim::{run_simulation, Scenario, TrajectoryLog};

pub use config::{load_config, ConfigError, RunConfig};

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const BASELINE_CSV: &str = "baseline.csv";
pub const METRICS_FILE: &str = "metrics.txt";

/// Outcome of a successful `run`.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub log: TrajectoryLog,
    pub rank: RankReport,
    pub lf_estimate: f64,
    pub gains: GainConditionReport,
    pub csv: PathBuf,
}

impl RunSummary {
    pub fn final_error_norm(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |r| r.zeta.e().norm())
    }

    pub fn final_cost(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |r| r.cost)
    }
}

#[derive(Debug, Clone)]
pub struct CompareSummary {
    pub run: RunSummary,
    pub baseline: BaselineTrajectory,
    pub metrics: ComparisonMetrics,
    pub baseline_csv: PathBuf,
    pub metrics_file: PathBuf,
}

fn write_log(log: &TrajectoryLog, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    log.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Rank of the concurrent-learning data and the sufficient gain conditions,
/// both evaluated with the initial actor weights.
pub fn diagnostics(cfg: &RunConfig) -> Result<(RankReport, f64, GainConditionReport)> {
    let scenario = cfg.scenario();
    let adp = &scenario.adp;
    let bound = adp.bound();
    let mut wa = adp.wa0;
    if wa.norm() > bound {
        wa *= bound / wa.norm();
    }
    let rank = rank_check(&scenario.problem, &adp.grid, &ActorWeights::new(wa, bound))?;
    let lf = lipschitz_estimate(&scenario.problem, &adp.grid.points)?;
    let gains = gain_condition_check(
        &scenario.problem.cost,
        &adp.learning,
        rank.c_lower,
        adp.grid.len(),
        cfg.eps_bound,
        lf,
    );
    Ok((rank, lf, gains))
}

fn simulate(
    cfg: &RunConfig,
    scenario: &Scenario,
    out_dir: &Path,
) -> Result<(TrajectoryLog, PathBuf)> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let csv = out_dir.join(TRAJECTORY_CSV);
    match run_simulation(scenario, &cfg.sim) {
        Ok(log) => {
            write_log(&log, &csv)?;
            info!("wrote {} records to {}", log.len(), csv.display());
            Ok((log, csv))
        }
        Err(abort) => {
            write_log(&abort.log, &csv)?;
            Err(anyhow::Error::new(abort)
                .context(format!("partial trajectory written to {}", csv.display())))
        }
    }
}

/// Run the closed-loop simulation, write the trajectory CSV and print a
/// summary to `out`.
pub fn cmd_run<W: Write>(cfg: &RunConfig, out_dir: &Path, out: &mut W) -> Result<RunSummary> {
    let scenario = cfg.scenario();
    let (rank, lf_estimate, gains) = diagnostics(cfg)?;
    let (log, csv) = simulate(cfg, &scenario, out_dir)?;
    let summary = RunSummary {
        log,
        rank,
        lf_estimate,
        gains,
        csv,
    };
    print_run(&summary, out)?;
    Ok(summary)
}

/// Run the simulation and the collocation baseline on the same scenario,
/// write both trajectories and a metrics file, and print a summary.
pub fn cmd_compare<W: Write>(
    cfg: &RunConfig,
    out_dir: &Path,
    out: &mut W,
) -> Result<CompareSummary> {
    let run = cmd_run(cfg, out_dir, out)?;
    let scenario = cfg.scenario();
    let problem = cfg.collocation();
    let guess = if cfg.baseline.warm_start {
        InitialGuess::from_log(&run.log, &problem)?
    } else {
        InitialGuess::ZeroControl
    };
    let p = &scenario.problem;
    let baseline = solve_collocation_from(&problem, &p.path, &p.gains, &p.cost, &guess)
        .context("collocation baseline")?;
    let baseline_csv = out_dir.join(BASELINE_CSV);
    {
        let file = File::create(&baseline_csv)
            .with_context(|| format!("creating {}", baseline_csv.display()))?;
        let mut w = BufWriter::new(file);
        baseline.write_csv(&mut w, &p.path, &p.gains, &p.cost)?;
        w.flush()?;
    }
    let metrics = compare_trajectories(&run.log, &baseline, p)?;
    let metrics_file = out_dir.join(METRICS_FILE);
    {
        let mut w = BufWriter::new(
            File::create(&metrics_file)
                .with_context(|| format!("creating {}", metrics_file.display()))?,
        );
        metrics.write_summary(&mut w)?;
        w.flush()?;
    }

    writeln!(out)?;
    writeln!(
        out,
        "baseline: cost {:.6}, defect {:.1e}",
        baseline.cost, baseline.defect_max
    )?;
    writeln!(
        out,
        "ADP / baseline cost ratio {:.4}, largest state RMS deviation {:.4}",
        metrics.cost_ratio,
        metrics.max_state_rms()
    )?;
    writeln!(out, "--- compare ---")?;
    writeln!(out, "baseline_cost={}", baseline.cost)?;
    writeln!(out, "baseline_defect_max={}", baseline.defect_max)?;
    writeln!(out, "baseline_gradient_norm={}", baseline.gradient_norm)?;
    writeln!(out, "cost_ratio={}", metrics.cost_ratio)?;
    writeln!(out, "max_state_rms={}", metrics.max_state_rms())?;
    writeln!(out, "world_rms={}", metrics.world_rms)?;
    writeln!(out, "baseline_csv={}", baseline_csv.display())?;
    writeln!(out, "metrics={}", metrics_file.display())?;

    Ok(CompareSummary {
        run,
        baseline,
        metrics,
        baseline_csv,
        metrics_file,
    })
}

fn print_run<W: Write>(s: &RunSummary, out: &mut W) -> Result<()> {
    let last = s.log.last().context("empty trajectory")?;
    writeln!(
        out,
        "simulated {:.3} s, {} records -> {}",
        last.t,
        s.log.len(),
        s.csv.display()
    )?;
    writeln!(
        out,
        "final |e| = {:.6}, accumulated cost = {:.6}",
        s.final_error_norm(),
        s.final_cost()
    )?;
    writeln!(
        out,
        "rank check: {}/9, eigenvalues in [{:.3e}, {:.3e}]",
        s.rank.rank, s.rank.c_lower, s.rank.c_upper
    )?;
    let verdict = |ok: bool| if ok { "holds" } else { "violated" };
    writeln!(
        out,
        "gain conditions (L_f ~ {:.3}): state weight {} (margin {:.3e}), excitation {} (margin {:.3e})",
        s.lf_estimate,
        verdict(s.gains.condition1_holds()),
        s.gains.condition1_margin,
        verdict(s.gains.condition2_holds()),
        s.gains.condition2_margin
    )?;
    writeln!(out, "--- summary ---")?;
    writeln!(out, "status=ok")?;
    writeln!(out, "t_final={}", last.t)?;
    writeln!(out, "records={}", s.log.len())?;
    writeln!(out, "final_e_norm={}", s.final_error_norm())?;
    writeln!(out, "final_cost={}", s.final_cost())?;
    writeln!(out, "rank={}", s.rank.rank)?;
    writeln!(out, "c_lower={}", s.rank.c_lower)?;
    writeln!(out, "c_upper={}", s.rank.c_upper)?;
    writeln!(out, "lf_estimate={}", s.lf_estimate)?;
    writeln!(out, "q_lower={}", s.gains.q_lower)?;
    writeln!(out, "condition1_margin={}", s.gains.condition1_margin)?;
    writeln!(out, "condition2_margin={}", s.gains.condition2_margin)?;
    writeln!(out, "csv={}", s.csv.display())?;
    Ok(())
}
