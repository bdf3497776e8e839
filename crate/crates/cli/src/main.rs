use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use pathfollow_cli::{cmd_compare, cmd_run, load_config, RunConfig};

/// Online approximate-optimal path following for a kinematic unicycle.
#[derive(Parser, Debug)]
#[command(name = "adp-pf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the closed loop and write trajectory.csv.
    Run(RunArgs),
    /// Simulate, solve the collocation baseline and compare the two.
    Compare(RunArgs),
    /// Print the default configuration.
    Defaults,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Validate the configuration and exit.
    #[arg(long)]
    dry_run: bool,
    /// Also run the collocation baseline (same as `compare`).
    #[arg(long)]
    compare_baseline: bool,
    /// Simulated duration in seconds, overriding `sim.duration`.
    #[arg(long, allow_negative_numbers = true)]
    duration: Option<f64>,
    /// Integration step in seconds, overriding `sim.dt`.
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
}

fn load(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            load_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(d) = args.duration {
        cfg.sim.duration = d;
    }
    if let Some(dt) = args.dt {
        cfg.sim.dt = dt;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ADP_PF_LOG", "warn")).init();
    let cli = Cli::parse();
    let (args, compare) = match cli.command {
        Command::Defaults => {
            print!("{}", RunConfig::default().dump());
            return ExitCode::SUCCESS;
        }
        Command::Run(args) => {
            let compare = args.compare_baseline;
            (args, compare)
        }
        Command::Compare(args) => (args, true),
    };

    let cfg = match load(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if args.dry_run {
        println!("configuration ok");
        return ExitCode::SUCCESS;
    }

    let mut stdout = std::io::stdout().lock();
    let result = if compare {
        cmd_compare(&cfg, &args.out, &mut stdout).map(|_| ())
    } else {
        cmd_run(&cfg, &args.out, &mut stdout).map(|_| ())
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
