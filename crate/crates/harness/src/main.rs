use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcboost::potential::DEFAULT_STATE_CAP;
use mcboost_harness::config::{ExperimentConfig, RawConfig, SimulateConfig};
use mcboost_harness::error::{HarnessError, Result};
use mcboost_harness::{checks, experiment, results, simulate, tables};

/// γ values swept when a sweep names none.
const DEFAULT_GAMMA_GRID: [&str; 5] = ["0.3", "0.1", "0.05", "0.01", "0.001"];

#[derive(Parser)]
#[command(name = "mcboost", version, about = "Online multiclass boosting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `output.dir`, then `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run an experiment over grids of γ, N and loss; flags replace the
    /// config's lists, and γ defaults to 0.3, 0.1, 0.05, 0.01, 0.001.
    Sweep {
        config: PathBuf,
        /// Edge value; repeat the flag for a grid.
        #[arg(long = "gamma")]
        gammas: Vec<String>,
        /// Number of weak learners; repeatable.
        #[arg(long = "n")]
        ns: Vec<String>,
        /// logistic, exponential or square_hinge; repeatable.
        #[arg(long = "loss")]
        losses: Vec<String>,
        /// Output directory; defaults to `output.dir`, then `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run lower-bound adversary simulations.
    Simulate {
        config: PathBuf,
        /// Output directory; defaults to `output.dir`, then `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Export the exact potential table for `k` labels, edge `gamma` and `n` learners as CSV.
    Potential {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        n: usize,
        /// Refuse tables with more reachable states than this.
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant suites.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<RawConfig> {
    let mut raw = RawConfig::from_path(path)?;
    if let Some(s) = seed {
        raw.set("seed", &s.to_string());
    }
    Ok(raw)
}

fn out_dir(flag: Option<PathBuf>, configured: Option<PathBuf>, name: &str) -> PathBuf {
    flag.or(configured).unwrap_or_else(|| PathBuf::from("out").join(name))
}

fn run_experiment(raw: &RawConfig, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::from_raw(raw)?;
    let dir = out_dir(out, cfg.output_dir.clone(), &cfg.name);
    let exp = experiment::run_experiment(&cfg)?;
    results::emit_experiment(&exp, &dir)?;
    print!("{}", results::experiment_markdown(&exp));
    eprintln!("wrote {}", dir.display());
    if let Some(cell) = exp.cells.iter().find(|c| c.aborted.is_some()) {
        let (completed, reason) = cell.aborted.clone().expect("checked above");
        return Err(HarnessError::Aborted {
            completed,
            total: exp.rows,
            source: mcboost::Error::InvalidParameter(format!("{}: {reason}", exp.variants[cell.variant].label())),
        });
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out, seed } => run_experiment(&load(&config, seed)?, out)?,
        Command::Sweep { config, gammas, ns, losses, out, seed } => {
            let mut raw = load(&config, seed)?;
            if !gammas.is_empty() {
                raw.set_list("gamma", &gammas);
            } else if !raw.contains("gamma") {
                raw.set_list("gamma", &DEFAULT_GAMMA_GRID.map(String::from));
            }
            if !ns.is_empty() {
                raw.set_list("n", &ns);
            }
            if !losses.is_empty() {
                raw.set_list("loss", &losses);
            }
            let mut algorithms: Vec<String> = raw.list("algorithm")?;
            if !algorithms.iter().any(|a| a == "online_mbbm") {
                algorithms.push("online_mbbm".into());
                raw.set_list("algorithm", &algorithms);
            }
            run_experiment(&raw, out)?;
        }
        Command::Simulate { config, out, seed } => {
            let cfg = SimulateConfig::from_raw(&load(&config, seed)?)?;
            let dir = out_dir(out, cfg.output_dir.clone(), &cfg.name);
            let reports = simulate::simulate(&cfg)?;
            results::emit_simulation(&cfg, &reports, &dir)?;
            print!("{}", results::simulation_markdown(&cfg, &reports));
            eprintln!("wrote {}", dir.display());
        }
        Command::Potential { k, gamma, n, cap, out } => {
            let csv = tables::potential_csv(k, gamma, n, cap)?;
            match out {
                Some(path) => std::fs::write(&path, csv).map_err(|e| HarnessError::io(&path, e))?,
                None => print!("{csv}"),
            }
        }
        Command::Check { seed } => {
            let mut all = true;
            for c in checks::run_all(seed)? {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                all &= c.pass;
            }
            return Ok(all);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
