//! `specmon` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use specmon::scan::make_time_multiplexed_schedule;
use specmon::scenario::{load_scenario, metrics_from_artifacts, sweep, Overrides};
use specmon::Error;

#[derive(Parser)]
#[command(name = "specmon", version, about = "Ring-scanned interlaced AWG spectrum monitor simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Tuning {
    /// Worker threads for the scan (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    /// Replace the spectrum grid step, Hz.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Replace the number of θ steps per FSR.
    #[arg(long)]
    theta_steps: Option<usize>,
    /// Replace the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl From<&Tuning> for Overrides {
    fn from(t: &Tuning) -> Self {
        Overrides { threads: t.threads, grid_step_hz: t.grid_step, theta_steps: t.theta_steps, seed: t.seed }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        scenario: PathBuf,
        /// Dotted parameter path, e.g. `bank.profile.passband_3db_hz`.
        #[arg(long)]
        param: String,
        /// Comma-separated JSON values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Print a time-multiplexed switch plan as JSON.
    Schedule {
        #[arg(long)]
        ports: usize,
        #[arg(long, default_value_t = specmon::scan::DEFAULT_THETA_STEPS)]
        steps: usize,
        /// Switch-window widening, degrees.
        #[arg(long, default_value_t = 15.0)]
        tolerance: f64,
    },
    /// Check a scenario and print its effective configuration.
    Validate {
        scenario: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Recompute metrics from a run directory.
    Metrics { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { scenario, out, tuning } => {
            let s = load_scenario(&scenario, &(&tuning).into())?;
            let result = s.run(&out)?;
            println!("{}", serde_json::to_string_pretty(&result.metrics)?);
            log::info!("artifacts written to {}", out.display());
        }
        Command::Sweep { scenario, param, values, out, tuning } => {
            let s = load_scenario(&scenario, &(&tuning).into())?;
            let values = values
                .iter()
                .map(|v| serde_json::from_str(v.trim()).map_err(|e| Error::Config(format!("sweep value `{v}`: {e}"))))
                .collect::<Result<Vec<serde_json::Value>, _>>()?;
            let rows = sweep(&s, &param, &values, &out)?;
            println!("{}", serde_json::to_string_pretty(&rows)?);
        }
        Command::Schedule { ports, steps, tolerance } => {
            let schedule = make_time_multiplexed_schedule(ports, steps, tolerance)?;
            println!("{}", serde_json::to_string_pretty(schedule.switch_plan())?);
        }
        Command::Validate { scenario, tuning } => {
            let s = load_scenario(&scenario, &(&tuning).into())?;
            println!("{}", s.effective_config_json()?);
        }
        Command::Metrics { dir } => {
            let m = metrics_from_artifacts(&dir)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
    }
    Ok(())
}
