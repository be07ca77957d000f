use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mfbo::{KernelParams, Sense, SyntheticSpec};
use mfbo_cli::{cmd_gen_synthetic, cmd_run, cmd_validate, CliError, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "mfbo", version, about = "Multi-fidelity Bayesian optimization experiments")]
struct Cli {
    /// Increase log verbosity (repeatable); logs go to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SenseArg {
    Minimize,
    Maximize,
}

impl From<SenseArg> for Sense {
    fn from(s: SenseArg) -> Self {
        match s {
            SenseArg::Minimize => Sense::Minimize,
            SenseArg::Maximize => Sense::Maximize,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method over all repeats and write traces,
    /// aggregate curves and a manifest.
    Run {
        /// Experiment config (TOML).
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `base_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Maximum number of runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Sample a synthetic additive multi-fidelity problem into a CSV table.
    GenSynthetic {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: usize,
        /// One cost per fidelity, cheapest first; the last is the target.
        #[arg(long, value_delimiter = ',', default_value = "1,2.25,9")]
        costs: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        signal_variance: f64,
        #[arg(long, default_value_t = 0.3)]
        lengthscale: f64,
        /// Signal variance of every low-fidelity discrepancy.
        #[arg(long, default_value_t = 0.1)]
        discrepancy_variance: f64,
        #[arg(long, default_value_t = 0.3)]
        discrepancy_lengthscale: f64,
        #[arg(long, value_enum, default_value_t = SenseArg::Maximize)]
        sense: SenseArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check that a dataset loads.
    Validate {
        dataset: PathBuf,
        /// Cost vector to check against the file's fidelity columns.
        #[arg(long, value_delimiter = ',')]
        costs: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = SenseArg::Minimize)]
        sense: SenseArg,
    },
}

fn synthetic_spec(
    dim: usize,
    n: usize,
    costs: Vec<f64>,
    seed: u64,
    kernels: (f64, f64, f64, f64),
    sense: Sense,
) -> Result<SyntheticSpec, CliError> {
    let (sv, ls, dsv, dls) = kernels;
    let bad = |e: mfbo::Error| CliError::config(e.to_string());
    if costs.is_empty() {
        return Err(CliError::config("at least one cost is required"));
    }
    let target = KernelParams::new(sv, vec![ls; dim]).map_err(bad)?;
    let eps = KernelParams {
        signal_variance: dsv,
        lengthscales: vec![dls; dim],
    };
    Ok(SyntheticSpec {
        dim,
        n,
        target,
        discrepancies: vec![eps; costs.len() - 1],
        noise_variances: vec![0.0; costs.len()],
        costs,
        seed,
        prior_mean: 0.0,
        sense,
    })
}

fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Run { config, out, seed, jobs } => {
            let report = cmd_run(&config, &out, seed, jobs)?;
            for line in &report.lines {
                println!("{line}");
            }
            if report.exit_code() != 0 {
                eprintln!("ERROR:runtime: {} run(s) failed; see the manifest", report.failed_runs);
            }
            Ok(report.exit_code())
        }
        Command::GenSynthetic {
            dim,
            n,
            costs,
            seed,
            signal_variance,
            lengthscale,
            discrepancy_variance,
            discrepancy_lengthscale,
            sense,
            out,
        } => {
            let spec = synthetic_spec(
                dim,
                n,
                costs,
                seed,
                (signal_variance, lengthscale, discrepancy_variance, discrepancy_lengthscale),
                sense.into(),
            )?;
            println!("{}", cmd_gen_synthetic(&spec, &out)?.display());
            Ok(0)
        }
        Command::Validate { dataset, costs, sense } => {
            println!("{}", cmd_validate(&dataset, costs.as_deref(), sense.into())?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("ERROR:usage: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code as u8)
        }
    }
}
