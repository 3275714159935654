use clap::{Parser, Subcommand, ValueEnum};
use itl_cli::commands::{cmd_export_problem, cmd_run, cmd_sweep, cmd_verify_identities};
use itl_cli::config::{load_json, ExperimentSpec, VerifySpec};
use itl_cli::{CliError, Result};
use std::path::PathBuf;
use std::process::ExitCode;

/// Two-level solver experiments with pluggable inexact coarse solvers,
/// plus numerical verification of their convergence identities and
/// bounds.
///
/// Exit codes: 0 = all checks passed, 1 = a bound or identity check
/// failed (or a runtime error), 2 = configuration error.
#[derive(Parser)]
#[command(name = "itl", version, about)]
struct Cli {
    /// Worker threads for parallel trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check the convergence-factor identities over an instance ensemble
    /// (the built-in ensemble when no config is given).
    VerifyIdentities {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute solver trials and check the error bounds.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Rerun an experiment across a parameter range; emits CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of: ell, nu, n, omega, cond_target.
        #[arg(long)]
        parameter: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Write A, S, P as MatrixMarket files plus a JSON sidecar.
    ExportProblem {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Io(path.clone(), e))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::VerifyIdentities { config, out } => {
            let vspec: Option<VerifySpec> = match config {
                Some(path) => Some(load_json(&path)?),
                None => None,
            };
            let doc = cmd_verify_identities(vspec.as_ref())?;
            let text = itl_core::report::to_json_string(&doc)
                .map_err(|e| CliError::Run(e.to_string()))?;
            emit(out.as_ref(), &(text + "\n"))?;
            Ok(doc.passed)
        }
        Command::Run { config, seed, trials, out, format } => {
            let mut spec: ExperimentSpec = load_json(&config)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(t) = trials {
                spec.trials = t;
            }
            let report = cmd_run(&spec)?;
            let text = match format {
                Format::Json => itl_core::report::to_json_string(&report)
                    .map_err(|e| CliError::Run(e.to_string()))?,
                Format::Csv => {
                    return Err(CliError::Config("run only emits JSON".into()));
                }
            };
            let target = out.as_ref().or(spec.out.as_ref());
            emit(target, &(text + "\n"))?;
            Ok(report.passed)
        }
        Command::Sweep { config, parameter, values, out, format } => {
            let spec: ExperimentSpec = load_json(&config)?;
            let csv = cmd_sweep(&spec, &parameter, &values)?;
            match format {
                Format::Csv => {}
                Format::Json => {
                    return Err(CliError::Config("sweep only emits CSV".into()));
                }
            }
            emit(out.as_ref(), &csv)?;
            Ok(true)
        }
        Command::ExportProblem { config, out } => {
            let spec: ExperimentSpec = load_json(&config)?;
            let files = cmd_export_problem(&spec, &out)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ITL_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
