use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quadrom::experiment::{self, ExperimentConfig};
use quadrom::Error;

/// Learn reduced-order quadratic systems from harmonic transfer-function data.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample H1, H2, H3 of the configured system into `dataset.csv`.
    Generate(RunArgs),
    /// Fit the reduced model from the run directory's dataset.
    Learn(RunArgs),
    /// Compare the learned models with the reference system.
    Validate(RunArgs),
    /// Summarize a finished run directory.
    Report {
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stop after the second-harmonic least-squares estimate.
    #[arg(long)]
    one_step: bool,
    /// Overrides the noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INPUT: u8 = 3;

fn resolve(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if args.one_step {
        cfg.one_step = true;
    }
    if let (Some(seed), Some(noise)) = (args.seed, cfg.noise.as_mut()) {
        noise.seed = seed;
    }
    let out = args.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    cfg.output = Some(out.clone());
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Generate(args) => {
            let (cfg, out) = resolve(&args)?;
            let meta = experiment::cmd_generate(&cfg, &out)?;
            println!("wrote {} samples ({:?}) to {}", meta.points, meta.provenance, out.join("dataset.csv").display());
            Ok(0)
        }
        Command::Learn(args) => {
            let (cfg, out) = resolve(&args)?;
            let s = experiment::cmd_learn(&cfg, &out)?;
            println!("order {} | iterations {} | converged {}", s.order, s.iterations, s.converged);
            if let Some(q) = s.q_error {
                println!("||Q - Q_ref||_2 = {q:e}");
            }
            if s.converged {
                Ok(0)
            } else {
                eprintln!("iteration did not converge; best iterate saved");
                Ok(EXIT_NOT_CONVERGED)
            }
        }
        Command::Validate(args) => {
            let (cfg, out) = resolve(&args)?;
            let s = experiment::cmd_validate(&cfg, &out)?;
            println!(
                "time-domain L2 error: linear {:.4e}, quadratic {:.4e}",
                s.l2_error_linear, s.l2_error_quadratic
            );
            Ok(0)
        }
        Command::Report { out } => {
            let report = experiment::cmd_report(&out)?;
            println!("{report}");
            Ok(if report.learn.converged { 0 } else { EXIT_NOT_CONVERGED })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_)
                | Error::InvalidArgument(_)
                | Error::Format { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Dimension(_)
                | Error::MissingArtifacts(_) => EXIT_INPUT,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
