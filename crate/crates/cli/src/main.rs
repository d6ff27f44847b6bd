use clap::{Parser, ValueEnum};
use fracpme_cli::config::{parse_config_with, Mode};
use fracpme_cli::dispatch::{dispatch, Status};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Evolve,
    AuxSolve,
    ProbeBarrier,
    Verify,
    Converge,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Self {
        match c {
            Command::Evolve => Mode::Evolve,
            Command::AuxSolve => Mode::AuxSolve,
            Command::ProbeBarrier => Mode::ProbeBarrier,
            Command::Verify => Mode::Verify,
            Command::Converge => Mode::Converge,
        }
    }
}

/// Solver, barrier probe and verification suite for the fractional porous
/// medium equation with variable density.
///
/// Exit status: 0 success, 1 run failure, 2 verification failure,
/// 3 configuration error. FRACPME_THREADS caps the worker threads.
#[derive(Debug, Parser)]
#[command(name = "fracpme", version)]
struct Cli {
    #[arg(value_enum)]
    mode: Command,
    /// key = value run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Artifact directory (overrides `output` in the config)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed for randomized checks (overrides `seed` in the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Only print errors
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Ok(v) = std::env::var("FRACPME_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("cannot size thread pool: {e}");
                }
            }
            _ => {
                eprintln!("FRACPME_THREADS must be a positive integer, got '{v}'");
                return ExitCode::from(3);
            }
        }
    }

    let (text, base) = match &cli.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => (t, p.parent().map(|d| d.to_path_buf())),
            Err(e) => {
                eprintln!("cannot read {}: {e}", p.display());
                return ExitCode::from(3);
            }
        },
        None => (String::new(), None),
    };
    let mut cfg = match parse_config_with(&text, Some(cli.mode.into()), base.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(3);
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli
        .output
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("fracpme-{}", cfg.mode)));

    match dispatch(&cfg, &out) {
        Ok(outcome) => {
            if !cli.quiet {
                print!("{}", outcome.report.render());
            }
            match outcome.status {
                Status::Completed => ExitCode::SUCCESS,
                Status::VerificationFailed => {
                    for c in outcome.report.failures() {
                        eprintln!("check failed: {} ({:e} vs {:e})", c.name, c.measured, c.threshold);
                    }
                    ExitCode::from(2)
                }
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
