//! `stospec` command-line runner.
//!
//! ```text
//! stospec <study> --config FILE [--out DIR] [--workers N] [--seed-offset K]
//! stospec validate --config FILE
//! ```
//!
//! Exit codes: 0 success, 2 finished with an inconclusive estimate, 1 usage or
//! runtime error. `STOSPEC_OUT` overrides the output directory of the config;
//! `--out` overrides both.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stospec_core::ensemble::Workers;
use stospec_core::experiment::config::{ExperimentConfig, StudyKind};
use stospec_core::experiment::run::{config_hash, resolve_out_dir, run};

#[derive(Parser, Debug)]
#[command(name = "stospec", version, about = "Reproducible experiments on the stochastic pitchfork and linear cocycles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    /// Added to every seed of the configuration.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stationary moments and Lyapunov exponents over an (alpha, sigma) grid.
    DensitySweep(RunArgs),
    /// Finite-time Lyapunov exponent ensemble.
    Ftle(RunArgs),
    /// Uniform attractivity probe of the random fixed point.
    Attractivity(RunArgs),
    /// Dichotomy spectrum scan over growth rates.
    SpectrumScan(RunArgs),
    /// Conjugacy tables and cohomology residuals.
    Conjugacy(RunArgs),
    /// Extremal finite-time exponents over a horizon schedule.
    Endpoints(RunArgs),
    /// Parse and validate a configuration, printing its canonical form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    ExperimentConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run_study(kind: StudyKind, args: RunArgs) -> Result<u8, String> {
    let mut config = load(&args.config)?;
    if config.kind() != kind {
        return Err(format!("config describes study '{}', not '{}'", config.kind().name(), kind.name()));
    }
    config.seeds = config.seeds.offset(args.seed_offset);
    let out = resolve_out_dir(&config, args.out.as_deref());
    let envelope = run(&config, Workers(args.workers as usize), &out).map_err(|e| e.to_string())?;
    for d in &envelope.diagnostics {
        eprintln!("diagnostic: {d}");
    }
    println!(
        "{} {} -> {} ({} ms, config {})",
        kind.name(),
        serde_status(envelope.status),
        out.display(),
        envelope.meta.elapsed_ms,
        &envelope.config_hash[..12]
    );
    Ok(envelope.status.exit_code() as u8)
}

fn serde_status(s: stospec_core::experiment::RunStatus) -> &'static str {
    match s {
        stospec_core::experiment::RunStatus::Ok => "ok",
        stospec_core::experiment::RunStatus::Inconclusive => "inconclusive",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Validate { config } => load(&config).map(|c| {
            print!("{}", c.render());
            println!("# sha256 {}", config_hash(&c));
            0
        }),
        Command::DensitySweep(a) => run_study(StudyKind::DensitySweep, a),
        Command::Ftle(a) => run_study(StudyKind::Ftle, a),
        Command::Attractivity(a) => run_study(StudyKind::Attractivity, a),
        Command::SpectrumScan(a) => run_study(StudyKind::SpectrumScan, a),
        Command::Conjugacy(a) => run_study(StudyKind::Conjugacy, a),
        Command::Endpoints(a) => run_study(StudyKind::Endpoints, a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
