use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use starkmbl_cli::commands::resolve_base;
use starkmbl_cli::{run_command, run_sweep, CliError, Command, Context, RunConfig};

#[derive(Parser)]
#[command(name = "starkmbl", version, about = "Stark MBL spin-chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    #[arg(long, global = true, env = "STARKMBL_CONFIG")]
    config: Option<PathBuf>,

    #[arg(long, global = true, env = "STARKMBL_SEED")]
    seed: Option<u64>,

    #[arg(long, global = true, env = "STARKMBL_WORKERS")]
    workers: Option<usize>,

    #[arg(
        long,
        global = true,
        env = "STARKMBL_OUT",
        default_value = "starkmbl-out"
    )]
    out: PathBuf,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Level-spacing statistics from exact diagonalization
    Levels,
    /// Imbalance after a product-state quench
    Quench,
    /// Echo and DEER signals versus probe-region distance
    Deer,
    /// Site classification in a quadratic field
    Quad,
    /// Long-time imbalance for several initial patterns
    Stability,
    /// Third-order effective Hamiltonian terms
    Sweff,
    /// Parameter grid over one of the other commands
    Sweep,
}

fn run(cli: Cli) -> Result<Option<i32>, CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("no config given (--config or STARKMBL_CONFIG)".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    cfg.validate()?;
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }
    let ctx = Context {
        cfg,
        base: resolve_base(&path),
        out: cli.out,
    };
    let command = match cli.command {
        Sub::Levels => Command::Levels,
        Sub::Quench => Command::Quench,
        Sub::Deer => Command::Deer,
        Sub::Quad => Command::Quad,
        Sub::Stability => Command::Stability,
        Sub::Sweff => Command::Sweff,
        Sub::Sweep => {
            let outcome = run_sweep(&ctx)?;
            let failed = &outcome.report["failed"];
            if outcome.first_failure.is_some() {
                eprintln!("sweep: failed points {failed}");
            }
            return Ok(outcome.first_failure);
        }
    };
    let summary = run_command(&ctx, command)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("json serializes")
    );
    Ok(None)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(code)) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
