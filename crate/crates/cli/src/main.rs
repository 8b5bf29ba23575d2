use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use forch_cli::run::{execute, resolve, write, Command, Overrides};
use forch_cli::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "forchpi", version, about = "Productivity-index solvers for Forchheimer flows")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the scenario's `output.dir`.
    #[arg(long, global = true, env = "FORCHPI_OUT_DIR")]
    out: Option<PathBuf>,

    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Keep every k-th time row in CSV output.
    #[arg(long, global = true)]
    stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Basic pseudo-steady profile and its productivity index.
    Pss,
    /// Time-dependent liquid run under a well program.
    Transient,
    /// Gas run tracking J[p] against the auxiliary pressure.
    Gas,
    /// Pressure and PI gaps over a range of reserve levels.
    GasSweep,
    /// Energy identity residual of the Darcy gas problem.
    GasIdentity,
    /// Assumption functionals and verdicts for a well program.
    Diagnose,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Pss => Command::Pss,
            Cmd::Transient => Command::Transient,
            Cmd::Gas => Command::Gas,
            Cmd::GasSweep => Command::GasSweep,
            Cmd::GasIdentity => Command::GasIdentity,
            Cmd::Diagnose => Command::Diagnose,
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let ov = Overrides {
        out: cli.out,
        stride: cli.stride,
    };
    let sc = resolve(&text, &ov)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cmd = Command::from(cli.command);
    let outcome = execute(&sc, cmd)?;
    let dir = PathBuf::from(sc.output.dir.as_deref().unwrap_or("out"));
    let written = write(&dir, &sc, cmd, &outcome)?;
    let mut summary = outcome.summary;
    summary["outputs"] = written
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .into();
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
