use std::path::PathBuf;
use std::process::ExitCode;

use boussinesq_cli::{cmd_mesh, cmd_run, cmd_sweep, cmd_verify, load_config, Report};
use clap::{Args, Parser, Subcommand};

/// Euler–Boussinesq solver and estimate checks on admissible polygons.
#[derive(Parser)]
#[command(name = "boussinesq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] directory`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the mesh and write it as VTK.
    Mesh(Common),
    /// Run the simulation and write diagnostics.
    Run(Common),
    /// Run the simulation and apply the `[verify]` checks.
    Verify(Common),
    /// Run the `[sweep]` study.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads for sweep members.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Mesh(c) => load_config(&c.config).and_then(|cfg| cmd_mesh(&cfg, c.out.as_deref())),
        Command::Run(c) => load_config(&c.config).and_then(|cfg| cmd_run(&cfg, c.out.as_deref())),
        Command::Verify(c) => load_config(&c.config).and_then(|cfg| cmd_verify(&cfg, c.out.as_deref())),
        Command::Sweep { common, jobs } => {
            if *jobs == Some(0) {
                eprintln!("error: --jobs must be at least 1");
                return ExitCode::from(2);
            }
            load_config(&common.config).and_then(|cfg| cmd_sweep(&cfg, common.out.as_deref(), *jobs))
        }
    };
    match result {
        Ok(Report { passed, lines }) => {
            for line in lines {
                println!("{line}");
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
