use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pointstab_cli::{run, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(name = "pointstab", version, about = "Gramian feedback synthesis and simulation for a string-beam system")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Run configuration (key = value lines)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides output_dir from the config
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Overrides omega from the config
    #[arg(long, global = true, value_name = "F")]
    omega: Option<f64>,

    /// Suppress the summary on stdout
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Gramian, feedback blocks and closed-loop spectrum
    Synthesize,
    /// Closed-loop trajectory, energies and decay fit
    Simulate,
    /// Minimum-energy open-loop control to the target state
    Control,
    /// Observability constants on the window [0, T]
    Observability,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Synthesize => Command::Synthesize,
        Cmd::Simulate => Command::Simulate,
        Cmd::Control => Command::Control,
        Cmd::Observability => Command::Observability,
    };
    match go(&cli, command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pointstab {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn go(cli: &Cli, command: Command) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(w) = cli.omega {
        cfg = cfg.with_omega(w)?;
    }
    let dir = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let report = run(command, &cfg, &dir)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !cli.quiet {
        for (name, _) in &report.outputs.files {
            println!("wrote {}", dir.join(name).display());
        }
        let json = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
        println!("{json}");
    }
    Ok(())
}
