use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use telesim::cli::{self, CliError, EXIT_OK, EXIT_USAGE};

/// Wave-variable teleoperation over a periodically lossy channel.
#[derive(Parser)]
#[command(name = "telesim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trace and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Treat any failed invariant as an error, not only unbounded signals.
        #[arg(long)]
        strict: bool,
    },
    /// Run the scenario once per loss rate.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated loss rates alpha/T.
        #[arg(long, allow_hyphen_values = true)]
        rates: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write the loss mask, its series and the coefficient table.
    Loss {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        period: f64,
        #[arg(long)]
        harmonics: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suite on a short run of the scenario.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn execute(command: Command) -> Result<i32, CliError> {
    let mut stdout = io::stdout().lock();
    match command {
        Command::Run { config, out, strict } => cli::cmd_run(&config, &out, strict, &mut stdout).map(|_| EXIT_OK),
        Command::Sweep { config, rates, out_dir } => {
            let mut stderr = io::stderr().lock();
            let rows = cli::cmd_sweep(&config, &rates, &out_dir, &mut stdout, &mut stderr)?;
            Ok(cli::sweep_exit(&rows))
        }
        Command::Loss {
            alpha,
            period,
            harmonics,
            out,
        } => cli::cmd_loss(alpha, period, harmonics, &out).map(|_| EXIT_OK),
        Command::Check { config } => cli::cmd_check(&config, &mut stdout).map(|_| EXIT_OK),
    }
}

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match execute(parsed.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
