use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ffnt_cli::{cmd_compare, cmd_run, cmd_verify, CliError, Overrides, VerifyOptions};

#[derive(Parser)]
#[command(
    name = "ffnt",
    version,
    about = "Composite neural backstepping simulator for strict-feedback plants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON); the built-in pendulum scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Skip SVG output.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one variant and write the trace and plots.
    Run {
        #[command(flatten)]
        common: Common,
        /// developed, developed-without-composite or fse-rbfnn-cfb
        #[arg(long)]
        variant: Option<String>,
    },
    /// Run several variants side by side and tabulate their metrics.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Repeat for each variant; all three when omitted.
        #[arg(long)]
        variant: Vec<String>,
    },
    /// Run the randomized inequality suites and the gradient check.
    Verify {
        #[arg(long, default_value_t = VerifyOptions::default().samples)]
        samples: usize,
        /// Absolute slack of the inequality suites.
        #[arg(long, default_value_t = VerifyOptions::default().tolerance)]
        tolerance: f64,
        /// Relative error allowed in the gradient check.
        #[arg(long, default_value_t = VerifyOptions::default().grad_tolerance)]
        grad_tolerance: f64,
    },
}

fn overrides(c: &Common, variant: Option<String>) -> Overrides {
    Overrides {
        dt: c.dt,
        t_final: c.t_final,
        out_dir: c.out_dir.clone(),
        variant,
        no_plots: c.no_plots,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    let result: Result<(), CliError> = match cli.command {
        Command::Run { common, variant } => cmd_run(
            common.config.as_deref(),
            &overrides(&common, variant),
            &mut stdout,
        ),
        Command::Compare { common, variant } => cmd_compare(
            common.config.as_deref(),
            &overrides(&common, None),
            &variant,
            &mut stdout,
        ),
        Command::Verify {
            samples,
            tolerance,
            grad_tolerance,
        } => cmd_verify(
            &VerifyOptions {
                samples,
                tolerance,
                grad_tolerance,
            },
            &mut stdout,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
