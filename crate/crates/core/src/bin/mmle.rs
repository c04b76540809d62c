use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slowfast_mmle::harness::{
    exit_code, export_dataset, load_config_with, run_comparison, run_single, run_study, validate_config, Artifacts,
    Overrides,
};

/// Maximum marginal likelihood estimation with slow-fast Langevin dynamics.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm and write its trajectory and summary.
    Run(Common),
    /// Run several algorithms under a shared budget.
    Compare(Common),
    /// Run the configured study.
    Study(Common),
    /// Check a configuration file without running anything.
    Validate { config: PathBuf },
    /// Write the configured logistic dataset as CSV.
    ExportData {
        #[command(flatten)]
        common: Common,
        /// Destination file (defaults to `<out>/<prefix>_dataset.csv`).
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, group = "budget")]
    steps: Option<u64>,
    #[arg(long, group = "budget")]
    seconds: Option<f64>,
    #[arg(long, group = "budget")]
    grad_evals: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (otherwise `[output] dir`, then `$MMLE_OUT_DIR`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            epsilon: self.epsilon,
            beta: self.beta,
            delta: self.delta,
            gamma: self.gamma,
            n: self.n,
            steps: self.steps,
            seconds: self.seconds,
            grad_evals: self.grad_evals,
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

fn report(result: slowfast_mmle::Result<Artifacts>) -> ExitCode {
    match result {
        Ok(a) => {
            for p in a.paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match validate_config(&config) {
            Ok(d) if d.is_empty() => ExitCode::SUCCESS,
            Ok(d) => {
                for diag in d {
                    eprintln!("{diag}");
                }
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e) as u8)
            }
        },
        Command::Run(c) => report(load_config_with(&c.config, &c.overrides()).and_then(|cfg| run_single(&cfg))),
        Command::Compare(c) => report(load_config_with(&c.config, &c.overrides()).and_then(|cfg| run_comparison(&cfg))),
        Command::Study(c) => report(load_config_with(&c.config, &c.overrides()).and_then(|cfg| run_study(&cfg))),
        Command::ExportData { common, file } => report(
            load_config_with(&common.config, &common.overrides()).and_then(|cfg| export_dataset(&cfg, file.as_deref())),
        ),
    }
}
