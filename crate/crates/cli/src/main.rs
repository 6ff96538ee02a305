use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use impact_hedge_cli::{emit_outputs, output_dir, parse_config, run_scenario, CliError, Subcommand};

/// Quotes, hedges and simulations for a market whose price curve is an
/// indifference curve.
#[derive(Debug, Parser)]
#[command(name = "impact-hedge", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory` and the environment.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `simulation.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all available cores by default.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: &Args) -> Result<i32, CliError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Validation(vec![impact_hedge_cli::Issue::new(
                "--threads",
                "must be positive",
            )]));
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut config = parse_config(&args.config, args.subcommand)?;
    if let Some(seed) = args.seed {
        config.simulation.seed = seed;
    }
    let output = run_scenario(&config, args.subcommand)?;
    let dir = output_dir(args.out.as_deref(), &config);
    emit_outputs(&output, &config, &dir)?;
    for line in &output.report.lines {
        println!("{line}");
    }
    println!("wrote {} file(s) to {}", output.artifacts.len() + 1, dir.display());
    let status = output.report.exit_status();
    if status != 0 {
        eprintln!("{}", CliError::Verification(output.report.failures.clone()));
    }
    Ok(status)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
