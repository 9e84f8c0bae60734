//! Command-line experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use cellfree::harness::{fig1_mode, run, ExperimentPlan};
use cellfree::Error;
use clap::Parser;

/// Cell-free massive MIMO downlink Monte-Carlo simulator.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// TOML experiment plan; built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of network setups.
    #[arg(long)]
    setups: Option<usize>,
    /// Coherence blocks per setup.
    #[arg(long)]
    blocks: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the power-concentration experiment instead of the SE sweep.
    #[arg(long)]
    fig1: bool,
    /// Comma-separated runs or precoders, e.g. `mmse-dist-mm,rzf`.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Print the resolved plan as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(args: &Args) -> cellfree::Result<ExperimentPlan> {
    let mut plan = match &args.config {
        Some(path) => ExperimentPlan::load(path)
            .map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?,
        None => ExperimentPlan::default(),
    };
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    if let Some(setups) = args.setups {
        plan.setups = setups;
    }
    if let Some(blocks) = args.blocks {
        plan.blocks = blocks;
    }
    if let Some(out) = &args.out {
        plan.out = out.clone();
    }
    if let Some(schemes) = &args.schemes {
        plan.schemes = schemes.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    Ok(plan)
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_numerical() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let plan = match resolve(&args) {
        Ok(p) => p,
        Err(e) => {
            log::error!("{e}");
            return exit_code(&e);
        }
    };
    if args.print_config {
        print!("{}", plan.to_toml());
        return ExitCode::SUCCESS;
    }
    if args.fig1 {
        return match fig1_mode(&plan) {
            Ok(s) => {
                println!(
                    "snapshots {}  cap 1/L = {}  above cap {:.4}  above 3x cap {:.4}  mean peak/cap {:.3}",
                    s.snapshots, s.reference, s.above_cap, s.above_3x_cap, s.peak_over_cap.mean
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                log::error!("{e}");
                exit_code(&e)
            }
        };
    }
    match run(&plan) {
        Ok(summary) => {
            println!("{:<24} {:>9} {:>9} {:>9}", "run", "likely95", "median", "mean");
            for r in &summary.reports {
                println!("{:<24} {:>9.4} {:>9.4} {:>9.4}", r.label, r.likely95, r.median, r.mean);
            }
            if summary.warnings > 0 {
                log::warn!("{} (run, setup) evaluations failed; see metadata.json", summary.warnings);
            }
            if summary.has_empty_run() {
                log::error!("at least one run failed on every setup");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            exit_code(&e)
        }
    }
}
