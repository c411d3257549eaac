use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridflex::cli;
use gridflex::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "gridflex",
    version,
    about = "Demand-response simulation of grid tariff designs and spot prices"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic load and spot price CSV files
    GenerateData {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the configured one)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Calibrate tariff parameters for revenue neutrality and print them
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        /// Write a config copy with calibrated parameters into this directory
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict to these designs (repeatable)
        #[arg(long = "tariff")]
        tariffs: Vec<String>,
    },
    /// Run the configured cases and write result files
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = machine default; output does not depend on it)
        #[arg(long)]
        jobs: Option<usize>,
        /// Restrict to these cases (repeatable: sor, gt, gt_sp, sp)
        #[arg(long = "case")]
        cases: Vec<String>,
        /// Restrict the grid-tariff cases to these designs (repeatable)
        #[arg(long = "tariff")]
        tariffs: Vec<String>,
    },
    /// Summarize a results directory produced by `run`
    Report {
        /// Directory containing results.csv
        results_dir: PathBuf,
    },
}

fn load_config(path: &Path, overrides: &Overrides) -> gridflex::Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    config.apply(overrides);
    config.validate()?;
    Ok(config)
}

fn run(args: Args) -> gridflex::Result<()> {
    match args.command {
        Command::GenerateData { config, out, seed } => {
            let overrides = Overrides {
                seed,
                out_dir: out,
                ..Default::default()
            };
            let config = load_config(&config, &overrides)?;
            cli::cmd_generate_data(&config, &config.out_dir.clone())?;
            eprintln!(
                "wrote loads.csv and spot.csv to {}",
                config.out_dir.display()
            );
        }
        Command::Calibrate {
            config,
            out,
            seed,
            tariffs,
        } => {
            let overrides = Overrides {
                seed,
                out_dir: out.clone(),
                tariffs,
                ..Default::default()
            };
            let config = load_config(&config, &overrides)?;
            let (report, updated) = cli::cmd_calibrate(&config)?;
            print!("{}", report.render_text());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let path = dir.join("calibrated_config.toml");
                std::fs::write(&path, updated.to_toml()?)?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Run {
            config,
            out,
            seed,
            jobs,
            cases,
            tariffs,
        } => {
            let overrides = Overrides {
                seed,
                out_dir: out,
                jobs,
                cases,
                tariffs,
            };
            let config = load_config(&config, &overrides)?;
            let table = cli::cmd_run(&config)?;
            print!("{}", table.render_text());
            eprintln!("results written to {}", config.out_dir.display());
        }
        Command::Report { results_dir } => {
            let text = cli::cmd_report(&results_dir)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
