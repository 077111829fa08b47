use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use phsnn::experiment::{run_experiment, ExperimentConfig, Metrics, OUTPUT_DIR_ENV};
use phsnn::iris::{linear_regression_oracle, load_iris};

#[derive(Parser)]
#[command(name = "phsnn", version, about = "Photonic SNN experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its artifacts.
    #[command(after_help = format!("The output directory can be overridden with {OUTPUT_DIR_ENV}."))]
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Baseline oracles.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Least-squares classifier on the two-class Iris task.
    Iris { csv: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg)?;
            let dir = cfg.resolved_output_dir();
            println!("{} finished in {:.2?}", report.experiment.id(), report.wall_time);
            match &report.metrics {
                Metrics::RbpIris(m) => println!(
                    "final accuracy {}/{} (oracle {}), switch epoch {:?}, redraws {}",
                    m.run.final_accuracy,
                    cfg.rbp.n_samples,
                    m.oracle.accuracy,
                    m.run.switch_epoch,
                    m.run.redraws
                ),
                Metrics::ChlMapping(m) => println!(
                    "RMSE change: mzi {:+.2}%, ideal {:+.2}%, random {:+.2}%",
                    m.change_pct_mzi, m.change_pct_ideal, m.change_pct_random
                ),
                Metrics::NeuronBehaviors(m) => {
                    for r in &m.rows {
                        println!("{:?} -> {:?}", r.preset, r.pattern);
                    }
                }
            }
            for a in &report.artifacts {
                println!("wrote {}", dir.join(a).display());
            }
            for (flag, ok) in &report.convergence {
                if !ok {
                    eprintln!("warning: {flag} not satisfied");
                }
            }
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("{}: ok ({}, seed {})", config.display(), cfg.experiment.id(), cfg.seed);
        }
        Command::Oracle {
            which: Oracle::Iris { csv },
        } => {
            let samples = load_iris::<f64>(&csv).with_context(|| format!("loading {}", csv.display()))?;
            let r = linear_regression_oracle(&samples)?;
            println!("accuracy {}/{}", r.accuracy, samples.len());
            println!("confusion [true][pred]: {:?}", r.confusion);
            if r.ridge_used {
                println!("note: normal equations were singular, ridge 1e-8 added");
            }
        }
    }
    Ok(())
}
