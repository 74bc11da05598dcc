use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hyperball::cli;

#[derive(Parser)]
#[command(name = "hyperball", about = "Hyperbolic ball-based multi-label classifier", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic single-positive dataset from the config's synth block
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for features.csv, labels_single.csv, labels_full.csv
        #[arg(long)]
        out: PathBuf,
        /// Overrides the synth seed in the config
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model from a config file
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output model JSON path; metrics go to <out>.metrics.csv
        #[arg(long)]
        out: PathBuf,
        /// Overrides the training seed in the config
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a model's mAP against full ground-truth labels
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels_full: PathBuf,
    },
    /// Correlate label co-occurrence with embedding distance
    Analyze {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        labels_full: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export a 2-D response-map grid for one label
    ExportMap {
        #[arg(long)]
        model: PathBuf,
        /// Label index to map
        #[arg(long)]
        label: usize,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(args: Args) -> hyperball::Result<()> {
    match args.command {
        Command::GenData { config, out, seed } => cli::cmd_gen_data(&config, &out, seed),
        Command::Train { config, out, seed } => cli::cmd_train(&config, &out, seed),
        Command::Eval {
            model,
            features,
            labels_full,
        } => cli::cmd_eval(&model, &features, &labels_full),
        Command::Analyze {
            model,
            labels_full,
            out,
        } => cli::cmd_analyze(&model, &labels_full, &out),
        Command::ExportMap {
            model,
            label,
            resolution,
            out,
        } => cli::cmd_export_map(&model, label, resolution, &out),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            // clap prints help/version on stdout with success status
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
