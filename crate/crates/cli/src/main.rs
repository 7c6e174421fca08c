use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seld_cli::commands::{augment, eval, featurize, rotations, selfcheck, simulate};
use seld_cli::config::load_config;
use seld_cli::Result;

/// SELD toolkit: simulate scenes, extract features, augment, evaluate.
#[derive(Parser)]
#[command(name = "seld", version, about)]
struct Cli {
    /// TOML config file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. --set codec.lambda=0.3 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset of FOA clips plus metadata CSVs.
    Simulate {
        /// Sample-bank CSV: class,id,path,gain_lo,gain_hi[,trim,trim[,interference]].
        #[arg(long)]
        bank: PathBuf,
        /// Root directory of per-room impulse-response layouts.
        #[arg(long)]
        srirs: PathBuf,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Skip clips already recorded as complete in the manifest.
        #[arg(long)]
        resume: bool,
        /// Number of clips (overrides sim.clip_count).
        #[arg(long)]
        clips: Option<usize>,
    },
    /// Extract feature/label blobs from a simulated dataset.
    Featurize {
        /// Dataset directory (foa/, metadata/, manifest.json).
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory for feature/label blobs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply augmentation chains to featurized blobs.
    Augment {
        /// Directory produced by featurize.
        #[arg(long)]
        features: PathBuf,
        /// Output directory for augmented blobs.
        #[arg(long)]
        out: PathBuf,
        /// Additionally apply a random spatial rotation per item.
        #[arg(long)]
        rotate: bool,
    },
    /// Score prediction metadata against reference metadata.
    Eval {
        /// Directory of reference metadata CSVs.
        refs: PathBuf,
        /// Directory of prediction metadata CSVs (paired by file name).
        preds: PathBuf,
        /// Group results by a manifest tag (e.g. room).
        #[arg(long, value_name = "TAG")]
        group_by: Option<String>,
        /// Manifest carrying per-clip tags (default: refs/manifest.json, then refs/../manifest.json).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the 16 spatial rotation matrices.
    Rotations {
        /// Emit JSON instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Run the brute-force oracle suites against the library.
    Selfcheck {
        /// Random instances per oracle suite.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Base RNG seed for the generated instances.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Simulate {
            bank,
            srirs,
            out,
            resume,
            clips,
        } => {
            if let Some(n) = clips {
                cfg.sim.clip_count = n;
            }
            let manifest = simulate::run(
                &cfg,
                &simulate::SimulateArgs {
                    bank_csv: &bank,
                    srir_root: &srirs,
                    out_dir: &out,
                    resume,
                },
            )?;
            println!(
                "simulated {} clips into {}",
                manifest.entries.len(),
                out.display()
            );
        }
        Command::Featurize { dataset, out } => {
            let manifest = featurize::run(
                &cfg,
                &featurize::FeaturizeArgs {
                    dataset: &dataset,
                    out_dir: &out,
                },
            )?;
            println!(
                "featurized {} clips into {}",
                manifest.entries.len(),
                out.display()
            );
        }
        Command::Augment {
            features,
            out,
            rotate,
        } => {
            let manifest = augment::run(
                &cfg,
                &augment::AugmentArgs {
                    features_dir: &features,
                    out_dir: &out,
                    rotate,
                },
            )?;
            println!(
                "augmented {} items into {}",
                manifest.entries.len(),
                out.display()
            );
        }
        Command::Eval {
            refs,
            preds,
            group_by,
            manifest,
            json,
        } => {
            eval::run(
                &cfg,
                &eval::EvalArgs {
                    refs_dir: &refs,
                    preds_dir: &preds,
                    group_by: group_by.as_deref(),
                    manifest: manifest.as_deref(),
                    json_out: json.as_deref(),
                },
            )?;
        }
        Command::Rotations { json } => {
            print!("{}", rotations::run(json));
        }
        Command::Selfcheck { trials, seed } => {
            print!("{}", selfcheck::run(trials, seed)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
