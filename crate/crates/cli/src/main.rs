use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use talkface_cli::evaluate::run_evaluate;
use talkface_cli::generate::{run_generate, GenerateInputs, Stage, REPORTS_DIR};
use talkface_cli::train::{preprocess, train_blink_stage, train_landmark, train_texture_stage};
use talkface_cli::{CliError, PipelineConfig, Result};

/// Audio-driven talking face generation.
///
/// Every configuration field can be set from a TOML file (`--config`) and
/// from the command line (`--set section.key=value`, repeatable); command
/// line overrides win. Exit code 2 marks invalid configuration or inputs,
/// 1 a failure while running.
#[derive(Parser)]
#[command(name = "talkface", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration field, e.g. `texture.train.steps=500`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved configuration and its hash.
    ShowConfig,

    /// Build training sets from a corpus manifest.
    Preprocess {
        /// Corpus directory holding manifest.jsonl, or the manifest itself.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },

    /// Train the speech to landmark model.
    TrainLandmark {
        /// Output directory of `preprocess`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },

    /// Train the blink generator.
    TrainBlink {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },

    /// Train the texture generator and its discriminator.
    TrainTexture {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also keep the discriminator.
        #[arg(long)]
        disc_out: Option<PathBuf>,
    },

    /// Generate frames for one identity from audio features.
    ///
    /// Writes stages/*.csv, frames/, maps/ (with generate.dump_maps) and
    /// reports/generate.json under --out.
    Generate {
        #[arg(long)]
        identity_image: Option<PathBuf>,
        /// CSV whose first row holds the identity's 68 landmarks.
        #[arg(long)]
        identity_landmarks: Option<PathBuf>,
        /// Feature track (.tfaf or .csv).
        #[arg(long)]
        audio: Option<PathBuf>,
        #[arg(long)]
        landmark_ckpt: Option<PathBuf>,
        #[arg(long)]
        blink_ckpt: Option<PathBuf>,
        #[arg(long)]
        texture_ckpt: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// First stage to run; earlier results are read from --out/stages.
        #[arg(long, value_enum, default_value = "speech")]
        from: Stage,
        /// Last stage to run.
        #[arg(long, value_enum, default_value = "texture")]
        to: Stage,
    },

    /// Score generated clips against a ground-truth manifest.
    Evaluate {
        /// Directory with one `<clip_id>/` output of `generate` per clip.
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Report directory; defaults to <generated>/reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    let config = PipelineConfig::load(cli.config.as_deref(), &cli.overrides)?;
    log::info!("config hash {}", config.hash());
    match cli.command {
        Command::ShowConfig => {
            println!("# config hash {}", config.hash());
            print!("{}", config.to_toml());
        }
        Command::Preprocess { corpus, out } => {
            preprocess(&config, &corpus, &out)?;
        }
        Command::TrainLandmark { data, out } => {
            train_landmark(&config, &data, &out)?;
        }
        Command::TrainBlink { data, out } => {
            train_blink_stage(&config, &data, &out)?;
        }
        Command::TrainTexture { data, out, disc_out } => {
            train_texture_stage(&config, &data, &out, disc_out.as_deref())?;
        }
        Command::Generate {
            identity_image,
            identity_landmarks,
            audio,
            landmark_ckpt,
            blink_ckpt,
            texture_ckpt,
            out,
            from,
            to,
        } => {
            let inputs = GenerateInputs {
                identity_image,
                identity_landmarks,
                audio,
                landmark_checkpoint: landmark_ckpt,
                blink_checkpoint: blink_ckpt,
                texture_checkpoint: texture_ckpt,
            };
            let report = run_generate(&config, &inputs, &out, from, to)?;
            println!("{} frames written to {}", report.frames, out.display());
        }
        Command::Evaluate { generated, manifest, out } => {
            let report = run_evaluate(&config, &generated, &manifest)?;
            let dir = out.unwrap_or_else(|| generated.join(REPORTS_DIR));
            write(&dir.join("eval.json"), &report.to_json())?;
            write(&dir.join("eval.txt"), &report.to_table())?;
            print!("{}", report.to_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
