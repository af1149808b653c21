//! Audio features plus one identity frame to a talking-face frame sequence.
//!
//! Four stages, each writing its result under `stages/` so that any of them
//! can be rerun on its own from the previous stage's file:
//!
//! 1. `speech`: audio windows to canonical displacements (`speech.csv`)
//! 2. `blink`: generated blinks added on top (`blinks.csv`, `canonical.csv`)
//! 3. `retarget`: canonical motion onto the identity face (`landmarks.csv`)
//! 4. `texture`: landmark images to frames (`frames/`, optionally `maps/`)
//!
//! Values are written with their shortest round-trip representation, so a
//! chained run reproduces the monolithic run bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use talkface_core::audio::{load_feature_track, window_track};
use talkface_core::blink::{detect_blinks, impose_blinks_canonical, BlinkSequence, BlinkStats, BLINK_DIM};
use talkface_core::geometry::{compute_scale, retarget_sequence};
use talkface_core::image::FaceImage;
use talkface_core::landmark_io::{load_landmarks, save_landmarks};
use talkface_core::raster::render_landmark_image;
use talkface_core::{CanonicalDisplacement, LandmarkSet};
use talkface_models::blink::BlinkGenerator;
use talkface_models::params::file_hash;
use talkface_models::speech::{self, Speech2Landmark};
use talkface_models::texture::TextureGenerator;
use talkface_models::Checkpoint;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};

pub const STAGES_DIR: &str = "stages";
pub const FRAMES_DIR: &str = "frames";
pub const MAPS_DIR: &str = "maps";
pub const REPORTS_DIR: &str = "reports";
pub const SPEECH_FILE: &str = "speech.csv";
pub const BLINKS_FILE: &str = "blinks.csv";
pub const CANONICAL_FILE: &str = "canonical.csv";
pub const LANDMARKS_FILE: &str = "landmarks.csv";
pub const GENERATE_REPORT: &str = "generate.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Speech,
    Blink,
    Retarget,
    Texture,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Speech, Stage::Blink, Stage::Retarget, Stage::Texture];
}

/// Input files. Only those needed by the requested stages must exist.
#[derive(Clone, Debug, Default)]
pub struct GenerateInputs {
    pub identity_image: Option<PathBuf>,
    pub identity_landmarks: Option<PathBuf>,
    pub audio: Option<PathBuf>,
    pub landmark_checkpoint: Option<PathBuf>,
    pub blink_checkpoint: Option<PathBuf>,
    pub texture_checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance and summary of one `generate` invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateReport {
    pub config_hash: String,
    pub stages: Vec<Stage>,
    pub frames: usize,
    pub fps: f64,
    pub checkpoints: Vec<FileRecord>,
    pub inputs: Vec<FileRecord>,
    /// Blinks detected on the retargeted landmark stream.
    pub blink_stats: Option<BlinkStats>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    let p = p.as_deref().ok_or_else(|| invalid(format!("{what} is required for the requested stages")))?;
    if !p.is_file() {
        return Err(invalid(format!("{what} {} not found", p.display())));
    }
    Ok(p)
}

fn record(path: &Path) -> Result<FileRecord> {
    Ok(FileRecord {
        path: path.to_path_buf(),
        sha256: file_hash(path)?,
    })
}

pub fn write_rows(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_rows(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| invalid(format!("{} row {i}: {e}", path.display())))?;
            if row.len() != width {
                return Err(invalid(format!(
                    "{} row {i} has {} values, expected {width}",
                    path.display(),
                    row.len()
                )));
            }
            Ok(row)
        })
        .collect()
}

fn read_displacements(path: &Path) -> Result<Vec<CanonicalDisplacement>> {
    if !path.is_file() {
        return Err(invalid(format!("stage input {} not found; run the earlier stage first", path.display())));
    }
    read_rows(path, 2 * talkface_core::landmarks::NUM_LANDMARKS)?
        .iter()
        .map(|r| Ok(CanonicalDisplacement::from_flat(r)?))
        .collect()
}

fn write_displacements(path: &Path, deltas: &[CanonicalDisplacement]) -> Result<()> {
    write_rows(path, &deltas.iter().map(|d| d.to_flat()).collect::<Vec<_>>())
}

fn identity_landmarks(path: &Path) -> Result<LandmarkSet> {
    load_landmarks(path)?
        .into_iter()
        .next()
        .ok_or_else(|| invalid(format!("{} holds no landmark row", path.display())))
}

/// Mean face stored by `train-landmark` alongside the speech model.
pub fn checkpoint_mean_face(path: &Path) -> Result<LandmarkSet> {
    let ckpt = Checkpoint::load(path, speech::CHECKPOINT_KIND)?;
    let values: Vec<f64> = serde_json::from_value(ckpt.config["training"]["mean_face"].clone())
        .map_err(|_| invalid(format!("{} records no mean face", path.display())))?;
    Ok(LandmarkSet::from_flat(&values)?)
}

fn stage_speech(config: &PipelineConfig, inputs: &GenerateInputs, stages: &Path, report: &mut GenerateReport) -> Result<()> {
    let audio = required(&inputs.audio, "audio features")?;
    let ckpt = required(&inputs.landmark_checkpoint, "landmark checkpoint")?;
    let track = load_feature_track(audio)?;
    if track.video_fps() != config.fps {
        return Err(invalid(format!(
            "audio features are aligned to {} fps, config expects {}",
            track.video_fps(),
            config.fps
        )));
    }
    let n = track.video_frame_count();
    if n == 0 {
        return Err(invalid("audio features cover no video frame"));
    }
    let model = Speech2Landmark::load(ckpt)?;
    let deltas = model.predict(&window_track(&track, n)?)?;
    write_displacements(&stages.join(SPEECH_FILE), &deltas)?;
    report.inputs.push(record(audio)?);
    report.checkpoints.push(record(ckpt)?);
    info!("stage speech: {n} frames");
    Ok(())
}

fn stage_blink(config: &PipelineConfig, inputs: &GenerateInputs, stages: &Path, report: &mut GenerateReport) -> Result<()> {
    let speech = read_displacements(&stages.join(SPEECH_FILE))?;
    let blinks = if config.blink.enabled {
        let ckpt = required(&inputs.blink_checkpoint, "blink checkpoint")?;
        report.checkpoints.push(record(ckpt)?);
        BlinkGenerator::load(ckpt)?.generate(speech.len(), config.generate.blink_seed)?
    } else {
        BlinkSequence::zeros(speech.len())
    };
    let rows: Vec<Vec<f64>> = blinks.frames().iter().map(|f| f.to_vec()).collect();
    write_rows(&stages.join(BLINKS_FILE), &rows)?;
    // Reread so a chained run sees exactly what the file holds.
    let blinks = BlinkSequence::from_flat(&read_rows(&stages.join(BLINKS_FILE), BLINK_DIM)?.concat())?;
    let canonical = impose_blinks_canonical(&speech, &blinks)?;
    write_displacements(&stages.join(CANONICAL_FILE), &canonical)?;
    info!("stage blink: {} frames", canonical.len());
    Ok(())
}

fn stage_retarget(inputs: &GenerateInputs, stages: &Path, report: &mut GenerateReport) -> Result<()> {
    let canonical = read_displacements(&stages.join(CANONICAL_FILE))?;
    let lm_path = required(&inputs.identity_landmarks, "identity landmarks")?;
    let ckpt = required(&inputs.landmark_checkpoint, "landmark checkpoint")?;
    let person = identity_landmarks(lm_path)?;
    let mean = checkpoint_mean_face(ckpt)?;
    let scale = compute_scale(&person, &mean)?;
    let landmarks = retarget_sequence(&canonical, scale, &person, &mean)?;
    save_landmarks(stages.join(LANDMARKS_FILE), &landmarks)?;
    report.inputs.push(record(lm_path)?);
    if !report.checkpoints.iter().any(|c| c.path == ckpt) {
        report.checkpoints.push(record(ckpt)?);
    }
    info!("stage retarget: {} frames", landmarks.len());
    Ok(())
}

fn stage_texture(config: &PipelineConfig, inputs: &GenerateInputs, out: &Path, report: &mut GenerateReport) -> Result<()> {
    let lm_file = out.join(STAGES_DIR).join(LANDMARKS_FILE);
    if !lm_file.is_file() {
        return Err(invalid(format!("stage input {} not found; run the earlier stage first", lm_file.display())));
    }
    let landmarks = load_landmarks(&lm_file)?;
    let image_path = required(&inputs.identity_image, "identity image")?;
    let lm_path = required(&inputs.identity_landmarks, "identity landmarks")?;
    let ckpt = required(&inputs.texture_checkpoint, "texture checkpoint")?;
    let identity = FaceImage::load_png(image_path)?;
    let size = config.resolution;
    if identity.height() != size || identity.width() != size {
        return Err(invalid(format!(
            "identity image is {}×{}, config resolution is {size}",
            identity.width(),
            identity.height()
        )));
    }
    let gen = TextureGenerator::load(ckpt)?;
    if gen.config().size != size {
        return Err(invalid(format!(
            "texture checkpoint works at {}, config resolution is {size}",
            gen.config().size
        )));
    }
    let identity_lm = render_landmark_image(&identity_landmarks(lm_path)?, size, size)?;
    let frames_dir = out.join(FRAMES_DIR);
    std::fs::create_dir_all(&frames_dir).map_err(|e| CliError::io(&frames_dir, e))?;
    let maps_dir = out.join(MAPS_DIR);
    if config.generate.dump_maps {
        std::fs::create_dir_all(&maps_dir).map_err(|e| CliError::io(&maps_dir, e))?;
    }
    for (chunk_index, chunk) in landmarks.chunks(config.generate.batch).enumerate() {
        let rasters = chunk
            .iter()
            .map(|lm| render_landmark_image(lm, size, size))
            .collect::<talkface_core::Result<Vec<_>>>()?;
        for (i, (att, color, frame)) in gen.generate_frames(&identity, &identity_lm, &rasters)?.into_iter().enumerate() {
            let t = chunk_index * config.generate.batch + i;
            frame.save_png(frames_dir.join(format!("{t:05}.png")))?;
            if config.generate.dump_maps {
                att.save_png(maps_dir.join(format!("att_{t:05}.png")))?;
                color.save_png(maps_dir.join(format!("color_{t:05}.png")))?;
            }
        }
    }
    report.inputs.push(record(image_path)?);
    report.checkpoints.push(record(ckpt)?);
    info!("stage texture: {} frames", landmarks.len());
    Ok(())
}

/// Runs stages `from..=to`, reading the input of `from` from `out/stages`
/// when it is not the first stage.
pub fn run_generate(
    config: &PipelineConfig,
    inputs: &GenerateInputs,
    out: &Path,
    from: Stage,
    to: Stage,
) -> Result<GenerateReport> {
    if from > to {
        return Err(invalid(format!("stage range {from:?}..{to:?} is empty")));
    }
    let stages_dir = out.join(STAGES_DIR);
    std::fs::create_dir_all(&stages_dir).map_err(|e| CliError::io(&stages_dir, e))?;
    let mut report = GenerateReport {
        config_hash: config.hash(),
        stages: Stage::ALL.into_iter().filter(|s| (from..=to).contains(s)).collect(),
        frames: 0,
        fps: config.fps,
        checkpoints: Vec::new(),
        inputs: Vec::new(),
        blink_stats: None,
    };
    for stage in report.stages.clone() {
        match stage {
            Stage::Speech => stage_speech(config, inputs, &stages_dir, &mut report)?,
            Stage::Blink => stage_blink(config, inputs, &stages_dir, &mut report)?,
            Stage::Retarget => stage_retarget(inputs, &stages_dir, &mut report)?,
            Stage::Texture => stage_texture(config, inputs, out, &mut report)?,
        }
    }
    let lm_file = stages_dir.join(LANDMARKS_FILE);
    if to >= Stage::Retarget && lm_file.is_file() {
        let landmarks = load_landmarks(&lm_file)?;
        report.frames = landmarks.len();
        report.blink_stats = Some(detect_blinks(&landmarks, config.fps)?);
    } else {
        let last = if to == Stage::Speech { SPEECH_FILE } else { CANONICAL_FILE };
        report.frames = read_displacements(&stages_dir.join(last))?.len();
    }
    let reports = out.join(REPORTS_DIR);
    std::fs::create_dir_all(&reports).map_err(|e| CliError::io(&reports, e))?;
    let path = reports.join(GENERATE_REPORT);
    std::fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}
