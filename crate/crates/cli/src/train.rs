//! `preprocess` and the three training subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use candle_core::DType;
use log::info;
use serde_json::json;
use talkface_core::data_prep::{build_training_sets, load_manifest, TextureSample, TrainingSets, MANIFEST_FILE};
use talkface_core::image::FaceImage;
use talkface_core::LandmarkSet;
use talkface_models::blink::{train_blink, BlinkLossRecord};
use talkface_models::speech::{train_speech, SpeechLossRecord, SpeechSequence};
use talkface_models::texture::{train_texture, TextureClip, TextureLossRecord};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};

/// Accepts either a manifest file or a corpus directory holding one.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn preprocess(config: &PipelineConfig, corpus: &Path, out: &Path) -> Result<TrainingSets> {
    let manifest = manifest_path(corpus);
    if !manifest.is_file() {
        return Err(CliError::Validation(format!("manifest {} not found", manifest.display())));
    }
    let clips = load_manifest(&manifest)?;
    if let Some(c) = clips.iter().find(|c| c.fps != config.fps) {
        return Err(CliError::Validation(format!(
            "clip {} runs at {} fps, config expects {}",
            c.clip_id, c.fps, config.fps
        )));
    }
    let sets = build_training_sets(&clips, &config.prep_config())?;
    sets.write(out)?;
    info!(
        "{} clips usable, {} skipped; {} speech clips, {} blink sequences, {} texture frames",
        sets.speech.len(),
        sets.skipped.len(),
        sets.speech.len(),
        sets.blink.len(),
        sets.texture.len()
    );
    Ok(sets)
}

fn read_sets(dir: &Path) -> Result<TrainingSets> {
    if !dir.is_dir() {
        return Err(CliError::Validation(format!(
            "training data directory {} not found",
            dir.display()
        )));
    }
    Ok(TrainingSets::read(dir)?)
}

/// What every checkpoint records about how it was made.
fn training_record(config: &PipelineConfig, sets: &TrainingSets) -> serde_json::Value {
    json!({
        "pipeline": config,
        "config_hash": config.hash(),
        "train_subjects": sets.split.train_subjects,
    })
}

pub fn train_landmark(config: &PipelineConfig, data: &Path, out: &Path) -> Result<Vec<SpeechLossRecord>> {
    let sets = read_sets(data)?;
    let seqs = sets
        .speech
        .iter()
        .filter(|c| sets.split.is_train(&c.subject_id))
        .map(|c| {
            Ok(SpeechSequence {
                windows: c.typed_windows()?,
                targets: c.typed_displacements()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if seqs.is_empty() {
        return Err(CliError::Validation("no training-split speech clips".into()));
    }
    let trained = train_speech(&seqs, config.landmark.model.clone(), &config.landmark.train, DType::F32)?;
    let mut record = training_record(config, &sets);
    // Retargeting needs the mean face the displacements are relative to.
    record["mean_face"] = json!(sets.mean_face.to_flat());
    trained.model.save(out, record)?;
    if let (Some(first), Some(last)) = (trained.history.first(), trained.history.last()) {
        info!("landmark loss {:.6} -> {:.6}", first.total, last.total);
    }
    Ok(trained.history)
}

pub fn train_blink_stage(config: &PipelineConfig, data: &Path, out: &Path) -> Result<Vec<BlinkLossRecord>> {
    let sets = read_sets(data)?;
    let seqs = sets
        .blink
        .iter()
        .filter(|s| sets.split.is_train(&s.subject_id))
        .map(|s| Ok(s.sequence()?))
        .collect::<Result<Vec<_>>>()?;
    if seqs.is_empty() {
        return Err(CliError::Validation(format!(
            "no training-split blink sequences; clips need at least {} frames",
            config.data.blink_len
        )));
    }
    let trained = train_blink(&seqs, config.blink.model.clone(), &config.blink.train, DType::F32)?;
    trained.generator.save(out, training_record(config, &sets))?;
    if let (Some(first), Some(last)) = (trained.history.first(), trained.history.last()) {
        info!("blink MMD {:.6} -> {:.6}", first.mmd, last.mmd);
    }
    Ok(trained.history)
}

fn load_frame(path: &Path, size: usize) -> Result<FaceImage> {
    let img = FaceImage::load_png(path)?;
    if img.height() != size || img.width() != size {
        return Err(CliError::Validation(format!(
            "{} is {}×{}, config resolution is {size}",
            path.display(),
            img.width(),
            img.height()
        )));
    }
    Ok(img)
}

/// Groups texture samples into clips ordered by frame index.
pub fn texture_clips(config: &PipelineConfig, sets: &TrainingSets) -> Result<Vec<TextureClip>> {
    let mut by_clip: BTreeMap<&str, Vec<&TextureSample>> = BTreeMap::new();
    for s in sets.texture.iter().filter(|s| sets.split.is_train(&s.subject_id)) {
        by_clip.entry(&s.clip_id).or_default().push(s);
    }
    let size = config.resolution;
    let mut clips = Vec::new();
    for samples in by_clip.values_mut() {
        samples.sort_by_key(|s| s.target_index);
        let first = samples[0];
        let identity = load_frame(&first.identity_frame, size)?;
        let identity_lm = LandmarkSet::from_flat(&first.identity_landmarks)?;
        let frames = samples
            .iter()
            .map(|s| load_frame(&s.target_frame, size))
            .collect::<Result<Vec<_>>>()?;
        let landmarks = samples
            .iter()
            .map(|s| Ok(LandmarkSet::from_flat(&s.target_landmarks)?))
            .collect::<Result<Vec<_>>>()?;
        clips.push(TextureClip::from_landmarks(
            identity,
            &identity_lm,
            frames,
            &landmarks,
            &config.texture.mask,
        )?);
    }
    Ok(clips)
}

pub fn train_texture_stage(
    config: &PipelineConfig,
    data: &Path,
    out: &Path,
    disc_out: Option<&Path>,
) -> Result<Vec<TextureLossRecord>> {
    let sets = read_sets(data)?;
    let clips = texture_clips(config, &sets)?;
    if clips.iter().all(|c| c.frames.len() < 2) {
        return Err(CliError::Validation(
            "texture training needs a training-split clip with frames and at least two of them".into(),
        ));
    }
    let trained = train_texture(
        &clips,
        config.texture.model.clone(),
        config.texture.discriminator.clone(),
        &config.texture.train,
        DType::F32,
    )?;
    let record = training_record(config, &sets);
    trained.generator.save(out, record.clone())?;
    if let Some(path) = disc_out {
        trained.discriminator.save(path, record)?;
    }
    if let (Some(first), Some(last)) = (trained.history.first(), trained.history.last()) {
        info!("texture pixel loss {:.6} -> {:.6}", first.pix, last.pix);
    }
    Ok(trained.history)
}
