//! Scores generated clips against the ground truth of a manifest.
//!
//! Expected layout: `<generated>/<clip_id>/frames/*.png` and
//! `<generated>/<clip_id>/stages/landmarks.csv`, as written by `generate`.

use std::collections::BTreeSet;
use std::path::Path;

use talkface_core::blink::{detect_blinks, BlinkStats};
use talkface_core::data_prep::{list_pngs, load_manifest};
use talkface_core::image::FaceImage;
use talkface_core::landmark_io::load_landmarks;
use talkface_core::metrics::{compare_blink_stats, cpbd, lmd, psnr, ssim, ClipScores, EvalReport, LmdSource, Scores};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::generate::{FRAMES_DIR, LANDMARKS_FILE, STAGES_DIR};
use crate::train::manifest_path;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn run_evaluate(config: &PipelineConfig, generated: &Path, manifest: &Path) -> Result<EvalReport> {
    let manifest = manifest_path(manifest);
    if !manifest.is_file() {
        return Err(invalid(format!("manifest {} not found", manifest.display())));
    }
    let clips = load_manifest(&manifest)?;
    let generated_ids: BTreeSet<String> = std::fs::read_dir(generated)
        .map_err(|e| CliError::io(generated, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join(FRAMES_DIR).is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    let manifest_ids: BTreeSet<String> = clips.iter().map(|c| c.clip_id.clone()).collect();
    if generated_ids != manifest_ids {
        let missing: Vec<_> = manifest_ids.difference(&generated_ids).collect();
        let extra: Vec<_> = generated_ids.difference(&manifest_ids).collect();
        return Err(invalid(format!(
            "clip mismatch: not generated {missing:?}, not in manifest {extra:?}"
        )));
    }

    let mut scores = Vec::new();
    let mut real_blinks: Vec<BlinkStats> = Vec::new();
    let mut gen_blinks: Vec<BlinkStats> = Vec::new();
    for clip in &clips {
        let dir = generated.join(&clip.clip_id);
        let truth_dir = clip
            .frames
            .as_ref()
            .ok_or_else(|| invalid(format!("clip {} has no ground-truth frames", clip.clip_id)))?;
        let truth_frames = list_pngs(truth_dir)?;
        let gen_frames = list_pngs(dir.join(FRAMES_DIR))?;
        if truth_frames.len() != gen_frames.len() || gen_frames.is_empty() {
            return Err(invalid(format!(
                "clip {}: {} generated frames for {} ground-truth frames",
                clip.clip_id,
                gen_frames.len(),
                truth_frames.len()
            )));
        }
        let lm_file = dir.join(STAGES_DIR).join(LANDMARKS_FILE);
        if !lm_file.is_file() {
            return Err(invalid(format!("clip {}: {} not found", clip.clip_id, lm_file.display())));
        }
        let predicted = load_landmarks(&lm_file)?;
        let truth_lm = load_landmarks(&clip.landmarks)?;
        if predicted.len() != gen_frames.len() || truth_lm.len() != truth_frames.len() {
            return Err(invalid(format!(
                "clip {}: landmark streams do not match the frame count",
                clip.clip_id
            )));
        }

        let (mut p, mut s, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for (g, t) in gen_frames.iter().zip(&truth_frames) {
            let (g, t) = (FaceImage::load_png(g)?, FaceImage::load_png(t)?);
            p.push(psnr(&g, &t)?);
            s.push(ssim(&g, &t)?);
            c.push(cpbd(&g));
        }
        scores.push(ClipScores {
            clip_id: clip.clip_id.clone(),
            frames: gen_frames.len(),
            scores: Scores {
                psnr: mean(&p),
                ssim: mean(&s),
                cpbd: mean(&c),
                lmd: lmd(&predicted, &truth_lm)?,
            },
        });
        real_blinks.push(detect_blinks(&truth_lm, config.fps)?);
        gen_blinks.push(detect_blinks(&predicted, config.fps)?);
    }
    let blink = compare_blink_stats(&BlinkStats::aggregate(&real_blinks), &BlinkStats::aggregate(&gen_blinks));
    Ok(EvalReport::new(LmdSource::PredictedStream, scores, Some(blink)))
}
