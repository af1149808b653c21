//! Corpus ingestion: manifests, lip correction from segmentation masks,
//! neutral-frame selection, the mean face and per-module training sets.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{load_feature_track, window_track, AudioFeatureWindow, FeatureTrack};
use crate::blink::BlinkSequence;
use crate::error::{Error, Result};
use crate::geometry::{extract_canonical, procrustes_align};
use crate::landmark_io::{load_landmarks, save_mean_face};
use crate::landmarks::{CanonicalDisplacement, LandmarkSet, Point, NUM_LANDMARKS};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// One clip of the corpus. Relative paths resolve against the manifest's
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipManifest {
    pub clip_id: String,
    pub subject_id: String,
    pub fps: f64,
    pub landmarks: PathBuf,
    pub features: PathBuf,
    /// Directory of per-frame PNG images, ordered by file name.
    #[serde(default)]
    pub frames: Option<PathBuf>,
    /// Directory of per-frame label-map PNGs, ordered by file name.
    #[serde(default)]
    pub segmentation: Option<PathBuf>,
    /// Neutral frame; chosen by [`select_neutral_frame`] when absent.
    #[serde(default)]
    pub neutral_frame: Option<usize>,
}

impl ClipManifest {
    fn resolve(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.landmarks);
        fix(&mut self.features);
        if let Some(p) = self.frames.as_mut() {
            fix(p);
        }
        if let Some(p) = self.segmentation.as_mut() {
            fix(p);
        }
        self
    }
}

/// Reads a JSON Lines manifest, resolving relative paths.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ClipManifest>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let clip: ClipManifest =
            serde_json::from_str(&line).map_err(|e| Error::malformed(path, format!("line {}: {e}", n + 1)))?;
        out.push(clip.resolve(base));
    }
    Ok(out)
}

pub fn save_manifest(path: impl AsRef<Path>, clips: &[ClipManifest]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for c in clips {
        writeln!(w, "{}", serde_json::to_string(c)?).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// PNG files of a directory in name order.
pub fn list_pngs(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    out.sort();
    Ok(out)
}

/// Face-parsing label classes.
pub mod class {
    pub const BACKGROUND: u8 = 0;
    pub const SKIN: u8 = 1;
    pub const HAIR: u8 = 2;
    pub const EYES: u8 = 3;
    pub const NOSE: u8 = 4;
    pub const UPPER_LIP: u8 = 5;
    pub const LOWER_LIP: u8 = 6;
    pub const MOUTH_INTERIOR: u8 = 7;
    pub const COUNT: u8 = 8;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentationMask {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl SegmentationMask {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: format!("{} labels", height * width),
                got: format!("{} labels", labels.len()),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class::COUNT) {
            return Err(Error::InvalidArgument(format!("unknown segmentation label {bad}")));
        }
        Ok(Self { height, width, labels })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let labels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(height, width, labels)
    }

    /// 8-bit grayscale PNG whose pixel values are class labels.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?.into_luma8();
        let (w, h) = img.dimensions();
        Self::new(h as usize, w as usize, img.into_raw())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.labels.clone())
            .expect("buffer matches dimensions");
        img.save(path.as_ref())?;
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn label(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn contains_class(&self, c: u8) -> bool {
        self.labels.contains(&c)
    }

    /// Pixel of class `c` touching the image border or a 4-neighbour of
    /// another class.
    pub fn is_boundary(&self, x: usize, y: usize, c: u8) -> bool {
        if self.label(x, y) != c {
            return false;
        }
        if x == 0 || y == 0 || x + 1 == self.width || y + 1 == self.height {
            return true;
        }
        self.label(x - 1, y) != c || self.label(x + 1, y) != c || self.label(x, y - 1) != c || self.label(x, y + 1) != c
    }
}

pub const LIP_SNAP_RADIUS: f64 = 8.0;

/// Lip landmarks and the label whose boundary they snap to.
pub fn lip_class(index: usize) -> Option<u8> {
    match index {
        48..=54 | 60..=64 => Some(class::UPPER_LIP),
        55..=59 | 65..=67 => Some(class::LOWER_LIP),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipCorrection {
    pub landmarks: LandmarkSet,
    pub moved: usize,
    /// Set when the mask lacks a lip class and nothing was corrected.
    pub warning: Option<String>,
}

/// Snaps each lip landmark to the nearest boundary pixel of its lip class
/// within `radius`. Equidistant candidates resolve to the lowest scanline,
/// then the lowest column.
pub fn correct_lip_landmarks(lm: &LandmarkSet, mask: &SegmentationMask, radius: f64) -> LipCorrection {
    for (c, name) in [(class::UPPER_LIP, "upper lip"), (class::LOWER_LIP, "lower lip")] {
        if !mask.contains_class(c) {
            return LipCorrection {
                landmarks: lm.clone(),
                moved: 0,
                warning: Some(format!("segmentation has no {name} region")),
            };
        }
    }
    let mut points = *lm.points();
    let mut moved = 0;
    for (i, p) in points.iter_mut().enumerate() {
        let Some(c) = lip_class(i) else { continue };
        if let Some(q) = nearest_boundary(mask, *p, c, radius) {
            if q != *p {
                moved += 1;
            }
            *p = q;
        }
    }
    LipCorrection {
        landmarks: LandmarkSet::new(points).expect("pixel positions are finite"),
        moved,
        warning: None,
    }
}

fn nearest_boundary(mask: &SegmentationMask, p: Point, c: u8, radius: f64) -> Option<Point> {
    let lo = |v: f64| (v - radius).floor().max(0.0) as usize;
    let hi = |v: f64, n: usize| ((v + radius).ceil().max(-1.0) as i64).min(n as i64 - 1);
    let (y_hi, x_hi) = (hi(p.y, mask.height), hi(p.x, mask.width));
    if y_hi < 0 || x_hi < 0 {
        return None;
    }
    let mut best: Option<(f64, Point)> = None;
    for y in lo(p.y)..=y_hi as usize {
        for x in lo(p.x)..=x_hi as usize {
            if !mask.is_boundary(x, y, c) {
                continue;
            }
            let q = Point::new(x as f64, y as f64);
            let d = (q - p).norm_squared();
            if d <= radius * radius && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, q));
            }
        }
    }
    best.map(|(_, q)| q)
}

/// Frame with the smallest inner-lip gap; the earliest one on ties.
pub fn select_neutral_frame(seq: &[LandmarkSet]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, lm) in seq.iter().enumerate() {
        let g = lm.inner_lip_gap();
        if best.is_none_or(|(_, bg)| g < bg) {
            best = Some((i, g));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::Empty("landmark sequence"))
}

/// Mean of the faces after rigidly aligning each onto the first.
pub fn build_mean_face(faces: &[LandmarkSet]) -> Result<LandmarkSet> {
    let first = faces.first().ok_or(Error::Empty("neutral faces"))?;
    let mut sum = [Point::zeros(); NUM_LANDMARKS];
    for f in faces {
        let aligned = procrustes_align(f, first)?.apply_set(f);
        for (s, p) in sum.iter_mut().zip(aligned.points()) {
            *s += p;
        }
    }
    let n = faces.len() as f64;
    LandmarkSet::new(sum.map(|s| s / n))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
}

impl Split {
    pub fn is_train(&self, subject: &str) -> bool {
        self.train_subjects.iter().any(|s| s == subject)
    }
}

/// Subject-disjoint split; at least one subject always trains.
pub fn split_subjects(subjects: &[String], test_fraction: f64, seed: u64) -> Split {
    let mut unique: Vec<String> = subjects.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    unique.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((unique.len() as f64 * test_fraction).round() as usize).min(unique.len().saturating_sub(1));
    let mut test_subjects = unique.split_off(unique.len() - n_test);
    unique.sort();
    test_subjects.sort();
    Split {
        train_subjects: unique,
        test_subjects,
    }
}

/// A manifest entry whose streams have been read and cross-checked.
#[derive(Clone, Debug)]
pub struct LoadedClip {
    pub manifest: ClipManifest,
    pub landmarks: Vec<LandmarkSet>,
    pub track: FeatureTrack,
    pub frames: Vec<PathBuf>,
    pub masks: Vec<PathBuf>,
}

/// Feature tracks may cover one video frame more or less than the
/// landmark stream; windowing replicates edge rows.
pub const FEATURE_FRAME_SLACK: usize = 1;

pub fn load_clip(manifest: &ClipManifest) -> Result<LoadedClip> {
    let landmarks = load_landmarks(&manifest.landmarks)?;
    let n = landmarks.len();
    if n == 0 {
        return Err(Error::Empty("landmark stream"));
    }
    let track = load_feature_track(&manifest.features)?;
    if (track.video_fps() - manifest.fps).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "feature track is at {} fps, clip at {}",
            track.video_fps(),
            manifest.fps
        )));
    }
    if track.video_frame_count().abs_diff(n) > FEATURE_FRAME_SLACK {
        return Err(Error::LengthMismatch {
            left: n,
            right: track.video_frame_count(),
        });
    }
    let list = |d: &Option<PathBuf>| -> Result<Vec<PathBuf>> {
        let Some(d) = d else { return Ok(Vec::new()) };
        let files = list_pngs(d)?;
        if files.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: files.len(),
            });
        }
        Ok(files)
    };
    let frames = list(&manifest.frames)?;
    let masks = list(&manifest.segmentation)?;
    if let Some(k) = manifest.neutral_frame {
        if k >= n {
            return Err(Error::InvalidArgument(format!("neutral frame {k} beyond {n} frames")));
        }
    }
    Ok(LoadedClip {
        manifest: manifest.clone(),
        landmarks,
        track,
        frames,
        masks,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrepConfig {
    /// Blink training sequence length in frames.
    pub blink_len: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub lip_radius: f64,
    /// Fixed split, e.g. a persisted split file; computed when absent.
    pub split: Option<Split>,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            blink_len: 75,
            test_fraction: 0.2,
            seed: 0,
            lip_radius: LIP_SNAP_RADIUS,
            split: None,
        }
    }
}

/// Per-frame audio windows and canonical displacements of one clip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeechClip {
    pub clip_id: String,
    pub subject_id: String,
    /// Row-major `16 × 29` per frame.
    pub windows: Vec<Vec<f32>>,
    /// 136 values per frame.
    pub displacements: Vec<Vec<f64>>,
}

impl SpeechClip {
    pub fn new(
        clip_id: String,
        subject_id: String,
        windows: &[AudioFeatureWindow],
        displacements: &[CanonicalDisplacement],
    ) -> Self {
        Self {
            clip_id,
            subject_id,
            windows: windows.iter().map(|w| w.to_flat()).collect(),
            displacements: displacements.iter().map(|d| d.to_flat()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn typed_windows(&self) -> Result<Vec<AudioFeatureWindow>> {
        self.windows.iter().map(|w| AudioFeatureWindow::from_flat(w)).collect()
    }

    pub fn typed_displacements(&self) -> Result<Vec<CanonicalDisplacement>> {
        self.displacements.iter().map(|d| CanonicalDisplacement::from_flat(d)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlinkSample {
    pub clip_id: String,
    pub subject_id: String,
    pub start: usize,
    /// Row-major `T × 44`.
    pub values: Vec<f64>,
}

impl BlinkSample {
    pub fn sequence(&self) -> Result<BlinkSequence> {
        BlinkSequence::from_flat(&self.values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureSample {
    pub clip_id: String,
    pub subject_id: String,
    pub identity_frame: PathBuf,
    pub identity_landmarks: Vec<f64>,
    pub target_index: usize,
    pub target_frame: PathBuf,
    pub target_landmarks: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedClip {
    pub clip_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSets {
    pub mean_face: LandmarkSet,
    pub split: Split,
    pub speech: Vec<SpeechClip>,
    pub blink: Vec<BlinkSample>,
    pub texture: Vec<TextureSample>,
    pub skipped: Vec<SkippedClip>,
}

struct Prepared {
    clip: LoadedClip,
    landmarks: Vec<LandmarkSet>,
    neutral: usize,
}

pub fn build_training_sets(manifests: &[ClipManifest], config: &PrepConfig) -> Result<TrainingSets> {
    let mut skipped = Vec::new();
    let mut prepared = Vec::new();
    for m in manifests {
        match prepare_clip(m, config) {
            Ok(p) => prepared.push(p),
            Err(e) => {
                warn!("skipping clip {}: {e}", m.clip_id);
                skipped.push(SkippedClip {
                    clip_id: m.clip_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    if prepared.is_empty() {
        return Err(Error::Empty("usable clips"));
    }

    let split = match &config.split {
        Some(s) => s.clone(),
        None => {
            let subjects: Vec<String> = prepared.iter().map(|p| p.clip.manifest.subject_id.clone()).collect();
            split_subjects(&subjects, config.test_fraction, config.seed)
        }
    };
    let neutral_faces: Vec<LandmarkSet> = prepared
        .iter()
        .filter(|p| split.is_train(&p.clip.manifest.subject_id))
        .map(|p| p.landmarks[p.neutral].clone())
        .collect();
    let mean_face = build_mean_face(&neutral_faces)?;

    let mut speech = Vec::new();
    let mut blink = Vec::new();
    let mut texture = Vec::new();
    for p in &prepared {
        let m = &p.clip.manifest;
        let n = p.landmarks.len();
        let neutral = &p.landmarks[p.neutral];
        let deltas = extract_canonical(&p.landmarks, neutral, &mean_face)?;
        let windows = window_track(&p.clip.track, n)?;
        speech.push(SpeechClip::new(m.clip_id.clone(), m.subject_id.clone(), &windows, &deltas));

        if config.blink_len > 0 {
            for start in (0..n).step_by(config.blink_len) {
                if start + config.blink_len > n {
                    break;
                }
                let seq = BlinkSequence::from_displacements(&deltas[start..start + config.blink_len]);
                blink.push(BlinkSample {
                    clip_id: m.clip_id.clone(),
                    subject_id: m.subject_id.clone(),
                    start,
                    values: seq.to_flat(),
                });
            }
        }

        if !p.clip.frames.is_empty() {
            for t in 0..n {
                texture.push(TextureSample {
                    clip_id: m.clip_id.clone(),
                    subject_id: m.subject_id.clone(),
                    identity_frame: p.clip.frames[p.neutral].clone(),
                    identity_landmarks: neutral.to_flat(),
                    target_index: t,
                    target_frame: p.clip.frames[t].clone(),
                    target_landmarks: p.landmarks[t].to_flat(),
                });
            }
        }
    }
    info!(
        "prepared {} clips ({} skipped): {} speech frames, {} blink sequences, {} texture samples",
        prepared.len(),
        skipped.len(),
        speech.iter().map(|s| s.len()).sum::<usize>(),
        blink.len(),
        texture.len()
    );
    Ok(TrainingSets {
        mean_face,
        split,
        speech,
        blink,
        texture,
        skipped,
    })
}

fn prepare_clip(m: &ClipManifest, config: &PrepConfig) -> Result<Prepared> {
    let clip = load_clip(m)?;
    let mut landmarks = clip.landmarks.clone();
    for (t, path) in clip.masks.iter().enumerate() {
        let mask = SegmentationMask::load_png(path)?;
        let fix = correct_lip_landmarks(&landmarks[t], &mask, config.lip_radius);
        if let Some(w) = &fix.warning {
            warn!("clip {} frame {t}: {w}", m.clip_id);
        }
        landmarks[t] = fix.landmarks;
    }
    let neutral = match m.neutral_frame {
        Some(k) => k,
        None => select_neutral_frame(&landmarks)?,
    };
    Ok(Prepared {
        clip,
        landmarks,
        neutral,
    })
}

pub const MEAN_FACE_FILE: &str = "mean_face.csv";
pub const SPLIT_FILE: &str = "split.json";
pub const SPEECH_FILE: &str = "speech.jsonl";
pub const BLINK_FILE: &str = "blink.jsonl";
pub const TEXTURE_FILE: &str = "texture.jsonl";
pub const SKIPPED_FILE: &str = "skipped.json";

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        writeln!(w, "{}", serde_json::to_string(item)?).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| Error::malformed(path, format!("line {}: {e}", n + 1)))?);
        }
    }
    Ok(out)
}

impl TrainingSets {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_mean_face(dir.join(MEAN_FACE_FILE), &self.mean_face)?;
        let split = dir.join(SPLIT_FILE);
        std::fs::write(&split, serde_json::to_string_pretty(&self.split)?).map_err(|e| Error::io(&split, e))?;
        let skipped = dir.join(SKIPPED_FILE);
        std::fs::write(&skipped, serde_json::to_string_pretty(&self.skipped)?).map_err(|e| Error::io(&skipped, e))?;
        write_jsonl(&dir.join(SPEECH_FILE), &self.speech)?;
        write_jsonl(&dir.join(BLINK_FILE), &self.blink)?;
        write_jsonl(&dir.join(TEXTURE_FILE), &self.texture)
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| -> Result<String> {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        Ok(Self {
            mean_face: crate::landmark_io::load_mean_face(dir.join(MEAN_FACE_FILE))?,
            split: serde_json::from_str(&read(SPLIT_FILE)?)?,
            skipped: serde_json::from_str(&read(SKIPPED_FILE)?)?,
            speech: read_jsonl(dir.join(SPEECH_FILE))?,
            blink: read_jsonl(dir.join(BLINK_FILE))?,
            texture: read_jsonl(dir.join(TEXTURE_FILE))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;
    use crate::landmarks::is_mouth;
    use crate::synthetic::{mean_face, mouth_motion};

    #[test]
    fn neutral_frame_is_the_first_smallest_gap() {
        let gaps = [3.0, 2.0, 4.0, 1.5, 5.0, 2.5, 3.0, 0.5, 0.5, 2.0];
        let seq: Vec<_> = gaps.iter().map(|&g| mean_face().displaced(&mouth_motion(g, 0.0))).collect();
        assert_eq!(select_neutral_frame(&seq).unwrap(), 7);
        let opening: Vec<_> = (0..5).map(|k| mean_face().displaced(&mouth_motion(k as f64, 0.0))).collect();
        assert_eq!(select_neutral_frame(&opening).unwrap(), 0);
        assert!(select_neutral_frame(&[]).is_err());
    }

    #[test]
    fn mean_of_rigid_copies_is_the_shape() {
        let m = mean_face();
        let moved = RigidTransform::from_angle(0.3, Point::new(12.0, -4.0)).apply_set(&m);
        let mean = build_mean_face(&[m.clone(), moved]).unwrap();
        for (a, b) in mean.points().iter().zip(m.points()) {
            assert!((a - b).norm() < 1e-6);
        }
        assert_eq!(build_mean_face(std::slice::from_ref(&m)).unwrap(), m);
        assert!(build_mean_face(&[]).is_err());
    }

    fn lip_mask(boundary_y: usize) -> SegmentationMask {
        // Upper lip occupies rows [boundary_y, 80), lower lip rows [80, 90).
        SegmentationMask::from_fn(128, 128, |_, y| {
            if (boundary_y..80).contains(&y) {
                class::UPPER_LIP
            } else if (80..90).contains(&y) {
                class::LOWER_LIP
            } else {
                class::SKIN
            }
        })
        .unwrap()
    }

    #[test]
    fn landmark_above_a_lip_edge_snaps_down() {
        let lm = LandmarkSet::new([Point::new(60.0, 70.0); NUM_LANDMARKS]).unwrap();
        let fixed = correct_lip_landmarks(&lm, &lip_mask(73), LIP_SNAP_RADIUS);
        assert_eq!(fixed.landmarks.point(51), Point::new(60.0, 73.0));
        assert_eq!(fixed.landmarks.point(10), lm.point(10));
        assert!(fixed.warning.is_none());
    }

    #[test]
    fn landmarks_on_the_boundary_stay_put() {
        let mut pts = [Point::new(10.0, 10.0); NUM_LANDMARKS];
        for (i, p) in pts.iter_mut().enumerate() {
            match lip_class(i) {
                Some(class::UPPER_LIP) => *p = Point::new(40.0 + i as f64, 73.0),
                Some(_) => *p = Point::new(40.0 + i as f64, 89.0),
                None => {}
            }
        }
        let lm = LandmarkSet::new(pts).unwrap();
        let fixed = correct_lip_landmarks(&lm, &lip_mask(73), LIP_SNAP_RADIUS);
        assert_eq!(fixed.landmarks, lm);
        assert_eq!(fixed.moved, 0);
    }

    #[test]
    fn missing_lips_warn_and_change_nothing() {
        let mask = SegmentationMask::from_fn(32, 32, |_, _| class::SKIN).unwrap();
        let fixed = correct_lip_landmarks(&mean_face(), &mask, LIP_SNAP_RADIUS);
        assert_eq!(fixed.landmarks, mean_face());
        assert!(fixed.warning.is_some());
    }

    #[test]
    fn equidistant_candidates_prefer_the_lowest_scanline() {
        // Single upper-lip pixel rows at y = 10 and y = 14; landmark midway.
        let mask = SegmentationMask::from_fn(32, 32, |_, y| match y {
            10 | 14 => class::UPPER_LIP,
            20 => class::LOWER_LIP,
            _ => class::SKIN,
        })
        .unwrap();
        let lm = LandmarkSet::new([Point::new(16.0, 12.0); NUM_LANDMARKS]).unwrap();
        let fixed = correct_lip_landmarks(&lm, &mask, LIP_SNAP_RADIUS);
        assert_eq!(fixed.landmarks.point(50), Point::new(16.0, 10.0));
    }

    #[test]
    fn split_is_subject_disjoint_and_deterministic() {
        let subjects: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let a = split_subjects(&subjects, 0.3, 4);
        assert_eq!(a, split_subjects(&subjects, 0.3, 4));
        assert_eq!(a.test_subjects.len(), 3);
        assert!(a.test_subjects.iter().all(|s| !a.train_subjects.contains(s)));
        let one = split_subjects(&subjects[..1], 0.5, 0);
        assert_eq!(one.train_subjects.len(), 1);
    }

    #[test]
    fn lip_class_covers_exactly_the_mouth() {
        for i in 0..NUM_LANDMARKS {
            assert_eq!(lip_class(i).is_some(), is_mouth(i));
        }
    }
}
