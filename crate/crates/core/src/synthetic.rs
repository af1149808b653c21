//! Procedural faces, motion and feature tracks for smoke tests and demos.
//!
//! Nothing here is used by the real data path. The template face lives in a
//! 128×128 pixel frame; the renderer draws a flat-shaded face with a
//! per-identity skin texture so that identity detail is measurable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::path::{Path, PathBuf};

use crate::audio::FeatureTrack;
use crate::blink::BlinkSequence;
use crate::data_prep::{save_manifest, ClipManifest, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::image::FaceImage;
use crate::landmark_io::save_landmarks;
use crate::landmarks::{CanonicalDisplacement, LandmarkSet, Point, NUM_LANDMARKS};

/// Side length of the frame the template face is laid out in.
pub const TEMPLATE_SIZE: f64 = 128.0;

/// A symmetric frontal face with closed lips and open eyes (EAR ≈ 0.31).
pub fn mean_face() -> LandmarkSet {
    let mut p = [Point::zeros(); NUM_LANDMARKS];
    for (i, q) in p.iter_mut().take(17).enumerate() {
        let phi = std::f64::consts::PI * i as f64 / 16.0;
        *q = Point::new(64.0 - 40.0 * phi.cos(), 56.0 + 52.0 * phi.sin());
    }
    for k in 0..5 {
        let x = 32.0 + 6.0 * k as f64;
        let arch = 4.0 * (std::f64::consts::PI * k as f64 / 4.0).sin();
        p[17 + k] = Point::new(x, 40.0 - arch);
        p[26 - k] = Point::new(128.0 - x, 40.0 - arch);
    }
    for k in 0..4 {
        p[27 + k] = Point::new(64.0, 46.0 + 6.0 * k as f64);
    }
    for (k, (x, y)) in [(56.0, 70.0), (60.0, 71.0), (64.0, 72.0), (68.0, 71.0), (72.0, 70.0)]
        .into_iter()
        .enumerate()
    {
        p[31 + k] = Point::new(x, y);
    }
    let left_eye = [(36.0, 50.0), (41.0, 47.5), (47.0, 47.5), (52.0, 50.0), (47.0, 52.5), (41.0, 52.5)];
    for (k, (x, y)) in left_eye.into_iter().enumerate() {
        p[36 + k] = Point::new(x, y);
    }
    // Right eye mirrors the left: inner corner first, then upper lid outward.
    let right_eye = [(76.0, 50.0), (81.0, 47.5), (87.0, 47.5), (92.0, 50.0), (87.0, 52.5), (81.0, 52.5)];
    for (k, (x, y)) in right_eye.into_iter().enumerate() {
        p[42 + k] = Point::new(x, y);
    }
    let outer = [
        (50.0, 86.0), (54.0, 83.0), (59.0, 81.0), (64.0, 82.0), (69.0, 81.0), (74.0, 83.0),
        (78.0, 86.0), (74.0, 90.0), (69.0, 92.0), (64.0, 93.0), (59.0, 92.0), (54.0, 90.0),
    ];
    for (k, (x, y)) in outer.into_iter().enumerate() {
        p[48 + k] = Point::new(x, y);
    }
    let inner = [
        (53.0, 86.0), (59.0, 86.0), (64.0, 86.0), (69.0, 86.0),
        (75.0, 86.0), (69.0, 86.0), (64.0, 86.0), (59.0, 86.0),
    ];
    for (k, (x, y)) in inner.into_iter().enumerate() {
        p[60 + k] = Point::new(x, y);
    }
    LandmarkSet::new(p).expect("template is finite")
}

/// Canonical displacement for a mouth opened by `open` pixels and widened by
/// `widen` pixels at each corner. Only mouth landmarks move.
pub fn mouth_motion(open: f64, widen: f64) -> CanonicalDisplacement {
    let mut d = CanonicalDisplacement::zeros();
    // Lower lip drops, upper lip lifts by a quarter of the opening.
    for (i, w) in [(55, 0.6), (56, 0.9), (57, 1.0), (58, 0.9), (59, 0.6), (65, 0.9), (66, 1.0), (67, 0.9)] {
        d.set(i, Point::new(0.0, open * w));
    }
    for (i, w) in [(49, 0.15), (50, 0.25), (51, 0.25), (52, 0.25), (53, 0.15), (61, 0.25), (62, 0.25), (63, 0.25)] {
        d.set(i, Point::new(0.0, -open * w));
    }
    for (i, sign) in [(48, -1.0), (60, -1.0), (54, 1.0), (64, 1.0)] {
        d.set(i, Point::new(sign * widen, 0.0));
    }
    d
}

/// Canonical displacement closing both eyes by `closure` ∈ [0, 1].
///
/// At `closure = 1` the upper and lower lids meet; brows drop slightly.
pub fn eye_closure(closure: f64) -> CanonicalDisplacement {
    let m = mean_face();
    let mut d = CanonicalDisplacement::zeros();
    for (upper, lower) in [(37, 41), (38, 40), (43, 47), (44, 46)] {
        let gap = m.point(lower).y - m.point(upper).y;
        d.set(upper, Point::new(0.0, 0.7 * gap * closure));
        d.set(lower, Point::new(0.0, -0.3 * gap * closure));
    }
    for i in 17..27 {
        d.set(i, Point::new(0.0, 0.8 * closure));
    }
    d
}

/// Scales template coordinates into an `size`×`size` frame.
pub fn scale_to(lm: &LandmarkSet, size: usize) -> LandmarkSet {
    let s = size as f64 / TEMPLATE_SIZE;
    lm.map(|_, p| p * s).expect("finite")
}

/// Appearance parameters of a synthetic identity.
#[derive(Clone, Debug)]
pub struct SyntheticIdentity {
    pub skin: [f32; 3],
    pub background: [f32; 3],
    pub lips: [f32; 3],
    texture: Vec<f32>,
    texture_size: usize,
}

impl SyntheticIdentity {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut jitter = |base: f32| (base + rng.random_range(-0.08f32..0.08)).clamp(0.0, 1.0);
        let skin = [jitter(0.85), jitter(0.65), jitter(0.52)];
        let background = [jitter(0.25), jitter(0.35), jitter(0.55)];
        let lips = [jitter(0.75), jitter(0.25), jitter(0.3)];
        let texture_size = 32;
        let texture = (0..texture_size * texture_size)
            .map(|_| rng.random_range(-0.12f32..0.12))
            .collect();
        Self {
            skin,
            background,
            lips,
            texture,
            texture_size,
        }
    }

    fn texture_at(&self, u: f64, v: f64) -> f32 {
        let n = self.texture_size;
        let x = ((u * n as f64) as usize).min(n - 1);
        let y = ((v * n as f64) as usize).min(n - 1);
        self.texture[y * n + x]
    }
}

fn inside_polygon(poly: &[Point], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Renders `lm` (already in `size`-pixel coordinates) with the identity's
/// appearance. Deterministic and free of anti-aliasing.
pub fn render_face(identity: &SyntheticIdentity, lm: &LandmarkSet, size: usize) -> FaceImage {
    let pts = lm.points();
    let jaw: Vec<Point> = pts[0..17].iter().copied().collect();
    let (lo, hi) = lm.bounding_box();
    // Face outline: jaw plus a forehead arc closing it above the brows.
    let mut outline = jaw.clone();
    let top = lo.y - 0.15 * (hi.y - lo.y);
    let (cx, left, right) = ((lo.x + hi.x) * 0.5, jaw[0].x, jaw[16].x);
    for k in 1..8 {
        let t = std::f64::consts::PI * k as f64 / 8.0;
        outline.push(Point::new(
            cx + (right - left) * 0.5 * t.cos(),
            jaw[0].y.min(jaw[16].y) - (jaw[0].y.min(jaw[16].y) - top) * t.sin(),
        ));
    }
    let outer_lip: Vec<Point> = pts[48..60].to_vec();
    let inner_lip: Vec<Point> = pts[60..68].to_vec();
    let left_eye: Vec<Point> = pts[36..42].to_vec();
    let right_eye: Vec<Point> = pts[42..48].to_vec();
    let brows = [&pts[17..22], &pts[22..27]];

    let mut img = FaceImage::zeros(size, size);
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let u = fx / size as f64;
            let v = fy / size as f64;
            let mut rgb = identity.background;
            let bg_shade = 0.1 * (v as f32 - 0.5);
            rgb.iter_mut().for_each(|c| *c = (*c + bg_shade).clamp(0.0, 1.0));
            if inside_polygon(&outline, fx, fy) {
                let t = identity.texture_at(u, v);
                rgb = identity.skin.map(|c| (c + t).clamp(0.0, 1.0));
            }
            let near_brow = brows.iter().any(|b| {
                b.windows(2).any(|s| segment_distance(s[0], s[1], fx, fy) < 0.9 * size as f64 / 128.0 + 0.5)
            });
            if near_brow {
                rgb = [0.2, 0.14, 0.1];
            }
            for eye in [&left_eye, &right_eye] {
                if inside_polygon(eye, fx, fy) {
                    rgb = [0.95, 0.95, 0.95];
                    let c = eye.iter().sum::<Point>() / eye.len() as f64;
                    let r = (eye[3].x - eye[0].x).abs() * 0.22;
                    if (fx - c.x).powi(2) + (fy - c.y).powi(2) < r * r {
                        rgb = [0.15, 0.1, 0.08];
                    }
                }
            }
            if inside_polygon(&outer_lip, fx, fy) {
                rgb = identity.lips;
                if inside_polygon(&inner_lip, fx, fy) {
                    let upper_edge = (inner_lip[1].y + inner_lip[2].y + inner_lip[3].y) / 3.0;
                    let gap = lm.inner_lip_gap();
                    rgb = if fy < upper_edge + 0.35 * gap {
                        [0.92, 0.9, 0.85]
                    } else {
                        [0.25, 0.05, 0.07]
                    };
                }
            }
            img.set_pixel(x, y, rgb);
        }
    }
    img
}

fn segment_distance(a: Point, b: Point, x: f64, y: f64) -> f64 {
    let p = Point::new(x, y);
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared().max(1e-12)).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

/// A synthetic "speech" clip: mouth opening driven by a smooth random
/// signal, with audio features that encode the opening.
#[derive(Clone, Debug)]
pub struct SyntheticClip {
    /// Per video frame canonical displacement.
    pub displacements: Vec<CanonicalDisplacement>,
    /// Per audio frame, 29 logits; 16 audio frames per video frame.
    pub features: Vec<[f32; 29]>,
}

/// Audio frames per video frame in synthetic clips.
pub const AUDIO_FRAMES_PER_VIDEO_FRAME: usize = 16;

pub fn synthetic_clip(n_frames: usize, seed: u64) -> SyntheticClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: f64 = rng.random_range(0.0..6.28);
    let freq: f64 = rng.random_range(0.15..0.35);
    let openness: Vec<f64> = (0..n_frames)
        .map(|t| {
            let s = (freq * t as f64 + phase).sin() * 0.5 + 0.5;
            let s2 = (0.37 * freq * t as f64 + 2.0 * phase).sin() * 0.5 + 0.5;
            6.0 * s * s2
        })
        .collect();
    let displacements = openness
        .iter()
        .enumerate()
        .map(|(t, &o)| mouth_motion(o, 0.3 * o * ((t as f64 * 0.21).cos() * 0.5 + 0.5)))
        .collect();

    let mut features = Vec::with_capacity(n_frames * AUDIO_FRAMES_PER_VIDEO_FRAME);
    for &o in &openness {
        for _ in 0..AUDIO_FRAMES_PER_VIDEO_FRAME {
            let mut row = [0f32; 29];
            for (c, v) in row.iter_mut().enumerate() {
                let centre = (o / 6.0 * 28.0) as f32;
                let dist = c as f32 - centre;
                *v = -0.5 * dist * dist / 4.0 + rng.random_range(-0.05f32..0.05);
            }
            features.push(row);
        }
    }
    SyntheticClip {
        displacements,
        features,
    }
}

/// A subject: rigid pose plus anisotropic face proportions relative to the
/// template, applied about the template centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticPerson {
    pub angle: f64,
    pub translation: Point,
    pub sx: f64,
    pub sy: f64,
}

impl SyntheticPerson {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            angle: rng.random_range(-0.12..0.12),
            translation: Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
            sx: rng.random_range(0.85..1.1),
            sy: rng.random_range(0.85..1.1),
        }
    }

    /// Template-frame landmarks posed as this person.
    pub fn pose(&self, lm: &LandmarkSet) -> LandmarkSet {
        let c = Point::new(TEMPLATE_SIZE / 2.0, TEMPLATE_SIZE / 2.0);
        let (s, co) = self.angle.sin_cos();
        lm.map(|_, p| {
            let q = p - c;
            let q = Point::new(q.x * self.sx, q.y * self.sy);
            Point::new(co * q.x - s * q.y, s * q.x + co * q.y) + c + self.translation
        })
        .expect("finite")
    }

    pub fn face(&self, delta: &CanonicalDisplacement) -> LandmarkSet {
        self.pose(&mean_face().displaced(delta))
    }
}

/// Closure of a trapezoid blink ramp frame; keeps the eye aspect ratio
/// above the usual 0.22 reopening level.
pub const BLINK_RAMP_CLOSURE: f64 = 0.2;

/// Eye-closure signal with a trapezoid blink at each start: one ramp frame,
/// `plateau` fully closed frames, one ramp frame.
pub fn blink_profile(n_frames: usize, starts: &[usize], plateau: usize) -> Vec<f64> {
    let mut c = vec![0.0; n_frames];
    for &s in starts {
        for (k, v) in std::iter::once(BLINK_RAMP_CLOSURE)
            .chain(std::iter::repeat_n(1.0, plateau))
            .chain(std::iter::once(BLINK_RAMP_CLOSURE))
            .enumerate()
        {
            if let Some(x) = c.get_mut(s + k) {
                *x = f64::max(*x, v);
            }
        }
    }
    c
}

/// `count` eye-region sequences of `len` frames with one blink each at a
/// random start.
pub fn blink_corpus(count: usize, len: usize, plateau: usize, seed: u64) -> Vec<BlinkSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = plateau + 2;
    assert!(len > span + 1, "sequence too short for a blink");
    (0..count)
        .map(|_| {
            let start = rng.random_range(1..len - span);
            let profile = blink_profile(len, &[start], plateau);
            let deltas: Vec<_> = profile.iter().map(|&c| eye_closure(c)).collect();
            BlinkSequence::from_displacements(&deltas)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub subjects: usize,
    pub clips_per_subject: usize,
    pub frames: usize,
    pub fps: f64,
    /// Render PNG frames at this size; landmarks are in the same pixel frame.
    pub frame_size: Option<usize>,
    /// Blinks per second, placed at regular intervals.
    pub blink_rate: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            subjects: 2,
            clips_per_subject: 1,
            frames: 50,
            fps: 25.0,
            frame_size: None,
            blink_rate: 0.0,
            seed: 0,
        }
    }
}

/// Writes landmark, feature and optional frame files plus a manifest.
pub fn write_corpus(dir: &Path, spec: &CorpusSpec) -> Result<Vec<ClipManifest>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let size = spec.frame_size.unwrap_or(TEMPLATE_SIZE as usize);
    let mut clips = Vec::new();
    for subject in 0..spec.subjects {
        let person = SyntheticPerson::random(spec.seed.wrapping_mul(1000).wrapping_add(subject as u64));
        let identity = SyntheticIdentity::new(spec.seed.wrapping_mul(1000).wrapping_add(subject as u64));
        for k in 0..spec.clips_per_subject {
            let clip_id = format!("s{subject}_c{k}");
            let clip_seed = spec.seed.wrapping_mul(7919).wrapping_add((subject * 97 + k) as u64);
            let clip = synthetic_clip(spec.frames, clip_seed);
            let starts: Vec<usize> = if spec.blink_rate > 0.0 {
                let period = (spec.fps / spec.blink_rate).round().max(4.0) as usize;
                (period / 2..spec.frames).step_by(period).collect()
            } else {
                Vec::new()
            };
            let closure = blink_profile(spec.frames, &starts, 3);
            // Frame 0 stays closed-lipped so neutral selection is well defined.
            let landmarks: Vec<LandmarkSet> = clip
                .displacements
                .iter()
                .zip(&closure)
                .enumerate()
                .map(|(t, (d, &c))| {
                    let d = if t == 0 { CanonicalDisplacement::zeros() } else { d.clone() };
                    scale_to(&person.face(&d.add(&eye_closure(c))), size)
                })
                .collect();
            let lm_path = dir.join(format!("{clip_id}.landmarks.csv"));
            save_landmarks(&lm_path, &landmarks)?;
            let feat_path = dir.join(format!("{clip_id}.features.tfaf"));
            FeatureTrack::new(clip.features, spec.fps * AUDIO_FRAMES_PER_VIDEO_FRAME as f64, spec.fps)?
                .save(&feat_path)?;
            let frames = match spec.frame_size {
                Some(size) => {
                    let fdir = dir.join(format!("{clip_id}.frames"));
                    std::fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
                    for (t, lm) in landmarks.iter().enumerate() {
                        render_face(&identity, lm, size).save_png(fdir.join(format!("{t:05}.png")))?;
                    }
                    Some(PathBuf::from(format!("{clip_id}.frames")))
                }
                None => None,
            };
            clips.push(ClipManifest {
                clip_id: clip_id.clone(),
                subject_id: format!("s{subject}"),
                fps: spec.fps,
                landmarks: PathBuf::from(format!("{clip_id}.landmarks.csv")),
                features: PathBuf::from(format!("{clip_id}.features.tfaf")),
                frames,
                segmentation: None,
                neutral_frame: None,
            });
        }
    }
    save_manifest(dir.join(MANIFEST_FILE), &clips)?;
    Ok(clips.into_iter().map(|c| resolve_in(c, dir)).collect())
}

/// Frames and landmarks of one subject speaking, rendered at `size`.
#[derive(Clone, Debug)]
pub struct RenderedClip {
    pub landmarks: Vec<LandmarkSet>,
    pub frames: Vec<FaceImage>,
}

/// Renders `n_frames` of subject `subject_seed` driven by the speech signal
/// of `clip_seed`. Frame 0 is the neutral face.
pub fn rendered_clip(subject_seed: u64, clip_seed: u64, n_frames: usize, size: usize) -> RenderedClip {
    let person = SyntheticPerson::random(subject_seed);
    let identity = SyntheticIdentity::new(subject_seed);
    let clip = synthetic_clip(n_frames, clip_seed);
    let landmarks: Vec<LandmarkSet> = clip
        .displacements
        .iter()
        .enumerate()
        .map(|(t, d)| {
            let d = if t == 0 { CanonicalDisplacement::zeros() } else { d.clone() };
            scale_to(&person.face(&d), size)
        })
        .collect();
    let frames = landmarks.iter().map(|lm| render_face(&identity, lm, size)).collect();
    RenderedClip { landmarks, frames }
}

fn resolve_in(mut c: ClipManifest, dir: &Path) -> ClipManifest {
    c.landmarks = dir.join(&c.landmarks);
    c.features = dir.join(&c.features);
    c.frames = c.frames.map(|f| dir.join(f));
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::{is_mouth, NUM_LANDMARKS};

    #[test]
    fn template_is_closed_and_symmetric() {
        let m = mean_face();
        assert_eq!(m.inner_lip_gap(), 0.0);
        let c = m.centroid();
        assert!((c.x - 64.0).abs() < 1e-9);
    }

    #[test]
    fn mouth_motion_only_moves_mouth() {
        let d = mouth_motion(5.0, 1.0);
        for i in 0..NUM_LANDMARKS {
            if !is_mouth(i) {
                assert_eq!(d.delta(i), Point::zeros());
            }
        }
        assert!(mean_face().displaced(&d).inner_lip_gap() > 4.0);
    }

    #[test]
    fn rendering_is_deterministic_and_mouth_sensitive() {
        let id = SyntheticIdentity::new(3);
        let m = scale_to(&mean_face(), 64);
        let a = render_face(&id, &m, 64);
        assert_eq!(a, render_face(&id, &m, 64));
        let open = scale_to(&mean_face().displaced(&mouth_motion(6.0, 0.0)), 64);
        let b = render_face(&id, &open, 64);
        assert_ne!(a, b);
    }

    #[test]
    fn trapezoid_blinks_close_for_exactly_the_plateau() {
        use crate::blink::{eye_aspect_ratio, BlinkDetector};
        let profile = blink_profile(30, &[5, 20], 5);
        let ear: Vec<f64> = profile
            .iter()
            .map(|&c| eye_aspect_ratio(&mean_face().displaced(&eye_closure(c))))
            .collect();
        let runs = BlinkDetector::default().closed_runs(&ear);
        assert_eq!(runs, vec![(6, 5), (21, 5)]);
    }
}
