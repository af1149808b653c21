//! Eye-region displacement sequences, blink imposition and blink statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmarks::{CanonicalDisplacement, LandmarkSet, Point, EYE_REGION, EYE_REGION_LEN};

/// Values per frame: `(dx, dy)` for each of the 22 eye-region landmarks.
pub const BLINK_DIM: usize = 2 * EYE_REGION_LEN;

pub type BlinkFrame = [f64; BLINK_DIM];

/// `T × 44` displacements of the eye-region landmarks, in [`EYE_REGION`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct BlinkSequence {
    frames: Vec<BlinkFrame>,
}

impl BlinkSequence {
    pub fn new(frames: Vec<BlinkFrame>) -> Result<Self> {
        if frames.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("blink sequence"));
        }
        Ok(Self { frames })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            frames: vec![[0.0; BLINK_DIM]; len],
        }
    }

    /// Row-major `T × 44` values.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % BLINK_DIM != 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("multiple of {BLINK_DIM} values"),
                got: format!("{} values", flat.len()),
            });
        }
        let frames = flat
            .chunks_exact(BLINK_DIM)
            .map(|c| {
                let mut f = [0.0; BLINK_DIM];
                f.copy_from_slice(c);
                f
            })
            .collect();
        Self::new(frames)
    }

    /// Eye-region slice of a displacement sequence.
    pub fn from_displacements(deltas: &[CanonicalDisplacement]) -> Self {
        let frames = deltas
            .iter()
            .map(|d| {
                let mut f = [0.0; BLINK_DIM];
                for (k, &i) in EYE_REGION.iter().enumerate() {
                    f[2 * k] = d.delta(i).x;
                    f[2 * k + 1] = d.delta(i).y;
                }
                f
            })
            .collect();
        Self { frames }
    }

    pub fn frames(&self) -> &[BlinkFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.frames.iter().flatten().copied().collect()
    }

    /// Frame `t` as a full 68-point displacement, zero outside the eye region.
    pub fn displacement(&self, t: usize) -> CanonicalDisplacement {
        let mut d = CanonicalDisplacement::zeros();
        let f = &self.frames[t];
        for (k, &i) in EYE_REGION.iter().enumerate() {
            d.set(i, Point::new(f[2 * k], f[2 * k + 1]));
        }
        d
    }

    /// Element-wise minimum and maximum over all frames.
    pub fn range(sequences: &[BlinkSequence]) -> Option<(BlinkFrame, BlinkFrame)> {
        let mut frames = sequences.iter().flat_map(|s| s.frames.iter());
        let first = *frames.next()?;
        Some(frames.fold((first, first), |(mut lo, mut hi), f| {
            for k in 0..BLINK_DIM {
                lo[k] = lo[k].min(f[k]);
                hi[k] = hi[k].max(f[k]);
            }
            (lo, hi)
        }))
    }
}

/// Adds blink displacements to the eye-region landmarks of each frame.
pub fn impose_blinks(landmarks: &[LandmarkSet], blinks: &BlinkSequence) -> Result<Vec<LandmarkSet>> {
    if landmarks.len() != blinks.len() {
        return Err(Error::LengthMismatch {
            left: landmarks.len(),
            right: blinks.len(),
        });
    }
    Ok(landmarks
        .iter()
        .enumerate()
        .map(|(t, lm)| lm.displaced(&blinks.displacement(t)))
        .collect())
}

/// [`impose_blinks`] on canonical displacements rather than absolute landmarks.
pub fn impose_blinks_canonical(
    deltas: &[CanonicalDisplacement],
    blinks: &BlinkSequence,
) -> Result<Vec<CanonicalDisplacement>> {
    if deltas.len() != blinks.len() {
        return Err(Error::LengthMismatch {
            left: deltas.len(),
            right: blinks.len(),
        });
    }
    Ok(deltas
        .iter()
        .enumerate()
        .map(|(t, d)| d.add(&blinks.displacement(t)))
        .collect())
}

fn eye_ratio(p: &[Point]) -> f64 {
    let vertical = (p[1] - p[5]).norm() + (p[2] - p[4]).norm();
    let horizontal = (p[0] - p[3]).norm();
    if horizontal <= 0.0 {
        0.0
    } else {
        vertical / (2.0 * horizontal)
    }
}

/// Mean eye aspect ratio of both eyes.
pub fn eye_aspect_ratio(lm: &LandmarkSet) -> f64 {
    let p = lm.points();
    0.5 * (eye_ratio(&p[36..42]) + eye_ratio(&p[42..48]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlinkDetector {
    /// Eyes count as closed once the aspect ratio drops below this.
    pub threshold: f64,
    /// Eyes reopen once the ratio climbs back to `threshold + hysteresis`.
    pub hysteresis: f64,
    /// Closed runs shorter than this many frames are ignored.
    pub min_frames: usize,
}

impl Default for BlinkDetector {
    fn default() -> Self {
        Self {
            threshold: 0.2,
            hysteresis: 0.02,
            min_frames: 2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlinkStats {
    pub blink_count: usize,
    /// Length of the analysed signal in seconds.
    pub duration: f64,
    /// Blinks per second.
    pub blink_rate: f64,
    pub mean_blink_duration: f64,
    pub mean_inter_blink: f64,
    pub blink_durations: Vec<f64>,
    pub inter_blink_intervals: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl BlinkStats {
    /// Pools several signals: rates weight by duration, means by blink count.
    pub fn aggregate(stats: &[BlinkStats]) -> BlinkStats {
        let blink_count = stats.iter().map(|s| s.blink_count).sum();
        let duration: f64 = stats.iter().map(|s| s.duration).sum();
        let blink_durations: Vec<f64> = stats.iter().flat_map(|s| s.blink_durations.iter().copied()).collect();
        let inter_blink_intervals: Vec<f64> =
            stats.iter().flat_map(|s| s.inter_blink_intervals.iter().copied()).collect();
        BlinkStats {
            blink_count,
            duration,
            blink_rate: if duration > 0.0 { blink_count as f64 / duration } else { 0.0 },
            mean_blink_duration: mean(&blink_durations),
            mean_inter_blink: mean(&inter_blink_intervals),
            blink_durations,
            inter_blink_intervals,
        }
    }
}

impl BlinkDetector {
    /// Finds closed-eye runs as `(start_frame, len)`.
    pub fn closed_runs(&self, ear: &[f64]) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = None;
        for (t, &e) in ear.iter().enumerate() {
            match start {
                None if e < self.threshold => start = Some(t),
                Some(s) if e >= self.threshold + self.hysteresis => {
                    runs.push((s, t - s));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s, ear.len() - s));
        }
        runs.retain(|&(_, len)| len >= self.min_frames);
        runs
    }

    pub fn stats_from_ear(&self, ear: &[f64], fps: f64) -> Result<BlinkStats> {
        if ear.is_empty() {
            return Err(Error::Empty("eye aspect ratio signal"));
        }
        if !(fps > 0.0) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
        let runs = self.closed_runs(ear);
        let duration = ear.len() as f64 / fps;
        let blink_durations: Vec<f64> = runs.iter().map(|&(_, len)| len as f64 / fps).collect();
        let inter_blink_intervals: Vec<f64> = runs
            .windows(2)
            .map(|w| (w[1].0 - (w[0].0 + w[0].1)) as f64 / fps)
            .collect();
        Ok(BlinkStats {
            blink_count: runs.len(),
            duration,
            blink_rate: runs.len() as f64 / duration,
            mean_blink_duration: mean(&blink_durations),
            mean_inter_blink: mean(&inter_blink_intervals),
            blink_durations,
            inter_blink_intervals,
        })
    }

    pub fn detect(&self, landmarks: &[LandmarkSet], fps: f64) -> Result<BlinkStats> {
        let ear: Vec<f64> = landmarks.iter().map(eye_aspect_ratio).collect();
        self.stats_from_ear(&ear, fps)
    }
}

/// Blink statistics of a landmark sequence with the default detector.
pub fn detect_blinks(landmarks: &[LandmarkSet], fps: f64) -> Result<BlinkStats> {
    BlinkDetector::default().detect(landmarks, fps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::is_eye_region;
    use crate::synthetic::{eye_closure, mean_face};

    #[test]
    fn open_eyes_never_blink() {
        let face = mean_face();
        let stats = detect_blinks(&vec![face; 90], 30.0).unwrap();
        assert_eq!(stats.blink_count, 0);
        assert_eq!(stats.blink_rate, 0.0);
    }

    #[test]
    fn three_six_frame_closures_at_30fps() {
        let mut ear = vec![0.3; 120];
        for start in [10, 50, 90] {
            ear[start..start + 6].fill(0.05);
        }
        let stats = BlinkDetector::default().stats_from_ear(&ear, 30.0).unwrap();
        assert_eq!(stats.blink_count, 3);
        for d in &stats.blink_durations {
            assert!((d - 0.2).abs() < 1e-12);
        }
        assert!((stats.blink_rate - 3.0 / 4.0).abs() < 1e-12);
        assert!((stats.mean_inter_blink - 34.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn hysteresis_merges_flicker_and_min_length_drops_spikes() {
        let det = BlinkDetector::default();
        // Flicker between 0.19 and 0.21 stays one blink.
        let ear = [0.3, 0.19, 0.21, 0.19, 0.3, 0.3, 0.1, 0.3];
        let runs = det.closed_runs(&ear);
        assert_eq!(runs, vec![(1, 3)]);
    }

    #[test]
    fn empty_signal_is_rejected() {
        assert!(detect_blinks(&[], 25.0).is_err());
    }

    #[test]
    fn imposition_is_local_to_eyes() {
        let face = mean_face();
        let blinks = BlinkSequence::from_displacements(&[eye_closure(1.0), eye_closure(0.5)]);
        let out = impose_blinks(&[face.clone(), face.clone()], &blinks).unwrap();
        for lm in &out {
            for i in 0..68 {
                if !is_eye_region(i) {
                    assert_eq!(lm.point(i), face.point(i));
                }
            }
        }
        assert!(eye_aspect_ratio(&out[0]) < 0.05);
        assert!(impose_blinks(&[face], &blinks).is_err());
    }

    #[test]
    fn zero_blinks_leave_landmarks_unchanged() {
        let face = mean_face();
        let out = impose_blinks(&[face.clone()], &BlinkSequence::zeros(1)).unwrap();
        assert_eq!(out[0], face);
    }
}
