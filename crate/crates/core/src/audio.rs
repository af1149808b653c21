//! Speech-recognizer character-logit tracks and per-video-frame windows.
//!
//! Features are produced offline (29 pre-softmax logits per audio frame:
//! 26 letters plus 3 special symbols). This module only reads, validates and
//! windows them.
//!
//! Binary track layout, all little-endian:
//!
//! ```text
//! magic      4 bytes  b"TFAF"
//! n_frames   u64
//! dim        u32      always 29
//! audio_rate f64      audio frames per second
//! video_fps  f64      target video frame rate
//! data       n_frames × dim f32, row-major
//! ```
//!
//! A CSV variant is also accepted: a first line
//! `# audio_rate=<r> video_fps=<f>` followed by one comma-separated row of
//! 29 values per audio frame.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const FEATURE_DIM: usize = 29;
pub const WINDOW_LEN: usize = 16;
const MAGIC: &[u8; 4] = b"TFAF";

pub type FeatureRow = [f32; FEATURE_DIM];

/// One video frame's worth of audio context: 16 rows of 29 logits.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioFeatureWindow {
    rows: [FeatureRow; WINDOW_LEN],
}

impl AudioFeatureWindow {
    pub fn new(rows: [FeatureRow; WINDOW_LEN]) -> Result<Self> {
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("audio feature window"));
        }
        Ok(Self { rows })
    }

    pub fn from_flat(flat: &[f32]) -> Result<Self> {
        if flat.len() != WINDOW_LEN * FEATURE_DIM {
            return Err(Error::ShapeMismatch {
                expected: format!("{WINDOW_LEN}x{FEATURE_DIM}"),
                got: format!("{} values", flat.len()),
            });
        }
        let mut rows = [[0f32; FEATURE_DIM]; WINDOW_LEN];
        for (row, chunk) in rows.iter_mut().zip(flat.chunks_exact(FEATURE_DIM)) {
            row.copy_from_slice(chunk);
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[FeatureRow; WINDOW_LEN] {
        &self.rows
    }

    /// Row-major `16 × 29` values.
    pub fn to_flat(&self) -> Vec<f32> {
        self.rows.iter().flatten().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTrack {
    frames: Vec<FeatureRow>,
    audio_frame_rate: f64,
    video_fps: f64,
}

impl FeatureTrack {
    pub fn new(frames: Vec<FeatureRow>, audio_frame_rate: f64, video_fps: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Empty("feature track"));
        }
        if !(audio_frame_rate > 0.0 && audio_frame_rate.is_finite())
            || !(video_fps > 0.0 && video_fps.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "rates must be positive, got audio {audio_frame_rate} video {video_fps}"
            )));
        }
        if frames.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature track"));
        }
        Ok(Self {
            frames,
            audio_frame_rate,
            video_fps,
        })
    }

    pub fn frames(&self) -> &[FeatureRow] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn audio_frame_rate(&self) -> f64 {
        self.audio_frame_rate
    }

    pub fn video_fps(&self) -> f64 {
        self.video_fps
    }

    /// Number of whole video frames spanned by the track.
    pub fn video_frame_count(&self) -> usize {
        ((self.frames.len() as f64 / self.audio_frame_rate) * self.video_fps + 1e-9).floor() as usize
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_u64::<LittleEndian>(self.frames.len() as u64).map_err(io)?;
        w.write_u32::<LittleEndian>(FEATURE_DIM as u32).map_err(io)?;
        w.write_f64::<LittleEndian>(self.audio_frame_rate).map_err(io)?;
        w.write_f64::<LittleEndian>(self.video_fps).map_err(io)?;
        for v in self.frames.iter().flatten() {
            w.write_f32::<LittleEndian>(*v).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Reads a binary or (by `.csv` extension) text feature track.
pub fn load_feature_track(path: impl AsRef<Path>) -> Result<FeatureTrack> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        load_csv(path)
    } else {
        load_binary(path)
    }
}

fn load_binary(path: &Path) -> Result<FeatureTrack> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |reason: &str| Error::malformed(path, reason);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let n = r.read_u64::<LittleEndian>().map_err(|_| bad("truncated header"))? as usize;
    let dim = r.read_u32::<LittleEndian>().map_err(|_| bad("truncated header"))? as usize;
    if dim != FEATURE_DIM {
        return Err(Error::RowWidth {
            path: path.into(),
            row: 0,
            width: dim,
        });
    }
    let audio_rate = r.read_f64::<LittleEndian>().map_err(|_| bad("truncated header"))?;
    let video_fps = r.read_f64::<LittleEndian>().map_err(|_| bad("truncated header"))?;
    let mut frames = vec![[0f32; FEATURE_DIM]; n];
    for row in &mut frames {
        r.read_f32_into::<LittleEndian>(row)
            .map_err(|_| bad("truncated data"))?;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad("trailing bytes after data"));
    }
    FeatureTrack::new(frames, audio_rate, video_fps)
}

fn load_csv(path: &Path) -> Result<FeatureTrack> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::malformed(path, "missing header"))?
        .map_err(|e| Error::io(path, e))?;
    let (mut audio_rate, mut video_fps) = (None, None);
    for field in header.trim_start_matches('#').split_whitespace() {
        match field.split_once('=') {
            Some(("audio_rate", v)) => audio_rate = v.parse::<f64>().ok(),
            Some(("video_fps", v)) => video_fps = v.parse::<f64>().ok(),
            _ => {}
        }
    }
    let (Some(audio_rate), Some(video_fps)) = (audio_rate, video_fps) else {
        return Err(Error::malformed(path, "header must give audio_rate and video_fps"));
    };

    let mut frames = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f32> = line
            .split(',')
            .map(|s| s.trim().parse::<f32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::malformed(path, format!("row {row}: {e}")))?;
        if values.len() != FEATURE_DIM {
            return Err(Error::RowWidth {
                path: path.into(),
                row,
                width: values.len(),
            });
        }
        let mut r = [0f32; FEATURE_DIM];
        r.copy_from_slice(&values);
        frames.push(r);
    }
    FeatureTrack::new(frames, audio_rate, video_fps)
}

/// Writes the CSV variant read by [`load_feature_track`].
pub fn save_feature_track_csv(track: &FeatureTrack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "# audio_rate={} video_fps={}", track.audio_frame_rate, track.video_fps).map_err(io)?;
    for row in &track.frames {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// First audio row of the window for video frame `frame`. May be negative or
/// run past the end; callers clamp.
pub fn window_start(frame: usize, audio_frame_rate: f64, video_fps: f64) -> i64 {
    let centre = (frame as f64 + 0.5) / video_fps * audio_frame_rate;
    (centre - WINDOW_LEN as f64 / 2.0 + 0.5).floor() as i64
}

/// One window per video frame, centred on the frame's mid-time, with edge
/// rows replicated where the window runs off the track.
pub fn window_track(track: &FeatureTrack, n_video_frames: usize) -> Result<Vec<AudioFeatureWindow>> {
    if track.frames.is_empty() {
        return Err(Error::Empty("feature track"));
    }
    let last = track.frames.len() as i64 - 1;
    Ok((0..n_video_frames)
        .map(|i| {
            let start = window_start(i, track.audio_frame_rate, track.video_fps);
            let mut rows = [[0f32; FEATURE_DIM]; WINDOW_LEN];
            for (k, row) in rows.iter_mut().enumerate() {
                let j = (start + k as i64).clamp(0, last) as usize;
                *row = track.frames[j];
            }
            AudioFeatureWindow { rows }
        })
        .collect())
}
