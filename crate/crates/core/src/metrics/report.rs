//! Table-style evaluation report: PSNR, SSIM, CPBD and LMD per clip and
//! over the corpus.

use serde::{Deserialize, Serialize};

use super::blink_compare::BlinkComparison;

/// Which landmark stream the LMD column was computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmdSource {
    /// Landmarks detected on the generated frames.
    DetectedOnFrames,
    /// Landmark stream that drove generation.
    PredictedStream,
}

impl LmdSource {
    fn label(self) -> &'static str {
        match self {
            LmdSource::DetectedOnFrames => "detected on generated frames",
            LmdSource::PredictedStream => "predicted landmark stream",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    /// `+inf` for identical images; serialized as the string `"inf"`.
    #[serde(with = "maybe_infinite")]
    pub psnr: f64,
    pub ssim: f64,
    pub cpbd: f64,
    pub lmd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipScores {
    pub clip_id: String,
    pub frames: usize,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub lmd_source: LmdSource,
    pub clips: Vec<ClipScores>,
    /// Frame-weighted means over all clips.
    pub aggregate: Scores,
    pub blink: Option<BlinkComparison>,
}

pub const COLUMNS: [&str; 4] = ["PSNR", "SSIM", "CPBD", "LMD"];

impl EvalReport {
    pub fn new(lmd_source: LmdSource, clips: Vec<ClipScores>, blink: Option<BlinkComparison>) -> Self {
        let total: usize = clips.iter().map(|c| c.frames).sum();
        let weighted = |f: fn(&Scores) -> f64| -> f64 {
            if total == 0 {
                return 0.0;
            }
            clips.iter().map(|c| f(&c.scores) * c.frames as f64).sum::<f64>() / total as f64
        };
        let aggregate = Scores {
            psnr: weighted(|s| s.psnr),
            ssim: weighted(|s| s.ssim),
            cpbd: weighted(|s| s.cpbd),
            lmd: weighted(|s| s.lmd),
        };
        Self {
            lmd_source,
            clips,
            aggregate,
            blink,
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str("# LMD: mouth landmarks 48-67, per-frame nose-tip (30) anchor, ");
        s.push_str(self.lmd_source.label());
        s.push('\n');
        s.push_str(&format!("{:<24}", "clip"));
        for c in COLUMNS {
            s.push_str(&format!("{c:>10}"));
        }
        s.push('\n');
        let row = |name: &str, sc: &Scores| {
            format!(
                "{name:<24}{:>10}{:>10.4}{:>10.4}{:>10.4}\n",
                fmt_psnr(sc.psnr),
                sc.ssim,
                sc.cpbd,
                sc.lmd
            )
        };
        for c in &self.clips {
            s.push_str(&row(&c.clip_id, &c.scores));
        }
        s.push_str(&row("all", &self.aggregate));
        if let Some(b) = &self.blink {
            s.push('\n');
            s.push_str(&b.to_text());
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.3}")
    }
}

mod maybe_infinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad PSNR value {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(id: &str, frames: usize, psnr: f64) -> ClipScores {
        ClipScores {
            clip_id: id.into(),
            frames,
            scores: Scores {
                psnr,
                ssim: 0.5,
                cpbd: 0.25,
                lmd: 1.0,
            },
        }
    }

    #[test]
    fn columns_follow_table_order() {
        let r = EvalReport::new(LmdSource::PredictedStream, vec![clip("a", 2, 30.0)], None);
        let t = r.to_table();
        let header = t.lines().nth(1).unwrap();
        let pos: Vec<usize> = COLUMNS.iter().map(|c| header.find(c).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn aggregate_is_frame_weighted() {
        let r = EvalReport::new(
            LmdSource::DetectedOnFrames,
            vec![clip("a", 1, 20.0), clip("b", 3, 40.0)],
            None,
        );
        assert!((r.aggregate.psnr - 35.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_psnr_round_trips_through_json() {
        let r = EvalReport::new(LmdSource::PredictedStream, vec![clip("a", 1, f64::INFINITY)], None);
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_table().contains("inf"));
    }
}
