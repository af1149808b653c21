//! Side-by-side comparison of real and generated blink statistics.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::blink::BlinkStats;

/// Typical human blink rate in blinks per second.
pub const HUMAN_BLINK_RATE: RangeInclusive<f64> = 0.28..=0.4;

/// Default histogram: 0.04 s bins (one frame at 25 fps) up to 0.6 s.
pub const DURATION_BIN_WIDTH: f64 = 0.04;
pub const DURATION_BINS: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlinkComparison {
    pub real: BlinkStats,
    pub generated: BlinkStats,
    /// Generated minus real.
    pub rate_difference: f64,
    pub duration_difference: f64,
    pub inter_blink_difference: f64,
    pub bin_width: f64,
    /// Counts per bin; the last bin also holds everything longer.
    pub real_histogram: Vec<usize>,
    pub generated_histogram: Vec<usize>,
    pub generated_in_human_range: bool,
}

pub fn duration_histogram(durations: &[f64], bin_width: f64, bins: usize) -> Vec<usize> {
    let mut hist = vec![0; bins];
    if bins == 0 {
        return hist;
    }
    for &d in durations {
        // Small epsilon so exact multiples of the width land in their own bin.
        let b = ((d / bin_width) + 1e-9).floor().max(0.0) as usize;
        hist[b.min(bins - 1)] += 1;
    }
    hist
}

pub fn compare_blink_stats(real: &BlinkStats, generated: &BlinkStats) -> BlinkComparison {
    BlinkComparison {
        rate_difference: generated.blink_rate - real.blink_rate,
        duration_difference: generated.mean_blink_duration - real.mean_blink_duration,
        inter_blink_difference: generated.mean_inter_blink - real.mean_inter_blink,
        bin_width: DURATION_BIN_WIDTH,
        real_histogram: duration_histogram(&real.blink_durations, DURATION_BIN_WIDTH, DURATION_BINS),
        generated_histogram: duration_histogram(&generated.blink_durations, DURATION_BIN_WIDTH, DURATION_BINS),
        generated_in_human_range: HUMAN_BLINK_RATE.contains(&generated.blink_rate),
        real: real.clone(),
        generated: generated.clone(),
    }
}

impl BlinkComparison {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{:<22}{:>12}{:>12}{:>12}\n", "blink statistic", "real", "generated", "difference"));
        let rows = [
            ("rate (blinks/s)", self.real.blink_rate, self.generated.blink_rate, self.rate_difference),
            (
                "mean duration (s)",
                self.real.mean_blink_duration,
                self.generated.mean_blink_duration,
                self.duration_difference,
            ),
            (
                "mean inter-blink (s)",
                self.real.mean_inter_blink,
                self.generated.mean_inter_blink,
                self.inter_blink_difference,
            ),
        ];
        for (name, r, g, d) in rows {
            s.push_str(&format!("{name:<22}{r:>12.4}{g:>12.4}{d:>12.4}\n"));
        }
        s.push_str(&format!(
            "generated rate {} human range {:.2}-{:.2} blinks/s\n",
            if self.generated_in_human_range { "within" } else { "outside" },
            HUMAN_BLINK_RATE.start(),
            HUMAN_BLINK_RATE.end()
        ));
        s.push_str("duration histogram (s)   real  generated\n");
        for (b, (r, g)) in self.real_histogram.iter().zip(&self.generated_histogram).enumerate() {
            let lo = b as f64 * self.bin_width;
            let label = if b + 1 == self.real_histogram.len() {
                format!("{lo:.2}+")
            } else {
                format!("{lo:.2}-{:.2}", lo + self.bin_width)
            };
            s.push_str(&format!("{label:<22}{r:>7}{g:>11}\n"));
        }
        s
    }
}
