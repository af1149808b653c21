//! Cumulative probability of blur detection (no-reference sharpness).
//!
//! Pipeline: Sobel vertical-edge detection with the Octave automatic
//! threshold and simple thinning, per-edge width measurement along the row
//! between local intensity extrema, then per-block just-noticeable-blur
//! probabilities pooled into the fraction of edges whose blur probability
//! stays at or below 63 %.
//!
//! Constants follow the published CPBD reference: 64×64 blocks, edge-block
//! threshold 0.002, β = 3.6, JNB width 5 for block contrast ≤ 50 and 3
//! otherwise (on a 0-255 scale). Blocks are classified with the same Sobel
//! edge map used for width measurement. Images smaller than one block are
//! treated as a single block. Thinning keeps the leading pixel of a
//! two-pixel response plateau so that ideal steps register as edges.

use crate::image::{FaceImage, GrayImage};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpbdParams {
    pub block_size: usize,
    pub edge_block_fraction: f64,
    pub beta: f64,
    pub jnb_low_contrast: f64,
    pub jnb_high_contrast: f64,
    /// Block contrast (0-255 scale) at or below which the low-contrast JNB applies.
    pub contrast_split: i64,
    /// Largest blur probability, in percent, counted as "not blurred".
    pub max_bucket: usize,
}

impl Default for CpbdParams {
    fn default() -> Self {
        Self {
            block_size: 64,
            edge_block_fraction: 0.002,
            beta: 3.6,
            jnb_low_contrast: 5.0,
            jnb_high_contrast: 3.0,
            contrast_split: 50,
            max_bucket: 63,
        }
    }
}

struct Plane {
    h: usize,
    w: usize,
    v: Vec<f64>,
}

impl Plane {
    fn at(&self, y: usize, x: usize) -> f64 {
        self.v[y * self.w + x]
    }

    /// Half-sample symmetric border handling.
    fn reflect(&self, y: isize, x: isize) -> f64 {
        let fold = |i: isize, n: usize| -> usize {
            let n = n as isize;
            let mut i = i;
            loop {
                if i < 0 {
                    i = -i - 1;
                } else if i >= n {
                    i = 2 * n - i - 1;
                } else {
                    return i as usize;
                }
            }
        };
        self.at(fold(y, self.h), fold(x, self.w))
    }
}

/// Thinned Sobel vertical-edge map.
fn sobel_edges(img: &Plane) -> Vec<bool> {
    let (h, w) = (img.h, img.w);
    let kernel = [[1.0, 0.0, -1.0], [2.0, 0.0, -2.0], [1.0, 0.0, -1.0]].map(|r| r.map(|v: f64| v / 8.0));
    let mut strength = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (i, row) in kernel.iter().enumerate() {
                for (j, k) in row.iter().enumerate() {
                    s += k * img.reflect(y as isize + i as isize - 1, x as isize + j as isize - 1);
                }
            }
            strength[y * w + x] = s * s;
        }
    }
    let thresh = 2.0 * (strength.iter().sum::<f64>() / strength.len() as f64).sqrt();
    for s in &mut strength {
        if *s <= thresh {
            *s = 0.0;
        }
    }
    let get = |y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            strength[y as usize * w + x as usize]
        }
    };
    let mut edges = vec![false; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let s = get(y, x);
            // Two-pixel plateaus (an ideal step) keep their first pixel.
            let horizontal_peak = s > get(y, x - 1) && s >= get(y, x + 1);
            let vertical_peak = s > get(y - 1, x) && s >= get(y + 1, x);
            edges[y as usize * w + x as usize] = horizontal_peak || vertical_peak;
        }
    }
    edges
}

/// Central differences inside, one-sided at the borders.
fn gradient(img: &Plane) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = (img.h, img.w);
    let mut gy = vec![0.0; h * w];
    let mut gx = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            gx[y * w + x] = if w < 2 {
                0.0
            } else if x == 0 {
                img.at(y, 1) - img.at(y, 0)
            } else if x == w - 1 {
                img.at(y, w - 1) - img.at(y, w - 2)
            } else {
                (img.at(y, x + 1) - img.at(y, x - 1)) / 2.0
            };
            gy[y * w + x] = if h < 2 {
                0.0
            } else if y == 0 {
                img.at(1, x) - img.at(0, x)
            } else if y == h - 1 {
                img.at(h - 1, x) - img.at(h - 2, x)
            } else {
                (img.at(y + 1, x) - img.at(y - 1, x)) / 2.0
            };
        }
    }
    (gy, gx)
}

/// Marziliano edge widths along rows for edges whose gradient is horizontal.
fn edge_widths(img: &Plane, edges: &[bool]) -> Vec<f64> {
    let (h, w) = (img.h, img.w);
    let (gy, gx) = gradient(img);
    let mut widths = vec![0.0; h * w];
    if h < 3 || w < 3 {
        return widths;
    }
    const MAX_MARGIN: usize = 100;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            if !edges[i] {
                continue;
            }
            let angle = if gx[i] != 0.0 {
                gy[i].atan2(gx[i]).to_degrees()
            } else if gy[i] == 0.0 {
                0.0
            } else {
                90.0
            };
            let q = 45.0 * (angle / 45.0).round_ties_even();
            let falling = q == 180.0 || q == -180.0;
            if !falling && q != 0.0 {
                continue;
            }
            // Walk outwards while intensity keeps moving away from the edge.
            let keeps_going = |outer: f64, inner: f64, leftwards: bool| {
                let d = outer - inner;
                match (falling, leftwards) {
                    (true, true) | (false, false) => d > 0.0,
                    (true, false) | (false, true) => d < 0.0,
                }
            };
            let mut left = 0;
            while left < MAX_MARGIN {
                let (inner, outer) = (x as isize - 1 - left as isize, x as isize - 2 - left as isize);
                if outer < 0 || !keeps_going(img.at(y, outer as usize), img.at(y, inner as usize), true) {
                    break;
                }
                left += 1;
            }
            let mut right = 0;
            while right < MAX_MARGIN {
                let (inner, outer) = (x + 1 + right, x + 2 + right);
                if outer >= w || !keeps_going(img.at(y, outer), img.at(y, inner), false) {
                    break;
                }
                right += 1;
            }
            widths[i] = (left + 1 + right + 1) as f64;
        }
    }
    widths
}

/// Block ranges along one axis: full blocks only, or the whole extent when
/// the axis is shorter than one block.
fn block_ranges(n: usize, block: usize) -> Vec<std::ops::Range<usize>> {
    if n < block {
        vec![0..n]
    } else {
        (0..n / block).map(|b| b * block..(b + 1) * block).collect()
    }
}

pub fn cpbd_gray_with(gray: &GrayImage, params: &CpbdParams) -> f64 {
    let img = Plane {
        h: gray.height(),
        w: gray.width(),
        // The metric is defined on 8-bit intensities; sub-level tails would
        // otherwise count towards edge width.
        v: gray.data().iter().map(|&v| (v as f64 * 255.0).round().clamp(0.0, 255.0)).collect(),
    };
    if img.h == 0 || img.w == 0 {
        return 0.0;
    }
    let edges = sobel_edges(&img);
    let widths = edge_widths(&img, &edges);

    let mut hist = [0usize; 101];
    let mut total = 0usize;
    for rows in block_ranges(img.h, params.block_size) {
        for cols in block_ranges(img.w, params.block_size) {
            let size = rows.len() * cols.len();
            let n_edges = rows
                .clone()
                .flat_map(|y| cols.clone().map(move |x| (y, x)))
                .filter(|&(y, x)| edges[y * img.w + x])
                .count();
            if n_edges as f64 <= size as f64 * params.edge_block_fraction {
                continue;
            }
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for y in rows.clone() {
                for x in cols.clone() {
                    lo = lo.min(img.at(y, x));
                    hi = hi.max(img.at(y, x));
                }
            }
            let contrast = (hi - lo) as i64;
            let jnb = if contrast <= params.contrast_split {
                params.jnb_low_contrast
            } else {
                params.jnb_high_contrast
            };
            for y in rows.clone() {
                for x in cols.clone() {
                    let width = widths[y * img.w + x];
                    if width == 0.0 {
                        continue;
                    }
                    let p = 1.0 - (-(width / jnb).abs().powf(params.beta)).exp();
                    hist[(p * 100.0).round_ties_even() as usize] += 1;
                    total += 1;
                }
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hist[..=params.max_bucket].iter().sum::<usize>() as f64 / total as f64
    }
}

pub fn cpbd_gray(gray: &GrayImage) -> f64 {
    cpbd_gray_with(gray, &CpbdParams::default())
}

/// CPBD of the image's luma; flat images score 0.
pub fn cpbd(image: &FaceImage) -> f64 {
    cpbd_gray(&image.to_gray())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::box_blur;


    #[test]
    fn flat_image_scores_zero() {
        assert_eq!(cpbd_gray(&GrayImage::from_fn(64, 64, |_, _| 0.4)), 0.0);
    }

    #[test]
    fn sharp_step_beats_smoothed_step() {
        let step = GrayImage::from_fn(64, 64, |x, _| if x < 32 { 0.2 } else { 0.8 });
        let smooth = box_blur(&step, 4);
        assert!(cpbd_gray(&step) > cpbd_gray(&smooth));
    }

    #[test]
    fn sub_level_ripple_does_not_widen_edges() {
        let step = GrayImage::from_fn(64, 64, |x, _| if x < 32 { 0.2 } else { 0.8 });
        let ripple = GrayImage::from_fn(64, 64, |x, y| step.get(x, y) + 1e-4 * (x as f32 - 32.0).signum() * (x as f32 - 32.0).abs().min(20.0));
        assert_eq!(cpbd_gray(&ripple), cpbd_gray(&step));
    }

    #[test]
    fn ideal_step_is_one_sharp_edge_per_row() {
        let step = GrayImage::from_fn(64, 64, |x, _| if x < 32 { 0.2 } else { 0.8 });
        assert_eq!(cpbd_gray(&step), 1.0);
    }

    #[test]
    fn small_images_form_one_block() {
        let step = GrayImage::from_fn(24, 24, |x, _| if x < 12 { 0.2 } else { 0.8 });
        assert_eq!(cpbd_gray(&step), 1.0);
    }
}
