use crate::error::{Error, Result};
use crate::image::FaceImage;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
/// Dynamic range of `[0, 1]` data; equivalent to 255 on 8-bit images.
pub const DYNAMIC_RANGE: f64 = 1.0;

pub(crate) fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable "valid" filtering of a `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64; WINDOW]) -> Vec<f64> {
    let ow = w - WINDOW + 1;
    let oh = h - WINDOW + 1;
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..WINDOW).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..WINDOW).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let k = gaussian_window();
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect() };
    let mu_a = filter_valid(a, h, w, &k);
    let mu_b = filter_valid(b, h, w, &k);
    let aa = filter_valid(&prod(&|x, _| x * x), h, w, &k);
    let bb = filter_valid(&prod(&|_, y| y * y), h, w, &k);
    let ab = filter_valid(&prod(&|x, y| x * y), h, w, &k);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total / n as f64
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5) over
/// the fully-covered region, averaged over colour channels.
pub fn ssim(pred: &FaceImage, truth: &FaceImage) -> Result<f64> {
    pred.same_size(truth)?;
    let (h, w) = (pred.height(), pred.width());
    if h < WINDOW || w < WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs images of at least {WINDOW}x{WINDOW}, got {h}x{w}"
        )));
    }
    let mut total = 0.0;
    for c in 0..FaceImage::CHANNELS {
        let a: Vec<f64> = pred.channel(c).iter().map(|&v| v as f64).collect();
        let b: Vec<f64> = truth.channel(c).iter().map(|&v| v as f64).collect();
        total += ssim_plane(&a, &b, h, w);
    }
    Ok(total / FaceImage::CHANNELS as f64)
}
