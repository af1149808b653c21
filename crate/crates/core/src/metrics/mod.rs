//! Image quality, landmark sync and blink statistic metrics.

pub mod blink_compare;
pub mod cpbd;
pub mod lmd;
pub mod psnr;
pub mod report;
pub mod ssim;

pub use blink_compare::{compare_blink_stats, duration_histogram, BlinkComparison, HUMAN_BLINK_RATE};
pub use cpbd::{cpbd, cpbd_gray, CpbdParams};
pub use lmd::lmd;
pub use psnr::psnr;
pub use report::{ClipScores, EvalReport, LmdSource, Scores};
pub use ssim::ssim;

use crate::image::{FaceImage, GrayImage};

/// Separable box blur of half-width `radius` with clamped borders.
pub fn box_blur(img: &GrayImage, radius: usize) -> GrayImage {
    if radius == 0 {
        return img.clone();
    }
    let (h, w) = (img.height(), img.width());
    let r = radius as isize;
    let n = (2 * radius + 1) as f32;
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let horizontal = GrayImage::from_fn(h, w, |x, y| {
        (-r..=r).map(|d| img.get(clamp(x as isize + d, w), y)).sum::<f32>() / n
    });
    GrayImage::from_fn(h, w, |x, y| {
        (-r..=r).map(|d| horizontal.get(x, clamp(y as isize + d, h))).sum::<f32>() / n
    })
}

/// [`box_blur`] applied to each colour channel.
pub fn box_blur_rgb(img: &FaceImage, radius: usize) -> FaceImage {
    let (h, w) = (img.height(), img.width());
    let mut data = Vec::with_capacity(img.data().len());
    for c in 0..FaceImage::CHANNELS {
        let plane = GrayImage::from_vec(h, w, img.channel(c).to_vec()).expect("channel has h*w values");
        data.extend_from_slice(box_blur(&plane, radius).data());
    }
    FaceImage::from_planar(h, w, data).expect("same shape as input")
}
