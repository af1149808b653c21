use crate::error::Result;
use crate::image::FaceImage;

/// Peak signal-to-noise ratio in dB for images in `[0, 1]` (peak 1.0).
///
/// Identical images give `f64::INFINITY`.
pub fn psnr(pred: &FaceImage, truth: &FaceImage) -> Result<f64> {
    pred.same_size(truth)?;
    let n = pred.data().len() as f64;
    let mse = pred
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| {
            let d = (*a as f64) - (*b as f64);
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}
