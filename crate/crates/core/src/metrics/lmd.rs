use crate::error::{Error, Result};
use crate::landmarks::{LandmarkSet, MOUTH, NOSE_TIP};

/// Mean Euclidean distance over mouth landmarks and frames, after
/// translating each frame so its nose tip sits at the origin.
pub fn lmd(pred: &[LandmarkSet], truth: &[LandmarkSet]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("landmark stream"));
    }
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        let (pa, ta) = (p.point(NOSE_TIP), t.point(NOSE_TIP));
        for i in MOUTH {
            total += ((p.point(i) - pa) - (t.point(i) - ta)).norm();
        }
    }
    Ok(total / (pred.len() * MOUTH.len()) as f64)
}
