//! Rigid alignment and motion transfer between the mean face and a
//! person-specific face.
//!
//! Canonical displacements live in the mean-face frame. A person's landmarks
//! for frame `t` are obtained as
//!
//! ```text
//! person_t = person_neutral + R · (S ⊙ delta_t)
//! ```
//!
//! where `R` is the rotation of the rigid Procrustes alignment taking the mean
//! neutral face onto the person neutral face and `S = (sx, sy)` is the
//! per-axis bounding-box ratio. [`extract_canonical`] is the exact inverse.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::landmarks::{CanonicalDisplacement, LandmarkSet, Point, NUM_LANDMARKS};

/// Rotation plus translation, `p ↦ R·p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix2<f64>,
    translation: Point,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix2::identity(),
            translation: Point::zeros(),
        }
    }

    pub fn from_angle(radians: f64, translation: Point) -> Self {
        let (s, c) = radians.sin_cos();
        Self {
            rotation: Matrix2::new(c, -s, s, c),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix2<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> Point {
        self.translation
    }

    pub fn angle(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    pub fn apply(&self, p: Point) -> Point {
        self.rotation * p + self.translation
    }

    pub fn apply_set(&self, lm: &LandmarkSet) -> LandmarkSet {
        lm.map(|_, p| self.apply(p))
            .expect("rigid transform of finite points is finite")
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Least-squares rotation and translation taking `source` onto `reference`.
///
/// No scaling is estimated. Fails when the source has no spread.
pub fn procrustes_align(source: &LandmarkSet, reference: &LandmarkSet) -> Result<RigidTransform> {
    let cs = source.centroid();
    let cr = reference.centroid();

    let mut spread = 0.0;
    let mut dot = 0.0;
    let mut cross = 0.0;
    for (s, r) in source.points().iter().zip(reference.points()) {
        let a = s - cs;
        let b = r - cr;
        spread += a.norm_squared();
        dot += a.x * b.x + a.y * b.y;
        cross += a.x * b.y - a.y * b.x;
    }
    if spread <= f64::EPSILON * NUM_LANDMARKS as f64 * (1.0 + cs.norm_squared()) {
        return Err(Error::Degenerate("source points have zero spread"));
    }

    let rotation = if dot == 0.0 && cross == 0.0 {
        Matrix2::identity()
    } else {
        let (s, c) = cross.atan2(dot).sin_cos();
        Matrix2::new(c, -s, s, c)
    };
    Ok(RigidTransform {
        rotation,
        translation: cr - rotation * cs,
    })
}

/// Per-axis ratio of a person's face extent to the mean face extent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleFactor {
    pub sx: f64,
    pub sy: f64,
}

impl ScaleFactor {
    pub const IDENTITY: ScaleFactor = ScaleFactor { sx: 1.0, sy: 1.0 };

    pub fn new(sx: f64, sy: f64) -> Result<Self> {
        if sx > 0.0 && sy > 0.0 && sx.is_finite() && sy.is_finite() {
            Ok(Self { sx, sy })
        } else {
            Err(Error::InvalidArgument(format!(
                "scale factors must be positive, got ({sx}, {sy})"
            )))
        }
    }
}

pub fn compute_scale(person_neutral: &LandmarkSet, mean_neutral: &LandmarkSet) -> Result<ScaleFactor> {
    let extent = |lm: &LandmarkSet| {
        let (lo, hi) = lm.bounding_box();
        hi - lo
    };
    let p = extent(person_neutral);
    let m = extent(mean_neutral);
    if p.x <= 0.0 || p.y <= 0.0 || m.x <= 0.0 || m.y <= 0.0 {
        return Err(Error::Degenerate("bounding box has zero extent"));
    }
    ScaleFactor::new(p.x / m.x, p.y / m.y)
}

/// Transfers a canonical displacement onto a person-specific face.
pub fn retarget(
    delta: &CanonicalDisplacement,
    scale: ScaleFactor,
    person_neutral: &LandmarkSet,
    mean_neutral: &LandmarkSet,
) -> Result<LandmarkSet> {
    let to_person = procrustes_align(mean_neutral, person_neutral)?;
    Ok(retarget_with(delta, scale, person_neutral, to_person.rotation()))
}

fn retarget_with(
    delta: &CanonicalDisplacement,
    scale: ScaleFactor,
    person_neutral: &LandmarkSet,
    rotation: &Matrix2<f64>,
) -> LandmarkSet {
    let mut points = *person_neutral.points();
    for (p, d) in points.iter_mut().zip(delta.deltas()) {
        *p += rotation * Point::new(d.x * scale.sx, d.y * scale.sy);
    }
    LandmarkSet::new(points).expect("finite inputs give finite output")
}

/// Retargets a whole sequence, estimating the alignment only once.
pub fn retarget_sequence(
    deltas: &[CanonicalDisplacement],
    scale: ScaleFactor,
    person_neutral: &LandmarkSet,
    mean_neutral: &LandmarkSet,
) -> Result<Vec<LandmarkSet>> {
    let to_person = procrustes_align(mean_neutral, person_neutral)?;
    Ok(deltas
        .iter()
        .map(|d| retarget_with(d, scale, person_neutral, to_person.rotation()))
        .collect())
}

/// Expresses a person's per-frame motion as displacements of the mean face.
///
/// Motion relative to the person neutral frame is rotated into the mean-face
/// frame and divided per axis by the [`ScaleFactor`] of the two neutral faces.
pub fn extract_canonical(
    person_seq: &[LandmarkSet],
    person_neutral: &LandmarkSet,
    mean_neutral: &LandmarkSet,
) -> Result<Vec<CanonicalDisplacement>> {
    let scale = compute_scale(person_neutral, mean_neutral)?;
    let to_mean = procrustes_align(person_neutral, mean_neutral)?;
    let rotation = to_mean.rotation();
    Ok(person_seq
        .iter()
        .map(|lm| {
            let mut deltas = [Point::zeros(); NUM_LANDMARKS];
            for (d, (p, n)) in deltas
                .iter_mut()
                .zip(lm.points().iter().zip(person_neutral.points()))
            {
                let r = rotation * (p - n);
                *d = Point::new(r.x / scale.sx, r.y / scale.sy);
            }
            CanonicalDisplacement::new(deltas).expect("finite inputs give finite output")
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::mean_face;
    use approx::assert_abs_diff_eq;

    fn max_abs_diff(a: &LandmarkSet, b: &LandmarkSet) -> f64 {
        a.to_flat()
            .iter()
            .zip(b.to_flat())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn self_alignment_is_identity() {
        let m = mean_face();
        let t = procrustes_align(&m, &m).unwrap();
        assert_abs_diff_eq!(t.angle(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.translation().norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn pure_translation_is_recovered() {
        let m = mean_face();
        let shifted = m.translate(Point::new(5.0, 0.0));
        let t = procrustes_align(&shifted, &m).unwrap();
        assert_abs_diff_eq!(t.angle(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.translation().x, -5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(t.translation().y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_source_is_rejected() {
        let flat = vec![3.0; 136];
        let point = LandmarkSet::from_flat(&flat).unwrap();
        assert!(matches!(
            procrustes_align(&point, &mean_face()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn inverse_and_compose() {
        let t = RigidTransform::from_angle(0.7, Point::new(3.0, -2.0));
        let id = t.compose(&t.inverse());
        assert_abs_diff_eq!(id.angle(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.translation().norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.rotation().determinant(), 1.0, epsilon = 1e-12);
        let p = Point::new(10.0, 20.0);
        assert_abs_diff_eq!((t.inverse().apply(t.apply(p)) - p).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn scale_examples() {
        let m = mean_face();
        assert_eq!(compute_scale(&m, &m).unwrap(), ScaleFactor::IDENTITY);

        let c = m.centroid();
        let doubled = m.map(|_, p| c + (p - c) * 2.0).unwrap();
        let s = compute_scale(&doubled, &m).unwrap();
        assert_abs_diff_eq!(s.sx, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.sy, 2.0, epsilon = 1e-12);

        let stretched = m
            .map(|_, p| Point::new(c.x + 1.5 * (p.x - c.x), c.y + 0.8 * (p.y - c.y)))
            .unwrap();
        let s = compute_scale(&stretched, &m).unwrap();
        assert_abs_diff_eq!(s.sx, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.sy, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn zero_extent_box_is_rejected() {
        let m = mean_face();
        let flat_line = m.map(|_, p| Point::new(p.x, 10.0)).unwrap();
        assert!(compute_scale(&flat_line, &m).is_err());
        assert!(ScaleFactor::new(0.0, 1.0).is_err());
    }

    #[test]
    fn retarget_on_mean_face_is_additive() {
        let m = mean_face();
        assert!(max_abs_diff(&retarget(&CanonicalDisplacement::zeros(), ScaleFactor::IDENTITY, &m, &m).unwrap(), &m) < 1e-12);

        let mut delta = CanonicalDisplacement::zeros();
        for i in 0..NUM_LANDMARKS {
            delta.set(i, Point::new((i as f64).sin(), (i as f64 * 0.3).cos()));
        }
        let out = retarget(&delta, ScaleFactor::IDENTITY, &m, &m).unwrap();
        assert!(max_abs_diff(&out, &m.displaced(&delta)) < 1e-12);
    }

    #[test]
    fn neutral_frame_maps_to_zero() {
        let m = mean_face();
        let person = RigidTransform::from_angle(0.2, Point::new(4.0, 1.0)).apply_set(&m);
        let out = extract_canonical(std::slice::from_ref(&person), &person, &m).unwrap();
        assert_eq!(out, vec![CanonicalDisplacement::zeros()]);
    }

    #[test]
    fn mouth_only_motion_stays_in_mouth() {
        let m = mean_face();
        let c = m.centroid();
        let person = m
            .map(|_, p| c + RigidTransform::from_angle(-0.15, Point::zeros()).apply(Point::new(1.3 * (p.x - c.x), 1.1 * (p.y - c.y))))
            .unwrap();
        let open = person
            .map(|i, p| if (55..60).contains(&i) || (65..68).contains(&i) { p + Point::new(0.0, 4.0) } else { p })
            .unwrap();
        let deltas = extract_canonical(&[open], &person, &m).unwrap();
        for (i, d) in deltas[0].deltas().iter().enumerate() {
            if crate::landmarks::is_mouth(i) {
                continue;
            }
            assert!(d.norm() < 1e-6, "landmark {i} moved by {d:?}");
        }
        assert!(deltas[0].delta(57).norm() > 1.0);
    }
}
