//! 68-point facial landmark sets and per-frame displacements.
//!
//! Index layout follows the common 68-point annotation scheme: jaw 0-16,
//! eyebrows 17-26, nose 27-35, eyes 36-47 and mouth 48-67.

use std::ops::Range;

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub const NUM_LANDMARKS: usize = 68;

pub const JAW: Range<usize> = 0..17;
pub const LEFT_BROW: Range<usize> = 17..22;
pub const RIGHT_BROW: Range<usize> = 22..27;
pub const NOSE_BRIDGE: Range<usize> = 27..31;
pub const NOSE_BASE: Range<usize> = 31..36;
pub const LEFT_EYE: Range<usize> = 36..42;
pub const RIGHT_EYE: Range<usize> = 42..48;
pub const OUTER_LIP: Range<usize> = 48..60;
pub const INNER_LIP: Range<usize> = 60..68;
pub const MOUTH: Range<usize> = 48..68;
pub const NOSE_TIP: usize = 30;

/// Number of landmarks in the eye region (both eyebrows and both eyes).
pub const EYE_REGION_LEN: usize = 22;

/// Eye-region landmark indices in blink-sequence column order: eyebrows
/// 17-26 followed by eyes 36-47.
pub const EYE_REGION: [usize; EYE_REGION_LEN] = [
    17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 36, 37, 38, 39, 40, 41, 42, 43, 44, 45, 46, 47,
];

pub fn is_eye_region(index: usize) -> bool {
    (17..27).contains(&index) || (36..48).contains(&index)
}

pub fn is_mouth(index: usize) -> bool {
    MOUTH.contains(&index)
}

pub type Point = Vector2<f64>;

fn check_finite(points: &[Point; NUM_LANDMARKS], what: &'static str) -> Result<()> {
    if points.iter().all(|p| p.x.is_finite() && p.y.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn points_from_flat(flat: &[f64], what: &'static str) -> Result<[Point; NUM_LANDMARKS]> {
    if flat.len() != 2 * NUM_LANDMARKS {
        return Err(Error::ShapeMismatch {
            expected: format!("{} values", 2 * NUM_LANDMARKS),
            got: format!("{} values", flat.len()),
        });
    }
    let mut points = [Point::zeros(); NUM_LANDMARKS];
    for (p, xy) in points.iter_mut().zip(flat.chunks_exact(2)) {
        *p = Point::new(xy[0], xy[1]);
    }
    check_finite(&points, what)?;
    Ok(points)
}

fn points_to_flat(points: &[Point; NUM_LANDMARKS]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y]).collect()
}

/// 68 landmark positions in image pixel coordinates (x right, y down).
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkSet {
    points: [Point; NUM_LANDMARKS],
}

impl LandmarkSet {
    pub fn new(points: [Point; NUM_LANDMARKS]) -> Result<Self> {
        check_finite(&points, "landmark set")?;
        Ok(Self { points })
    }

    /// Builds a set from interleaved `x0, y0, x1, y1, ...` values.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        Ok(Self {
            points: points_from_flat(flat, "landmark set")?,
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        points_to_flat(&self.points)
    }

    pub fn points(&self) -> &[Point; NUM_LANDMARKS] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Point {
        self.points[index]
    }

    pub fn centroid(&self) -> Point {
        self.points.iter().sum::<Point>() / NUM_LANDMARKS as f64
    }

    /// Axis-aligned bounding box over all 68 points as `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::repeat(f64::INFINITY);
        let mut hi = Point::repeat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    pub fn map(&self, f: impl Fn(usize, Point) -> Point) -> Result<Self> {
        let mut points = self.points;
        for (i, p) in points.iter_mut().enumerate() {
            *p = f(i, *p);
        }
        Self::new(points)
    }

    pub fn translate(&self, offset: Point) -> Self {
        let mut points = self.points;
        for p in &mut points {
            *p += offset;
        }
        Self { points }
    }

    /// Adds a displacement to every landmark.
    pub fn displaced(&self, delta: &CanonicalDisplacement) -> Self {
        let mut points = self.points;
        for (p, d) in points.iter_mut().zip(delta.deltas()) {
            *p += d;
        }
        Self { points }
    }

    /// Per-landmark difference `self - base`.
    pub fn displacement_from(&self, base: &LandmarkSet) -> CanonicalDisplacement {
        let mut deltas = [Point::zeros(); NUM_LANDMARKS];
        for (d, (a, b)) in deltas.iter_mut().zip(self.points.iter().zip(&base.points)) {
            *d = a - b;
        }
        CanonicalDisplacement { deltas }
    }

    /// The 22 eye-region points in [`EYE_REGION`] order.
    pub fn eye_region(&self) -> [Point; EYE_REGION_LEN] {
        EYE_REGION.map(|i| self.points[i])
    }

    /// Mean vertical gap between paired upper and lower inner-lip points.
    pub fn inner_lip_gap(&self) -> f64 {
        let pairs = [(61, 67), (62, 66), (63, 65)];
        pairs
            .iter()
            .map(|&(u, l)| (self.points[l].y - self.points[u].y).abs())
            .sum::<f64>()
            / pairs.len() as f64
    }
}

/// Per-landmark `(dx, dy)` offsets, in mean-face pixel units when canonical.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalDisplacement {
    deltas: [Point; NUM_LANDMARKS],
}

impl Default for CanonicalDisplacement {
    fn default() -> Self {
        Self::zeros()
    }
}

impl CanonicalDisplacement {
    pub fn zeros() -> Self {
        Self {
            deltas: [Point::zeros(); NUM_LANDMARKS],
        }
    }

    pub fn new(deltas: [Point; NUM_LANDMARKS]) -> Result<Self> {
        check_finite(&deltas, "displacement")?;
        Ok(Self { deltas })
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        Ok(Self {
            deltas: points_from_flat(flat, "displacement")?,
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        points_to_flat(&self.deltas)
    }

    pub fn deltas(&self) -> &[Point; NUM_LANDMARKS] {
        &self.deltas
    }

    pub fn delta(&self, index: usize) -> Point {
        self.deltas[index]
    }

    pub fn set(&mut self, index: usize, value: Point) {
        self.deltas[index] = value;
    }

    pub fn add(&self, other: &CanonicalDisplacement) -> Self {
        let mut deltas = self.deltas;
        for (d, o) in deltas.iter_mut().zip(&other.deltas) {
            *d += o;
        }
        Self { deltas }
    }

    pub fn squared_norm(&self) -> f64 {
        self.deltas.iter().map(|d| d.norm_squared()).sum()
    }
}
