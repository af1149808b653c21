//! Landmark rasterization: white 1-pixel polylines on black.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::landmarks::{LandmarkSet, Point};

/// A polyline through landmark indices.
#[derive(Clone, Copy, Debug)]
pub struct Chain {
    pub first: usize,
    pub last: usize,
    pub closed: bool,
}

const fn open(first: usize, last: usize) -> Chain {
    Chain { first, last, closed: false }
}

const fn closed(first: usize, last: usize) -> Chain {
    Chain { first, last, closed: true }
}

/// Fixed connectivity of the 68-point face drawing.
pub const FACE_CHAINS: [Chain; 9] = [
    open(0, 16),
    open(17, 21),
    open(22, 26),
    open(27, 30),
    open(31, 35),
    closed(36, 41),
    closed(42, 47),
    closed(48, 59),
    closed(60, 67),
];

const MAX_COORDINATE: f64 = 1e6;

/// Rasterized landmarks; same resolution as the texture generator input.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkImage(GrayImage);

impl LandmarkImage {
    pub fn raster(&self) -> &GrayImage {
        &self.0
    }

    pub fn into_raster(self) -> GrayImage {
        self.0
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }
}

pub fn render_landmark_image(lm: &LandmarkSet, height: usize, width: usize) -> Result<LandmarkImage> {
    render_polylines(lm.points(), &FACE_CHAINS, height, width).map(LandmarkImage)
}

/// Draws each chain of `points` with Bresenham lines. Pixel `(x, y)` covers
/// the unit square centred on integer coordinates `(x, y)`.
pub fn render_polylines(points: &[Point], chains: &[Chain], height: usize, width: usize) -> Result<GrayImage> {
    if points
        .iter()
        .any(|p| !p.x.is_finite() || !p.y.is_finite())
    {
        return Err(Error::NonFinite("landmark coordinates"));
    }
    if points
        .iter()
        .any(|p| p.x.abs() > MAX_COORDINATE || p.y.abs() > MAX_COORDINATE)
    {
        return Err(Error::InvalidArgument("landmark coordinates far outside the frame".into()));
    }
    let mut img = GrayImage::zeros(height, width);
    let px = |p: &Point| (p.x.round() as i64, p.y.round() as i64);
    for chain in chains {
        if chain.last >= points.len() || chain.first > chain.last {
            return Err(Error::InvalidArgument(format!("bad chain {chain:?}")));
        }
        for i in chain.first..chain.last {
            draw_line(&mut img, px(&points[i]), px(&points[i + 1]));
        }
        if chain.closed && chain.last > chain.first {
            draw_line(&mut img, px(&points[chain.last]), px(&points[chain.first]));
        }
    }
    Ok(img)
}

fn draw_line(img: &mut GrayImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64)) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    if (x0 < 0 && x1 < 0) || (y0 < 0 && y1 < 0) || (x0 >= w && x1 >= w) || (y0 >= h && y1 >= h) {
        return;
    }
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            img.set(x as usize, y as usize, 1.0);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::mean_face;

    #[test]
    fn rendering_is_pure() {
        let m = mean_face();
        let a = render_landmark_image(&m, 128, 128).unwrap();
        let b = render_landmark_image(&m, 128, 128).unwrap();
        assert_eq!(a, b);
        assert!(a.raster().data().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(a.raster().data().iter().any(|&v| v == 1.0));
    }

    #[test]
    fn landmarks_outside_frame_draw_nothing() {
        let far = mean_face().translate(Point::new(-500.0, -500.0));
        let img = render_landmark_image(&far, 128, 128).unwrap();
        assert!(img.raster().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_finite_is_rejected() {
        let pts = [Point::new(f64::NAN, 0.0), Point::new(1.0, 1.0)];
        assert!(render_polylines(&pts, &[open(0, 1)], 8, 8).is_err());
    }

    /// Independent line oracle: step along the major axis and round the
    /// minor coordinate. Agrees with Bresenham whenever no minor coordinate
    /// falls exactly on a half pixel.
    fn dda_pixels(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let steps = dx.abs().max(dy.abs());
        (0..=steps)
            .map(|k| {
                let t = if steps == 0 { 0.0 } else { k as f64 / steps as f64 };
                (
                    (a.0 as f64 + t * dx as f64).round() as i64,
                    (a.1 as f64 + t * dy as f64).round() as i64,
                )
            })
            .collect()
    }

    #[test]
    fn three_point_stub_matches_line_oracle() {
        let stub = [Point::new(2.0, 3.0), Point::new(14.0, 7.0), Point::new(4.0, 13.0)];
        let img = render_polylines(&stub, &[closed(0, 2)], 16, 16).unwrap();

        let mut expected = GrayImage::zeros(16, 16);
        let q: Vec<(i64, i64)> = stub.iter().map(|p| (p.x as i64, p.y as i64)).collect();
        for (a, b) in [(q[0], q[1]), (q[1], q[2]), (q[2], q[0])] {
            for (x, y) in dda_pixels(a, b) {
                expected.set(x as usize, y as usize, 1.0);
            }
        }
        assert_eq!(img, expected);
    }
}
