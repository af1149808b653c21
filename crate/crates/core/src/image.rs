//! Planar float images in `[0, 1]`.

use std::path::Path;

use crate::error::{Error, Result};

/// A 3-channel image stored channel-major (`C × H × W`).
#[derive(Clone, Debug, PartialEq)]
pub struct FaceImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FaceImage {
    pub const CHANNELS: usize = 3;

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, [0.0; 3])
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let plane = height * width;
        let mut data = Vec::with_capacity(3 * plane);
        for c in rgb {
            data.extend(std::iter::repeat_n(c, plane));
        }
        Self { height, width, data }
    }

    /// Takes ownership of `C × H × W` data.
    pub fn from_planar(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::ShapeMismatch {
                expected: format!("3x{height}x{width}"),
                got: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let plane = self.height * self.width;
        let i = y * self.width + x;
        [self.data[i], self.data[plane + i], self.data[2 * plane + i]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let plane = self.height * self.width;
        let i = y * self.width + x;
        for (c, v) in rgb.into_iter().enumerate() {
            self.data[c * plane + i] = v;
        }
    }

    pub fn same_size(&self, other: &FaceImage) -> Result<()> {
        if self.height == other.height && self.width == other.width {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.height, self.width),
                got: format!("{}x{}", other.height, other.width),
            })
        }
    }

    /// ITU-R BT.601 luma.
    pub fn to_gray(&self) -> GrayImage {
        let (r, g, b) = (self.channel(0), self.channel(1), self.channel(2));
        let data = r
            .iter()
            .zip(g)
            .zip(b)
            .map(|((r, g), b)| 0.299 * r + 0.587 * g + 0.114 * b)
            .collect();
        GrayImage {
            height: self.height,
            width: self.width,
            data,
        }
    }

    pub fn mean_abs_diff(&self, other: &FaceImage) -> Result<f64> {
        self.same_size(other)?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() as f64)
            .sum();
        Ok(sum / self.data.len() as f64)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = image::RgbImage::new(self.width as u32, self.height as u32);
        for (x, y, px) in buf.enumerate_pixels_mut() {
            let rgb = self.pixel(x as usize, y as usize);
            *px = image::Rgb(rgb.map(to_u8));
        }
        buf.save(path.as_ref())?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let rgb = image::open(path.as_ref())?.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let mut img = Self::zeros(h, w);
        for (x, y, px) in rgb.enumerate_pixels() {
            img.set_pixel(x as usize, y as usize, px.0.map(|v| v as f32 / 255.0));
        }
        Ok(img)
    }
}

/// A single-channel image.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: format!("{height}x{width}"),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Replicates the single channel into an RGB image.
    pub fn to_rgb(&self) -> FaceImage {
        let mut data = Vec::with_capacity(3 * self.data.len());
        for _ in 0..3 {
            data.extend_from_slice(&self.data);
        }
        FaceImage {
            height: self.height,
            width: self.width,
            data,
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = image::GrayImage::new(self.width as u32, self.height as u32);
        for (x, y, px) in buf.enumerate_pixels_mut() {
            *px = image::Luma([to_u8(self.get(x as usize, y as usize))]);
        }
        buf.save(path.as_ref())?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let luma = image::open(path.as_ref())?.to_luma8();
        let (w, h) = (luma.width() as usize, luma.height() as usize);
        let data = luma.pixels().map(|p| p.0[0] as f32 / 255.0).collect();
        Ok(Self { height: h, width: w, data })
    }
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_quantizes_to_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = FaceImage::zeros(4, 5);
        img.set_pixel(2, 3, [1.0, 0.5, 0.25]);
        let path = dir.path().join("a.png");
        img.save_png(&path).unwrap();
        let back = FaceImage::load_png(&path).unwrap();
        assert_eq!(back.height(), 4);
        assert_eq!(back.width(), 5);
        assert!(img.mean_abs_diff(&back).unwrap() < 1.0 / 255.0);
    }

    #[test]
    fn size_mismatch_is_reported() {
        assert!(FaceImage::zeros(4, 4).same_size(&FaceImage::zeros(4, 5)).is_err());
        assert!(FaceImage::from_planar(2, 2, vec![0.0; 11]).is_err());
    }
}
