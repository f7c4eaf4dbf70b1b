//! Linear-RGB image buffer. sRGB conversion happens only at PNG I/O.

use nalgebra::Vector3;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major linear RGB.
    pub pixels: Vec<Vector3<f64>>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![Vector3::zeros(); width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Vector3<f64> {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Vector3<f64>) {
        self.pixels[y * self.width + x] = c;
    }

    /// Mean absolute per-channel difference to another image of equal size.
    pub fn mean_abs_diff(&self, other: &Image) -> f64 {
        assert_eq!(self.pixels.len(), other.pixels.len());
        if self.pixels.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b).abs().sum())
            .sum();
        total / (self.pixels.len() * 3) as f64
    }

    /// Maximum absolute per-channel difference to another image.
    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        assert_eq!(self.pixels.len(), other.pixels.len());
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b).abs().max())
            .fold(0.0, f64::max)
    }
}
