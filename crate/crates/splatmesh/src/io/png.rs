//! PNG I/O: 8-bit sRGB on disk, linear RGB in memory. Blending math runs
//! in linear space; the transfer function is applied only here.

use std::path::Path;

use nalgebra::Vector3;

use super::IoError;
use crate::img::Image;

pub fn linear_to_srgb(linear: f64) -> f64 {
    let l = linear.clamp(0.0, 1.0);
    if l <= 0.0031308 {
        l * 12.92
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_to_linear(srgb: f64) -> f64 {
    if srgb <= 0.04045 {
        srgb / 12.92
    } else {
        ((srgb + 0.055) / 1.055).powf(2.4)
    }
}

/// Write a linear-RGB image as 8-bit sRGB PNG.
pub fn write_png(image: &Image, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut buf = image::RgbImage::new(image.width as u32, image.height as u32);
    for y in 0..image.height {
        for x in 0..image.width {
            let c = image.get(x, y);
            let px = [
                (linear_to_srgb(c.x) * 255.0).round() as u8,
                (linear_to_srgb(c.y) * 255.0).round() as u8,
                (linear_to_srgb(c.z) * 255.0).round() as u8,
            ];
            buf.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    buf.save(path)
        .map_err(|e| IoError::invalid(path, format!("png encode failed: {e}")))
}

/// Load a PNG back into linear RGB (inverse of [`write_png`] up to 8-bit
/// quantization).
pub fn load_png(path: impl AsRef<Path>) -> Result<Image, IoError> {
    let path = path.as_ref();
    let decoded = image::open(path)
        .map_err(|e| IoError::invalid(path, format!("png decode failed: {e}")))?
        .to_rgb8();
    let (w, h) = decoded.dimensions();
    let mut out = Image::new(w as usize, h as usize);
    for y in 0..h {
        for x in 0..w {
            let p = decoded.get_pixel(x, y);
            out.set(
                x as usize,
                y as usize,
                Vector3::new(
                    srgb_to_linear(p[0] as f64 / 255.0),
                    srgb_to_linear(p[1] as f64 / 255.0),
                    srgb_to_linear(p[2] as f64 / 255.0),
                ),
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn srgb_transfer_round_trips() {
        for v in [0.0, 0.001, 0.0031308, 0.1, 0.5, 0.73, 1.0] {
            let s = linear_to_srgb(v);
            assert!((srgb_to_linear(s) - v).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn png_round_trip_within_quantization() {
        let mut img = Image::new(8, 4);
        for y in 0..4 {
            for x in 0..8 {
                img.set(
                    x,
                    y,
                    Vector3::new(
                        x as f64 / 7.0,
                        y as f64 / 3.0,
                        ((x + y) % 2) as f64 * 0.8,
                    ),
                );
            }
        }
        let path = std::env::temp_dir().join(format!("sm_png_{}.png", std::process::id()));
        write_png(&img, &path).unwrap();
        let back = load_png(&path).unwrap();
        let _ = std::fs::remove_file(&path);
        assert_eq!(back.width, 8);
        assert_eq!(back.height, 4);
        // 8-bit sRGB quantization: worst-case linear error stays below the
        // sRGB step slope bound.
        assert!(img.max_abs_diff(&back) < 5e-3);
    }
}
