//! NeRF-style `transforms.json` camera loading. Frames carry
//! camera-to-world matrices in the OpenGL convention (-z forward); they are
//! converted to +z-forward world-to-camera transforms at load.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;

use super::IoError;
use crate::scene::Camera;

const DEFAULT_SIZE: u32 = 800;
const DEFAULT_NEAR: f64 = 0.01;
const DEFAULT_FAR: f64 = 1e4;

#[derive(Deserialize)]
struct TransformsFile {
    camera_angle_x: Option<f64>,
    fl_x: Option<f64>,
    fl_y: Option<f64>,
    cx: Option<f64>,
    cy: Option<f64>,
    w: Option<u32>,
    h: Option<u32>,
    near: Option<f64>,
    far: Option<f64>,
    frames: Vec<FrameEntry>,
}

#[derive(Deserialize)]
struct FrameEntry {
    transform_matrix: [[f64; 4]; 4],
    fl_x: Option<f64>,
    fl_y: Option<f64>,
    cx: Option<f64>,
    cy: Option<f64>,
    w: Option<u32>,
    h: Option<u32>,
    camera_angle_x: Option<f64>,
}

/// Load all cameras from a NeRF-style JSON file. Intrinsics come from
/// per-frame `fl_x`/`fl_y`/`cx`/`cy` when present, else from
/// `camera_angle_x` (fx = w / (2 tan(angle/2))); `fl_y` falls back to
/// `fl_x` (square pixels) and the principal point to the image center.
pub fn load_cameras_json(path: impl AsRef<Path>) -> Result<Vec<Camera>, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| IoError::read(path, e))?;
    let parsed: TransformsFile = serde_json::from_str(&text)
        .map_err(|e| IoError::invalid(path, format!("invalid camera JSON: {e}")))?;

    let mut cameras = Vec::with_capacity(parsed.frames.len());
    for (fi, frame) in parsed.frames.iter().enumerate() {
        let frame_err = |detail: String| IoError::BadCameraFrame {
            path: path.to_path_buf(),
            frame: fi,
            detail,
        };

        let width = frame.w.or(parsed.w).unwrap_or(DEFAULT_SIZE);
        let height = frame.h.or(parsed.h).unwrap_or(DEFAULT_SIZE);
        let angle_x = frame.camera_angle_x.or(parsed.camera_angle_x);
        let fx = frame
            .fl_x
            .or(parsed.fl_x)
            .or_else(|| angle_x.map(|a| width as f64 / (2.0 * (a / 2.0).tan())))
            .ok_or_else(|| frame_err("no fl_x and no camera_angle_x".to_string()))?;
        let fy = frame.fl_y.or(parsed.fl_y).unwrap_or(fx);
        let cx = frame.cx.or(parsed.cx).unwrap_or(width as f64 / 2.0);
        let cy = frame.cy.or(parsed.cy).unwrap_or(height as f64 / 2.0);

        let m = &frame.transform_matrix;
        let bottom_ok = m[3][0].abs() < 1e-9
            && m[3][1].abs() < 1e-9
            && m[3][2].abs() < 1e-9
            && (m[3][3] - 1.0).abs() < 1e-9;
        if !bottom_ok {
            return Err(frame_err("transform_matrix is not affine".to_string()));
        }

        // OpenGL camera-to-world: flip the y and z camera axes to get a
        // +z-forward frame, then invert the rigid transform.
        let r_gl = Matrix3::new(
            m[0][0], m[0][1], m[0][2], //
            m[1][0], m[1][1], m[1][2], //
            m[2][0], m[2][1], m[2][2],
        );
        let flip = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        let r_c2w = r_gl * flip;
        let t_c2w = Vector3::new(m[0][3], m[1][3], m[2][3]);
        let rotation = r_c2w.transpose();
        let translation = -(rotation * t_c2w);

        let camera = Camera::new(
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
            parsed.near.unwrap_or(DEFAULT_NEAR),
            parsed.far.unwrap_or(DEFAULT_FAR),
        )
        .map_err(|e| frame_err(e.to_string()))?;
        cameras.push(camera);
    }
    Ok(cameras)
}
