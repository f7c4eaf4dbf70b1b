//! On-disk formats: splat PLY, OBJ meshes, NeRF-style camera JSON, scene
//! config JSON, binding tables, and PNG images.

mod binding_file;
mod cameras;
mod config;
mod obj;
mod ply;
mod png;

pub use binding_file::{load_binding, save_binding, BINDING_MAGIC};
pub use cameras::load_cameras_json;
pub use config::{load_scene_config, SceneConfig};
pub use obj::{load_obj, parse_obj, ObjStats};
pub use ply::{load_splat_ply, parse_splat_ply, save_splat_ply, serialize_splat_ply};
pub use png::{linear_to_srgb, load_png, srgb_to_linear, write_png};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error in {path} at byte {offset}: {detail}")]
    Parse {
        path: PathBuf,
        offset: usize,
        detail: String,
    },
    #[error("parse error in {path} on line {line}: {detail}")]
    ParseLine {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{path}: unsupported f_rest count {count} (expected 0, 9, 24, or 45)")]
    UnsupportedShDegree { path: PathBuf, count: usize },
    #[error("{path}: {detail}")]
    Invalid { path: PathBuf, detail: String },
    #[error("camera frame {frame} in {path}: {detail}")]
    BadCameraFrame {
        path: PathBuf,
        frame: usize,
        detail: String,
    },
}

impl IoError {
    pub(crate) fn read(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Read {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn write(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Write {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        IoError::Invalid {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
