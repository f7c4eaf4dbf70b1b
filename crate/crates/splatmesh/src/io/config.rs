//! Scene configuration JSON: asset references with placements, background,
//! and render settings overrides.

use std::path::Path;

use nalgebra::Vector3;
use serde::Deserialize;

use super::IoError;
use crate::scene::{BlendMode, Placement, RenderSettings, Scene};

#[derive(Deserialize)]
struct ConfigFile {
    #[serde(default)]
    objects: Vec<ObjectEntry>,
    background: Option<BackgroundEntry>,
    render: Option<RenderEntry>,
}

#[derive(Deserialize)]
struct ObjectEntry {
    #[serde(rename = "type")]
    kind: String,
    path: String,
    translation: Option<[f64; 3]>,
    rotation_quat: Option<[f64; 4]>,
    scale: Option<f64>,
    color: Option<[f64; 3]>,
    opacity: Option<f64>,
}

#[derive(Deserialize)]
struct BackgroundEntry {
    color: Option<[f64; 3]>,
    opacity: Option<f64>,
}

#[derive(Deserialize)]
struct RenderEntry {
    msaa: Option<usize>,
    mode: Option<String>,
    width: Option<u32>,
    height: Option<u32>,
    alpha_cutoff: Option<f64>,
    termination_threshold: Option<f64>,
    gaussian_dilation: Option<f64>,
}

/// A parsed scene config: the scene, the render settings, and the image
/// size when the config specifies one.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub scene: Scene,
    pub settings: RenderSettings,
    pub image_size: Option<(u32, u32)>,
}

/// Load a scene config JSON, loading every referenced asset. Relative
/// asset paths resolve against the config file's directory.
pub fn load_scene_config(path: impl AsRef<Path>) -> Result<SceneConfig, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| IoError::read(path, e))?;
    let parsed: ConfigFile = serde_json::from_str(&text)
        .map_err(|e| IoError::invalid(path, format!("invalid scene config: {e}")))?;
    let base_dir = path.parent().unwrap_or(Path::new("."));

    let mut scene = Scene::empty();
    for (i, obj) in parsed.objects.iter().enumerate() {
        let asset_path = base_dir.join(&obj.path);
        if !asset_path.exists() {
            return Err(IoError::invalid(
                path,
                format!("objects[{i}]: asset not found: {}", asset_path.display()),
            ));
        }
        let rotation = match obj.rotation_quat {
            Some(q) => crate::math::quat_normalize(&q).ok_or_else(|| {
                IoError::invalid(path, format!("objects[{i}]: zero rotation quaternion"))
            })?,
            None => [1.0, 0.0, 0.0, 0.0],
        };
        let placement = Placement {
            translation: obj.translation.map_or(Vector3::zeros(), Vector3::from),
            rotation,
            scale: obj.scale.unwrap_or(1.0),
        };
        match obj.kind.as_str() {
            "splat" => {
                let set = super::load_splat_ply(&asset_path)?;
                scene.splat_objects.push((set, placement));
            }
            "mesh" => {
                let color = obj.color.map_or(Vector3::new(0.7, 0.7, 0.7), Vector3::from);
                let opacity = obj.opacity.unwrap_or(1.0);
                let mesh = super::load_obj(&asset_path, color, opacity)?;
                scene.mesh_objects.push((mesh, placement));
            }
            other => {
                return Err(IoError::invalid(
                    path,
                    format!("objects[{i}]: unknown object type '{other}'"),
                ));
            }
        }
    }

    if let Some(bg) = &parsed.background {
        scene.background_color = bg.color.map_or(Vector3::zeros(), Vector3::from);
        scene.background_opacity = bg.opacity.unwrap_or(1.0);
    }

    let mut settings = RenderSettings::default();
    let mut image_size = None;
    if let Some(render) = &parsed.render {
        if let Some(m) = render.msaa {
            settings.msaa_samples = m;
        }
        if let Some(mode) = &render.mode {
            settings.blend_mode = mode
                .parse::<BlendMode>()
                .map_err(|e| IoError::invalid(path, e))?;
        }
        if let Some(v) = render.alpha_cutoff {
            settings.alpha_cutoff = v;
        }
        if let Some(v) = render.termination_threshold {
            settings.termination_threshold = v;
        }
        if let Some(v) = render.gaussian_dilation {
            settings.gaussian_dilation = v;
        }
        if let (Some(w), Some(h)) = (render.width, render.height) {
            image_size = Some((w, h));
        }
    }

    Ok(SceneConfig {
        scene,
        settings,
        image_size,
    })
}
