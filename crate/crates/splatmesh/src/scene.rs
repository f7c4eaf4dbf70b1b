//! Domain types shared by all modules: splat sets, meshes, cameras, scenes,
//! and render settings, plus scene validation.
//!
//! Conventions: right-handed world space, camera looks down +z in camera
//! space (COLMAP/OpenCV style). Scales are linear standard deviations,
//! opacities post-sigmoid; file loaders perform the activations.

use nalgebra::{Matrix3, Vector3};

use crate::math::{quat_norm_sq, quat_to_matrix};

/// A set of 3D Gaussians: the renderable and deformable splat asset.
///
/// All arrays have one entry per Gaussian. Rotations are unit quaternions
/// stored `[w, x, y, z]`; scales are per-axis standard deviations in scene
/// units; `sh_coeffs` is laid out `[gaussian][channel][coeff]` with
/// `(sh_degree + 1)^2` coefficients per channel, coefficient 0 being the DC
/// term.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatSet {
    pub positions: Vec<Vector3<f64>>,
    pub rotations: Vec<[f64; 4]>,
    pub scales: Vec<Vector3<f64>>,
    pub opacities: Vec<f64>,
    pub sh_degree: usize,
    pub sh_coeffs: Vec<f64>,
}

impl SplatSet {
    /// Number of SH coefficients per channel for a degree.
    pub fn coeffs_per_channel(sh_degree: usize) -> usize {
        (sh_degree + 1) * (sh_degree + 1)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// All `3 * (sh_degree+1)^2` SH coefficients of one Gaussian.
    pub fn sh(&self, i: usize) -> &[f64] {
        let n = 3 * Self::coeffs_per_channel(self.sh_degree);
        &self.sh_coeffs[i * n..(i + 1) * n]
    }

    /// An empty set of the given SH degree.
    pub fn empty(sh_degree: usize) -> Self {
        Self {
            positions: Vec::new(),
            rotations: Vec::new(),
            scales: Vec::new(),
            opacities: Vec::new(),
            sh_degree,
            sh_coeffs: Vec::new(),
        }
    }
}

/// Indexed triangle mesh with optional per-vertex colors and a mesh-level
/// opacity. Serves both as a render object and as a deformation proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[u32; 3]>,
    pub vertex_colors: Option<Vec<Vector3<f64>>>,
    pub base_color: Vector3<f64>,
    pub mesh_opacity: f64,
}

impl TriMesh {
    pub fn face_vertices(&self, f: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Color at a vertex: per-vertex color when present, else the base color.
    pub fn vertex_color(&self, v: usize) -> Vector3<f64> {
        match &self.vertex_colors {
            Some(c) => c[v],
            None => self.base_color,
        }
    }

    /// Mean length over the unique undirected edges.
    pub fn mean_edge_length(&self) -> f64 {
        let mut edges = std::collections::BTreeSet::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        if edges.is_empty() {
            return 0.0;
        }
        let total: f64 = edges
            .iter()
            .map(|&(a, b)| (self.vertices[a as usize] - self.vertices[b as usize]).norm())
            .sum();
        total / edges.len() as f64
    }

    /// SHA-256 over the vertex and face data, hex-encoded. Used to detect
    /// stale binding tables and mismatched rest meshes.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.vertices.len() as u64).to_le_bytes());
        for v in &self.vertices {
            for c in [v.x, v.y, v.z] {
                h.update(c.to_le_bytes());
            }
        }
        h.update((self.faces.len() as u64).to_le_bytes());
        for f in &self.faces {
            for i in f {
                h.update(i.to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Pinhole camera with a rigid world-to-camera transform. Camera space is
/// +z forward, x right, y down; pixel (i, j) has its center at
/// (i + 0.5, j + 0.5).
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Rotation part of world-to-camera.
    pub rotation: Matrix3<f64>,
    /// Translation part of world-to-camera.
    pub translation: Vector3<f64>,
    pub near: f64,
    pub far: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CameraError {
    #[error("world_to_camera rotation is not orthonormal with det +1 (deviation {0:.3e})")]
    NotRigid(f64),
    #[error("invalid depth range: near {near}, far {far}")]
    BadDepthRange { near: f64, far: f64 },
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        width: u32,
        height: u32,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        near: f64,
        far: f64,
    ) -> Result<Self, CameraError> {
        let dev = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        let det_dev = (rotation.determinant() - 1.0).abs();
        if dev > 1e-5 || det_dev > 1e-5 {
            return Err(CameraError::NotRigid(dev.max(det_dev)));
        }
        if !(near > 0.0 && near < far) {
            return Err(CameraError::BadDepthRange { near, far });
        }
        Ok(Self {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
            near,
            far,
        })
    }

    /// Camera at `eye` looking toward `target`, square pixels with focal
    /// length `focal` px. `up` is the world up direction.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        width: u32,
        height: u32,
        focal: f64,
    ) -> Self {
        let fwd = (target - eye).normalize();
        let right = fwd.cross(&up).normalize();
        let down = fwd.cross(&right).normalize();
        // Rows of world-to-camera: x right, y down, z forward.
        let rotation = Matrix3::from_rows(&[
            right.transpose(),
            down.transpose(),
            fwd.transpose(),
        ]);
        let translation = -rotation * eye;
        Self::new(
            width,
            height,
            focal,
            focal,
            width as f64 / 2.0,
            height as f64 / 2.0,
            rotation,
            translation,
            0.01,
            1e4,
        )
        .expect("look_at builds a rigid transform")
    }

    /// World point to camera space.
    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Camera center in world space.
    pub fn position(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Pinhole projection of a camera-space point (z > 0) to pixel coords.
    pub fn project(&self, p_cam: &Vector3<f64>) -> (f64, f64) {
        (
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
        )
    }
}

/// Rigid placement with optional uniform scale, applied to an asset when it
/// is instanced into a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub translation: Vector3<f64>,
    /// Unit quaternion `[w, x, y, z]`.
    pub rotation: [f64; 4],
    pub scale: f64,
}

impl Placement {
    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: [1.0, 0.0, 0.0, 0.0],
            scale: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.translation == Vector3::zeros()
            && self.rotation == [1.0, 0.0, 0.0, 0.0]
            && self.scale == 1.0
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        quat_to_matrix(&self.rotation)
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * (p * self.scale) + self.translation
    }

    /// Bake this placement into a splat set. SH coefficients are copied
    /// unchanged; they stay expressed in world axes.
    pub fn apply_to_splats(&self, set: &SplatSet) -> SplatSet {
        if self.is_identity() {
            return set.clone();
        }
        let r = self.rotation_matrix();
        SplatSet {
            positions: set
                .positions
                .iter()
                .map(|p| r * (p * self.scale) + self.translation)
                .collect(),
            rotations: set
                .rotations
                .iter()
                .map(|q| crate::math::quat_mul(&self.rotation, q))
                .collect(),
            scales: set.scales.iter().map(|s| s * self.scale).collect(),
            opacities: set.opacities.clone(),
            sh_degree: set.sh_degree,
            sh_coeffs: set.sh_coeffs.clone(),
        }
    }

    /// Bake this placement into a mesh.
    pub fn apply_to_mesh(&self, mesh: &TriMesh) -> TriMesh {
        if self.is_identity() {
            return mesh.clone();
        }
        let r = self.rotation_matrix();
        TriMesh {
            vertices: mesh
                .vertices
                .iter()
                .map(|v| r * (v * self.scale) + self.translation)
                .collect(),
            ..mesh.clone()
        }
    }
}

/// A renderable scene: placed splat sets and meshes plus a background.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub splat_objects: Vec<(SplatSet, Placement)>,
    pub mesh_objects: Vec<(TriMesh, Placement)>,
    pub background_color: Vector3<f64>,
    pub background_opacity: f64,
}

impl Scene {
    pub fn empty() -> Self {
        Self {
            splat_objects: Vec::new(),
            mesh_objects: Vec::new(),
            background_color: Vector3::zeros(),
            background_opacity: 1.0,
        }
    }
}

/// How triangle fragments are blended with Gaussians; see `raster::blend_pixel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlendMode {
    /// Triangles as full-coverage pixel fragments, no sub-pixel state.
    Naive,
    /// One entity spans the whole fragment list (reproduces color overflow).
    WholePixelEntity,
    /// Depth-adjacent entities with per-fragment pixel-level transmittance
    /// updates from geometric coverage.
    PaperLiteral,
    /// Depth-adjacent entities with the exact sub-pixel exit transmittance.
    ExactEntity,
}

impl BlendMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlendMode::Naive => "naive",
            BlendMode::WholePixelEntity => "whole_pixel_entity",
            BlendMode::PaperLiteral => "paper_literal",
            BlendMode::ExactEntity => "exact_entity",
        }
    }
}

impl std::str::FromStr for BlendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(BlendMode::Naive),
            "whole_pixel_entity" => Ok(BlendMode::WholePixelEntity),
            "paper_literal" => Ok(BlendMode::PaperLiteral),
            "exact_entity" => Ok(BlendMode::ExactEntity),
            other => Err(format!(
                "unknown blend mode '{other}' (expected naive, whole_pixel_entity, \
                 paper_literal, or exact_entity)"
            )),
        }
    }
}

impl std::fmt::Display for BlendMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rasterizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderSettings {
    /// MSAA sample count M per pixel.
    pub msaa_samples: usize,
    pub blend_mode: BlendMode,
    /// Fragments with alpha below this are dropped.
    pub alpha_cutoff: f64,
    /// Stop blending once pixel transmittance falls below this.
    pub termination_threshold: f64,
    /// Added to the 2D covariance diagonal (EWA dilation), in px^2.
    pub gaussian_dilation: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            msaa_samples: 4,
            blend_mode: BlendMode::ExactEntity,
            alpha_cutoff: 1.0 / 255.0,
            termination_threshold: 1e-4,
            gaussian_dilation: 0.3,
        }
    }
}

/// One validation finding: which object, which field, what is wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub object: String,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}: {}", self.object, self.field, self.message)
    }
}

/// Check every type invariant in the scene. Returns an empty list iff the
/// scene is valid; diagnostics are data, not errors.
pub fn validate_scene(scene: &Scene) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |object: String, field: &str, message: String| {
        out.push(Diagnostic {
            object,
            field: field.to_string(),
            message,
        });
    };

    for (si, (set, placement)) in scene.splat_objects.iter().enumerate() {
        let name = format!("splat[{si}]");
        let n = set.len();
        for (field, len) in [
            ("rotations", set.rotations.len()),
            ("scales", set.scales.len()),
            ("opacities", set.opacities.len()),
        ] {
            if len != n {
                push(name.clone(), field, format!("length {len} != count {n}"));
            }
        }
        let expected_sh = n * 3 * SplatSet::coeffs_per_channel(set.sh_degree);
        if set.sh_coeffs.len() != expected_sh {
            push(
                name.clone(),
                "sh_coeffs",
                format!("length {} != {expected_sh}", set.sh_coeffs.len()),
            );
        }
        if set.sh_degree > 3 {
            push(
                name.clone(),
                "sh_degree",
                format!("degree {} outside [0, 3]", set.sh_degree),
            );
        }
        for (i, q) in set.rotations.iter().enumerate() {
            if (quat_norm_sq(q).sqrt() - 1.0).abs() > 1e-4 {
                push(
                    name.clone(),
                    "rotations",
                    format!("quaternion {i} not unit norm within 1e-4"),
                );
            }
        }
        for (i, s) in set.scales.iter().enumerate() {
            if !(s.x > 0.0 && s.y > 0.0 && s.z > 0.0) {
                push(name.clone(), "scales", format!("scale {i} non-positive"));
            }
        }
        for (i, &o) in set.opacities.iter().enumerate() {
            if !(0.0..=1.0).contains(&o) {
                push(
                    name.clone(),
                    "opacities",
                    format!("opacity {i} = {o} outside [0, 1]"),
                );
            }
        }
        if !(placement.scale > 0.0) {
            push(name.clone(), "placement", "scale non-positive".to_string());
        }
    }

    for (mi, (mesh, placement)) in scene.mesh_objects.iter().enumerate() {
        let name = format!("mesh[{mi}]");
        let v = mesh.vertices.len() as u32;
        for (i, f) in mesh.faces.iter().enumerate() {
            if f.iter().any(|&idx| idx >= v) {
                push(
                    name.clone(),
                    "faces",
                    format!("face {i} index out of range (V = {v})"),
                );
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                push(name.clone(), "faces", format!("degenerate face {i}"));
            }
        }
        if let Some(colors) = &mesh.vertex_colors {
            if colors.len() != mesh.vertices.len() {
                push(
                    name.clone(),
                    "vertex_colors",
                    format!("length {} != V {}", colors.len(), mesh.vertices.len()),
                );
            }
        }
        if !(mesh.mesh_opacity > 0.0 && mesh.mesh_opacity <= 1.0) {
            push(
                name.clone(),
                "mesh_opacity",
                format!("{} outside (0, 1]", mesh.mesh_opacity),
            );
        }
        if !(placement.scale > 0.0) {
            push(name.clone(), "placement", "scale non-positive".to_string());
        }
    }

    if !(0.0..=1.0).contains(&scene.background_opacity) {
        push(
            "scene".to_string(),
            "background_opacity",
            format!("{} outside [0, 1]", scene.background_opacity),
        );
    }

    out
}
