//! Gaussian-centric binding: cast rays from training cameras toward
//! Gaussian centers (or BBX corners), intersect the proxy mesh, and keep
//! the hit closest to the Gaussian center.

mod bvh;

pub use bvh::{
    build_bvh, closest_point_on_triangle, intersect_triangle, nearest_point_on_mesh, ray_cast,
    Bvh, BvhError, BvhNode, RayHit, LEAF_SIZE, MT_DET_EPS, RAY_T_MIN,
};

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::math::quat_to_matrix;
use crate::scene::{Camera, SplatSet, TriMesh};

/// Single anchor per Gaussian (ray through the center) or eight (rays
/// through the corners of the 3-sigma oriented bounding box).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindMode {
    Center,
    Bbx8,
}

impl BindMode {
    pub fn anchors_per_gaussian(&self) -> usize {
        match self {
            BindMode::Center => 1,
            BindMode::Bbx8 => 8,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BindMode::Center => "center",
            BindMode::Bbx8 => "bbx8",
        }
    }
}

impl std::str::FromStr for BindMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "center" => Ok(BindMode::Center),
            "bbx8" => Ok(BindMode::Bbx8),
            other => Err(format!("unknown bind mode '{other}' (expected center or bbx8)")),
        }
    }
}

/// One Gaussian-to-face link. When no camera ray hit any face, `fallback`
/// is set and the anchor holds the globally nearest point on the mesh
/// instead of a ray intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub face: u32,
    /// Barycentric weights (u, v, w) of the face's vertices, summing to 1.
    pub bary: [f64; 3],
    /// Target offset from the Gaussian center in its local (scaled-axis)
    /// frame; zero in center mode.
    pub corner_offset: [f64; 3],
    pub fallback: bool,
}

/// Per-Gaussian anchors linking a splat set to a proxy mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BindingTable {
    pub mode: BindMode,
    pub gaussian_count: usize,
    /// Face count of the proxy mesh the table was built against.
    pub proxy_face_count: u32,
    /// Content hash of the proxy mesh, for staleness detection.
    pub mesh_hash: String,
    /// `gaussian_count * mode.anchors_per_gaussian()` records.
    pub anchors: Vec<Anchor>,
}

impl BindingTable {
    pub fn anchors_of(&self, gaussian: usize) -> &[Anchor] {
        let per = self.mode.anchors_per_gaussian();
        &self.anchors[gaussian * per..(gaussian + 1) * per]
    }

    pub fn fallback_count(&self) -> usize {
        self.anchors.iter().filter(|a| a.fallback).count()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BindError {
    #[error("binding requires at least one camera")]
    NoCameras,
    #[error(transparent)]
    Bvh(#[from] BvhError),
}

/// World-space corners of the k-sigma oriented bounding box of a Gaussian,
/// paired with their offsets in the local scaled-axis frame. Corner `i`
/// takes sign `+` on axis `a` iff bit `a` of `i` is set.
pub fn gaussian_corners(
    position: &Vector3<f64>,
    rotation: &[f64; 4],
    scale: &Vector3<f64>,
    k_sigma: f64,
) -> [(Vector3<f64>, Vector3<f64>); 8] {
    let r = quat_to_matrix(rotation);
    let mut out = [(Vector3::zeros(), Vector3::zeros()); 8];
    for (i, slot) in out.iter_mut().enumerate() {
        let sx = if i & 1 != 0 { 1.0 } else { -1.0 };
        let sy = if i & 2 != 0 { 1.0 } else { -1.0 };
        let sz = if i & 4 != 0 { 1.0 } else { -1.0 };
        let local = Vector3::new(
            sx * k_sigma * scale.x,
            sy * k_sigma * scale.y,
            sz * k_sigma * scale.z,
        );
        *slot = (position + r * local, local);
    }
    out
}

/// Shared anchor-selection rule: among candidate hits (across cameras),
/// keep the one whose hit point is closest to the Gaussian center; break
/// distance ties toward the lower face index.
pub(crate) fn better_candidate(
    best: &Option<(f64, u32, [f64; 3])>,
    dist: f64,
    face: u32,
) -> bool {
    match best {
        None => true,
        Some((bd, bf, _)) => dist < *bd || (dist == *bd && face < *bf),
    }
}

fn bind_target(
    bvh: &Bvh,
    mesh: &TriMesh,
    cameras: &[Camera],
    center: &Vector3<f64>,
    target: &Vector3<f64>,
    local_offset: &Vector3<f64>,
) -> Anchor {
    let mut best: Option<(f64, u32, [f64; 3])> = None;
    for cam in cameras {
        if cam.to_camera(target).z <= 0.0 {
            continue;
        }
        let origin = cam.position();
        let dir = target - origin;
        if dir.norm_squared() == 0.0 {
            continue;
        }
        if let Some(hit) = ray_cast(bvh, mesh, &origin, &dir) {
            let dist = (hit.hit_point - center).norm();
            if better_candidate(&best, dist, hit.face_index) {
                best = Some((dist, hit.face_index, [hit.u, hit.v, hit.w]));
            }
        }
    }
    match best {
        Some((_, face, bary)) => Anchor {
            face,
            bary,
            corner_offset: [local_offset.x, local_offset.y, local_offset.z],
            fallback: false,
        },
        None => {
            let (face, bary, _, _) = nearest_point_on_mesh(bvh, mesh, target);
            Anchor {
                face,
                bary,
                corner_offset: [local_offset.x, local_offset.y, local_offset.z],
                fallback: true,
            }
        }
    }
}

/// Bind every Gaussian of the set to faces of the proxy mesh by casting
/// rays from each camera through the Gaussian center (or each BBX corner)
/// and keeping the hit nearest to the Gaussian center. Unhit targets fall
/// back to the globally nearest point on the mesh, flagged as fallback.
pub fn bind(
    set: &SplatSet,
    mesh: &TriMesh,
    cameras: &[Camera],
    mode: BindMode,
    k_sigma: f64,
) -> Result<BindingTable, BindError> {
    if cameras.is_empty() {
        return Err(BindError::NoCameras);
    }
    let bvh = build_bvh(mesh)?;

    let per = mode.anchors_per_gaussian();
    let anchors: Vec<Anchor> = (0..set.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let center = set.positions[i];
            let mut out = Vec::with_capacity(per);
            match mode {
                BindMode::Center => {
                    out.push(bind_target(
                        &bvh,
                        mesh,
                        cameras,
                        &center,
                        &center,
                        &Vector3::zeros(),
                    ));
                }
                BindMode::Bbx8 => {
                    let corners =
                        gaussian_corners(&center, &set.rotations[i], &set.scales[i], k_sigma);
                    for (world, local) in &corners {
                        out.push(bind_target(&bvh, mesh, cameras, &center, world, local));
                    }
                }
            }
            out
        })
        .collect();

    Ok(BindingTable {
        mode,
        gaussian_count: set.len(),
        proxy_face_count: mesh.faces.len() as u32,
        mesh_hash: mesh.content_hash(),
        anchors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Camera;

    fn quad_mesh(z: f64) -> TriMesh {
        TriMesh {
            vertices: vec![
                Vector3::new(-1.0, -1.0, z),
                Vector3::new(1.0, -1.0, z),
                Vector3::new(1.0, 1.0, z),
                Vector3::new(-1.0, 1.0, z),
            ],
            faces: vec![[0, 1, 2], [0, 2, 3]],
            vertex_colors: None,
            base_color: Vector3::new(0.5, 0.5, 0.5),
            mesh_opacity: 1.0,
        }
    }

    fn splat_at(p: Vector3<f64>) -> SplatSet {
        SplatSet {
            positions: vec![p],
            rotations: vec![[1.0, 0.0, 0.0, 0.0]],
            scales: vec![Vector3::new(0.1, 0.1, 0.1)],
            opacities: vec![0.9],
            sh_degree: 0,
            sh_coeffs: vec![0.0; 3],
        }
    }

    fn camera_at(eye: Vector3<f64>, target: Vector3<f64>) -> Camera {
        Camera::look_at(eye, target, Vector3::y(), 64, 64, 64.0)
    }

    #[test]
    fn corners_of_axis_aligned_unit_gaussian() {
        let corners = gaussian_corners(
            &Vector3::zeros(),
            &[1.0, 0.0, 0.0, 0.0],
            &Vector3::new(1.0, 1.0, 1.0),
            3.0,
        );
        for (i, (world, local)) in corners.iter().enumerate() {
            assert_eq!(world, local);
            for (axis, bit) in [(0usize, 1usize), (1, 2), (2, 4)] {
                let expected = if i & bit != 0 { 3.0 } else { -3.0 };
                assert_eq!(world[axis], expected);
            }
        }
    }

    #[test]
    fn corners_collapse_as_k_goes_to_zero() {
        let mu = Vector3::new(0.3, -0.5, 1.0);
        let corners = gaussian_corners(
            &mu,
            &[1.0, 0.0, 0.0, 0.0],
            &Vector3::new(0.5, 0.2, 0.1),
            1e-12,
        );
        for (world, _) in &corners {
            assert!((world - mu).norm() < 1e-11);
        }
    }

    // A 90-degree z-rotation swaps the x/y extents of the corner lattice.
    #[test]
    fn corners_rotate_with_the_gaussian() {
        let half = std::f64::consts::FRAC_PI_4;
        let q = [half.cos(), 0.0, 0.0, half.sin()]; // 90 deg about z
        let corners = gaussian_corners(&Vector3::zeros(), &q, &Vector3::new(2.0, 1.0, 1.0), 3.0);
        // R_z(90) * (±6, ±3, ±3) = (∓3, ±6, ±3): x extent 3, y extent 6.
        for (world, _) in &corners {
            assert!((world.x.abs() - 3.0).abs() < 1e-9);
            assert!((world.y.abs() - 6.0).abs() < 1e-9);
            assert!((world.z.abs() - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_on_face_binds_to_it() {
        let mesh = quad_mesh(0.0);
        let set = splat_at(Vector3::new(0.25, -0.25, 0.0));
        let cams = vec![camera_at(Vector3::new(0.0, 0.0, -3.0), Vector3::zeros())];
        let table = bind(&set, &mesh, &cams, BindMode::Center, 3.0).unwrap();
        let a = &table.anchors[0];
        assert!(!a.fallback);
        assert_eq!(a.face, 0);
        assert!((a.bary[0] + a.bary[1] + a.bary[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn occluder_catches_the_ray_first() {
        // A nearer parallel quad occludes the far one along the camera ray.
        let mut mesh = quad_mesh(0.0);
        let far = quad_mesh(2.0);
        let base = mesh.vertices.len() as u32;
        mesh.vertices.extend(far.vertices);
        mesh
            .faces
            .extend(far.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));

        // Gaussian sits just behind the far quad; the only camera looks from
        // the near side, so its ray hits the near quad first.
        let set = splat_at(Vector3::new(0.1, 0.1, 2.05));
        let cams = vec![camera_at(Vector3::new(0.0, 0.0, -3.0), Vector3::zeros())];
        let table = bind(&set, &mesh, &cams, BindMode::Center, 3.0).unwrap();
        assert!(!table.anchors[0].fallback);
        assert!(table.anchors[0].face < 2, "bound to the near quad");

        // A camera on the other side sees the far quad directly.
        let cams2 = vec![
            camera_at(Vector3::new(0.0, 0.0, -3.0), Vector3::zeros()),
            camera_at(Vector3::new(0.0, 0.0, 5.0), Vector3::new(0.0, 0.0, 2.0)),
        ];
        let table2 = bind(&set, &mesh, &cams2, BindMode::Center, 3.0).unwrap();
        assert!(table2.anchors[0].face >= 2, "bound to the far quad");
    }

    #[test]
    fn bbx8_yields_eight_anchors_per_gaussian() {
        let mesh = quad_mesh(0.0);
        let set = splat_at(Vector3::new(0.0, 0.0, 0.2));
        let cams = vec![camera_at(Vector3::new(0.0, 0.0, -3.0), Vector3::zeros())];
        let table = bind(&set, &mesh, &cams, BindMode::Bbx8, 3.0).unwrap();
        assert_eq!(table.anchors.len(), 8);
        assert_eq!(table.anchors_of(0).len(), 8);
    }

    #[test]
    fn unhit_target_falls_back_to_nearest_point() {
        let mesh = quad_mesh(0.0);
        // Gaussian behind the only camera: the ray never leaves toward it.
        let set = splat_at(Vector3::new(0.0, 0.0, -5.0));
        let cams = vec![camera_at(Vector3::new(0.0, 0.0, -3.0), Vector3::new(0.0, 0.0, 1.0))];
        let table = bind(&set, &mesh, &cams, BindMode::Center, 3.0).unwrap();
        assert!(table.anchors[0].fallback);
        // Nearest point to (0,0,-5) on the z=0 quad is the origin, on the
        // shared edge; the tie resolves to face 0.
        assert_eq!(table.anchors[0].face, 0);
    }

    #[test]
    fn zero_cameras_is_an_error() {
        let mesh = quad_mesh(0.0);
        let set = splat_at(Vector3::zeros());
        assert!(matches!(
            bind(&set, &mesh, &[], BindMode::Center, 3.0),
            Err(BindError::NoCameras)
        ));
    }

    #[test]
    fn bvh_depth_is_logarithmic() {
        let mesh = crate::testscenes::gen_icosphere(4);
        let bvh = build_bvh(&mesh).unwrap();
        fn depth(bvh: &Bvh, node: usize) -> usize {
            let n = &bvh.nodes[node];
            if n.is_leaf() {
                1
            } else {
                1 + depth(bvh, n.left as usize).max(depth(bvh, n.left as usize + 1))
            }
        }
        let f = mesh.faces.len() as f64;
        let bound = 2.0 * f.log2().ceil() + 4.0;
        assert!(
            (depth(&bvh, 0) as f64) <= bound,
            "depth {} exceeds {}",
            depth(&bvh, 0),
            bound
        );
    }
}
