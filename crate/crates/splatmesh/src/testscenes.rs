//! Programmatic generators for the desk-scale scenes used by the
//! acceptance suite and the `render --builtin` CLI path. Everything is
//! seed-deterministic; no external assets are involved.

use std::collections::HashMap;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::project::SH_C0;
use crate::scene::{Camera, Placement, Scene, SplatSet, TriMesh};

/// Icosphere with `20 * 4^subdiv` faces on the unit sphere.
pub fn gen_icosphere(subdiv: usize) -> TriMesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = vec![
        Vector3::new(-1.0, phi, 0.0),
        Vector3::new(1.0, phi, 0.0),
        Vector3::new(-1.0, -phi, 0.0),
        Vector3::new(1.0, -phi, 0.0),
        Vector3::new(0.0, -1.0, phi),
        Vector3::new(0.0, 1.0, phi),
        Vector3::new(0.0, -1.0, -phi),
        Vector3::new(0.0, 1.0, -phi),
        Vector3::new(phi, 0.0, -1.0),
        Vector3::new(phi, 0.0, 1.0),
        Vector3::new(-phi, 0.0, -1.0),
        Vector3::new(-phi, 0.0, 1.0),
    ]
    .into_iter()
    .map(|v| v.normalize())
    .collect();

    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdiv {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mids = [0u32; 3];
            for (k, (a, b)) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])].iter().enumerate() {
                let key = (*a.min(b), *a.max(b));
                mids[k] = *cache.entry(key).or_insert_with(|| {
                    let m = (vertices[*a as usize] + vertices[*b as usize]).normalize();
                    vertices.push(m);
                    (vertices.len() - 1) as u32
                });
            }
            next.push([f[0], mids[0], mids[2]]);
            next.push([f[1], mids[1], mids[0]]);
            next.push([f[2], mids[2], mids[1]]);
            next.push([mids[0], mids[1], mids[2]]);
        }
        faces = next;
    }

    TriMesh {
        vertices,
        faces,
        vertex_colors: None,
        base_color: Vector3::new(0.6, 0.6, 0.65),
        mesh_opacity: 1.0,
    }
}

fn random_unit_quat(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        if let Some(u) = crate::math::quat_normalize(&q) {
            let n2: f64 = q.iter().map(|c| c * c).sum();
            if n2 > 0.01 {
                return u;
            }
        }
    }
}

/// Anisotropic scales with well-separated components so covariance
/// eigenvalues never cluster (keeps re-factorization stable in tests).
fn random_scales(rng: &mut ChaCha8Rng, base: f64) -> Vector3<f64> {
    let s1 = base * rng.gen_range(1.0..2.0);
    let s2 = s1 * rng.gen_range(1.4..1.9);
    let s3 = s2 * rng.gen_range(1.4..1.9);
    Vector3::new(s1, s2, s3)
}

fn color_to_dc(color: &Vector3<f64>) -> [f64; 3] {
    [
        (color.x - 0.5) / SH_C0,
        (color.y - 0.5) / SH_C0,
        (color.z - 0.5) / SH_C0,
    ]
}

/// `n` random degree-0 Gaussians inside the unit ball.
pub fn gen_random_splats(n: usize, seed: u64) -> SplatSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = SplatSet::empty(0);
    for _ in 0..n {
        let p = loop {
            let p = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if p.norm_squared() <= 1.0 {
                break p;
            }
        };
        set.positions.push(p);
        set.rotations.push(random_unit_quat(&mut rng));
        set.scales.push(random_scales(&mut rng, 0.02));
        set.opacities.push(rng.gen_range(0.3..0.95));
        let color = Vector3::new(rng.gen(), rng.gen(), rng.gen());
        set.sh_coeffs.extend(color_to_dc(&color));
    }
    set
}

/// `n` small Gaussians whose centers lie exactly on the mesh surface
/// (area-weighted face sampling), for binding tests.
pub fn gen_splats_on_surface(mesh: &TriMesh, n: usize, seed: u64) -> SplatSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let areas: Vec<f64> = (0..mesh.faces.len())
        .map(|f| {
            let [a, b, c] = mesh.face_vertices(f);
            (b - a).cross(&(c - a)).norm() * 0.5
        })
        .collect();
    let mut cumulative = Vec::with_capacity(areas.len());
    let mut total = 0.0;
    for a in &areas {
        total += a;
        cumulative.push(total);
    }
    let edge = mesh.mean_edge_length();

    let mut set = SplatSet::empty(0);
    for _ in 0..n {
        let u = rng.gen_range(0.0..total);
        let f = cumulative.partition_point(|&c| c < u).min(mesh.faces.len() - 1);
        let [a, b, c] = mesh.face_vertices(f);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let sq = r1.sqrt();
        let (wa, wb, wc) = (1.0 - sq, sq * (1.0 - r2), sq * r2);
        set.positions.push(a * wa + b * wb + c * wc);
        set.rotations.push(random_unit_quat(&mut rng));
        set.scales.push(random_scales(&mut rng, edge * 0.08));
        set.opacities.push(rng.gen_range(0.5..0.95));
        let color = Vector3::new(rng.gen(), rng.gen(), rng.gen());
        set.sh_coeffs.extend(color_to_dc(&color));
    }
    set
}

fn single_splat(
    position: Vector3<f64>,
    sigma: f64,
    opacity: f64,
    color: Vector3<f64>,
) -> SplatSet {
    SplatSet {
        positions: vec![position],
        rotations: vec![[1.0, 0.0, 0.0, 0.0]],
        scales: vec![Vector3::new(sigma, sigma, sigma)],
        opacities: vec![opacity],
        sh_degree: 0,
        sh_coeffs: color_to_dc(&color).to_vec(),
    }
}

/// Camera conventions shared by the builtin scenes: the scene generators
/// place geometry for a +z-forward axis camera at the origin with
/// `fx = fy = width`.
pub fn builtin_camera(name: &str, width: u32, height: u32) -> Camera {
    match name {
        "nested" | "splats" | "bench" => Camera::look_at(
            Vector3::new(0.0, 0.0, -4.0),
            Vector3::zeros(),
            Vector3::y(),
            width,
            height,
            width as f64,
        ),
        _ => Camera::new(
            width,
            height,
            width as f64,
            width as f64,
            width as f64 / 2.0,
            height as f64 / 2.0,
            nalgebra::Matrix3::identity(),
            Vector3::zeros(),
            0.01,
            1e4,
        )
        .expect("axis camera is rigid"),
    }
}

/// The color-overflow construction: a near triangle with partial sub-pixel
/// coverage, an interposed large smooth Gaussian, and a far full-coverage
/// triangle. At the central pixel of a 64x64 axis camera the depth order
/// is [triangle, gaussian, triangle].
pub fn gen_overflow_scene() -> Scene {
    // With fx = width = 64 and cx = 32, screen x maps to world x/z * 64 + 32.
    // The near triangle's vertical edge sits at screen x = 32.5, the exact
    // middle of pixel (32, 32): it covers 2 of the 4 rotated-grid samples
    // there, and 4-sample coverage equals true area coverage on the whole
    // column, which keeps the MSAA render tight against the oracle.
    let edge_world = 0.5 / 64.0; // at z = 1
    let near = TriMesh {
        vertices: vec![
            Vector3::new(edge_world, -3.0, 1.0),
            Vector3::new(edge_world, 3.0, 1.0),
            Vector3::new(-6.0, 0.0, 1.0),
        ],
        faces: vec![[0, 1, 2]],
        vertex_colors: None,
        base_color: Vector3::new(0.9, 0.15, 0.1),
        mesh_opacity: 0.6,
    };
    let far = TriMesh {
        vertices: vec![
            Vector3::new(-20.0, -20.0, 3.0),
            Vector3::new(20.0, -20.0, 3.0),
            Vector3::new(0.0, 25.0, 3.0),
        ],
        faces: vec![[0, 1, 2]],
        vertex_colors: None,
        base_color: Vector3::new(1.0, 1.0, 1.0),
        mesh_opacity: 0.9,
    };
    // Center the gaussian on the middle pixel: screen 32.5 -> world x/z.
    let g = single_splat(
        Vector3::new(0.5 / 64.0 * 2.0, 0.5 / 64.0 * 2.0, 2.0),
        0.4,
        0.7,
        Vector3::new(0.1, 0.9, 0.2),
    );
    let mut scene = Scene::empty();
    scene.mesh_objects.push((near, Placement::identity()));
    scene.mesh_objects.push((far, Placement::identity()));
    scene.splat_objects.push((g, Placement::identity()));
    scene
}

/// Splat cluster inside a semi-transparent closed icosphere; the interior
/// must stay visible through the mesh with depth-correct attenuation.
pub fn gen_nested_scene() -> Scene {
    let mut shell = gen_icosphere(2);
    shell.mesh_opacity = 0.35;
    shell.base_color = Vector3::new(0.45, 0.55, 0.8);

    let mut scene = Scene::empty();
    scene.mesh_objects.push((shell, Placement::identity()));
    for (pos, color) in [
        (Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.2, 0.9, 0.25)),
        (Vector3::new(0.35, 0.1, -0.1), Vector3::new(0.95, 0.3, 0.2)),
        (Vector3::new(-0.3, -0.25, 0.15), Vector3::new(0.95, 0.85, 0.2)),
    ] {
        scene
            .splat_objects
            .push((single_splat(pos, 0.22, 0.8, color), Placement::identity()));
    }
    scene.background_color = Vector3::new(0.02, 0.02, 0.04);
    scene
}

/// Thin opaque triangles at shallow, sub-pixel slopes, for anti-aliasing
/// comparisons. Geometry assumes the axis builtin camera.
pub fn gen_edge_scene() -> Scene {
    let z = 2.0;
    let mut mesh = TriMesh {
        vertices: Vec::new(),
        faces: Vec::new(),
        vertex_colors: None,
        base_color: Vector3::new(1.0, 1.0, 1.0),
        mesh_opacity: 1.0,
    };
    let thickness = 0.035; // roughly one pixel at the builtin camera
    for k in 0..6 {
        let slope = 0.04 + 0.09 * k as f64;
        let offset = -0.75 + 0.3 * k as f64;
        let base = mesh.vertices.len() as u32;
        let y = |x: f64| slope * x + offset;
        mesh.vertices.push(Vector3::new(-1.4, y(-1.4), z));
        mesh.vertices.push(Vector3::new(1.4, y(1.4), z));
        mesh.vertices.push(Vector3::new(1.4, y(1.4) + thickness, z));
        mesh.vertices.push(Vector3::new(-1.4, y(-1.4) + thickness, z));
        mesh.faces.push([base, base + 1, base + 2]);
        mesh.faces.push([base, base + 2, base + 3]);
    }
    let mut scene = Scene::empty();
    scene.mesh_objects.push((mesh, Placement::identity()));
    scene
}

/// Scene for gaussian-only rendering checks and benchmarks; pair with
/// `builtin_camera("splats", ...)`.
pub fn gen_splat_cloud_scene(n: usize, seed: u64) -> Scene {
    let mut scene = Scene::empty();
    scene
        .splat_objects
        .push((gen_random_splats(n, seed), Placement::identity()));
    scene.background_color = Vector3::new(0.05, 0.05, 0.05);
    scene
}

/// Benchmark scene: a large splat cloud plus roughly 10K mesh triangles
/// (two icospheres). Pair with `builtin_camera("bench", ...)`.
pub fn gen_bench_scene(n_splats: usize, seed: u64) -> Scene {
    let mut scene = gen_splat_cloud_scene(n_splats, seed);
    // Keep footprints small so six-figure splat counts stay interactive.
    for s in &mut scene.splat_objects[0].0.scales {
        *s *= 0.25;
    }
    let mut a = gen_icosphere(4);
    a.mesh_opacity = 0.6;
    a.base_color = Vector3::new(0.8, 0.5, 0.2);
    let mut b = gen_icosphere(4);
    b.mesh_opacity = 0.8;
    b.base_color = Vector3::new(0.2, 0.5, 0.8);
    scene.mesh_objects.push((
        a,
        Placement {
            translation: Vector3::new(-0.4, 0.0, 0.0),
            rotation: [1.0, 0.0, 0.0, 0.0],
            scale: 0.55,
        },
    ));
    scene.mesh_objects.push((
        b,
        Placement {
            translation: Vector3::new(0.45, 0.15, 0.2),
            rotation: [1.0, 0.0, 0.0, 0.0],
            scale: 0.45,
        },
    ));
    scene
}

/// `count` cameras orbiting `target`, elevations alternating so poles stay
/// visible. Used by binding tests and the bind CLI defaults.
pub fn gen_orbit_cameras(
    count: usize,
    radius: f64,
    target: Vector3<f64>,
    width: u32,
    height: u32,
) -> Vec<Camera> {
    (0..count)
        .map(|i| {
            let azimuth = i as f64 / count as f64 * std::f64::consts::TAU;
            let elevation: f64 = if i % 2 == 0 { 0.45 } else { -0.45 };
            let eye = target
                + Vector3::new(
                    radius * elevation.cos() * azimuth.cos(),
                    radius * elevation.sin(),
                    radius * elevation.cos() * azimuth.sin(),
                );
            Camera::look_at(eye, target, Vector3::y(), width, height, width as f64)
        })
        .collect()
}

/// Names accepted by `render --builtin`.
pub const BUILTIN_SCENES: [&str; 4] = ["overflow", "nested", "edge", "splats"];

/// Construct one of the named builtin scenes.
pub fn builtin_scene(name: &str) -> Option<Scene> {
    match name {
        "overflow" => Some(gen_overflow_scene()),
        "nested" => Some(gen_nested_scene()),
        "edge" => Some(gen_edge_scene()),
        "splats" => Some(gen_splat_cloud_scene(2000, 7)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedron_counts() {
        let m = gen_icosphere(0);
        assert_eq!(m.vertices.len(), 12);
        assert_eq!(m.faces.len(), 20);
    }

    #[test]
    fn subdivision_quadruples_faces() {
        assert_eq!(gen_icosphere(1).faces.len(), 80);
        assert_eq!(gen_icosphere(2).faces.len(), 320);
    }

    #[test]
    fn icosphere_vertices_on_unit_sphere() {
        let m = gen_icosphere(2);
        for v in &m.vertices {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert!(crate::scene::validate_scene(&{
            let mut s = Scene::empty();
            s.mesh_objects.push((m, Placement::identity()));
            s
        })
        .is_empty());
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let a = gen_random_splats(50, 42);
        let b = gen_random_splats(50, 42);
        assert_eq!(a, b);
        let c = gen_random_splats(50, 43);
        assert_ne!(a.positions, c.positions);

        let mesh = gen_icosphere(1);
        let s1 = gen_splats_on_surface(&mesh, 30, 9);
        let s2 = gen_splats_on_surface(&mesh, 30, 9);
        assert_eq!(s1, s2);
    }

    #[test]
    fn surface_splats_sit_on_the_mesh() {
        let mesh = gen_icosphere(3);
        let bvh = crate::binding::build_bvh(&mesh).unwrap();
        let set = gen_splats_on_surface(&mesh, 200, 5);
        for p in &set.positions {
            let (_, _, _, dist) = crate::binding::nearest_point_on_mesh(&bvh, &mesh, p);
            assert!(dist <= 1e-3, "distance {dist}");
        }
    }

    #[test]
    fn random_splats_pass_validation() {
        let mut scene = Scene::empty();
        scene
            .splat_objects
            .push((gen_random_splats(100, 3), Placement::identity()));
        assert!(crate::scene::validate_scene(&scene).is_empty());
    }

    #[test]
    fn overflow_scene_has_tri_gauss_tri_order_at_center() {
        let scene = gen_overflow_scene();
        let cam = builtin_camera("overflow", 64, 64);
        let lists =
            crate::raster::build_fragment_lists(&scene, &cam, &crate::scene::RenderSettings::default())
                .unwrap();
        let center = lists.at(32, 32);
        assert_eq!(center.len(), 3, "expected 3 fragments, got {}", center.len());
        assert!(center[0].is_triangle());
        assert!(!center[1].is_triangle());
        assert!(center[2].is_triangle());
        // The near triangle covers some but not all samples.
        if let crate::raster::FragmentPayload::Triangle { mask, .. } = center[0].payload {
            assert!(mask != 0 && mask != 0b1111, "partial coverage, got {mask:#b}");
        }
    }

    #[test]
    fn builtin_scene_names_resolve() {
        for name in BUILTIN_SCENES {
            assert!(builtin_scene(name).is_some(), "{name}");
        }
        assert!(builtin_scene("nope").is_none());
    }
}
