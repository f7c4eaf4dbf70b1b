//! Brute-force references used by tests and the diff CLI: a supersampled
//! ground-truth renderer, a per-sample entity blender, a plain splat-only
//! render path, and an exhaustive (no-BVH) binding oracle.
//!
//! These trade speed for being structurally simple; none of them use the
//! entity approximation, tiling, or the BVH.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::binding::{
    closest_point_on_triangle, gaussian_corners, intersect_triangle, Anchor, BindMode,
    BindingTable,
};
use crate::img::Image;
use crate::raster::{prepare_scene, Fragment, FragmentPayload, RenderError};
use crate::scene::{Camera, RenderSettings, Scene, SplatSet, TriMesh};

/// Ground-truth image from per-sub-sample ordered alpha blending.
#[derive(Debug, Clone)]
pub struct OracleImage {
    pub image: Image,
    pub samples_per_axis: usize,
}

/// Render each pixel as the mean over `samples_per_axis^2` sub-sample
/// locations of exact ordered alpha blending. Triangle coverage is a
/// point-in-triangle test per sub-sample and Gaussian alpha is evaluated
/// at the sub-sample location; there is no entity approximation anywhere.
///
/// Alpha cutoff and termination threshold from `settings` apply per
/// sub-sample so that a 1x1 oracle on a Gaussian-only scene walks exactly
/// the production math path.
pub fn supersample_render(
    scene: &Scene,
    camera: &Camera,
    samples_per_axis: usize,
    settings: &RenderSettings,
) -> Result<OracleImage, RenderError> {
    assert!(samples_per_axis >= 1);
    let prepared = prepare_scene(scene, camera, settings)?;
    let width = camera.width as usize;
    let height = camera.height as usize;
    let k = samples_per_axis;
    let inv_k2 = 1.0 / (k * k) as f64;

    let rows: Vec<Vec<Vector3<f64>>> = (0..height)
        .into_par_iter()
        .map(|py| {
            let y0 = py as f64;
            let y1 = py as f64 + 1.0;
            // Row-level candidate pruning; the per-sample math is unchanged.
            let row_tris: Vec<u32> = (0..prepared.triangles.len() as u32)
                .filter(|&t| {
                    let tri = &prepared.triangles[t as usize];
                    tri.aabb_max.y >= y0 && tri.aabb_min.y <= y1
                })
                .collect();
            let row_splats: Vec<u32> = (0..prepared.splats.len() as u32)
                .filter(|&s| {
                    let sp = &prepared.splats[s as usize];
                    sp.mean2d.y + sp.screen_radius >= y0 && sp.mean2d.y - sp.screen_radius <= y1
                })
                .collect();

            let mut row = Vec::with_capacity(width);
            let mut frags: Vec<(f64, u8, f64, Vector3<f64>)> = Vec::new();
            let mut tris = Vec::new();
            let mut splats = Vec::new();
            for px in 0..width {
                let x0 = px as f64;
                let x1 = px as f64 + 1.0;
                tris.clear();
                tris.extend(row_tris.iter().copied().filter(|&t| {
                    let tri = &prepared.triangles[t as usize];
                    tri.aabb_max.x >= x0 && tri.aabb_min.x <= x1
                }));
                splats.clear();
                splats.extend(row_splats.iter().copied().filter(|&s| {
                    let sp = &prepared.splats[s as usize];
                    sp.mean2d.x + sp.screen_radius >= x0 && sp.mean2d.x - sp.screen_radius <= x1
                }));

                let mut acc = Vector3::zeros();
                for sy in 0..k {
                    for sx in 0..k {
                        let x = px as f64 + (sx as f64 + 0.5) / k as f64;
                        let y = py as f64 + (sy as f64 + 0.5) / k as f64;
                        acc += blend_sample(&prepared, &tris, &splats, x, y, settings, &mut frags);
                    }
                }
                row.push(acc * inv_k2);
            }
            row
        })
        .collect();

    let mut image = Image::new(width, height);
    for (py, row) in rows.into_iter().enumerate() {
        for (px, c) in row.into_iter().enumerate() {
            image.set(px, py, c);
        }
    }
    Ok(OracleImage {
        image,
        samples_per_axis,
    })
}

fn blend_sample(
    prepared: &crate::raster::PreparedScene,
    tri_candidates: &[u32],
    splat_candidates: &[u32],
    x: f64,
    y: f64,
    settings: &RenderSettings,
    frags: &mut Vec<(f64, u8, f64, Vector3<f64>)>,
) -> Vector3<f64> {
    frags.clear();
    for &t in tri_candidates {
        let tri = &prepared.triangles[t as usize];
        if tri.covers(x, y) {
            if let (Some(depth), Some(color)) = (tri.depth_at(x, y), tri.color_at(x, y)) {
                frags.push((depth, 0, tri.alpha, color));
            }
        }
    }
    for &s in splat_candidates {
        let splat = &prepared.splats[s as usize];
        if let Some(alpha) = splat.alpha_at(x, y) {
            if alpha >= settings.alpha_cutoff {
                frags.push((splat.depth, 1, alpha, splat.color));
            }
        }
    }
    frags.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut color = Vector3::zeros();
    let mut trans = 1.0;
    for &(_, _, alpha, c) in frags.iter() {
        if trans < settings.termination_threshold {
            break;
        }
        color += trans * alpha * c;
        trans *= 1.0 - alpha;
    }
    color + trans * prepared.background_opacity * prepared.background_color
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("per_sample_entity_blend requires triangle fragments only")]
    NonTriangleFragment,
}

/// Reference for one triangle entity: blend each of the M samples
/// independently with plain ordered alpha blending restricted to its
/// coverage bits, then average. Returns the mean color (with entry
/// transmittance 1) and the per-sample exit transmittances.
pub fn per_sample_entity_blend(
    fragments: &[Fragment],
    m: usize,
) -> Result<(Vector3<f64>, Vec<f64>), OracleError> {
    let mut t = vec![1.0f64; m];
    let mut acc = Vector3::zeros();
    for frag in fragments {
        let FragmentPayload::Triangle { mask, alpha, color } = &frag.payload else {
            return Err(OracleError::NonTriangleFragment);
        };
        for (j, tj) in t.iter_mut().enumerate() {
            if mask & (1 << j) != 0 {
                acc += *tj * *alpha * color;
                *tj *= 1.0 - alpha;
            }
        }
    }
    Ok((acc / m as f64, t))
}

/// Plain front-to-back alpha blending of a mixed fragment list, ignoring
/// coverage masks entirely. This is the reduction target for full-coverage
/// stacks.
pub fn plain_alpha_blend(
    fragments: &[Fragment],
    termination_threshold: f64,
    background_color: Vector3<f64>,
    background_opacity: f64,
) -> Vector3<f64> {
    let mut color = Vector3::zeros();
    let mut trans = 1.0;
    for frag in fragments {
        if trans < termination_threshold {
            break;
        }
        let (alpha, c) = match &frag.payload {
            FragmentPayload::Gaussian { alpha, color } => (*alpha, *color),
            FragmentPayload::Triangle { alpha, color, .. } => (*alpha, *color),
        };
        color += trans * alpha * c;
        trans *= 1.0 - alpha;
    }
    color + trans * background_opacity * background_color
}

/// Pure splat rendering (Gaussian alpha blending only): every projected
/// splat is tested against every pixel, sorted by mean depth, and blended
/// front to back. Triangles in the scene are ignored.
pub fn splat_only_render(
    scene: &Scene,
    camera: &Camera,
    settings: &RenderSettings,
) -> Result<Image, RenderError> {
    let prepared = prepare_scene(scene, camera, settings)?;
    let width = camera.width as usize;
    let height = camera.height as usize;

    // Global depth sort once; per-pixel traversal preserves this order.
    let mut order: Vec<u32> = (0..prepared.splats.len() as u32).collect();
    order.sort_by(|&a, &b| {
        prepared.splats[a as usize]
            .depth
            .partial_cmp(&prepared.splats[b as usize].depth)
            .unwrap()
            .then(a.cmp(&b))
    });

    let rows: Vec<Vec<Vector3<f64>>> = (0..height)
        .into_par_iter()
        .map(|py| {
            let cy = py as f64 + 0.5;
            let mut row = Vec::with_capacity(width);
            for px in 0..width {
                let cx = px as f64 + 0.5;
                let mut color = Vector3::zeros();
                let mut trans = 1.0;
                for &si in &order {
                    if trans < settings.termination_threshold {
                        break;
                    }
                    let splat = &prepared.splats[si as usize];
                    let Some(alpha) = splat.alpha_at(cx, cy) else {
                        continue;
                    };
                    if alpha < settings.alpha_cutoff {
                        continue;
                    }
                    color += trans * alpha * splat.color;
                    trans *= 1.0 - alpha;
                }
                color += trans * prepared.background_opacity * prepared.background_color;
                row.push(color);
            }
            row
        })
        .collect();

    let mut image = Image::new(width, height);
    for (py, row) in rows.into_iter().enumerate() {
        for (px, c) in row.into_iter().enumerate() {
            image.set(px, py, c);
        }
    }
    Ok(image)
}

/// Binding oracle: the same selection rule as `binding::bind`, but testing
/// every ray against every triangle with no acceleration structure.
pub fn exhaustive_bind(
    set: &SplatSet,
    mesh: &TriMesh,
    cameras: &[Camera],
    mode: BindMode,
    k_sigma: f64,
) -> Result<BindingTable, crate::binding::BindError> {
    if cameras.is_empty() {
        return Err(crate::binding::BindError::NoCameras);
    }
    if mesh.faces.is_empty() {
        return Err(crate::binding::BindError::Bvh(
            crate::binding::BvhError::EmptyMesh,
        ));
    }

    let per = mode.anchors_per_gaussian();
    let anchors: Vec<Anchor> = (0..set.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let center = set.positions[i];
            let mut targets: Vec<(Vector3<f64>, Vector3<f64>)> = Vec::with_capacity(per);
            match mode {
                BindMode::Center => targets.push((center, Vector3::zeros())),
                BindMode::Bbx8 => targets.extend(gaussian_corners(
                    &center,
                    &set.rotations[i],
                    &set.scales[i],
                    k_sigma,
                )),
            }
            targets
                .into_iter()
                .map(|(target, local)| {
                    exhaustive_bind_target(mesh, cameras, &center, &target, &local)
                })
                .collect::<Vec<_>>()
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

fn exhaustive_bind_target(
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
        // Nearest hit along this ray, every face tested.
        let mut ray_best: Option<(f64, u32, [f64; 3], Vector3<f64>)> = None;
        for (f, _) in mesh.faces.iter().enumerate() {
            let [a, b, c] = mesh.face_vertices(f);
            if let Some((t, u, v, w)) = intersect_triangle(&origin, &dir, &a, &b, &c) {
                let replace = match &ray_best {
                    None => true,
                    Some((bt, bf, _, _)) => t < *bt || (t == *bt && (f as u32) < *bf),
                };
                if replace {
                    ray_best = Some((t, f as u32, [u, v, w], origin + dir * t));
                }
            }
        }
        if let Some((_, face, bary, point)) = ray_best {
            let dist = (point - center).norm();
            if crate::binding::better_candidate(&best, dist, face) {
                best = Some((dist, face, bary));
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
            let mut nf = u32::MAX;
            let mut nb = [0.0; 3];
            let mut nd2 = f64::INFINITY;
            for f in 0..mesh.faces.len() {
                let [a, b, c] = mesh.face_vertices(f);
                let (point, bary) = closest_point_on_triangle(target, &a, &b, &c);
                let d2 = (point - target).norm_squared();
                if d2 < nd2 || (d2 == nd2 && (f as u32) < nf) {
                    nd2 = d2;
                    nf = f as u32;
                    nb = bary;
                }
            }
            Anchor {
                face: nf,
                bary: nb,
                corner_offset: [local_offset.x, local_offset.y, local_offset.z],
                fallback: true,
            }
        }
    }
}

/// Per-channel image difference statistics, JSON-serializable for the CLI.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DiffStats {
    pub mean_abs: [f64; 3],
    pub max_abs: [f64; 3],
    pub mse: f64,
    /// PSNR in dB against a peak of 1.0; `inf` for identical images.
    pub psnr: f64,
}

pub fn diff_stats(a: &Image, b: &Image) -> DiffStats {
    assert_eq!(a.width, b.width);
    assert_eq!(a.height, b.height);
    let mut mean = [0.0; 3];
    let mut max = [0.0f64; 3];
    let mut mse = 0.0;
    for (pa, pb) in a.pixels.iter().zip(&b.pixels) {
        for ch in 0..3 {
            let d = (pa[ch] - pb[ch]).abs();
            mean[ch] += d;
            max[ch] = max[ch].max(d);
            mse += d * d;
        }
    }
    let n = (a.pixels.len() * 3) as f64;
    for ch in &mut mean {
        *ch /= a.pixels.len().max(1) as f64;
    }
    mse /= n.max(1.0);
    let psnr = if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    };
    DiffStats {
        mean_abs: mean,
        max_abs: max,
        mse,
        psnr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Placement, RenderSettings};
    use approx::assert_relative_eq;

    #[test]
    fn per_sample_blend_full_coverage_pair() {
        let frags = vec![
            Fragment::triangle(1.0, 0b1111, 0.5, Vector3::new(1.0, 0.0, 0.0)),
            Fragment::triangle(2.0, 0b1111, 0.5, Vector3::new(0.0, 1.0, 0.0)),
        ];
        let (c, t) = per_sample_entity_blend(&frags, 4).unwrap();
        assert_relative_eq!(c, Vector3::new(0.5, 0.25, 0.0), epsilon = 1e-12);
        for tj in t {
            assert_relative_eq!(tj, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn per_sample_blend_disjoint_opaque_pair() {
        // Two opaque fragments covering complementary halves: every sample
        // ends opaque and the color is the coverage-weighted mean.
        let frags = vec![
            Fragment::triangle(1.0, 0b0011, 1.0, Vector3::new(1.0, 0.0, 0.0)),
            Fragment::triangle(2.0, 0b1100, 1.0, Vector3::new(0.0, 0.0, 1.0)),
        ];
        let (c, t) = per_sample_entity_blend(&frags, 4).unwrap();
        assert_relative_eq!(c, Vector3::new(0.5, 0.0, 0.5), epsilon = 1e-12);
        assert_eq!(t, vec![0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn per_sample_blend_rejects_gaussians() {
        let frags = vec![Fragment::gaussian(1.0, 0.5, Vector3::zeros())];
        assert!(matches!(
            per_sample_entity_blend(&frags, 4),
            Err(OracleError::NonTriangleFragment)
        ));
    }

    #[test]
    fn empty_scene_oracle_is_background() {
        let scene = Scene {
            background_color: Vector3::new(0.3, 0.1, 0.8),
            ..Scene::empty()
        };
        let cam = Camera::look_at(
            Vector3::new(0.0, 0.0, -2.0),
            Vector3::zeros(),
            Vector3::y(),
            16,
            16,
            16.0,
        );
        let oracle = supersample_render(&scene, &cam, 4, &RenderSettings::default()).unwrap();
        for p in &oracle.image.pixels {
            assert_relative_eq!(*p, Vector3::new(0.3, 0.1, 0.8), epsilon = 1e-12);
        }
    }

    #[test]
    fn half_covering_triangle_converges_to_half() {
        // Opaque white triangle covering the left half of the viewport.
        let mesh = TriMesh {
            vertices: vec![
                Vector3::new(-10.0, -10.0, 2.0),
                Vector3::new(0.0, -10.0, 2.0),
                Vector3::new(0.0, 10.0, 2.0),
                Vector3::new(-10.0, 10.0, 2.0),
            ],
            faces: vec![[0, 1, 2], [0, 2, 3]],
            vertex_colors: None,
            base_color: Vector3::new(1.0, 1.0, 1.0),
            mesh_opacity: 1.0,
        };
        let mut scene = Scene::empty();
        scene.mesh_objects.push((mesh, Placement::identity()));
        let cam = Camera::new(
            9,
            9,
            9.0,
            9.0,
            4.5,
            4.5,
            nalgebra::Matrix3::identity(),
            Vector3::zeros(),
            0.01,
            100.0,
        )
        .unwrap();
        let oracle = supersample_render(&scene, &cam, 16, &RenderSettings::default()).unwrap();
        // The triangle edge passes through the center column's pixel middle.
        let c = oracle.image.get(4, 4);
        assert!((c.x - 0.5).abs() <= 1.0 / 16.0, "{c:?}");
    }

    // Doubling samples_per_axis changes pixels by less than the previous
    // refinement step on a test scene (Cauchy-style convergence).
    #[test]
    fn supersampling_converges() {
        let scene = crate::testscenes::gen_edge_scene();
        let cam = crate::testscenes::builtin_camera("edge", 32, 32);
        let settings = RenderSettings::default();
        let s2 = supersample_render(&scene, &cam, 2, &settings).unwrap().image;
        let s4 = supersample_render(&scene, &cam, 4, &settings).unwrap().image;
        let s8 = supersample_render(&scene, &cam, 8, &settings).unwrap().image;
        let s16 = supersample_render(&scene, &cam, 16, &settings).unwrap().image;
        let d1 = s2.mean_abs_diff(&s4);
        let d2 = s4.mean_abs_diff(&s8);
        let d3 = s8.mean_abs_diff(&s16);
        assert!(d2 < d1, "refinement not contracting: {d1} -> {d2}");
        assert!(d3 < d2, "refinement not contracting: {d2} -> {d3}");
    }

    #[test]
    fn diff_stats_reports_inf_for_identical() {
        let img = Image::new(4, 4);
        let stats = diff_stats(&img, &img);
        assert!(stats.psnr.is_infinite());
        assert_eq!(stats.max_abs, [0.0; 3]);
    }

    #[test]
    fn diff_stats_black_vs_white() {
        let a = Image::new(1, 1);
        let mut b = Image::new(1, 1);
        b.set(0, 0, Vector3::new(1.0, 1.0, 1.0));
        let stats = diff_stats(&a, &b);
        assert_eq!(stats.mean_abs, [1.0; 3]);
        assert_eq!(stats.psnr, 0.0);
    }
}
