//! The single-pass unified rasterizer: per-pixel depth-sorted fragment
//! lists mixing Gaussian and triangle fragments, composited tile by tile.

mod blend;
mod triangle;

pub use blend::{blend_pixel, blend_pixel_traced, sample_offsets, sort_fragments, Fragment,
                FragmentPayload};
pub use triangle::{clip_triangle_near, ScreenTriangle};

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::img::Image;
use crate::project::{project_splat, GaussianParams, ProjectedSplat};
use crate::scene::{Camera, RenderSettings, Scene, SplatSet};

pub const TILE_SIZE: usize = 16;

/// Hard cap per pixel; hitting it means a pathological scene.
pub const MAX_FRAGMENTS_PER_PIXEL: usize = 1 << 20;

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("unsupported MSAA sample count {0} (supported: 1, 2, 4, 8)")]
    UnsupportedMsaa(usize),
    #[error("scene failed validation: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidScene(Vec<crate::scene::Diagnostic>),
    #[error("fragment capacity exceeded in tile ({tile_x}, {tile_y}): {fragments} fragments in one pixel")]
    TileCapacity {
        tile_x: usize,
        tile_y: usize,
        fragments: usize,
    },
}

/// Scene flattened to world space: projected splats and screen triangles
/// in submission order, ready for per-pixel gathering.
pub struct PreparedScene {
    pub splats: Vec<ProjectedSplat>,
    pub triangles: Vec<ScreenTriangle>,
    pub background_color: Vector3<f64>,
    pub background_opacity: f64,
}

/// Project every splat and triangle of the scene for one camera. Culled
/// splats and fully clipped triangles are dropped; order is deterministic.
pub fn prepare_scene(
    scene: &Scene,
    camera: &Camera,
    settings: &RenderSettings,
) -> Result<PreparedScene, RenderError> {
    let diags = crate::scene::validate_scene(scene);
    if !diags.is_empty() {
        return Err(RenderError::InvalidScene(diags));
    }
    if sample_offsets(settings.msaa_samples).is_none() {
        return Err(RenderError::UnsupportedMsaa(settings.msaa_samples));
    }

    let baked_sets: Vec<SplatSet> = scene
        .splat_objects
        .iter()
        .map(|(set, placement)| placement.apply_to_splats(set))
        .collect();
    let mut splats = Vec::new();
    for set in &baked_sets {
        let projected: Vec<Option<ProjectedSplat>> = (0..set.len())
            .into_par_iter()
            .map(|i| {
                let params = GaussianParams {
                    position: set.positions[i],
                    rotation: set.rotations[i],
                    scale: set.scales[i],
                    opacity: set.opacities[i],
                    sh_degree: set.sh_degree,
                    sh: set.sh(i),
                };
                project_splat(&params, camera, settings.gaussian_dilation)
            })
            .collect();
        splats.extend(projected.into_iter().flatten());
    }

    let mut triangles = Vec::new();
    for (mesh, placement) in &scene.mesh_objects {
        let baked = placement.apply_to_mesh(mesh);
        let per_face: Vec<Vec<ScreenTriangle>> = (0..baked.faces.len())
            .into_par_iter()
            .map(|f| {
                let [ia, ib, ic] = baked.faces[f];
                let verts = [
                    camera.to_camera(&baked.vertices[ia as usize]),
                    camera.to_camera(&baked.vertices[ib as usize]),
                    camera.to_camera(&baked.vertices[ic as usize]),
                ];
                let colors = [
                    baked.vertex_color(ia as usize),
                    baked.vertex_color(ib as usize),
                    baked.vertex_color(ic as usize),
                ];
                clip_triangle_near(&verts, &colors, camera.near)
                    .iter()
                    .filter_map(|(vs, cs)| {
                        ScreenTriangle::from_camera_space(vs, cs, baked.mesh_opacity, camera)
                    })
                    .filter(|tri| {
                        tri.aabb_max.x >= 0.0
                            && tri.aabb_min.x <= camera.width as f64
                            && tri.aabb_max.y >= 0.0
                            && tri.aabb_min.y <= camera.height as f64
                    })
                    .collect()
            })
            .collect();
        triangles.extend(per_face.into_iter().flatten());
    }

    Ok(PreparedScene {
        splats,
        triangles,
        background_color: scene.background_color,
        background_opacity: scene.background_opacity,
    })
}

/// Per-tile indices into the prepared scene's splat and triangle arrays.
struct TileBins {
    tiles_x: usize,
    tiles_y: usize,
    splat_bins: Vec<Vec<u32>>,
    tri_bins: Vec<Vec<u32>>,
}

fn bin_to_tiles(prepared: &PreparedScene, width: usize, height: usize) -> TileBins {
    let tiles_x = width.div_ceil(TILE_SIZE);
    let tiles_y = height.div_ceil(TILE_SIZE);
    let n_tiles = tiles_x * tiles_y;
    let mut splat_bins = vec![Vec::new(); n_tiles];
    let mut tri_bins = vec![Vec::new(); n_tiles];

    let tile_range = |min_v: f64, max_v: f64, limit: usize| -> Option<(usize, usize)> {
        let lo = (min_v.floor().max(0.0) as usize) / TILE_SIZE;
        let hi_px = max_v.ceil();
        if hi_px < 0.0 || min_v.floor() >= (limit * TILE_SIZE) as f64 {
            return None;
        }
        let hi = ((hi_px as usize).min(limit * TILE_SIZE - 1)) / TILE_SIZE;
        if lo >= limit {
            return None;
        }
        Some((lo, hi.min(limit - 1)))
    };

    for (i, s) in prepared.splats.iter().enumerate() {
        let r = s.screen_radius;
        let Some((tx0, tx1)) = tile_range(s.mean2d.x - r, s.mean2d.x + r, tiles_x) else {
            continue;
        };
        let Some((ty0, ty1)) = tile_range(s.mean2d.y - r, s.mean2d.y + r, tiles_y) else {
            continue;
        };
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                splat_bins[ty * tiles_x + tx].push(i as u32);
            }
        }
    }
    for (i, t) in prepared.triangles.iter().enumerate() {
        let Some((tx0, tx1)) = tile_range(t.aabb_min.x, t.aabb_max.x, tiles_x) else {
            continue;
        };
        let Some((ty0, ty1)) = tile_range(t.aabb_min.y, t.aabb_max.y, tiles_y) else {
            continue;
        };
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                tri_bins[ty * tiles_x + tx].push(i as u32);
            }
        }
    }

    TileBins {
        tiles_x,
        tiles_y,
        splat_bins,
        tri_bins,
    }
}

/// Build the depth-sorted fragment list of one pixel from tile-local bins.
fn pixel_fragments(
    prepared: &PreparedScene,
    tri_bin: &[u32],
    splat_bin: &[u32],
    px: usize,
    py: usize,
    offsets: &[(f64, f64)],
    settings: &RenderSettings,
    out: &mut Vec<Fragment>,
) {
    out.clear();
    let cx = px as f64 + 0.5;
    let cy = py as f64 + 0.5;

    for &ti in tri_bin {
        let tri = &prepared.triangles[ti as usize];
        let mut mask = 0u32;
        let mut first_covered = usize::MAX;
        for (j, (ox, oy)) in offsets.iter().enumerate() {
            if tri.covers(cx + ox, cy + oy) {
                mask |= 1 << j;
                if first_covered == usize::MAX {
                    first_covered = j;
                }
            }
        }
        if mask == 0 {
            continue;
        }
        let center_inside = tri.covers(cx, cy);
        let (sx, sy) = offsets[first_covered];
        let depth = if center_inside {
            tri.depth_at(cx, cy)
        } else {
            // Pixel center outside the triangle: fall back to the depth at
            // the first covered sample, which is inside by construction.
            tri.depth_at(cx + sx, cy + sy)
        };
        let Some(depth) = depth else { continue };
        let color = tri
            .color_at(cx, cy)
            .or_else(|| tri.color_at(cx + sx, cy + sy));
        let Some(color) = color else { continue };
        out.push(Fragment::triangle(depth, mask, tri.alpha, color));
    }

    for &si in splat_bin {
        let splat = &prepared.splats[si as usize];
        if let Some(alpha) = splat.alpha_at(cx, cy) {
            if alpha >= settings.alpha_cutoff {
                out.push(Fragment::gaussian(splat.depth, alpha, splat.color));
            }
        }
    }

    sort_fragments(out);
}

/// Counters describing one render, used by the benchmark report.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct RenderStats {
    /// Total fragments across all pixel lists.
    pub fragments: u64,
    /// Tiles with at least one fragment.
    pub occupied_tiles: usize,
    pub total_tiles: usize,
    /// Longest per-pixel fragment list seen.
    pub max_list_len: usize,
}

struct TileResult {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    pixels: Vec<Vector3<f64>>,
    fragments: u64,
    max_list_len: usize,
}

fn render_tiles(
    prepared: &PreparedScene,
    width: usize,
    height: usize,
    settings: &RenderSettings,
) -> Result<(Image, RenderStats), RenderError> {
    let offsets = sample_offsets(settings.msaa_samples)
        .ok_or(RenderError::UnsupportedMsaa(settings.msaa_samples))?;
    let bins = bin_to_tiles(prepared, width, height);

    let tile_results: Vec<Result<TileResult, RenderError>> = (0..bins.tiles_x * bins.tiles_y)
        .into_par_iter()
        .map(|tile_idx| {
            let tx = tile_idx % bins.tiles_x;
            let ty = tile_idx / bins.tiles_x;
            let x0 = tx * TILE_SIZE;
            let y0 = ty * TILE_SIZE;
            let w = TILE_SIZE.min(width - x0);
            let h = TILE_SIZE.min(height - y0);
            let tri_bin = &bins.tri_bins[tile_idx];
            let splat_bin = &bins.splat_bins[tile_idx];

            let mut pixels = Vec::with_capacity(w * h);
            let mut frags = Vec::new();
            let mut fragment_count = 0u64;
            let mut max_list_len = 0usize;
            for dy in 0..h {
                for dx in 0..w {
                    pixel_fragments(
                        prepared,
                        tri_bin,
                        splat_bin,
                        x0 + dx,
                        y0 + dy,
                        offsets,
                        settings,
                        &mut frags,
                    );
                    if frags.len() > MAX_FRAGMENTS_PER_PIXEL {
                        return Err(RenderError::TileCapacity {
                            tile_x: tx,
                            tile_y: ty,
                            fragments: frags.len(),
                        });
                    }
                    fragment_count += frags.len() as u64;
                    max_list_len = max_list_len.max(frags.len());
                    pixels.push(blend_pixel(
                        &frags,
                        settings,
                        prepared.background_color,
                        prepared.background_opacity,
                    ));
                }
            }
            Ok(TileResult {
                x0,
                y0,
                w,
                h,
                pixels,
                fragments: fragment_count,
                max_list_len,
            })
        })
        .collect();

    let mut image = Image::new(width, height);
    let mut stats = RenderStats {
        total_tiles: bins.tiles_x * bins.tiles_y,
        ..RenderStats::default()
    };
    for result in tile_results {
        let tile = result?;
        for dy in 0..tile.h {
            for dx in 0..tile.w {
                image.set(tile.x0 + dx, tile.y0 + dy, tile.pixels[dy * tile.w + dx]);
            }
        }
        stats.fragments += tile.fragments;
        if tile.fragments > 0 {
            stats.occupied_tiles += 1;
        }
        stats.max_list_len = stats.max_list_len.max(tile.max_list_len);
    }
    Ok((image, stats))
}

/// Render the scene from one camera. Deterministic for fixed inputs,
/// independent of worker count.
pub fn render(
    scene: &Scene,
    camera: &Camera,
    settings: &RenderSettings,
) -> Result<Image, RenderError> {
    render_with_stats(scene, camera, settings).map(|(img, _)| img)
}

/// [`render`] plus fragment/tile counters.
pub fn render_with_stats(
    scene: &Scene,
    camera: &Camera,
    settings: &RenderSettings,
) -> Result<(Image, RenderStats), RenderError> {
    let prepared = prepare_scene(scene, camera, settings)?;
    render_tiles(
        &prepared,
        camera.width as usize,
        camera.height as usize,
        settings,
    )
}

/// All per-pixel fragment lists of a frame, row-major. Intended for tests
/// and debugging; memory grows with every splat-pixel overlap.
pub struct FragmentLists {
    pub width: usize,
    pub height: usize,
    pub lists: Vec<Vec<Fragment>>,
}

impl FragmentLists {
    pub fn at(&self, x: usize, y: usize) -> &[Fragment] {
        &self.lists[y * self.width + x]
    }
}

/// Materialize every pixel's depth-sorted fragment list.
pub fn build_fragment_lists(
    scene: &Scene,
    camera: &Camera,
    settings: &RenderSettings,
) -> Result<FragmentLists, RenderError> {
    let prepared = prepare_scene(scene, camera, settings)?;
    let width = camera.width as usize;
    let height = camera.height as usize;
    let offsets = sample_offsets(settings.msaa_samples)
        .ok_or(RenderError::UnsupportedMsaa(settings.msaa_samples))?;
    let bins = bin_to_tiles(&prepared, width, height);

    let mut lists = vec![Vec::new(); width * height];
    for (tile_idx, (tri_bin, splat_bin)) in
        bins.tri_bins.iter().zip(&bins.splat_bins).enumerate()
    {
        let tx = tile_idx % bins.tiles_x;
        let ty = tile_idx / bins.tiles_x;
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        for dy in 0..TILE_SIZE.min(height - y0) {
            for dx in 0..TILE_SIZE.min(width - x0) {
                let (px, py) = (x0 + dx, y0 + dy);
                let mut frags = Vec::new();
                pixel_fragments(
                    &prepared, tri_bin, splat_bin, px, py, offsets, settings, &mut frags,
                );
                if frags.len() > MAX_FRAGMENTS_PER_PIXEL {
                    return Err(RenderError::TileCapacity {
                        tile_x: tx,
                        tile_y: ty,
                        fragments: frags.len(),
                    });
                }
                lists[py * width + px] = frags;
            }
        }
    }
    Ok(FragmentLists {
        width,
        height,
        lists,
    })
}

/// Render from fragment lists that were already built; used by tests to
/// show `render` equals `blend_pixel` over `build_fragment_lists`.
pub fn render_from_lists(
    lists: &FragmentLists,
    settings: &RenderSettings,
    background_color: Vector3<f64>,
    background_opacity: f64,
) -> Image {
    let mut image = Image::new(lists.width, lists.height);
    for y in 0..lists.height {
        for x in 0..lists.width {
            image.set(
                x,
                y,
                blend_pixel(lists.at(x, y), settings, background_color, background_opacity),
            );
        }
    }
    image
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{BlendMode, Placement, TriMesh};

    fn axis_camera(width: u32, height: u32) -> Camera {
        Camera::new(
            width,
            height,
            width as f64,
            width as f64,
            width as f64 / 2.0,
            height as f64 / 2.0,
            nalgebra::Matrix3::identity(),
            Vector3::zeros(),
            0.01,
            100.0,
        )
        .unwrap()
    }

    fn full_screen_quad(z: f64, color: Vector3<f64>, opacity: f64) -> TriMesh {
        // Large enough to cover the whole viewport at depth z.
        let s = 4.0 * z;
        TriMesh {
            vertices: vec![
                Vector3::new(-s, -s, z),
                Vector3::new(s, -s, z),
                Vector3::new(s, s, z),
                Vector3::new(-s, s, z),
            ],
            faces: vec![[0, 1, 2], [0, 2, 3]],
            vertex_colors: None,
            base_color: color,
            mesh_opacity: opacity,
        }
    }

    fn one_splat(pos: Vector3<f64>, sigma: f64, opacity: f64, dc: [f64; 3]) -> crate::scene::SplatSet {
        crate::scene::SplatSet {
            positions: vec![pos],
            rotations: vec![[1.0, 0.0, 0.0, 0.0]],
            scales: vec![Vector3::new(sigma, sigma, sigma)],
            opacities: vec![opacity],
            sh_degree: 0,
            sh_coeffs: dc.to_vec(),
        }
    }

    #[test]
    fn empty_scene_gives_empty_lists_and_background() {
        let scene = crate::scene::Scene {
            background_color: Vector3::new(0.2, 0.3, 0.4),
            ..crate::scene::Scene::empty()
        };
        let cam = axis_camera(32, 32);
        let settings = RenderSettings::default();
        let lists = build_fragment_lists(&scene, &cam, &settings).unwrap();
        assert!(lists.lists.iter().all(|l| l.is_empty()));
        let img = render(&scene, &cam, &settings).unwrap();
        assert_eq!(img.get(7, 19), Vector3::new(0.2, 0.3, 0.4));
    }

    #[test]
    fn splat_in_front_of_triangle_orders_gaussian_first() {
        let mut scene = crate::scene::Scene::empty();
        scene
            .mesh_objects
            .push((full_screen_quad(4.0, Vector3::new(1.0, 0.0, 0.0), 1.0), Placement::identity()));
        scene.splat_objects.push((
            one_splat(Vector3::new(0.0, 0.0, 2.0), 0.5, 0.9, [0.0; 3]),
            Placement::identity(),
        ));
        let cam = axis_camera(32, 32);
        let lists = build_fragment_lists(&scene, &cam, &RenderSettings::default()).unwrap();
        // Off the quad's diagonal so exactly one of its triangles covers.
        let list = lists.at(10, 16);
        assert_eq!(list.len(), 2);
        assert!(!list[0].is_triangle());
        assert!(list[1].is_triangle());
        assert!(list[0].depth < list[1].depth);
    }

    // Two interpenetrating triangles: the per-pixel ordering must flip
    // across the intersection line, matching direct plane-depth evaluation.
    #[test]
    fn interpenetrating_triangles_flip_order() {
        let mut mesh = TriMesh {
            vertices: vec![
                // Tilted: near on the left, far on the right.
                Vector3::new(-4.0, -4.0, 2.0),
                Vector3::new(4.0, -4.0, 6.0),
                Vector3::new(0.0, 6.0, 4.0),
                // Constant depth 4.
                Vector3::new(-4.0, -4.0, 4.0),
                Vector3::new(4.0, -4.0, 4.0),
                Vector3::new(0.0, 6.0, 4.0),
            ],
            faces: vec![[0, 1, 2], [3, 4, 5]],
            vertex_colors: None,
            base_color: Vector3::new(0.5, 0.5, 0.5),
            mesh_opacity: 0.5,
        };
        mesh.vertices[5].x += 1e-9; // avoid exactly shared vertex positions
        let mut scene = crate::scene::Scene::empty();
        scene.mesh_objects.push((mesh, Placement::identity()));
        let cam = axis_camera(64, 64);
        let settings = RenderSettings::default();
        let prepared = prepare_scene(&scene, &cam, &settings).unwrap();
        assert_eq!(prepared.triangles.len(), 2);
        let lists = build_fragment_lists(&scene, &cam, &settings).unwrap();

        let mut seen_a_first = false;
        let mut seen_b_first = false;
        for py in 0..64 {
            for px in 0..64 {
                let l = lists.at(px, py);
                if l.len() != 2 {
                    continue;
                }
                // Oracle: evaluate both plane depths directly at the center.
                let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
                let d0 = prepared.triangles[0].depth_at(cx, cy);
                let d1 = prepared.triangles[1].depth_at(cx, cy);
                if let (Some(d0), Some(d1)) = (d0, d1) {
                    if prepared.triangles[0].covers(cx, cy)
                        && prepared.triangles[1].covers(cx, cy)
                    {
                        let first_is_tilted = (l[0].depth - d0).abs() < 1e-12;
                        if d0 < d1 {
                            assert!(first_is_tilted, "pixel ({px},{py})");
                            seen_a_first = true;
                        } else if d1 < d0 {
                            assert!(!first_is_tilted, "pixel ({px},{py})");
                            seen_b_first = true;
                        }
                    }
                }
            }
        }
        assert!(seen_a_first && seen_b_first, "ordering never flipped");
    }

    #[test]
    fn opaque_full_screen_triangle_wins() {
        let mut scene = crate::scene::Scene::empty();
        scene
            .mesh_objects
            .push((full_screen_quad(2.0, Vector3::new(0.1, 0.8, 0.3), 1.0), Placement::identity()));
        scene.splat_objects.push((
            one_splat(Vector3::new(0.0, 0.0, 5.0), 0.5, 0.9, [2.0, 0.0, 0.0]),
            Placement::identity(),
        ));
        scene.background_color = Vector3::new(1.0, 1.0, 1.0);
        let cam = axis_camera(48, 48);
        let img = render(&scene, &cam, &RenderSettings::default()).unwrap();
        for p in &img.pixels {
            assert!((p - Vector3::new(0.1, 0.8, 0.3)).norm() < 1e-9);
        }
    }

    #[test]
    fn render_equals_blend_over_built_lists() {
        let mut scene = crate::scene::Scene::empty();
        scene
            .mesh_objects
            .push((full_screen_quad(3.0, Vector3::new(0.9, 0.6, 0.2), 0.6), Placement::identity()));
        scene.splat_objects.push((
            one_splat(Vector3::new(0.1, -0.2, 2.0), 0.3, 0.8, [0.5, -0.5, 1.0]),
            Placement::identity(),
        ));
        scene.background_color = Vector3::new(0.05, 0.05, 0.2);
        let cam = axis_camera(40, 40);
        let settings = RenderSettings::default();
        let img = render(&scene, &cam, &settings).unwrap();
        let lists = build_fragment_lists(&scene, &cam, &settings).unwrap();
        let img2 = render_from_lists(
            &lists,
            &settings,
            scene.background_color,
            scene.background_opacity,
        );
        assert_eq!(img, img2);
    }

    #[test]
    fn placement_pre_transform_equivalence() {
        let placement = Placement {
            translation: Vector3::new(0.3, -0.1, 0.5),
            rotation: crate::math::quat_normalize(&[0.9, 0.1, -0.2, 0.15]).unwrap(),
            scale: 1.4,
        };
        let mesh = full_screen_quad(3.0, Vector3::new(0.2, 0.4, 0.9), 0.7);
        let set = one_splat(Vector3::new(0.0, 0.0, 2.5), 0.4, 0.85, [1.0, 0.3, -0.2]);

        let mut scene_placed = crate::scene::Scene::empty();
        scene_placed.mesh_objects.push((mesh.clone(), placement.clone()));
        scene_placed.splat_objects.push((set.clone(), placement.clone()));

        let mut scene_baked = crate::scene::Scene::empty();
        scene_baked
            .mesh_objects
            .push((placement.apply_to_mesh(&mesh), Placement::identity()));
        scene_baked
            .splat_objects
            .push((placement.apply_to_splats(&set), Placement::identity()));

        let cam = axis_camera(48, 48);
        let settings = RenderSettings::default();
        let a = render(&scene_placed, &cam, &settings).unwrap();
        let b = render(&scene_baked, &cam, &settings).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-6);
    }

    #[test]
    fn unsupported_msaa_is_an_error() {
        let scene = crate::scene::Scene::empty();
        let cam = axis_camera(16, 16);
        let settings = RenderSettings {
            msaa_samples: 3,
            ..RenderSettings::default()
        };
        assert!(matches!(
            render(&scene, &cam, &settings),
            Err(RenderError::UnsupportedMsaa(3))
        ));
    }

    #[test]
    fn naive_and_exact_differ_on_partial_coverage() {
        // A thin triangle crossing pixels diagonally.
        let mesh = TriMesh {
            vertices: vec![
                Vector3::new(-1.0, -0.01, 2.0),
                Vector3::new(1.0, 0.05, 2.0),
                Vector3::new(-1.0, 0.01, 2.0),
            ],
            faces: vec![[0, 1, 2]],
            vertex_colors: None,
            base_color: Vector3::new(1.0, 1.0, 1.0),
            mesh_opacity: 1.0,
        };
        let mut scene = crate::scene::Scene::empty();
        scene.mesh_objects.push((mesh, Placement::identity()));
        let cam = axis_camera(64, 64);
        let exact = render(&scene, &cam, &RenderSettings::default()).unwrap();
        let naive = render(
            &scene,
            &cam,
            &RenderSettings {
                blend_mode: BlendMode::Naive,
                ..RenderSettings::default()
            },
        )
        .unwrap();
        assert!(exact.mean_abs_diff(&naive) > 1e-4);
    }

    #[test]
    fn determinism_across_thread_counts() {
        let mut scene = crate::scene::Scene::empty();
        scene
            .mesh_objects
            .push((full_screen_quad(3.0, Vector3::new(0.9, 0.6, 0.2), 0.6), Placement::identity()));
        scene.splat_objects.push((
            one_splat(Vector3::new(0.1, -0.2, 2.0), 0.3, 0.8, [0.5, -0.5, 1.0]),
            Placement::identity(),
        ));
        let cam = axis_camera(40, 40);
        let settings = RenderSettings::default();

        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| render(&scene, &cam, &settings).unwrap());
        let b = pool4.install(|| render(&scene, &cam, &settings).unwrap());
        assert_eq!(a, b);
    }
}
