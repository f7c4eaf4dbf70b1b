//! Bind surface splats to an icosphere proxy, twist the proxy, and carry
//! the splats along. Renders before/after images and saves the deformed
//! splats as a PLY.
//!
//!     cargo run --release --example bind_and_deform [out_dir]

use nalgebra::Vector3;

use splatmesh::binding::{bind, BindMode};
use splatmesh::deform::{apply_deformation_with_stats, vertex_deformation_gradients};
use splatmesh::scene::{Placement, RenderSettings, Scene, TriMesh};
use splatmesh::testscenes::{gen_icosphere, gen_orbit_cameras, gen_splats_on_surface};

fn twist(mesh: &TriMesh, turns_per_unit: f64) -> TriMesh {
    TriMesh {
        vertices: mesh
            .vertices
            .iter()
            .map(|v| {
                let angle = v.y * turns_per_unit;
                let (s, c) = angle.sin_cos();
                Vector3::new(c * v.x - s * v.z, v.y, s * v.x + c * v.z)
            })
            .collect(),
        ..mesh.clone()
    }
}

fn splat_scene(set: splatmesh::scene::SplatSet) -> Scene {
    let mut scene = Scene::empty();
    scene.splat_objects.push((set, Placement::identity()));
    scene.background_color = Vector3::new(0.02, 0.02, 0.04);
    scene
}

fn main() -> anyhow::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/example-out".to_string());
    std::fs::create_dir_all(&out_dir)?;

    let rest = gen_icosphere(3);
    let splats = gen_splats_on_surface(&rest, 4000, 42);
    let cameras = gen_orbit_cameras(8, 3.0, Vector3::zeros(), 512, 512);

    let table = bind(&splats, &rest, &cameras, BindMode::Bbx8, 3.0)?;
    println!(
        "bound {} splats with {} anchors ({} fallback)",
        table.gaussian_count,
        table.anchors.len(),
        table.fallback_count()
    );

    let deformed_mesh = twist(&rest, 1.2);
    let field = vertex_deformation_gradients(&rest, &deformed_mesh)?;
    let (deformed, stats) = apply_deformation_with_stats(&splats, &table, &field)?;
    println!(
        "deformed: {} fallback anchors, {} wide-rotation gaussians",
        stats.fallback_anchors, stats.wide_rotation_gaussians
    );

    splatmesh::io::save_splat_ply(&deformed, format!("{out_dir}/twisted.ply"))?;

    let camera = cameras[0].clone();
    let settings = RenderSettings::default();
    let before = splatmesh::raster::render(&splat_scene(splats), &camera, &settings)?;
    let after = splatmesh::raster::render(&splat_scene(deformed), &camera, &settings)?;
    splatmesh::io::write_png(&before, format!("{out_dir}/sphere_rest.png"))?;
    splatmesh::io::write_png(&after, format!("{out_dir}/sphere_twisted.png"))?;
    println!("wrote {out_dir}/sphere_rest.png and {out_dir}/sphere_twisted.png");
    Ok(())
}
