//! Compare the production rasterizer against the supersampled oracle on
//! the nested-transparency scene (splats inside a semi-transparent shell).
//!
//!     cargo run --release --example oracle_diff

use splatmesh::oracle::{diff_stats, supersample_render};
use splatmesh::scene::RenderSettings;
use splatmesh::testscenes::{builtin_camera, gen_nested_scene};

fn main() -> anyhow::Result<()> {
    let scene = gen_nested_scene();
    let camera = builtin_camera("nested", 256, 256);
    let settings = RenderSettings::default();

    let production = splatmesh::raster::render(&scene, &camera, &settings)?;
    let reference = supersample_render(&scene, &camera, 16, &settings)?.image;

    let stats = diff_stats(&production, &reference);
    println!("mean abs per channel: {:?}", stats.mean_abs);
    println!("max abs per channel:  {:?}", stats.max_abs);
    println!("psnr: {:.2} dB", stats.psnr);
    Ok(())
}
