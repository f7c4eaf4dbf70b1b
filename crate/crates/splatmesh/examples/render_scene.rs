//! Render the builtin scenes to PNG.
//!
//!     cargo run --release --example render_scene [out_dir]

use splatmesh::scene::RenderSettings;
use splatmesh::testscenes::{builtin_camera, builtin_scene, BUILTIN_SCENES};

fn main() -> anyhow::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/example-out".to_string());
    std::fs::create_dir_all(&out_dir)?;

    let settings = RenderSettings::default();
    for name in BUILTIN_SCENES {
        let scene = builtin_scene(name).expect("builtin scene");
        let camera = builtin_camera(name, 256, 256);
        let image = splatmesh::raster::render(&scene, &camera, &settings)?;
        let path = format!("{out_dir}/{name}.png");
        splatmesh::io::write_png(&image, &path)?;
        println!("{path}");
    }
    Ok(())
}
