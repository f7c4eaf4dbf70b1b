//! Render the color-overflow construction in every blend mode and compare
//! each against the supersampled ground truth. The whole-pixel entity mode
//! overshoots (color overflow); the depth-adjacent entity mode does not.
//!
//!     cargo run --release --example blend_modes [out_dir]

use splatmesh::oracle::supersample_render;
use splatmesh::scene::{BlendMode, RenderSettings};
use splatmesh::testscenes::{builtin_camera, gen_overflow_scene};

fn main() -> anyhow::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/example-out".to_string());
    std::fs::create_dir_all(&out_dir)?;

    // The overflow construction is laid out for the 64x64 axis camera;
    // its near edge crosses pixel centers only at that size.
    let scene = gen_overflow_scene();
    let camera = builtin_camera("overflow", 64, 64);
    let reference = supersample_render(&scene, &camera, 16, &RenderSettings::default())?.image;
    splatmesh::io::write_png(&reference, format!("{out_dir}/overflow_reference.png"))?;

    println!("{:<20} {:>10} {:>12}", "mode", "mae", "max overshoot");
    for mode in [
        BlendMode::Naive,
        BlendMode::WholePixelEntity,
        BlendMode::PaperLiteral,
        BlendMode::ExactEntity,
    ] {
        let settings = RenderSettings {
            blend_mode: mode,
            ..RenderSettings::default()
        };
        let image = splatmesh::raster::render(&scene, &camera, &settings)?;
        let mae = image.mean_abs_diff(&reference);
        let overshoot = image
            .pixels
            .iter()
            .zip(&reference.pixels)
            .map(|(a, b)| (a - b).max())
            .fold(0.0f64, f64::max);
        println!("{:<20} {mae:>10.5} {overshoot:>12.5}", mode.to_string());
        splatmesh::io::write_png(&image, format!("{out_dir}/overflow_{mode}.png"))?;
    }
    println!("images written to {out_dir}/");
    Ok(())
}
