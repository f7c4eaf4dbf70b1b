//! Command-line wiring for the render, bind, deform, bench, and diff
//! subcommands. Exit codes: 0 success, 1 internal error, 2 usage or input
//! error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;

use crate::binding::BindMode;
use crate::img::Image;
use crate::io;
use crate::oracle;
use crate::raster::{render_with_stats, RenderError, RenderStats};
use crate::scene::{BlendMode, Camera, RenderSettings, Scene};
use crate::testscenes;

/// Unified splat/mesh renderer and deformation toolkit.
#[derive(Parser)]
#[command(name = "splatmesh", version, about)]
pub struct Cli {
    /// Worker threads (default: logical cores; env fallback UNIGS_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Render a scene config or builtin scene to PNG.
    Render(RenderArgs),
    /// Bind a splat set to a proxy mesh by camera ray casting.
    Bind(BindArgs),
    /// Transfer a mesh deformation to bound splats.
    Deform(DeformArgs),
    /// Benchmark rendering with and without meshes.
    Bench(BenchArgs),
    /// Per-channel error statistics between two PNG images.
    Diff(DiffArgs),
}

#[derive(Args)]
pub struct RenderArgs {
    /// Scene config JSON.
    #[arg(long, conflicts_with = "builtin")]
    pub scene: Option<PathBuf>,
    /// Builtin scene name: overflow, nested, edge, splats.
    #[arg(long)]
    pub builtin: Option<String>,
    /// NeRF-style transforms.json; one PNG is written per frame.
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    /// Render only this frame from --cameras.
    #[arg(long)]
    pub camera_index: Option<usize>,
    /// Output PNG path (single camera) or directory (multiple).
    #[arg(long)]
    pub out: PathBuf,
    /// Blend mode override: naive, whole_pixel_entity, paper_literal,
    /// exact_entity.
    #[arg(long)]
    pub mode: Option<BlendMode>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// MSAA sample count override.
    #[arg(long)]
    pub msaa: Option<usize>,
    /// Render with the supersampling oracle at N samples per axis instead
    /// of the production rasterizer.
    #[arg(long)]
    pub supersample: Option<usize>,
}

#[derive(Args)]
pub struct BindArgs {
    /// Splat PLY to bind.
    #[arg(long)]
    pub splats: PathBuf,
    /// Proxy mesh OBJ.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Cameras JSON; omit to use synthetic orbit cameras.
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    /// Number of synthetic orbit cameras when --cameras is omitted.
    #[arg(long, default_value_t = 8)]
    pub orbit: usize,
    /// center (1 anchor) or bbx8 (8 anchors per Gaussian).
    #[arg(long, default_value = "bbx8")]
    pub mode: BindModeArg,
    /// BBX extent in standard deviations.
    #[arg(long, default_value_t = 3.0)]
    pub k_sigma: f64,
    /// Output binding table path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy)]
pub struct BindModeArg(pub BindMode);

impl std::str::FromStr for BindModeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(BindModeArg)
    }
}

#[derive(Args)]
pub struct DeformArgs {
    /// Splat PLY to deform.
    #[arg(long)]
    pub splats: PathBuf,
    /// Binding table built against the rest mesh.
    #[arg(long)]
    pub binding: PathBuf,
    /// Rest-pose proxy mesh OBJ.
    #[arg(long)]
    pub rest_mesh: PathBuf,
    /// Deformed proxy mesh OBJ.
    #[arg(long, conflicts_with = "deformed_dir")]
    pub deformed_mesh: Option<PathBuf>,
    /// Directory of per-frame deformed meshes (sorted by name).
    #[arg(long)]
    pub deformed_dir: Option<PathBuf>,
    /// Output splat PLY (single mesh) or directory (per-frame).
    #[arg(long)]
    pub out: PathBuf,
    /// Zero view-dependent SH coefficients in the output.
    #[arg(long, default_value_t = false)]
    pub zero_sh: bool,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Scene config JSON; omit to use the builtin benchmark scene.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Splat count for the builtin benchmark scene.
    #[arg(long, default_value_t = 100_000)]
    pub splats: usize,
    #[arg(long, default_value_t = 800)]
    pub width: u32,
    #[arg(long, default_value_t = 800)]
    pub height: u32,
    /// Timed iterations (after warmup).
    #[arg(long, default_value_t = 3)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DiffArgs {
    pub image_a: PathBuf,
    pub image_b: PathBuf,
    /// Write the JSON stats here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Error carrying the process exit code classification.
#[derive(Debug)]
pub enum CliError {
    /// Bad input or arguments: exit code 2.
    Usage(String),
    /// Internal failure: exit code 1.
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<io::IoError> for CliError {
    fn from(e: io::IoError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        match e {
            RenderError::InvalidScene(_) | RenderError::UnsupportedMsaa(_) => {
                CliError::Usage(e.to_string())
            }
            RenderError::TileCapacity { .. } => CliError::Internal(e.to_string()),
        }
    }
}

impl From<crate::binding::BindError> for CliError {
    fn from(e: crate::binding::BindError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<crate::deform::DeformError> for CliError {
    fn from(e: crate::deform::DeformError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Resolve the worker count: flag, then UNIGS_THREADS, then all cores.
pub fn resolve_threads(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("UNIGS_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = resolve_threads(cli.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Render(args) => cmd_render(args),
        Command::Bind(args) => cmd_bind(args),
        Command::Deform(args) => cmd_deform(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Diff(args) => cmd_diff(args),
    }
}

fn resize_camera(camera: &Camera, width: Option<u32>, height: Option<u32>) -> Camera {
    let (w, h) = (
        width.unwrap_or(camera.width),
        height.unwrap_or(camera.height),
    );
    if (w, h) == (camera.width, camera.height) {
        return camera.clone();
    }
    let sx = w as f64 / camera.width as f64;
    let sy = h as f64 / camera.height as f64;
    Camera::new(
        w,
        h,
        camera.fx * sx,
        camera.fy * sy,
        camera.cx * sx,
        camera.cy * sy,
        camera.rotation,
        camera.translation,
        camera.near,
        camera.far,
    )
    .expect("rescaling preserves rigidity")
}

fn load_render_inputs(
    args: &RenderArgs,
) -> Result<(Scene, RenderSettings, Vec<Camera>), CliError> {
    let (scene, mut settings, config_size, builtin_name) = match (&args.scene, &args.builtin) {
        (Some(path), None) => {
            let cfg = io::load_scene_config(path)?;
            (cfg.scene, cfg.settings, cfg.image_size, None)
        }
        (None, Some(name)) => {
            let scene = testscenes::builtin_scene(name).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown builtin scene '{name}' (available: {})",
                    testscenes::BUILTIN_SCENES.join(", ")
                ))
            })?;
            (scene, RenderSettings::default(), None, Some(name.clone()))
        }
        _ => {
            return Err(CliError::Usage(
                "render needs exactly one of --scene or --builtin".to_string(),
            ))
        }
    };

    if let Some(mode) = args.mode {
        settings.blend_mode = mode;
    }
    if let Some(msaa) = args.msaa {
        settings.msaa_samples = msaa;
    }

    let cameras = match &args.cameras {
        Some(path) => {
            let mut cams = io::load_cameras_json(path)?;
            if let Some(idx) = args.camera_index {
                if idx >= cams.len() {
                    return Err(CliError::Usage(format!(
                        "--camera-index {idx} out of range ({} frames)",
                        cams.len()
                    )));
                }
                cams = vec![cams.swap_remove(idx)];
            }
            cams.iter()
                .map(|c| resize_camera(c, args.width, args.height))
                .collect()
        }
        None => {
            let (w, h) = match (args.width, args.height, config_size) {
                (Some(w), Some(h), _) => (w, h),
                (None, None, Some((w, h))) => (w, h),
                (Some(w), None, _) => (w, w),
                (None, Some(h), _) => (h, h),
                (None, None, None) => (256, 256),
            };
            let name = builtin_name.as_deref().unwrap_or("splats");
            vec![testscenes::builtin_camera(name, w, h)]
        }
    };
    Ok((scene, settings, cameras))
}

fn render_one(
    scene: &Scene,
    camera: &Camera,
    settings: &RenderSettings,
    supersample: Option<usize>,
) -> Result<Image, CliError> {
    match supersample {
        Some(k) => Ok(oracle::supersample_render(scene, camera, k, settings)?.image),
        None => Ok(render_with_stats(scene, camera, settings)?.0),
    }
}

pub fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let (scene, settings, cameras) = load_render_inputs(&args)?;
    if cameras.len() == 1 {
        let img = render_one(&scene, &cameras[0], &settings, args.supersample)?;
        if let Some(parent) = args.out.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| CliError::Usage(format!("cannot create {parent:?}: {e}")))?;
            }
        }
        io::write_png(&img, &args.out)?;
        println!("wrote {}", args.out.display());
    } else {
        std::fs::create_dir_all(&args.out)
            .map_err(|e| CliError::Usage(format!("cannot create {:?}: {e}", args.out)))?;
        for (i, camera) in cameras.iter().enumerate() {
            let img = render_one(&scene, camera, &settings, args.supersample)?;
            let path = args.out.join(format!("render_{i:04}.png"));
            io::write_png(&img, &path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

pub fn cmd_bind(args: BindArgs) -> Result<(), CliError> {
    let set = io::load_splat_ply(&args.splats)?;
    let mesh = io::load_obj(&args.mesh, Vector3::new(0.7, 0.7, 0.7), 1.0)?;
    let cameras = match &args.cameras {
        Some(path) => io::load_cameras_json(path)?,
        None => {
            if args.orbit == 0 {
                return Err(CliError::Usage("--orbit must be at least 1".to_string()));
            }
            let center = mesh_centroid(&mesh);
            let radius = mesh
                .vertices
                .iter()
                .map(|v| (v - center).norm())
                .fold(0.0, f64::max);
            testscenes::gen_orbit_cameras(args.orbit, radius * 3.0 + 1e-6, center, 800, 800)
        }
    };
    let table = crate::binding::bind(&set, &mesh, &cameras, args.mode.0, args.k_sigma)?;
    io::save_binding(&table, &args.out)?;
    println!(
        "bound {} gaussians ({} anchors, {} fallback) -> {}",
        table.gaussian_count,
        table.anchors.len(),
        table.fallback_count(),
        args.out.display()
    );
    Ok(())
}

fn mesh_centroid(mesh: &crate::scene::TriMesh) -> Vector3<f64> {
    if mesh.vertices.is_empty() {
        return Vector3::zeros();
    }
    mesh.vertices.iter().sum::<Vector3<f64>>() / mesh.vertices.len() as f64
}

pub fn cmd_deform(args: DeformArgs) -> Result<(), CliError> {
    let set = io::load_splat_ply(&args.splats)?;
    let binding = io::load_binding(&args.binding)?;
    let rest = io::load_obj(&args.rest_mesh, Vector3::new(0.7, 0.7, 0.7), 1.0)?;
    if binding.mesh_hash != rest.content_hash() {
        return Err(CliError::Usage(
            "binding table was built against a different rest mesh (hash mismatch)".to_string(),
        ));
    }

    let frames: Vec<PathBuf> = match (&args.deformed_mesh, &args.deformed_dir) {
        (Some(path), None) => vec![path.clone()],
        (None, Some(dir)) => {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| CliError::Usage(format!("cannot read {dir:?}: {e}")))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "obj"))
                .collect();
            entries.sort();
            if entries.is_empty() {
                return Err(CliError::Usage(format!("no .obj files in {dir:?}")));
            }
            entries
        }
        _ => {
            return Err(CliError::Usage(
                "deform needs exactly one of --deformed-mesh or --deformed-dir".to_string(),
            ))
        }
    };

    let multi = frames.len() > 1;
    if multi {
        std::fs::create_dir_all(&args.out)
            .map_err(|e| CliError::Usage(format!("cannot create {:?}: {e}", args.out)))?;
    }
    for (i, frame_path) in frames.iter().enumerate() {
        let deformed = io::load_obj(frame_path, Vector3::new(0.7, 0.7, 0.7), 1.0)?;
        let field = crate::deform::vertex_deformation_gradients(&rest, &deformed)?;
        let (mut out_set, stats) =
            crate::deform::apply_deformation_with_stats(&set, &binding, &field)?;
        if args.zero_sh {
            crate::deform::zero_view_dependent_sh(&mut out_set);
        }
        let out_path = if multi {
            args.out.join(format!("frame_{i:04}.ply"))
        } else {
            args.out.clone()
        };
        io::save_splat_ply(&out_set, &out_path)?;
        println!(
            "deformed {} gaussians ({} fallback anchors, {} wide-rotation) -> {}",
            out_set.len(),
            stats.fallback_anchors,
            stats.wide_rotation_gaussians,
            out_path.display()
        );
    }
    Ok(())
}

/// Frame-time statistics of one configuration.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TimingStats {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub frames: usize,
    #[serde(flatten)]
    pub render: RenderStats,
}

/// Benchmark report comparing the scene with and without its meshes.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchReport {
    pub width: u32,
    pub height: u32,
    pub iterations: usize,
    pub warmup: usize,
    pub gaussian_count: usize,
    pub triangle_count: usize,
    pub gaussians_only: TimingStats,
    pub with_mesh: TimingStats,
    /// with_mesh mean over gaussians_only mean.
    pub slowdown_ratio: f64,
}

fn time_renders(
    scene: &Scene,
    camera: &Camera,
    settings: &RenderSettings,
    iterations: usize,
    warmup: usize,
) -> Result<TimingStats, CliError> {
    let mut stats = RenderStats::default();
    for _ in 0..warmup {
        stats = render_with_stats(scene, camera, settings)?.1;
    }
    let mut times = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let start = Instant::now();
        stats = render_with_stats(scene, camera, settings)?.1;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mut sorted = times.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let median = sorted[sorted.len() / 2];
    let p95 = sorted[((sorted.len() as f64 * 0.95).ceil() as usize - 1).min(sorted.len() - 1)];
    Ok(TimingStats {
        mean_ms: mean,
        median_ms: median,
        p95_ms: p95,
        frames: iterations,
        render: stats,
    })
}

/// Run the benchmark and return the report (also used by the acceptance
/// suite directly).
pub fn run_bench(
    scene: &Scene,
    camera: &Camera,
    settings: &RenderSettings,
    iterations: usize,
    warmup: usize,
) -> Result<BenchReport, CliError> {
    if iterations == 0 {
        return Err(CliError::Usage("--iterations must be at least 1".to_string()));
    }
    let mut splats_only = scene.clone();
    splats_only.mesh_objects.clear();

    let gaussians_only = time_renders(&splats_only, camera, settings, iterations, warmup)?;
    let with_mesh = time_renders(scene, camera, settings, iterations, warmup)?;
    let ratio = with_mesh.mean_ms / gaussians_only.mean_ms;

    Ok(BenchReport {
        width: camera.width,
        height: camera.height,
        iterations,
        warmup,
        gaussian_count: scene.splat_objects.iter().map(|(s, _)| s.len()).sum(),
        triangle_count: scene.mesh_objects.iter().map(|(m, _)| m.faces.len()).sum(),
        gaussians_only,
        with_mesh,
        slowdown_ratio: ratio,
    })
}

pub fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let (scene, settings) = match &args.scene {
        Some(path) => {
            let cfg = io::load_scene_config(path)?;
            (cfg.scene, cfg.settings)
        }
        None => (
            testscenes::gen_bench_scene(args.splats, 11),
            RenderSettings::default(),
        ),
    };
    let camera = testscenes::builtin_camera("bench", args.width, args.height);
    let report = run_bench(&scene, &camera, &settings, args.iterations, args.warmup)?;
    if report.slowdown_ratio > 2.0 {
        eprintln!(
            "warning: adding meshes slowed rendering by {:.2}x (> 2.0x)",
            report.slowdown_ratio
        );
    }
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Internal(format!("report serialization: {e}")))?;
    emit(&json, args.out.as_deref())
}

pub fn cmd_diff(args: DiffArgs) -> Result<(), CliError> {
    let a = io::load_png(&args.image_a)?;
    let b = io::load_png(&args.image_b)?;
    if (a.width, a.height) != (b.width, b.height) {
        return Err(CliError::Usage(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let stats = oracle::diff_stats(&a, &b);
    let psnr_json = if stats.psnr.is_infinite() {
        serde_json::Value::String("inf".to_string())
    } else {
        serde_json::json!(stats.psnr)
    };
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "mean_abs": stats.mean_abs,
        "max_abs": stats.max_abs,
        "mse": stats.mse,
        "psnr": psnr_json,
    }))
    .map_err(|e| CliError::Internal(format!("stats serialization: {e}")))?;
    emit(&json, args.out.as_deref())
}

fn emit(json: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, json)
                .map_err(|e| CliError::Usage(format!("cannot write {path:?}: {e}")))?;
            println!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}
