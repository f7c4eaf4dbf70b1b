//! Unified software rendering and deformation for 3D Gaussian splats and
//! semi-transparent triangle meshes.
//!
//! The rasterizer builds per-pixel depth-sorted fragment lists mixing
//! Gaussian and triangle fragments and composites them in a single
//! front-to-back pass; runs of depth-adjacent triangles form entities with
//! sub-pixel (MSAA) transmittance so mesh edges stay anti-aliased without
//! color overflow across interleaved Gaussians.
//!
//! The deformation toolkit binds trained splats to a proxy mesh by camera
//! ray casting and transfers mesh deformations to the splats through
//! barycentrically blended per-vertex transforms.
//!
//! See the `examples/` directory for runnable entry points per capability:
//! rendering builtin scenes, comparing blend modes, oracle diffing, and
//! bind/deform round trips.

pub mod binding;
pub mod cli;
pub mod deform;
pub mod img;
pub mod io;
pub mod math;
pub mod oracle;
pub mod project;
pub mod raster;
pub mod scene;
pub mod testscenes;

pub use img::Image;
pub use scene::{
    validate_scene, BlendMode, Camera, Diagnostic, Placement, RenderSettings, Scene, SplatSet,
    TriMesh,
};
