//! Projection of 3D Gaussians to screen-space 2D Gaussians (EWA) and
//! evaluation of per-pixel alpha and view-dependent color.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};

use crate::math::quat_to_matrix;
use crate::scene::Camera;

/// Alpha ceiling keeping transmittance strictly positive.
pub const ALPHA_CEILING: f64 = 0.99;

/// Real SH basis constants, degree 0..3.
pub const SH_C0: f64 = 0.28209479177387814;
pub const SH_C1: f64 = 0.4886025119029199;
pub const SH_C2: [f64; 5] = [
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
];
pub const SH_C3: [f64; 7] = [
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
];

/// A Gaussian's screen-space footprint after EWA projection.
#[derive(Debug, Clone, Copy)]
pub struct ProjectedSplat {
    /// Projected mean in pixel coordinates.
    pub mean2d: Vector2<f64>,
    /// Inverse of the dilated 2D covariance.
    pub cov2d_inv: Matrix2<f64>,
    /// View-space z of the mean, used as the sorting depth.
    pub depth: f64,
    /// View-dependent RGB from spherical harmonics, clamped >= 0.
    pub color: Vector3<f64>,
    /// Per-Gaussian opacity before the spatial falloff.
    pub base_opacity: f64,
    /// 3 sigma extent in pixels.
    pub screen_radius: f64,
}

impl ProjectedSplat {
    /// Alpha at a point in pixel coordinates, or `None` outside the
    /// screen radius. Capped at [`ALPHA_CEILING`].
    pub fn alpha_at(&self, px: f64, py: f64) -> Option<f64> {
        let d = Vector2::new(px, py) - self.mean2d;
        if d.norm_squared() > self.screen_radius * self.screen_radius {
            return None;
        }
        Some(eval_fragment_alpha(self, Vector2::new(px, py)))
    }
}

/// One Gaussian's world-space parameters, the unit the projector consumes.
#[derive(Debug, Clone, Copy)]
pub struct GaussianParams<'a> {
    pub position: Vector3<f64>,
    /// Unit quaternion `[w, x, y, z]`.
    pub rotation: [f64; 4],
    pub scale: Vector3<f64>,
    pub opacity: f64,
    pub sh_degree: usize,
    /// `[channel][coeff]` layout, `3 * (sh_degree+1)^2` values.
    pub sh: &'a [f64],
}

/// 3D covariance `R diag(s)^2 R^T` of a Gaussian.
pub fn world_covariance(rotation: &[f64; 4], scale: &Vector3<f64>) -> Matrix3<f64> {
    let r = quat_to_matrix(rotation);
    let s2 = Matrix3::from_diagonal(&Vector3::new(
        scale.x * scale.x,
        scale.y * scale.y,
        scale.z * scale.z,
    ));
    r * s2 * r.transpose()
}

/// EWA projection of one Gaussian. Returns `None` when the splat is culled:
/// mean at or behind the near plane, footprint entirely outside the
/// viewport, or degenerate 2D covariance.
pub fn project_splat(
    gaussian: &GaussianParams,
    camera: &Camera,
    dilation: f64,
) -> Option<ProjectedSplat> {
    let p_cam = camera.to_camera(&gaussian.position);
    if p_cam.z <= camera.near {
        return None;
    }

    let cov3d = world_covariance(&gaussian.rotation, &gaussian.scale);
    let cov_cam = camera.rotation * cov3d * camera.rotation.transpose();

    let (x, y, z) = (p_cam.x, p_cam.y, p_cam.z);
    let jac = Matrix2x3::new(
        camera.fx / z,
        0.0,
        -camera.fx * x / (z * z),
        0.0,
        camera.fy / z,
        -camera.fy * y / (z * z),
    );
    let mut cov2d = jac * cov_cam * jac.transpose();
    cov2d[(0, 0)] += dilation;
    cov2d[(1, 1)] += dilation;

    let det = cov2d[(0, 0)] * cov2d[(1, 1)] - cov2d[(0, 1)] * cov2d[(1, 0)];
    if det <= 1e-12 || cov2d[(0, 0)] <= 0.0 || cov2d[(1, 1)] <= 0.0 {
        return None;
    }

    // Largest eigenvalue of the symmetric 2x2 covariance.
    let mid = 0.5 * (cov2d[(0, 0)] + cov2d[(1, 1)]);
    let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
    let screen_radius = 3.0 * lambda_max.sqrt();

    let (u, v) = camera.project(&p_cam);
    if u < -screen_radius
        || u > camera.width as f64 + screen_radius
        || v < -screen_radius
        || v > camera.height as f64 + screen_radius
    {
        return None;
    }

    let cov2d_inv = Matrix2::new(cov2d[(1, 1)], -cov2d[(0, 1)], -cov2d[(1, 0)], cov2d[(0, 0)])
        / det;

    let view_dir = (gaussian.position - camera.position()).normalize();
    let color = eval_sh_color(gaussian.sh, gaussian.sh_degree, &view_dir);

    Some(ProjectedSplat {
        mean2d: Vector2::new(u, v),
        cov2d_inv,
        depth: z,
        color,
        base_opacity: gaussian.opacity,
        screen_radius,
    })
}

/// Gaussian falloff alpha at a pixel position: `opacity * exp(-d^T C^-1 d / 2)`,
/// capped at [`ALPHA_CEILING`]. The caller drops values below the cutoff.
pub fn eval_fragment_alpha(splat: &ProjectedSplat, pixel: Vector2<f64>) -> f64 {
    let d = pixel - splat.mean2d;
    let mahal = d.dot(&(splat.cov2d_inv * d));
    if mahal < 0.0 {
        return ALPHA_CEILING.min(splat.base_opacity);
    }
    ALPHA_CEILING.min(splat.base_opacity * (-0.5 * mahal).exp())
}

/// Real spherical harmonics up to `sh_degree`, evaluated at a unit view
/// direction and dotted with the per-channel coefficients, plus 0.5,
/// clamped at 0.
pub fn eval_sh_color(sh: &[f64], sh_degree: usize, view_dir: &Vector3<f64>) -> Vector3<f64> {
    let n = (sh_degree + 1) * (sh_degree + 1);
    debug_assert_eq!(sh.len(), 3 * n);
    let mut basis = [0.0f64; 16];
    basis[0] = SH_C0;
    if sh_degree >= 1 {
        let (x, y, z) = (view_dir.x, view_dir.y, view_dir.z);
        basis[1] = -SH_C1 * y;
        basis[2] = SH_C1 * z;
        basis[3] = -SH_C1 * x;
        if sh_degree >= 2 {
            let (xx, yy, zz) = (x * x, y * y, z * z);
            basis[4] = SH_C2[0] * x * y;
            basis[5] = SH_C2[1] * y * z;
            basis[6] = SH_C2[2] * (2.0 * zz - xx - yy);
            basis[7] = SH_C2[3] * x * z;
            basis[8] = SH_C2[4] * (xx - yy);
            if sh_degree >= 3 {
                basis[9] = SH_C3[0] * y * (3.0 * xx - yy);
                basis[10] = SH_C3[1] * x * y * z;
                basis[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
                basis[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
                basis[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
                basis[14] = SH_C3[5] * z * (xx - yy);
                basis[15] = SH_C3[6] * x * (xx - 3.0 * yy);
            }
        }
    }
    let mut rgb = Vector3::zeros();
    for ch in 0..3 {
        let coeffs = &sh[ch * n..(ch + 1) * n];
        let mut acc = 0.5;
        for (b, c) in basis[..n].iter().zip(coeffs) {
            acc += b * c;
        }
        rgb[ch] = acc.max(0.0);
    }
    rgb
}
