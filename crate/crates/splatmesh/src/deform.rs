//! Deformation transfer from a (rest, deformed) proxy-mesh pair to bound
//! Gaussians: per-vertex deformation gradients are estimated from one-ring
//! neighborhoods, polar-decomposed into rotation and shear, interpolated
//! barycentrically to the anchor points, averaged over each Gaussian's
//! anchors, and applied to the mean and covariance.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::binding::BindingTable;
use crate::math::{matrix_to_quat, quat_to_matrix, rotation_exp, rotation_log};
use crate::project::world_covariance;
use crate::scene::{SplatSet, TriMesh};

/// Per-vertex deformation of a mesh pair: offset, rotation in log
/// (axis-angle) form, and symmetric shear, plus the rest topology needed
/// to interpolate over faces.
#[derive(Debug, Clone)]
pub struct VertexTransformField {
    pub offsets: Vec<Vector3<f64>>,
    pub log_rotations: Vec<Vector3<f64>>,
    pub shears: Vec<Matrix3<f64>>,
    /// Faces of the rest mesh the field was computed on.
    pub faces: Vec<[u32; 3]>,
    /// Content hash of the rest mesh, checked against binding tables.
    pub rest_mesh_hash: String,
    /// Vertices with an empty or degenerate one-ring that received the
    /// identity transform.
    pub degenerate_vertices: usize,
}

/// Deformation blended at one anchor point. The rotation stays in log
/// space; the exponential is applied after averaging over anchors.
#[derive(Debug, Clone, Copy)]
pub struct BlendedTransform {
    pub offset: Vector3<f64>,
    pub log_rotation: Vector3<f64>,
    pub shear: Matrix3<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DeformStats {
    /// Anchors that used the nearest-point fallback instead of a ray hit.
    pub fallback_anchors: usize,
    /// Gaussians whose anchor rotations disagree by more than pi/2,
    /// where log-space averaging degrades.
    pub wide_rotation_gaussians: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum DeformError {
    #[error("rest and deformed meshes differ in topology: {0}")]
    TopologyMismatch(String),
    #[error("binding table was built against a different mesh (hash mismatch)")]
    HashMismatch,
    #[error("binding table does not match the splat set: {0}")]
    TableMismatch(String),
}

/// Polar decomposition `d = r * s` via SVD, with the rotation determinant
/// corrected to +1 by negating the last singular direction. `s` is
/// symmetric (positive semi-definite when `d` has positive determinant).
pub fn polar_decompose(d: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let svd = nalgebra::SVD::new(*d, true, true);
    let mut u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let mut sv = svd.singular_values;
    let r = u * v_t;
    if r.determinant() < 0.0 {
        for i in 0..3 {
            u[(i, 2)] = -u[(i, 2)];
        }
        sv[2] = -sv[2];
    }
    let r = u * v_t;
    let s = v_t.transpose() * Matrix3::from_diagonal(&sv) * v_t;
    (r, s)
}

fn one_rings(vertex_count: usize, faces: &[[u32; 3]]) -> Vec<Vec<u32>> {
    let mut rings = vec![Vec::new(); vertex_count];
    for f in faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            rings[a as usize].push(b);
            rings[b as usize].push(a);
        }
    }
    for ring in &mut rings {
        ring.sort_unstable();
        ring.dedup();
    }
    rings
}

/// Estimate per-vertex deformation (offset, rotation, shear) from a rest
/// and deformed mesh sharing topology. The local deformation gradient
/// `D_v` minimizes the one-ring edge residual and is regularized with
/// `lambda = 1e-8 * trace` before inversion; it is exact for globally
/// affine deformations.
pub fn vertex_deformation_gradients(
    rest: &TriMesh,
    deformed: &TriMesh,
) -> Result<VertexTransformField, DeformError> {
    if rest.vertices.len() != deformed.vertices.len() {
        return Err(DeformError::TopologyMismatch(format!(
            "vertex counts {} vs {}",
            rest.vertices.len(),
            deformed.vertices.len()
        )));
    }
    if rest.faces != deformed.faces {
        return Err(DeformError::TopologyMismatch("face lists differ".to_string()));
    }

    let rings = one_rings(rest.vertices.len(), &rest.faces);
    let per_vertex: Vec<(Vector3<f64>, Vector3<f64>, Matrix3<f64>, bool)> = (0..rest
        .vertices
        .len())
        .into_par_iter()
        .map(|v| {
            let p = rest.vertices[v];
            let p_def = deformed.vertices[v];
            let offset = p_def - p;
            let ring = &rings[v];

            let mut a = Matrix3::zeros();
            let mut b = Matrix3::zeros();
            for &u in ring {
                let e = rest.vertices[u as usize] - p;
                let e_def = deformed.vertices[u as usize] - p_def;
                a += e * e.transpose();
                b += e_def * e.transpose();
            }
            let trace = a.trace();
            if ring.is_empty() || trace <= 1e-30 {
                return (offset, Vector3::zeros(), Matrix3::identity(), true);
            }
            let lambda = 1e-8 * trace;
            let Some(a_inv) = (a + Matrix3::identity() * lambda).try_inverse() else {
                return (offset, Vector3::zeros(), Matrix3::identity(), true);
            };
            let d = b * a_inv;
            let (r, s) = polar_decompose(&d);
            (offset, rotation_log(&r), s, false)
        })
        .collect();

    let degenerate = per_vertex.iter().filter(|e| e.3).count();
    if degenerate > 0 {
        log::warn!("{degenerate} vertices had degenerate one-rings; using identity transforms");
    }
    Ok(VertexTransformField {
        offsets: per_vertex.iter().map(|e| e.0).collect(),
        log_rotations: per_vertex.iter().map(|e| e.1).collect(),
        shears: per_vertex.iter().map(|e| e.2).collect(),
        faces: rest.faces.clone(),
        rest_mesh_hash: rest.content_hash(),
        degenerate_vertices: degenerate,
    })
}

/// Barycentrically blend the field of one face at (u, v, w). Offsets and
/// shears blend linearly; rotations blend in log space.
pub fn blend_at_point(
    field: &VertexTransformField,
    face: u32,
    bary: &[f64; 3],
) -> BlendedTransform {
    let [ia, ib, ic] = field.faces[face as usize];
    let (ia, ib, ic) = (ia as usize, ib as usize, ic as usize);
    let (u, v, w) = (bary[0], bary[1], bary[2]);
    BlendedTransform {
        offset: field.offsets[ia] * u + field.offsets[ib] * v + field.offsets[ic] * w,
        log_rotation: field.log_rotations[ia] * u
            + field.log_rotations[ib] * v
            + field.log_rotations[ic] * w,
        shear: field.shears[ia] * u + field.shears[ib] * v + field.shears[ic] * w,
    }
}

/// Re-factor a covariance into (unit quaternion, scales) by symmetric
/// eigendecomposition, choosing the eigenvector permutation and signs that
/// best align with the reference rotation so that near-identity
/// deformations reproduce the input factors.
fn refactor_covariance(
    cov: &Matrix3<f64>,
    ref_rotation: &Matrix3<f64>,
    ref_quat: &[f64; 4],
) -> ([f64; 4], Vector3<f64>) {
    // A covariance that is diagonal in the reference frame (up to noise
    // from the regularized gradient fit) keeps the reference frame: pure
    // rotations and near-identity deformations reproduce the input factors
    // instead of picking up eigenvector jitter amplified by the eigengap.
    let m = ref_rotation.transpose() * cov * ref_rotation;
    let max_diag = m[(0, 0)].abs().max(m[(1, 1)].abs()).max(m[(2, 2)].abs());
    let max_off = m[(0, 1)]
        .abs()
        .max(m[(0, 2)].abs())
        .max(m[(1, 0)].abs())
        .max(m[(1, 2)].abs())
        .max(m[(2, 0)].abs())
        .max(m[(2, 1)].abs());
    if max_off <= 1e-4 * max_diag {
        let scales = Vector3::new(
            m[(0, 0)].max(1e-12).sqrt(),
            m[(1, 1)].max(1e-12).sqrt(),
            m[(2, 2)].max(1e-12).sqrt(),
        );
        return (*ref_quat, scales);
    }

    let eig = nalgebra::SymmetricEigen::new(*cov);
    let q = eig.eigenvectors;
    let lambda = eig.eigenvalues;

    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best_perm = PERMS[0];
    let mut best_score = f64::NEG_INFINITY;
    for perm in PERMS {
        let mut score = 0.0;
        for (j, &p) in perm.iter().enumerate() {
            score += q.column(p).dot(&ref_rotation.column(j)).abs();
        }
        if score > best_score {
            best_score = score;
            best_perm = perm;
        }
    }

    let mut rot = Matrix3::zeros();
    let mut scales = Vector3::zeros();
    let mut dots = [0.0f64; 3];
    for (j, &p) in best_perm.iter().enumerate() {
        let dot = q.column(p).dot(&ref_rotation.column(j));
        let sign = if dot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..3 {
            rot[(i, j)] = sign * q[(i, p)];
        }
        dots[j] = dot.abs();
        scales[j] = lambda[p].max(1e-12).sqrt();
    }
    if rot.determinant() < 0.0 {
        // Flip the least-aligned eigenvector; the covariance is unchanged.
        let j = dots
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(j, _)| j)
            .unwrap();
        for i in 0..3 {
            rot[(i, j)] = -rot[(i, j)];
        }
    }

    let mut quat = matrix_to_quat(&rot);
    let dot: f64 = quat.iter().zip(ref_quat).map(|(a, b)| a * b).sum();
    if dot < 0.0 {
        for c in &mut quat {
            *c = -*c;
        }
    }
    (quat, scales)
}

/// Apply the vertex transform field to every bound Gaussian: blend
/// (offset, log rotation, shear) at each anchor, average over the anchors,
/// then update mean and covariance as `mu' = mu + mean(offset)` and
/// `cov' = (R'S') cov (R'S')^T` with `R' = exp(mean log R)`, `S' = mean S`.
/// Opacities and SH coefficients are copied unchanged.
pub fn apply_deformation(
    set: &SplatSet,
    binding: &BindingTable,
    field: &VertexTransformField,
) -> Result<SplatSet, DeformError> {
    apply_deformation_with_stats(set, binding, field).map(|(s, _)| s)
}

/// [`apply_deformation`] plus fallback/rotation-spread counters.
pub fn apply_deformation_with_stats(
    set: &SplatSet,
    binding: &BindingTable,
    field: &VertexTransformField,
) -> Result<(SplatSet, DeformStats), DeformError> {
    if binding.mesh_hash != field.rest_mesh_hash {
        return Err(DeformError::HashMismatch);
    }
    if binding.gaussian_count != set.len() {
        return Err(DeformError::TableMismatch(format!(
            "table has {} gaussians, set has {}",
            binding.gaussian_count,
            set.len()
        )));
    }
    if binding.proxy_face_count as usize != field.faces.len() {
        return Err(DeformError::TableMismatch(format!(
            "table built for {} faces, field has {}",
            binding.proxy_face_count,
            field.faces.len()
        )));
    }

    let results: Vec<(Vector3<f64>, [f64; 4], Vector3<f64>, bool, usize)> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let anchors = binding.anchors_of(i);
            let n = anchors.len() as f64;
            let mut mean_offset = Vector3::zeros();
            let mut mean_log = Vector3::zeros();
            let mut mean_shear = Matrix3::zeros();
            let mut logs = Vec::with_capacity(anchors.len());
            let mut fallbacks = 0usize;
            for anchor in anchors {
                let t = blend_at_point(field, anchor.face, &anchor.bary);
                mean_offset += t.offset;
                mean_log += t.log_rotation;
                mean_shear += t.shear;
                logs.push(t.log_rotation);
                fallbacks += anchor.fallback as usize;
            }
            mean_offset /= n;
            mean_log /= n;
            mean_shear /= n;

            // Log-space averaging degrades when anchor rotations spread
            // beyond pi/2; surface it instead of silently blending.
            let mut wide = false;
            if logs.len() > 1 {
                let rots: Vec<Matrix3<f64>> = logs.iter().map(rotation_exp).collect();
                'outer: for a in 0..rots.len() {
                    for b in a + 1..rots.len() {
                        let rel = rots[a].transpose() * rots[b];
                        let cos = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
                        if cos.acos() > std::f64::consts::FRAC_PI_2 {
                            wide = true;
                            break 'outer;
                        }
                    }
                }
            }

            let rot_prime = rotation_exp(&mean_log);
            let linear = rot_prime * mean_shear;
            let cov = world_covariance(&set.rotations[i], &set.scales[i]);
            let cov_prime = linear * cov * linear.transpose();

            let ref_rot = rot_prime * quat_to_matrix(&set.rotations[i]);
            let ref_quat = matrix_to_quat(&ref_rot);
            let (mut quat, scales) = refactor_covariance(&cov_prime, &ref_rot, &ref_quat);
            // Keep the hemisphere of the input quaternion for coherence
            // across frames.
            let dot: f64 = quat.iter().zip(&set.rotations[i]).map(|(a, b)| a * b).sum();
            if dot < 0.0 {
                for c in &mut quat {
                    *c = -*c;
                }
            }

            (set.positions[i] + mean_offset, quat, scales, wide, fallbacks)
        })
        .collect();

    let mut stats = DeformStats::default();
    for r in &results {
        stats.wide_rotation_gaussians += r.3 as usize;
        stats.fallback_anchors += r.4;
    }
    if stats.wide_rotation_gaussians > 0 {
        log::warn!(
            "{} gaussians have anchor rotations spread beyond pi/2; \
             log-space averaging may be inaccurate",
            stats.wide_rotation_gaussians
        );
    }

    let out = SplatSet {
        positions: results.iter().map(|r| r.0).collect(),
        rotations: results.iter().map(|r| r.1).collect(),
        scales: results.iter().map(|r| r.2).collect(),
        opacities: set.opacities.clone(),
        sh_degree: set.sh_degree,
        sh_coeffs: set.sh_coeffs.clone(),
    };
    Ok((out, stats))
}

/// Zero all view-dependent (degree >= 1) SH coefficients in place. Useful
/// after large rotations, since SH coefficients are not rotated by
/// [`apply_deformation`].
pub fn zero_view_dependent_sh(set: &mut SplatSet) {
    let n = SplatSet::coeffs_per_channel(set.sh_degree);
    if n <= 1 {
        return;
    }
    for g in 0..set.len() {
        for ch in 0..3 {
            let base = g * 3 * n + ch * n;
            for c in &mut set.sh_coeffs[base + 1..base + n] {
                *c = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binding::{Anchor, BindMode};
    use approx::assert_relative_eq;

    fn tetra() -> TriMesh {
        TriMesh {
            vertices: vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
                Vector3::new(0.0, 0.0, 1.0),
            ],
            faces: vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
            vertex_colors: None,
            base_color: Vector3::new(0.5, 0.5, 0.5),
            mesh_opacity: 1.0,
        }
    }

    fn transform_mesh(mesh: &TriMesh, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> TriMesh {
        TriMesh {
            vertices: mesh.vertices.iter().map(f).collect(),
            ..mesh.clone()
        }
    }

    #[test]
    fn identity_pair_gives_identity_field() {
        let rest = tetra();
        let field = vertex_deformation_gradients(&rest, &rest).unwrap();
        for v in 0..rest.vertices.len() {
            assert!(field.offsets[v].norm() < 1e-12);
            assert!(field.log_rotations[v].norm() < 1e-6);
            assert!((field.shears[v] - Matrix3::identity()).norm() < 1e-6);
        }
    }

    #[test]
    fn uniform_scale_recovered_exactly() {
        let rest = tetra();
        let deformed = transform_mesh(&rest, |p| p * 2.0);
        let field = vertex_deformation_gradients(&rest, &deformed).unwrap();
        for v in 0..rest.vertices.len() {
            assert!((field.offsets[v] - rest.vertices[v]).norm() < 1e-12);
            assert!(field.log_rotations[v].norm() < 1e-6);
            assert!((field.shears[v] - Matrix3::identity() * 2.0).norm() < 1e-6);
        }
    }

    #[test]
    fn global_rotation_recovered_exactly() {
        let rest = tetra();
        let rot = rotation_exp(&Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        let deformed = transform_mesh(&rest, |p| rot * p);
        let field = vertex_deformation_gradients(&rest, &deformed).unwrap();
        for v in 0..rest.vertices.len() {
            let r = rotation_exp(&field.log_rotations[v]);
            assert!((r - rot).norm() < 1e-6, "vertex {v}");
            assert!((field.shears[v] - Matrix3::identity()).norm() < 1e-6);
        }
    }

    #[test]
    fn topology_mismatch_is_an_error() {
        let rest = tetra();
        let mut other = rest.clone();
        other.vertices.push(Vector3::zeros());
        assert!(matches!(
            vertex_deformation_gradients(&rest, &other),
            Err(DeformError::TopologyMismatch(_))
        ));
    }

    #[test]
    fn polar_decomposition_splits_rotation_and_stretch() {
        let rot = rotation_exp(&Vector3::new(0.2, -0.7, 0.4));
        let stretch = Matrix3::new(2.0, 0.3, 0.0, 0.3, 1.5, 0.1, 0.0, 0.1, 0.8);
        let d = rot * stretch;
        let (r, s) = polar_decompose(&d);
        assert!((r - rot).norm() < 1e-9);
        assert!((s - stretch).norm() < 1e-9);
        assert!((r * s - d).norm() < 1e-10);
        assert!((s - s.transpose()).norm() < 1e-10);
    }

    #[test]
    fn blend_with_unit_weight_returns_vertex_transform() {
        let rest = tetra();
        let deformed = transform_mesh(&rest, |p| p + Vector3::new(0.1, 0.0, 0.0));
        let field = vertex_deformation_gradients(&rest, &deformed).unwrap();
        let t = blend_at_point(&field, 0, &[1.0, 0.0, 0.0]);
        assert_relative_eq!(t.offset, field.offsets[0], epsilon = 1e-15);
        assert_relative_eq!(t.shear, field.shears[0], epsilon = 1e-15);
    }

    #[test]
    fn opposite_rotations_blend_to_identity_in_log_space() {
        // Vertices carrying +/-30 degree rotations about z blend to zero at
        // the edge midpoint: logs are (0, 0, +/-pi/6), mean is 0.
        let angle = std::f64::consts::FRAC_PI_6;
        let mut field = VertexTransformField {
            offsets: vec![Vector3::zeros(); 3],
            log_rotations: vec![
                Vector3::new(0.0, 0.0, angle),
                Vector3::new(0.0, 0.0, -angle),
                Vector3::zeros(),
            ],
            shears: vec![Matrix3::identity(); 3],
            faces: vec![[0, 1, 2]],
            rest_mesh_hash: String::new(),
            degenerate_vertices: 0,
        };
        field.rest_mesh_hash = "test".to_string();
        let t = blend_at_point(&field, 0, &[0.5, 0.5, 0.0]);
        assert!(t.log_rotation.norm() < 1e-15);
        assert_relative_eq!(rotation_exp(&t.log_rotation), Matrix3::identity(), epsilon = 1e-15);
    }

    fn single_tri_binding(mesh: &TriMesh, count: usize) -> BindingTable {
        BindingTable {
            mode: BindMode::Center,
            gaussian_count: count,
            proxy_face_count: mesh.faces.len() as u32,
            mesh_hash: mesh.content_hash(),
            anchors: (0..count)
                .map(|_| Anchor {
                    face: 0,
                    bary: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                    corner_offset: [0.0; 3],
                    fallback: false,
                })
                .collect(),
        }
    }

    fn one_gaussian() -> SplatSet {
        SplatSet {
            positions: vec![Vector3::new(0.3, 0.3, 0.1)],
            rotations: vec![crate::math::quat_normalize(&[0.9, 0.1, -0.2, 0.3]).unwrap()],
            scales: vec![Vector3::new(0.05, 0.11, 0.23)],
            opacities: vec![0.8],
            sh_degree: 0,
            sh_coeffs: vec![0.1, 0.2, 0.3],
        }
    }

    #[test]
    fn identity_deformation_is_identity_on_all_fields() {
        let rest = tetra();
        let field = vertex_deformation_gradients(&rest, &rest).unwrap();
        let set = one_gaussian();
        let binding = single_tri_binding(&rest, 1);
        let out = apply_deformation(&set, &binding, &field).unwrap();
        assert!((out.positions[0] - set.positions[0]).norm() < 1e-6);
        let qd: f64 = out.rotations[0]
            .iter()
            .zip(&set.rotations[0])
            .map(|(a, b)| a * b)
            .sum();
        assert!(qd > 1.0 - 1e-6, "quaternion changed: dot {qd}");
        assert!((out.scales[0] - set.scales[0]).norm() < 1e-6);
        assert_eq!(out.opacities, set.opacities);
        assert_eq!(out.sh_coeffs, set.sh_coeffs);
    }

    #[test]
    fn translation_shifts_means_only() {
        let rest = tetra();
        let t0 = Vector3::new(0.4, -1.2, 2.0);
        let deformed = transform_mesh(&rest, |p| p + t0);
        let field = vertex_deformation_gradients(&rest, &deformed).unwrap();
        let set = one_gaussian();
        let binding = single_tri_binding(&rest, 1);
        let out = apply_deformation(&set, &binding, &field).unwrap();
        assert!((out.positions[0] - (set.positions[0] + t0)).norm() < 1e-9);
        assert!((out.scales[0] - set.scales[0]).norm() < 1e-6);
    }

    #[test]
    fn hash_mismatch_is_an_error() {
        let rest = tetra();
        let field = vertex_deformation_gradients(&rest, &rest).unwrap();
        let set = one_gaussian();
        let mut binding = single_tri_binding(&rest, 1);
        binding.mesh_hash = "stale".to_string();
        assert!(matches!(
            apply_deformation(&set, &binding, &field),
            Err(DeformError::HashMismatch)
        ));
    }

    #[test]
    fn zeroing_high_sh_keeps_dc() {
        let mut set = one_gaussian();
        set.sh_degree = 1;
        set.sh_coeffs = (0..12).map(|i| i as f64).collect();
        zero_view_dependent_sh(&mut set);
        assert_eq!(set.sh_coeffs[0], 0.0); // dc of channel 0 (index 0) kept
        assert_eq!(set.sh_coeffs[4], 4.0); // dc of channel 1 kept
        assert_eq!(set.sh_coeffs[1], 0.0);
        assert_eq!(set.sh_coeffs[5], 0.0);
        assert_eq!(set.sh_coeffs[11], 0.0);
    }
}
