//! Small shared math helpers: quaternion conversions and rotation logs.
//!
//! Quaternions are stored as `[w, x, y, z]` arrays throughout the crate.

use nalgebra::{Matrix3, Vector3};

/// Squared norm of a `[w, x, y, z]` quaternion.
pub fn quat_norm_sq(q: &[f64; 4]) -> f64 {
    q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]
}

/// Normalize a quaternion. Returns `None` when the norm is below `1e-8`.
pub fn quat_normalize(q: &[f64; 4]) -> Option<[f64; 4]> {
    let n = quat_norm_sq(q).sqrt();
    if n < 1e-8 {
        return None;
    }
    Some([q[0] / n, q[1] / n, q[2] / n, q[3] / n])
}

/// Hamilton product `a * b`.
pub fn quat_mul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    let [aw, ax, ay, az] = *a;
    let [bw, bx, by, bz] = *b;
    [
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ]
}

/// Rotation matrix of a unit quaternion `[w, x, y, z]`.
pub fn quat_to_matrix(q: &[f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = *q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Quaternion `[w, x, y, z]` of a rotation matrix (assumed orthonormal, det +1).
///
/// Uses the Shepperd branch selection for numerical stability.
pub fn matrix_to_quat(m: &Matrix3<f64>) -> [f64; 4] {
    let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        [
            0.25 * s,
            (m[(2, 1)] - m[(1, 2)]) / s,
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(1, 0)] - m[(0, 1)]) / s,
        ]
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        [
            (m[(2, 1)] - m[(1, 2)]) / s,
            0.25 * s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
        ]
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
        [
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            0.25 * s,
            (m[(1, 2)] + m[(2, 1)]) / s,
        ]
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
        [
            (m[(1, 0)] - m[(0, 1)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
            (m[(1, 2)] + m[(2, 1)]) / s,
            0.25 * s,
        ]
    }
}

/// Axis-angle log of a rotation matrix, with the angle clamped to
/// `[0, pi - 1e-4]` so the exp map stays well-conditioned near antipodes.
pub fn rotation_log(m: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((m[(0, 0)] + m[(1, 1)] + m[(2, 2)] - 1.0) * 0.5).clamp(-1.0, 1.0);
    let angle = cos.acos();
    if angle < 1e-12 {
        return Vector3::zeros();
    }
    let axis = if angle > std::f64::consts::PI - 1e-6 {
        // Near pi the antisymmetric part vanishes; recover the axis from
        // the symmetric part m = 2*a*a^T - I.
        let xx = ((m[(0, 0)] + 1.0) * 0.5).max(0.0).sqrt();
        let yy = ((m[(1, 1)] + 1.0) * 0.5).max(0.0).sqrt();
        let zz = ((m[(2, 2)] + 1.0) * 0.5).max(0.0).sqrt();
        let mut a = Vector3::new(xx, yy, zz);
        // Fix relative signs from the off-diagonal entries.
        if a.x >= a.y && a.x >= a.z {
            a.y = a.y.copysign(m[(0, 1)] + m[(1, 0)]);
            a.z = a.z.copysign(m[(0, 2)] + m[(2, 0)]);
        } else if a.y >= a.z {
            a.x = a.x.copysign(m[(0, 1)] + m[(1, 0)]);
            a.z = a.z.copysign(m[(1, 2)] + m[(2, 1)]);
        } else {
            a.x = a.x.copysign(m[(0, 2)] + m[(2, 0)]);
            a.y = a.y.copysign(m[(1, 2)] + m[(2, 1)]);
        }
        a.normalize()
    } else {
        let v = Vector3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        );
        v / (2.0 * angle.sin())
    };
    axis * angle.min(std::f64::consts::PI - 1e-4)
}

/// Exp map: axis-angle vector to rotation matrix (Rodrigues).
pub fn rotation_exp(v: &Vector3<f64>) -> Matrix3<f64> {
    let angle = v.norm();
    if angle < 1e-12 {
        return Matrix3::identity();
    }
    let axis = v / angle;
    let k = Matrix3::new(
        0.0, -axis.z, axis.y, //
        axis.z, 0.0, -axis.x, //
        -axis.y, axis.x, 0.0,
    );
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}
