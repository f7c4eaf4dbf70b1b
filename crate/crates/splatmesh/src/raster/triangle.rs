//! Screen-space triangles: near-plane clipping, projection, coverage and
//! perspective-correct interpolation. Shared by the production rasterizer
//! and the supersampling oracle so both see identical geometry.

use nalgebra::{Vector2, Vector3};

use crate::scene::Camera;

/// A triangle after near-plane clipping and projection to pixel space.
#[derive(Debug, Clone)]
pub struct ScreenTriangle {
    /// Vertex positions in pixel coordinates.
    pub screen: [Vector2<f64>; 3],
    /// 1/z per vertex (camera-space depth).
    pub inv_z: [f64; 3],
    pub colors: [Vector3<f64>; 3],
    pub alpha: f64,
    e1: Vector2<f64>,
    e2: Vector2<f64>,
    inv_det: f64,
    pub aabb_min: Vector2<f64>,
    pub aabb_max: Vector2<f64>,
}

impl ScreenTriangle {
    /// Build from camera-space vertices with z > 0. Returns `None` when the
    /// projected triangle is degenerate (zero screen area).
    pub fn from_camera_space(
        cam_verts: &[Vector3<f64>; 3],
        colors: &[Vector3<f64>; 3],
        alpha: f64,
        camera: &Camera,
    ) -> Option<Self> {
        let mut screen = [Vector2::zeros(); 3];
        let mut inv_z = [0.0; 3];
        for i in 0..3 {
            let (u, v) = camera.project(&cam_verts[i]);
            screen[i] = Vector2::new(u, v);
            inv_z[i] = 1.0 / cam_verts[i].z;
        }
        let e1 = screen[1] - screen[0];
        let e2 = screen[2] - screen[0];
        let det = e1.x * e2.y - e1.y * e2.x;
        if det.abs() < 1e-14 {
            return None;
        }
        let aabb_min = Vector2::new(
            screen[0].x.min(screen[1].x).min(screen[2].x),
            screen[0].y.min(screen[1].y).min(screen[2].y),
        );
        let aabb_max = Vector2::new(
            screen[0].x.max(screen[1].x).max(screen[2].x),
            screen[0].y.max(screen[1].y).max(screen[2].y),
        );
        Some(Self {
            screen,
            inv_z,
            colors: *colors,
            alpha,
            e1,
            e2,
            inv_det: 1.0 / det,
            aabb_min,
            aabb_max,
        })
    }

    /// Affine screen-space barycentrics at a pixel position.
    #[inline]
    pub fn barycentric(&self, px: f64, py: f64) -> (f64, f64, f64) {
        let dx = px - self.screen[0].x;
        let dy = py - self.screen[0].y;
        let l1 = (dx * self.e2.y - dy * self.e2.x) * self.inv_det;
        let l2 = (self.e1.x * dy - self.e1.y * dx) * self.inv_det;
        (1.0 - l1 - l2, l1, l2)
    }

    /// Point-inside test (edges inclusive, orientation independent).
    #[inline]
    pub fn covers(&self, px: f64, py: f64) -> bool {
        let (l0, l1, l2) = self.barycentric(px, py);
        l0 >= 0.0 && l1 >= 0.0 && l2 >= 0.0
    }

    /// Plane-interpolated camera depth at a pixel position (1/z is affine in
    /// screen space). `None` when the extrapolated 1/z is non-positive.
    #[inline]
    pub fn depth_at(&self, px: f64, py: f64) -> Option<f64> {
        let (l0, l1, l2) = self.barycentric(px, py);
        let iz = l0 * self.inv_z[0] + l1 * self.inv_z[1] + l2 * self.inv_z[2];
        if iz <= 1e-12 {
            return None;
        }
        Some(1.0 / iz)
    }

    /// Perspective-correct color interpolation at a pixel position.
    #[inline]
    pub fn color_at(&self, px: f64, py: f64) -> Option<Vector3<f64>> {
        let (l0, l1, l2) = self.barycentric(px, py);
        let w0 = l0 * self.inv_z[0];
        let w1 = l1 * self.inv_z[1];
        let w2 = l2 * self.inv_z[2];
        let sw = w0 + w1 + w2;
        if sw <= 1e-12 {
            return None;
        }
        Some((self.colors[0] * w0 + self.colors[1] * w1 + self.colors[2] * w2) / sw)
    }
}

/// Clip a camera-space triangle against the plane z = near, keeping the
/// part in front. Emits 0, 1, or 2 triangles with linearly interpolated
/// vertex colors.
pub fn clip_triangle_near(
    verts: &[Vector3<f64>; 3],
    colors: &[Vector3<f64>; 3],
    near: f64,
) -> Vec<([Vector3<f64>; 3], [Vector3<f64>; 3])> {
    let inside: Vec<bool> = verts.iter().map(|v| v.z > near).collect();
    let n_inside = inside.iter().filter(|&&b| b).count();
    if n_inside == 0 {
        return Vec::new();
    }
    if n_inside == 3 {
        return vec![(*verts, *colors)];
    }

    // Sutherland-Hodgman on the single clip plane.
    let mut poly_v: Vec<Vector3<f64>> = Vec::with_capacity(4);
    let mut poly_c: Vec<Vector3<f64>> = Vec::with_capacity(4);
    for i in 0..3 {
        let j = (i + 1) % 3;
        if inside[i] {
            poly_v.push(verts[i]);
            poly_c.push(colors[i]);
        }
        if inside[i] != inside[j] {
            let t = (near - verts[i].z) / (verts[j].z - verts[i].z);
            poly_v.push(verts[i] + (verts[j] - verts[i]) * t);
            poly_c.push(colors[i] + (colors[j] - colors[i]) * t);
        }
    }

    let mut out = Vec::with_capacity(2);
    for k in 1..poly_v.len() - 1 {
        out.push((
            [poly_v[0], poly_v[k], poly_v[k + 1]],
            [poly_c[0], poly_c[k], poly_c[k + 1]],
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn cam() -> Camera {
        Camera::new(
            64,
            64,
            64.0,
            64.0,
            32.0,
            32.0,
            Matrix3::identity(),
            Vector3::zeros(),
            0.01,
            100.0,
        )
        .unwrap()
    }

    fn grey() -> [Vector3<f64>; 3] {
        [Vector3::new(0.5, 0.5, 0.5); 3]
    }

    #[test]
    fn centroid_is_covered_with_equal_barycentrics() {
        let verts = [
            Vector3::new(-1.0, -1.0, 2.0),
            Vector3::new(1.0, -1.0, 2.0),
            Vector3::new(0.0, 1.0, 2.0),
        ];
        let tri = ScreenTriangle::from_camera_space(&verts, &grey(), 1.0, &cam()).unwrap();
        let c = (tri.screen[0] + tri.screen[1] + tri.screen[2]) / 3.0;
        assert!(tri.covers(c.x, c.y));
        let (l0, l1, l2) = tri.barycentric(c.x, c.y);
        assert!((l0 - 1.0 / 3.0).abs() < 1e-12);
        assert!((l1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((l2 - 1.0 / 3.0).abs() < 1e-12);
        // Constant-depth triangle: plane depth equals vertex depth everywhere.
        assert!((tri.depth_at(c.x, c.y).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn flipped_winding_still_covers() {
        let verts = [
            Vector3::new(-1.0, -1.0, 2.0),
            Vector3::new(0.0, 1.0, 2.0),
            Vector3::new(1.0, -1.0, 2.0),
        ];
        let tri = ScreenTriangle::from_camera_space(&verts, &grey(), 1.0, &cam()).unwrap();
        assert!(tri.covers(32.0, 32.0));
    }

    #[test]
    fn slanted_plane_depth_matches_ray_intersection() {
        // Plane z = 2 + x in camera space; the ray through pixel (u, v)
        // has direction ((u-cx)/fx, (v-cy)/fy, 1) * z.
        let verts = [
            Vector3::new(-1.0, -1.0, 1.0),
            Vector3::new(1.0, -1.0, 3.0),
            Vector3::new(0.0, 2.0, 2.0),
        ];
        let tri = ScreenTriangle::from_camera_space(&verts, &grey(), 1.0, &cam()).unwrap();
        let c = (tri.screen[0] * 0.2 + tri.screen[1] * 0.3 + tri.screen[2] * 0.5).clone_owned();
        let depth = tri.depth_at(c.x, c.y).unwrap();
        // x = (u - cx)/fx * z on the ray, and the plane is z = 2 + x.
        let xz = (c.x - 32.0) / 64.0;
        let expected = 2.0 / (1.0 - xz);
        assert!((depth - expected).abs() < 1e-9, "{depth} vs {expected}");
    }

    #[test]
    fn clip_keeps_full_triangle_in_front() {
        let verts = [
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(1.0, 0.0, 2.0),
            Vector3::new(0.0, 1.0, 3.0),
        ];
        let out = clip_triangle_near(&verts, &grey(), 0.5);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn clip_drops_triangle_behind() {
        let verts = [
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(1.0, 0.0, -2.0),
            Vector3::new(0.0, 1.0, 0.1),
        ];
        assert!(clip_triangle_near(&verts, &grey(), 0.5).is_empty());
    }

    #[test]
    fn clip_straddling_produces_two_triangles_on_plane() {
        let verts = [
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(1.0, 0.0, 2.0),
            Vector3::new(0.0, 1.0, 2.0),
        ];
        let out = clip_triangle_near(&verts, &grey(), 0.5);
        assert_eq!(out.len(), 2);
        for (vs, _) in &out {
            for v in vs {
                assert!(v.z >= 0.5 - 1e-12);
            }
        }
    }
}
