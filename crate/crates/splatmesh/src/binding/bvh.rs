//! Axis-aligned BVH over mesh triangles with ray casting and
//! closest-point queries. Median split on the longest centroid axis,
//! leaves hold up to 4 triangles.

use nalgebra::Vector3;

use crate::scene::TriMesh;

pub const LEAF_SIZE: usize = 4;

/// Minimum ray parameter accepted as a hit.
pub const RAY_T_MIN: f64 = 1e-6;

/// Determinant cutoff below which a ray is parallel to the triangle plane.
pub const MT_DET_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct BvhNode {
    pub aabb_min: Vector3<f64>,
    pub aabb_max: Vector3<f64>,
    /// Leaf: range into `triangle_order`. Internal: `left` child index,
    /// right child is `left + 1` in `nodes`.
    pub left: u32,
    pub count: u32,
    pub start: u32,
}

impl BvhNode {
    pub fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

#[derive(Debug, Clone)]
pub struct Bvh {
    pub nodes: Vec<BvhNode>,
    /// Permutation of mesh face indices.
    pub triangle_order: Vec<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum BvhError {
    #[error("cannot build a BVH over an empty mesh")]
    EmptyMesh,
}

/// Ray-triangle intersection record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub face_index: u32,
    /// Barycentric weights of the triangle's three vertices.
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub hit_point: Vector3<f64>,
    /// Distance along the ray in units of the direction vector.
    pub ray_t: f64,
}

/// Moeller-Trumbore. Returns `(t, u, v, w)` with `t > RAY_T_MIN`, where
/// `(u, v, w)` weight vertices `(v0, v1, v2)`.
#[inline]
pub fn intersect_triangle(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    v0: &Vector3<f64>,
    v1: &Vector3<f64>,
    v2: &Vector3<f64>,
) -> Option<(f64, f64, f64, f64)> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < MT_DET_EPS {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - v0;
    let u = s.dot(&p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv_det;
    if t <= RAY_T_MIN {
        return None;
    }
    Some((t, 1.0 - u - v, u, v))
}

fn face_aabb(mesh: &TriMesh, f: usize) -> (Vector3<f64>, Vector3<f64>) {
    let [a, b, c] = mesh.face_vertices(f);
    (a.inf(&b).inf(&c), a.sup(&b).sup(&c))
}

/// Build a BVH by median split on the longest centroid axis.
pub fn build_bvh(mesh: &TriMesh) -> Result<Bvh, BvhError> {
    if mesh.faces.is_empty() {
        return Err(BvhError::EmptyMesh);
    }
    let centroids: Vec<Vector3<f64>> = (0..mesh.faces.len())
        .map(|f| {
            let [a, b, c] = mesh.face_vertices(f);
            (a + b + c) / 3.0
        })
        .collect();
    let mut order: Vec<u32> = (0..mesh.faces.len() as u32).collect();
    let mut nodes = Vec::with_capacity(2 * mesh.faces.len() / LEAF_SIZE + 2);
    nodes.push(BvhNode {
        aabb_min: Vector3::zeros(),
        aabb_max: Vector3::zeros(),
        left: 0,
        count: 0,
        start: 0,
    });
    build_node(mesh, &centroids, &mut order, 0, mesh.faces.len(), 0, &mut nodes);
    Ok(Bvh {
        nodes,
        triangle_order: order,
    })
}

fn build_node(
    mesh: &TriMesh,
    centroids: &[Vector3<f64>],
    order: &mut [u32],
    start: usize,
    end: usize,
    node_idx: usize,
    nodes: &mut Vec<BvhNode>,
) {
    let mut aabb_min = Vector3::repeat(f64::INFINITY);
    let mut aabb_max = Vector3::repeat(f64::NEG_INFINITY);
    let mut cmin = Vector3::repeat(f64::INFINITY);
    let mut cmax = Vector3::repeat(f64::NEG_INFINITY);
    for &f in &order[start..end] {
        let (lo, hi) = face_aabb(mesh, f as usize);
        aabb_min = aabb_min.inf(&lo);
        aabb_max = aabb_max.sup(&hi);
        cmin = cmin.inf(&centroids[f as usize]);
        cmax = cmax.sup(&centroids[f as usize]);
    }
    nodes[node_idx].aabb_min = aabb_min;
    nodes[node_idx].aabb_max = aabb_max;

    let len = end - start;
    if len <= LEAF_SIZE {
        nodes[node_idx].count = len as u32;
        nodes[node_idx].start = start as u32;
        return;
    }

    let extent = cmax - cmin;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = start + len / 2;
    // Median split; ties (e.g. all-coincident centroids) fall back to the
    // stable index order, which keeps the tree balanced.
    order[start..end].sort_by(|&a, &b| {
        centroids[a as usize][axis]
            .partial_cmp(&centroids[b as usize][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let left = nodes.len();
    nodes[node_idx].left = left as u32;
    nodes[node_idx].count = 0;
    nodes.push(BvhNode {
        aabb_min: Vector3::zeros(),
        aabb_max: Vector3::zeros(),
        left: 0,
        count: 0,
        start: 0,
    });
    nodes.push(BvhNode {
        aabb_min: Vector3::zeros(),
        aabb_max: Vector3::zeros(),
        left: 0,
        count: 0,
        start: 0,
    });
    build_node(mesh, centroids, order, start, mid, left, nodes);
    build_node(mesh, centroids, order, mid, end, left + 1, nodes);
}

#[inline]
fn slab_entry(
    node: &BvhNode,
    origin: &Vector3<f64>,
    inv_dir: &Vector3<f64>,
    t_max: f64,
) -> Option<f64> {
    let mut tmin = 0.0f64;
    let mut tmax = t_max;
    for axis in 0..3 {
        let t1 = (node.aabb_min[axis] - origin[axis]) * inv_dir[axis];
        let t2 = (node.aabb_max[axis] - origin[axis]) * inv_dir[axis];
        // f64::min/max drop NaNs arising from 0 * inf on boundary rays.
        tmin = tmin.max(t1.min(t2));
        tmax = tmax.min(t1.max(t2));
    }
    (tmin <= tmax).then_some(tmin)
}

/// Nearest hit of a ray against the mesh, identical to exhaustive
/// per-triangle testing. Equal-distance hits resolve to the lower face
/// index.
pub fn ray_cast(
    bvh: &Bvh,
    mesh: &TriMesh,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> Option<RayHit> {
    let inv_dir = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
    let mut best: Option<RayHit> = None;
    let mut stack = [0u32; 128];
    let mut sp = 0usize;
    stack[sp] = 0;
    sp += 1;

    while sp > 0 {
        sp -= 1;
        let node = &bvh.nodes[stack[sp] as usize];
        let t_best = best.as_ref().map_or(f64::INFINITY, |h| h.ray_t);
        let Some(entry) = slab_entry(node, origin, &inv_dir, t_best) else {
            continue;
        };
        // Strict comparison: an equal-t hit in this box may still win the
        // face-index tie-break.
        if entry > t_best {
            continue;
        }
        if node.is_leaf() {
            for &f in
                &bvh.triangle_order[node.start as usize..(node.start + node.count) as usize]
            {
                let [a, b, c] = mesh.face_vertices(f as usize);
                if let Some((t, u, v, w)) = intersect_triangle(origin, dir, &a, &b, &c) {
                    let better = match &best {
                        None => true,
                        Some(h) => t < h.ray_t || (t == h.ray_t && f < h.face_index),
                    };
                    if better {
                        best = Some(RayHit {
                            face_index: f,
                            u,
                            v,
                            w,
                            hit_point: origin + dir * t,
                            ray_t: t,
                        });
                    }
                }
            }
        } else {
            stack[sp] = node.left;
            stack[sp + 1] = node.left + 1;
            sp += 2;
            debug_assert!(sp <= stack.len());
        }
    }
    best
}

/// Closest point on a triangle to `p`, with barycentric weights
/// (Ericson's region method).
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> (Vector3<f64>, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return (a + ab * t, [1.0 - t, t, 0.0]);
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return (a + ac * t, [1.0 - t, 0.0, t]);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * t, [0.0, 1.0 - t, t]);
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

fn aabb_dist_sq(node: &BvhNode, p: &Vector3<f64>) -> f64 {
    let mut d = 0.0;
    for axis in 0..3 {
        let v = p[axis];
        let lo = node.aabb_min[axis];
        let hi = node.aabb_max[axis];
        let e = if v < lo {
            lo - v
        } else if v > hi {
            v - hi
        } else {
            0.0
        };
        d += e * e;
    }
    d
}

/// Globally nearest point on the mesh to `p`. Equal distances resolve to
/// the lower face index, matching the exhaustive fallback search.
pub fn nearest_point_on_mesh(
    bvh: &Bvh,
    mesh: &TriMesh,
    p: &Vector3<f64>,
) -> (u32, [f64; 3], Vector3<f64>, f64) {
    let mut best_face = u32::MAX;
    let mut best_bary = [0.0; 3];
    let mut best_point = Vector3::zeros();
    let mut best_d2 = f64::INFINITY;

    let mut stack = [0u32; 128];
    let mut sp = 0usize;
    stack[sp] = 0;
    sp += 1;
    while sp > 0 {
        sp -= 1;
        let node = &bvh.nodes[stack[sp] as usize];
        if aabb_dist_sq(node, p) > best_d2 {
            continue;
        }
        if node.is_leaf() {
            for &f in
                &bvh.triangle_order[node.start as usize..(node.start + node.count) as usize]
            {
                let [a, b, c] = mesh.face_vertices(f as usize);
                let (point, bary) = closest_point_on_triangle(p, &a, &b, &c);
                let d2 = (point - p).norm_squared();
                if d2 < best_d2 || (d2 == best_d2 && f < best_face) {
                    best_d2 = d2;
                    best_face = f;
                    best_bary = bary;
                    best_point = point;
                }
            }
        } else {
            stack[sp] = node.left;
            stack[sp + 1] = node.left + 1;
            sp += 2;
        }
    }
    (best_face, best_bary, best_point, best_d2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::TriMesh;

    fn single_triangle() -> TriMesh {
        TriMesh {
            vertices: vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
            ],
            faces: vec![[0, 1, 2]],
            vertex_colors: None,
            base_color: Vector3::new(0.5, 0.5, 0.5),
            mesh_opacity: 1.0,
        }
    }

    #[test]
    fn single_triangle_builds_one_leaf() {
        let bvh = build_bvh(&single_triangle()).unwrap();
        assert_eq!(bvh.nodes.len(), 1);
        assert!(bvh.nodes[0].is_leaf());
        assert_eq!(bvh.triangle_order, vec![0]);
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let mesh = TriMesh {
            vertices: vec![],
            faces: vec![],
            vertex_colors: None,
            base_color: Vector3::zeros(),
            mesh_opacity: 1.0,
        };
        assert!(matches!(build_bvh(&mesh), Err(BvhError::EmptyMesh)));
    }

    #[test]
    fn ray_through_centroid_gives_third_barycentrics() {
        let mesh = single_triangle();
        let bvh = build_bvh(&mesh).unwrap();
        let centroid = Vector3::new(1.0 / 3.0, 1.0 / 3.0, 0.0);
        let origin = Vector3::new(1.0 / 3.0, 1.0 / 3.0, -2.0);
        let hit = ray_cast(&bvh, &mesh, &origin, &(centroid - origin)).unwrap();
        assert!((hit.u - 1.0 / 3.0).abs() < 1e-6);
        assert!((hit.v - 1.0 / 3.0).abs() < 1e-6);
        assert!((hit.w - 1.0 / 3.0).abs() < 1e-6);
        let reconstructed = mesh.vertices[0] * hit.u
            + mesh.vertices[1] * hit.v
            + mesh.vertices[2] * hit.w;
        assert!((reconstructed - hit.hit_point).norm() < 1e-5);
    }

    #[test]
    fn parallel_ray_misses() {
        let mesh = single_triangle();
        let bvh = build_bvh(&mesh).unwrap();
        let origin = Vector3::new(0.2, 0.2, 1.0);
        let dir = Vector3::new(1.0, 0.0, 0.0);
        assert!(ray_cast(&bvh, &mesh, &origin, &dir).is_none());
    }

    #[test]
    fn coincident_triangles_build_and_cast() {
        let mut mesh = single_triangle();
        for _ in 0..40 {
            mesh.faces.push([0, 1, 2]);
        }
        let bvh = build_bvh(&mesh).unwrap();
        let origin = Vector3::new(0.25, 0.25, -1.0);
        let hit = ray_cast(&bvh, &mesh, &origin, &Vector3::z()).unwrap();
        // Equal-distance tie resolves to the lowest face index.
        assert_eq!(hit.face_index, 0);
    }

    #[test]
    fn closest_point_regions() {
        let a = Vector3::new(0.0, 0.0, 0.0);
        let b = Vector3::new(2.0, 0.0, 0.0);
        let c = Vector3::new(0.0, 2.0, 0.0);
        // Interior projection.
        let (p, bary) = closest_point_on_triangle(&Vector3::new(0.5, 0.5, 3.0), &a, &b, &c);
        assert!((p - Vector3::new(0.5, 0.5, 0.0)).norm() < 1e-12);
        assert!((bary[0] + bary[1] + bary[2] - 1.0).abs() < 1e-12);
        // Vertex region.
        let (p, bary) = closest_point_on_triangle(&Vector3::new(-1.0, -1.0, 0.0), &a, &b, &c);
        assert_eq!(p, a);
        assert_eq!(bary, [1.0, 0.0, 0.0]);
        // Edge region.
        let (p, _) = closest_point_on_triangle(&Vector3::new(1.0, -1.0, 0.0), &a, &b, &c);
        assert!((p - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }
}
