//! ASCII OBJ loading: `v` records with optional RGB extension, `f` records
//! with fan triangulation. No materials or textures.

use std::path::Path;

use nalgebra::Vector3;

use super::IoError;
use crate::scene::TriMesh;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ObjStats {
    /// Degenerate faces (repeated vertex index) dropped at load.
    pub degenerate_dropped: usize,
}

/// Parse OBJ text. Polygon faces are fan-triangulated; degenerate faces
/// are dropped and counted. Vertex colors are accepted as 6-float `v`
/// lines (all-or-nothing across the file).
pub fn parse_obj(
    text: &str,
    base_color: Vector3<f64>,
    mesh_opacity: f64,
    path: &Path,
) -> Result<(TriMesh, ObjStats), IoError> {
    let err = |line: usize, detail: String| IoError::ParseLine {
        path: path.to_path_buf(),
        line,
        detail,
    };

    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut colors: Vec<Vector3<f64>> = Vec::new();
    let mut colored_lines = 0usize;
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut stats = ObjStats::default();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let nums: Result<Vec<f64>, _> = it.map(|t| t.parse::<f64>()).collect();
                let nums =
                    nums.map_err(|e| err(line_no, format!("bad vertex coordinate: {e}")))?;
                match nums.len() {
                    3 => vertices.push(Vector3::new(nums[0], nums[1], nums[2])),
                    6 => {
                        vertices.push(Vector3::new(nums[0], nums[1], nums[2]));
                        colors.push(Vector3::new(nums[3], nums[4], nums[5]));
                        colored_lines += 1;
                    }
                    n => return Err(err(line_no, format!("vertex with {n} components"))),
                }
                if colored_lines != 0 && colored_lines != vertices.len() {
                    return Err(err(
                        line_no,
                        "mixed colored and uncolored vertices".to_string(),
                    ));
                }
            }
            Some("f") => {
                let mut indices = Vec::new();
                for token in it {
                    let first = token.split('/').next().unwrap_or("");
                    let value: i64 = first
                        .parse()
                        .map_err(|e| err(line_no, format!("bad face index '{first}': {e}")))?;
                    let resolved = if value > 0 {
                        value - 1
                    } else if value < 0 {
                        vertices.len() as i64 + value
                    } else {
                        return Err(err(line_no, "face index 0 is invalid".to_string()));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(err(
                            line_no,
                            format!(
                                "face index {value} out of range (have {} vertices)",
                                vertices.len()
                            ),
                        ));
                    }
                    indices.push(resolved as u32);
                }
                if indices.len() < 3 {
                    return Err(err(line_no, "face with fewer than 3 indices".to_string()));
                }
                for k in 1..indices.len() - 1 {
                    let tri = [indices[0], indices[k], indices[k + 1]];
                    if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                        stats.degenerate_dropped += 1;
                    } else {
                        faces.push(tri);
                    }
                }
            }
            // Normals, texcoords, groups, materials: ignored.
            _ => {}
        }
    }

    if stats.degenerate_dropped > 0 {
        log::warn!(
            "{}: dropped {} degenerate face(s)",
            path.display(),
            stats.degenerate_dropped
        );
    }

    let vertex_colors = if colored_lines > 0 { Some(colors) } else { None };
    Ok((
        TriMesh {
            vertices,
            faces,
            vertex_colors,
            base_color,
            mesh_opacity,
        },
        stats,
    ))
}

/// Load an ASCII OBJ mesh with a flat base color and mesh-level opacity.
pub fn load_obj(
    path: impl AsRef<Path>,
    base_color: Vector3<f64>,
    mesh_opacity: f64,
) -> Result<TriMesh, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| IoError::read(path, e))?;
    parse_obj(&text, base_color, mesh_opacity, path).map(|(mesh, _)| mesh)
}
