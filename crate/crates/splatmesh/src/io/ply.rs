//! Binary little-endian splat PLY, property layout as emitted by the
//! standard splatting trainer: positions, normals (ignored), f_dc_*,
//! f_rest_*, opacity (pre-sigmoid), scale_* (log), rot_* (unnormalized,
//! w first).
//!
//! Loading applies the activations (exp, sigmoid, quaternion
//! normalization) and quantizes the results to the f32 grid; saving picks
//! raw f32 values whose activations reproduce the in-memory fields
//! exactly, so load -> save -> load round-trips bit-exactly.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use super::IoError;
use crate::scene::SplatSet;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn step_f32(w: f32, up: bool) -> f32 {
    if w.is_nan() {
        return w;
    }
    if w == 0.0 {
        return if up { f32::from_bits(1) } else { -f32::from_bits(1) };
    }
    let bits = w.to_bits();
    let next = if (w > 0.0) == up { bits + 1 } else { bits - 1 };
    f32::from_bits(next)
}

/// Smallest-effort f32 preimage: a raw value whose f64 activation, rounded
/// back to f32, equals `target`. Values produced by the loader always have
/// one; otherwise the closest guess is returned.
fn encode_activation(target: f64, inverse: fn(f64) -> f64, forward: fn(f64) -> f64) -> f32 {
    let guess = inverse(target) as f32;
    let hits = |w: f32| (forward(w as f64) as f32) as f64 == target;
    if hits(guess) {
        return guess;
    }
    let mut up = guess;
    let mut down = guess;
    for _ in 0..4 {
        up = step_f32(up, true);
        if hits(up) {
            return up;
        }
        down = step_f32(down, false);
        if hits(down) {
            return down;
        }
    }
    guess
}

struct Header {
    vertex_count: usize,
    /// Property name -> index in the per-vertex float record.
    names: Vec<String>,
    data_offset: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header, IoError> {
    let err = |offset: usize, detail: &str| IoError::Parse {
        path: path.to_path_buf(),
        offset,
        detail: detail.to_string(),
    };

    let mut offset = 0usize;
    let mut lines = Vec::new();
    loop {
        let start = offset;
        let Some(rel_end) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            return Err(err(start, "header not terminated by end_header"));
        };
        let end = offset + rel_end;
        let line = std::str::from_utf8(&bytes[start..end])
            .map_err(|_| err(start, "header is not valid utf-8"))?
            .trim_end_matches('\r')
            .to_string();
        offset = end + 1;
        let is_end = line == "end_header";
        lines.push((start, line));
        if is_end {
            break;
        }
    }

    if lines.is_empty() || lines[0].1 != "ply" {
        return Err(err(0, "missing 'ply' magic line"));
    }

    let mut vertex_count = None;
    let mut names = Vec::new();
    let mut in_vertex_element = false;
    for (start, line) in lines.iter().skip(1) {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("format") => {
                let fmt = it.next().unwrap_or("");
                if fmt != "binary_little_endian" {
                    return Err(err(*start, &format!("unsupported format '{fmt}'")));
                }
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = it.next().unwrap_or("");
                let count: usize = it
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| err(*start, "bad element count"))?;
                if name == "vertex" {
                    vertex_count = Some(count);
                    in_vertex_element = true;
                } else {
                    if count != 0 {
                        return Err(err(*start, &format!("unsupported element '{name}'")));
                    }
                    in_vertex_element = false;
                }
            }
            Some("property") => {
                if !in_vertex_element {
                    continue;
                }
                let ty = it.next().unwrap_or("");
                if ty != "float" {
                    return Err(err(*start, &format!("unsupported property type '{ty}'")));
                }
                let name = it
                    .next()
                    .ok_or_else(|| err(*start, "property without a name"))?;
                names.push(name.to_string());
            }
            Some("end_header") => {}
            Some(other) => return Err(err(*start, &format!("unknown header line '{other}'"))),
            None => {}
        }
    }

    Ok(Header {
        vertex_count: vertex_count.ok_or_else(|| err(0, "no vertex element"))?,
        names,
        data_offset: offset,
    })
}

/// Parse splat PLY bytes. See [`load_splat_ply`].
pub fn parse_splat_ply(bytes: &[u8], path: &Path) -> Result<SplatSet, IoError> {
    let header = parse_header(bytes, path)?;
    let stride = header.names.len() * 4;
    let needed = header.data_offset + stride * header.vertex_count;
    if bytes.len() < needed {
        return Err(IoError::Parse {
            path: path.to_path_buf(),
            offset: bytes.len(),
            detail: format!(
                "truncated: need {needed} bytes for {} vertices, have {}",
                header.vertex_count,
                bytes.len()
            ),
        });
    }

    let find = |name: &str| header.names.iter().position(|n| n == name);
    let require = |name: &str| {
        find(name).ok_or_else(|| IoError::Parse {
            path: path.to_path_buf(),
            offset: 0,
            detail: format!("missing property '{name}'"),
        })
    };

    let ix = require("x")?;
    let iy = require("y")?;
    let iz = require("z")?;
    let idc = [require("f_dc_0")?, require("f_dc_1")?, require("f_dc_2")?];
    let iop = require("opacity")?;
    let iscale = [require("scale_0")?, require("scale_1")?, require("scale_2")?];
    let irot = [
        require("rot_0")?,
        require("rot_1")?,
        require("rot_2")?,
        require("rot_3")?,
    ];

    let mut rest_count = 0usize;
    while find(&format!("f_rest_{rest_count}")).is_some() {
        rest_count += 1;
    }
    let sh_degree = match rest_count {
        0 => 0,
        9 => 1,
        24 => 2,
        45 => 3,
        count => {
            return Err(IoError::UnsupportedShDegree {
                path: path.to_path_buf(),
                count,
            })
        }
    };
    let irest: Vec<usize> = (0..rest_count)
        .map(|k| find(&format!("f_rest_{k}")).expect("counted above"))
        .collect();
    let per_channel = SplatSet::coeffs_per_channel(sh_degree);

    let mut set = SplatSet::empty(sh_degree);
    set.positions.reserve(header.vertex_count);
    let data = &bytes[header.data_offset..];
    for v in 0..header.vertex_count {
        let rec = &data[v * stride..(v + 1) * stride];
        let get = |i: usize| -> f64 {
            f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap()) as f64
        };

        set.positions.push(Vector3::new(get(ix), get(iy), get(iz)));

        // Activations run in f64 and are quantized back to the f32 grid so
        // that saving can reproduce the file exactly.
        set.scales.push(Vector3::new(
            get(iscale[0]).exp() as f32 as f64,
            get(iscale[1]).exp() as f32 as f64,
            get(iscale[2]).exp() as f32 as f64,
        ));
        set.opacities.push(sigmoid(get(iop)) as f32 as f64);

        let q = [get(irot[0]), get(irot[1]), get(irot[2]), get(irot[3])];
        let n = crate::math::quat_norm_sq(&q).sqrt();
        if n < 1e-8 {
            return Err(IoError::invalid(
                path,
                format!("vertex {v}: quaternion norm {n:.2e} below 1e-8"),
            ));
        }
        let q = if (n - 1.0).abs() > 1e-6 {
            [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
        } else {
            q
        };
        set.rotations
            .push([q[0] as f32 as f64, q[1] as f32 as f64, q[2] as f32 as f64, q[3] as f32 as f64]);

        for ch in 0..3 {
            set.sh_coeffs.push(get(idc[ch]));
            for k in 0..per_channel - 1 {
                set.sh_coeffs.push(get(irest[ch * (per_channel - 1) + k]));
            }
        }
    }
    Ok(set)
}

/// Load a binary little-endian splat PLY. Scales are exponentiated,
/// opacities pass through the logistic sigmoid, quaternions are
/// normalized, and the SH degree is inferred from the f_rest count.
pub fn load_splat_ply(path: impl AsRef<Path>) -> Result<SplatSet, IoError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| IoError::read(path, e))?;
    parse_splat_ply(&bytes, path)
}

/// Serialize a splat set in the standard trainer layout. Inverse
/// activations (log, logit) are chosen so the written f32 values reload to
/// the exact in-memory fields.
pub fn serialize_splat_ply(set: &SplatSet) -> Vec<u8> {
    let per_channel = SplatSet::coeffs_per_channel(set.sh_degree);
    let rest = 3 * (per_channel - 1);

    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", set.len()));
    for name in ["x", "y", "z", "nx", "ny", "nz"] {
        header.push_str(&format!("property float {name}\n"));
    }
    for k in 0..3 {
        header.push_str(&format!("property float f_dc_{k}\n"));
    }
    for k in 0..rest {
        header.push_str(&format!("property float f_rest_{k}\n"));
    }
    header.push_str("property float opacity\n");
    for k in 0..3 {
        header.push_str(&format!("property float scale_{k}\n"));
    }
    for k in 0..4 {
        header.push_str(&format!("property float rot_{k}\n"));
    }
    header.push_str("end_header\n");

    let mut out = header.into_bytes();
    let mut push = |v: f32| out.extend_from_slice(&v.to_le_bytes());
    for i in 0..set.len() {
        let p = set.positions[i];
        push(p.x as f32);
        push(p.y as f32);
        push(p.z as f32);
        push(0.0);
        push(0.0);
        push(0.0);
        let sh = set.sh(i);
        for ch in 0..3 {
            push(sh[ch * per_channel] as f32);
        }
        for ch in 0..3 {
            for k in 1..per_channel {
                push(sh[ch * per_channel + k] as f32);
            }
        }
        push(encode_activation(set.opacities[i], logit, sigmoid));
        for k in 0..3 {
            push(encode_activation(set.scales[i][k], f64::ln, f64::exp));
        }
        for c in set.rotations[i] {
            push(c as f32);
        }
    }
    out
}

/// Write a splat PLY; see [`serialize_splat_ply`].
pub fn save_splat_ply(set: &SplatSet, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path: &Path = path.as_ref();
    let bytes = serialize_splat_ply(set);
    std::fs::write(path, bytes).map_err(|e| IoError::write(PathBuf::from(path), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Build raw PLY bytes for one-gaussian files with given raw fields.
    fn raw_ply(records: &[Vec<f32>], rest: usize) -> Vec<u8> {
        let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
        header.push_str(&format!("element vertex {}\n", records.len()));
        for name in ["x", "y", "z", "nx", "ny", "nz"] {
            header.push_str(&format!("property float {name}\n"));
        }
        for k in 0..3 {
            header.push_str(&format!("property float f_dc_{k}\n"));
        }
        for k in 0..rest {
            header.push_str(&format!("property float f_rest_{k}\n"));
        }
        header.push_str("property float opacity\n");
        for k in 0..3 {
            header.push_str(&format!("property float scale_{k}\n"));
        }
        for k in 0..4 {
            header.push_str(&format!("property float rot_{k}\n"));
        }
        header.push_str("end_header\n");
        let mut out = header.into_bytes();
        for rec in records {
            assert_eq!(rec.len(), 6 + 3 + rest + 1 + 3 + 4);
            for v in rec {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    fn one_record(opacity_raw: f32, scale_raw: [f32; 3], rot_raw: [f32; 4]) -> Vec<f32> {
        let mut rec = vec![0.1, -0.2, 0.3, 0.0, 0.0, 0.0, 0.5, 0.6, 0.7];
        rec.push(opacity_raw);
        rec.extend_from_slice(&scale_raw);
        rec.extend_from_slice(&rot_raw);
        rec
    }

    #[test]
    fn zero_raw_opacity_loads_as_half() {
        let bytes = raw_ply(&[one_record(0.0, [0.0; 3], [1.0, 0.0, 0.0, 0.0])], 0);
        let set = parse_splat_ply(&bytes, Path::new("test.ply")).unwrap();
        assert_eq!(set.opacities[0], 0.5);
        assert_eq!(set.scales[0], Vector3::new(1.0, 1.0, 1.0));
        assert_eq!(set.sh_degree, 0);
    }

    #[test]
    fn rest_count_45_is_degree_3() {
        let mut rec = vec![0.0f32, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.2, 0.3];
        rec.extend((0..45).map(|k| k as f32 * 0.01));
        rec.push(0.0);
        rec.extend_from_slice(&[0.0; 3]);
        rec.extend_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let bytes = raw_ply(&[rec], 45);
        let set = parse_splat_ply(&bytes, Path::new("test.ply")).unwrap();
        assert_eq!(set.sh_degree, 3);
        // Per-channel layout: [dc_ch, rest_ch_0..15] per channel.
        assert_eq!(set.sh(0).len(), 48);
        assert_eq!(set.sh(0)[0], 0.1f32 as f64);
        assert_eq!(set.sh(0)[1], 0.0);
        assert_eq!(set.sh(0)[16], 0.2f32 as f64);
        assert_eq!(set.sh(0)[17], (15.0f32 * 0.01) as f64);
    }

    #[test]
    fn unknown_rest_count_is_unsupported() {
        let mut rec = vec![0.0f32; 6 + 3];
        rec.extend([0.0; 7]);
        rec.push(0.0);
        rec.extend_from_slice(&[0.0; 3]);
        rec.extend_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let bytes = raw_ply(&[rec], 7);
        assert!(matches!(
            parse_splat_ply(&bytes, Path::new("t.ply")),
            Err(IoError::UnsupportedShDegree { count: 7, .. })
        ));
    }

    #[test]
    fn malformed_header_reports_byte_offset() {
        let bytes = b"ply\nformat ascii 1.0\nend_header\n".to_vec();
        match parse_splat_ply(&bytes, Path::new("t.ply")) {
            Err(IoError::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_data_is_a_structured_error() {
        let mut bytes = raw_ply(&[one_record(0.0, [0.0; 3], [1.0, 0.0, 0.0, 0.0])], 0);
        bytes.truncate(bytes.len() - 10);
        assert!(matches!(
            parse_splat_ply(&bytes, Path::new("t.ply")),
            Err(IoError::Parse { .. })
        ));
    }

    #[test]
    fn near_zero_quaternion_is_rejected() {
        let bytes = raw_ply(&[one_record(0.0, [0.0; 3], [1e-10, 0.0, 0.0, 0.0])], 0);
        assert!(matches!(
            parse_splat_ply(&bytes, Path::new("t.ply")),
            Err(IoError::Invalid { .. })
        ));
    }

    #[test]
    fn load_save_load_round_trips_bit_exactly() {
        // Unnormalized quaternion and awkward raw values on purpose.
        let records = vec![
            one_record(-3.7, [-2.3, 0.04, 1.7], [0.83, -0.41, 0.2, 0.33]),
            one_record(11.9, [0.0, -9.0, 3.0], [-2.0, 1.0, 0.5, 0.25]),
        ];
        let bytes = raw_ply(&records, 0);
        let first = parse_splat_ply(&bytes, Path::new("a.ply")).unwrap();
        let written = serialize_splat_ply(&first);
        let second = parse_splat_ply(&written, Path::new("b.ply")).unwrap();
        assert_eq!(first, second);
        // And a second round of save -> load stays fixed.
        let third = parse_splat_ply(&serialize_splat_ply(&second), Path::new("c.ply")).unwrap();
        assert_eq!(second, third);
    }

    #[test]
    fn saturated_opacity_round_trips_through_infinity() {
        let bytes = raw_ply(&[one_record(100.0, [0.0; 3], [1.0, 0.0, 0.0, 0.0])], 0);
        let first = parse_splat_ply(&bytes, Path::new("a.ply")).unwrap();
        assert_eq!(first.opacities[0], 1.0);
        let second = parse_splat_ply(&serialize_splat_ply(&first), Path::new("b.ply")).unwrap();
        assert_eq!(second.opacities[0], 1.0);
    }
}
