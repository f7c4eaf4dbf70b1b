//! Binding table serialization: a magic string, a JSON header carrying the
//! mode, counts, and proxy-mesh hash, then fixed-size binary anchor
//! records. The hash makes stale bindings detectable.

use std::path::Path;

use super::IoError;
use crate::binding::{Anchor, BindMode, BindingTable};

pub const BINDING_MAGIC: &[u8; 5] = b"UGSB1";

const RECORD_SIZE: usize = 4 + 1 + 6 * 8;

#[derive(serde::Serialize, serde::Deserialize)]
struct BindingHeader {
    mode: String,
    gaussian_count: usize,
    proxy_face_count: u32,
    mesh_hash: String,
}

fn validate_table(table: &BindingTable, path: &Path) -> Result<(), IoError> {
    let expected = table.gaussian_count * table.mode.anchors_per_gaussian();
    if table.anchors.len() != expected {
        return Err(IoError::invalid(
            path,
            format!("table has {} anchors, expected {expected}", table.anchors.len()),
        ));
    }
    for (i, anchor) in table.anchors.iter().enumerate() {
        let sum = anchor.bary[0] + anchor.bary[1] + anchor.bary[2];
        if (sum - 1.0).abs() > 1e-6 {
            return Err(IoError::invalid(
                path,
                format!("anchor {i}: barycentric sum {sum} violates u+v+w=1"),
            ));
        }
        if anchor.face >= table.proxy_face_count {
            return Err(IoError::invalid(
                path,
                format!(
                    "anchor {i}: face {} out of range (mesh has {})",
                    anchor.face, table.proxy_face_count
                ),
            ));
        }
    }
    Ok(())
}

/// Write a binding table. Refuses tables violating the barycentric or
/// face-range invariants.
pub fn save_binding(table: &BindingTable, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    validate_table(table, path)?;

    let header = serde_json::to_vec(&BindingHeader {
        mode: table.mode.as_str().to_string(),
        gaussian_count: table.gaussian_count,
        proxy_face_count: table.proxy_face_count,
        mesh_hash: table.mesh_hash.clone(),
    })
    .expect("header serializes");

    let mut out = Vec::with_capacity(9 + header.len() + table.anchors.len() * RECORD_SIZE);
    out.extend_from_slice(BINDING_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for anchor in &table.anchors {
        out.extend_from_slice(&anchor.face.to_le_bytes());
        out.push(anchor.fallback as u8);
        for v in anchor.bary {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in anchor.corner_offset {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| IoError::write(path, e))
}

/// Load a binding table, validating the magic, header, anchor count, and
/// face ranges.
pub fn load_binding(path: impl AsRef<Path>) -> Result<BindingTable, IoError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| IoError::read(path, e))?;
    if bytes.len() < 9 || &bytes[..5] != BINDING_MAGIC {
        return Err(IoError::invalid(path, "not a binding file (bad magic)"));
    }
    let header_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    if bytes.len() < 9 + header_len {
        return Err(IoError::invalid(path, "truncated header"));
    }
    let header: BindingHeader = serde_json::from_slice(&bytes[9..9 + header_len])
        .map_err(|e| IoError::invalid(path, format!("bad header: {e}")))?;
    let mode: BindMode = header
        .mode
        .parse()
        .map_err(|e: String| IoError::invalid(path, e))?;

    let expected = header.gaussian_count * mode.anchors_per_gaussian();
    let data = &bytes[9 + header_len..];
    if data.len() != expected * RECORD_SIZE {
        return Err(IoError::invalid(
            path,
            format!(
                "anchor data is {} bytes, expected {}",
                data.len(),
                expected * RECORD_SIZE
            ),
        ));
    }

    let mut anchors = Vec::with_capacity(expected);
    for i in 0..expected {
        let rec = &data[i * RECORD_SIZE..(i + 1) * RECORD_SIZE];
        let face = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        let fallback = rec[4] != 0;
        let f = |k: usize| f64::from_le_bytes(rec[5 + k * 8..13 + k * 8].try_into().unwrap());
        anchors.push(Anchor {
            face,
            bary: [f(0), f(1), f(2)],
            corner_offset: [f(3), f(4), f(5)],
            fallback,
        });
    }

    let table = BindingTable {
        mode,
        gaussian_count: header.gaussian_count,
        proxy_face_count: header.proxy_face_count,
        mesh_hash: header.mesh_hash,
        anchors,
    };
    validate_table(&table, path)?;
    Ok(table)
}
