//! Mesh file i/o: OFF and OBJ (ASCII) and PLY (ASCII and binary
//! little-endian) readers, plus PLY and legacy-VTK writers that carry
//! per-vertex scalar fields and per-face integer labels.

mod obj;
mod off;
mod ply;
mod vtk;

pub use off::{read_off, write_off};
pub use ply::read_ply;

use crate::mesh::TriMesh;
use crate::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
}

impl std::str::FromStr for MeshFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            other => Err(format!("unknown mesh format '{other}'")),
        }
    }
}

/// Data attached to a mesh when writing output files.
#[derive(Debug, Clone, Default)]
pub struct Attributes {
    /// Per-vertex scalar fields: (name, one value per vertex).
    pub vertex_scalars: Vec<(String, Vec<f64>)>,
    /// Per-face labels, written as uint32.
    pub face_labels: Option<Vec<u32>>,
}

/// Load a mesh, using `format` if given, otherwise sniffing the extension
/// and then the file content.
pub fn load_mesh<P: AsRef<Path>>(path: P, format: Option<MeshFormat>) -> Result<TriMesh> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => sniff_format(path)?,
    };
    match format {
        MeshFormat::Off => off::read_off(path),
        MeshFormat::Obj => obj::read_obj(path),
        MeshFormat::Ply => ply::read_ply(path),
    }
}

fn sniff_format(path: &Path) -> Result<MeshFormat> {
    if let Some(ext) = path.extension().and_then(|e| e.to_str()) {
        if let Ok(f) = ext.parse::<MeshFormat>() {
            return Ok(f);
        }
    }
    let bytes = std::fs::read(path)?;
    let head: Vec<u8> = bytes.iter().take(32).copied().collect();
    let text = String::from_utf8_lossy(&head);
    if text.starts_with("ply") {
        Ok(MeshFormat::Ply)
    } else if text.trim_start().starts_with("OFF") {
        Ok(MeshFormat::Off)
    } else if text.contains("v ") || text.starts_with('#') {
        Ok(MeshFormat::Obj)
    } else {
        Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "cannot determine mesh format".into(),
        })
    }
}

/// Write a PLY file (ASCII) with optional scalar fields and face labels.
pub fn write_ply<P: AsRef<Path>>(path: P, mesh: &TriMesh, attrs: &Attributes) -> Result<()> {
    ply::write_ply(path.as_ref(), mesh, attrs)
}

/// Write a legacy-VTK (ASCII) file with optional scalar fields and labels.
pub fn write_vtk<P: AsRef<Path>>(path: P, mesh: &TriMesh, attrs: &Attributes) -> Result<()> {
    vtk::write_vtk(path.as_ref(), mesh, attrs)
}

pub(crate) fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn sniffs_by_content_without_extension() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mesh_no_ext");
        write_off(&p, &synth::octahedron()).unwrap();
        let m = load_mesh(&p, None).unwrap();
        assert_eq!(m.n_vertices(), 6);
    }

    #[test]
    fn ply_round_trip_with_attributes() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = synth::icosphere(1);
        let attrs = Attributes {
            vertex_scalars: vec![(
                "mode_0".into(),
                (0..mesh.n_vertices()).map(|i| i as f64 * 0.25).collect(),
            )],
            face_labels: Some((0..mesh.n_triangles() as u32).collect()),
        };
        let p = dir.path().join("m.ply");
        write_ply(&p, &mesh, &attrs).unwrap();
        let back = read_ply(&p).unwrap();
        assert_eq!(back.n_vertices(), mesh.n_vertices());
        assert_eq!(back.n_triangles(), mesh.n_triangles());
    }
}
