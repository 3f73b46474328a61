//! Legacy VTK (ASCII) polydata writer: POINT_DATA scalar fields and
//! CELL_DATA labels, as consumed by ParaView.

use super::Attributes;
use crate::mesh::TriMesh;
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

pub fn write_vtk(path: &Path, mesh: &TriMesh, attrs: &Attributes) -> Result<()> {
    for (name, vals) in &attrs.vertex_scalars {
        if vals.len() != mesh.n_vertices() {
            return Err(Error::Invalid(format!(
                "scalar field '{name}' has {} values for {} vertices",
                vals.len(),
                mesh.n_vertices()
            )));
        }
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "lpcm output")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for v in mesh.vertices() {
        writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
    }
    writeln!(w, "POLYGONS {} {}", mesh.n_triangles(), 4 * mesh.n_triangles())?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    if !attrs.vertex_scalars.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, vals) in &attrs.vertex_scalars {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in vals {
                writeln!(w, "{v}")?;
            }
        }
    }
    if let Some(labels) = &attrs.face_labels {
        if labels.len() != mesh.n_triangles() {
            return Err(Error::Invalid(format!(
                "label field has {} values for {} faces",
                labels.len(),
                mesh.n_triangles()
            )));
        }
        writeln!(w, "CELL_DATA {}", mesh.n_triangles())?;
        writeln!(w, "SCALARS label int 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for l in labels {
            writeln!(w, "{l}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn writes_point_and_cell_data() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.vtk");
        let mesh = synth::octahedron();
        let attrs = Attributes {
            vertex_scalars: vec![
                ("mode_0".into(), vec![0.25; 6]),
                ("mode_1".into(), vec![-1.0; 6]),
            ],
            face_labels: Some(vec![2; 8]),
        };
        write_vtk(&p, &mesh, &attrs).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("POINTS 6 double"));
        assert!(text.contains("POLYGONS 8 32"));
        assert!(text.contains("SCALARS mode_0 double 1"));
        assert!(text.contains("SCALARS mode_1 double 1"));
        assert!(text.contains("CELL_DATA 8"));
        assert!(text.contains("SCALARS label int 1"));
    }
}
