//! Wavefront OBJ reader (geometry only).

use super::parse_err;
use crate::mesh::TriMesh;
use crate::Result;
use std::io::BufRead;
use std::path::Path;

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    for (ln0, line) in reader.lines().enumerate() {
        let ln = ln0 + 1;
        let line = line?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut v = [0f64; 3];
                for c in v.iter_mut() {
                    let tok = it
                        .next()
                        .ok_or_else(|| parse_err(path, ln, "vertex with fewer than 3 coordinates"))?;
                    *c = tok
                        .parse()
                        .map_err(|_| parse_err(path, ln, format!("bad coordinate '{tok}'")))?;
                }
            vertices.push(v);
            }
            Some("f") => {
                let idx: Vec<&str> = it.collect();
                if idx.len() != 3 {
                    return Err(parse_err(
                        path,
                        ln,
                        format!("face with {} vertices; only triangles are supported", idx.len()),
                    ));
                }
                let mut tri = [0usize; 3];
                for (k, tok) in idx.iter().enumerate() {
                    // "f v", "f v/t", "f v//n", "f v/t/n"; negative = relative
                    let head = tok.split('/').next().unwrap_or("");
                    let raw: i64 = head
                        .parse()
                        .map_err(|_| parse_err(path, ln, format!("bad face index '{tok}'")))?;
                    let resolved = if raw > 0 {
                        raw as usize - 1
                    } else if raw < 0 && (-raw) as usize <= vertices.len() {
                        vertices.len() - (-raw) as usize
                    } else {
                        return Err(parse_err(path, ln, format!("face index {raw} out of range")));
                    };
                    tri[k] = resolved;
                }
                triangles.push(tri);
            }
            _ => {} // vn, vt, usemtl, o, g, s, comments
        }
    }
    TriMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_plain_and_slashed_faces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.obj");
        std::fs::write(
            &p,
            "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nvn 0 0 1\n\
             f 1/1/1 2/2/1 3//1\nf 2 4 3\n",
        )
        .unwrap();
        let m = read_obj(&p).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_triangles(), 2);
    }

    #[test]
    fn negative_indices_are_relative() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.obj");
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        let m = read_obj(&p).unwrap();
        assert_eq!(m.triangle(0), [0, 1, 2]);
    }

    #[test]
    fn quad_face_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.obj");
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert!(read_obj(&p).is_err());
    }
}
