//! OFF reader and writer (ASCII).

use super::parse_err;
use crate::mesh::TriMesh;
use crate::Result;
use std::io::{BufRead, Write};
use std::path::Path;

pub fn read_off(path: &Path) -> Result<TriMesh> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    // significant tokens with their line numbers; comments stripped
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split_whitespace() {
            tokens.push((ln + 1, tok.to_string()));
        }
    }
    let mut pos = 0;
    let next = |pos: &mut usize| -> Option<&(usize, String)> {
        let t = tokens.get(*pos);
        *pos += 1;
        t
    };

    let (ln, magic) = next(&mut pos)
        .ok_or_else(|| parse_err(path, 1, "empty file"))?
        .clone();
    if magic != "OFF" {
        return Err(parse_err(path, ln, format!("expected OFF header, found '{magic}'")));
    }
    let mut counts = [0usize; 3];
    for c in counts.iter_mut() {
        let (ln, tok) = next(&mut pos)
            .ok_or_else(|| parse_err(path, ln, "missing counts"))?
            .clone();
        *c = tok
            .parse()
            .map_err(|_| parse_err(path, ln, format!("bad count '{tok}'")))?;
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut v = [0f64; 3];
        for c in v.iter_mut() {
            let (ln, tok) = next(&mut pos)
                .ok_or_else(|| parse_err(path, 0, "unexpected end of vertex list"))?
                .clone();
            *c = tok
                .parse()
                .map_err(|_| parse_err(path, ln, format!("bad coordinate '{tok}'")))?;
        }
        vertices.push(v);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, tok) = next(&mut pos)
            .ok_or_else(|| parse_err(path, 0, "unexpected end of face list"))?
            .clone();
        let arity: usize = tok
            .parse()
            .map_err(|_| parse_err(path, ln, format!("bad face arity '{tok}'")))?;
        if arity != 3 {
            return Err(parse_err(path, ln, format!("face with {arity} vertices; only triangles are supported")));
        }
        let mut tri = [0usize; 3];
        for c in tri.iter_mut() {
            let (ln, tok) = next(&mut pos)
                .ok_or_else(|| parse_err(path, 0, "unexpected end of face list"))?
                .clone();
            *c = tok
                .parse()
                .map_err(|_| parse_err(path, ln, format!("bad vertex index '{tok}'")))?;
        }
        triangles.push(tri);
    }
    TriMesh::new(vertices, triangles)
}

pub fn write_off<P: AsRef<Path>>(path: P, mesh: &TriMesh) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} {}", mesh.n_vertices(), mesh.n_triangles(), mesh.n_edges())?;
    for v in mesh.vertices() {
        writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
    }
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn octahedron_off_string() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.off");
        std::fs::write(
            &p,
            "OFF\n6 8 12\n\
             1 0 0\n-1 0 0\n0 1 0\n0 -1 0\n0 0 1\n0 0 -1\n\
             3 0 2 4\n3 2 1 4\n3 1 3 4\n3 3 0 4\n3 2 0 5\n3 1 2 5\n3 3 1 5\n3 0 3 5\n",
        )
        .unwrap();
        let m = read_off(&p).unwrap();
        assert_eq!(m.n_vertices(), 6);
        assert_eq!(m.n_triangles(), 8);
        assert_eq!(m.n_edges(), 12);
    }

    #[test]
    fn counts_may_share_the_header_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.off");
        std::fs::write(&p, "OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
        let m = read_off(&p).unwrap();
        assert_eq!(m.n_triangles(), 1);
    }

    #[test]
    fn comments_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.off");
        std::fs::write(
            &p,
            "OFF # a comment\n# another\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n",
        )
        .unwrap();
        assert_eq!(read_off(&p).unwrap().n_vertices(), 3);
    }

    #[test]
    fn out_of_range_face_is_a_mesh_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.off");
        std::fs::write(&p, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 3\n").unwrap();
        let err = read_off(&p).unwrap_err();
        assert!(err.to_string().contains("index out of range"));
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.off");
        let m = synth::torus(8, 6, 2.0, 0.5);
        write_off(&p, &m).unwrap();
        let back = read_off(&p).unwrap();
        assert_eq!(back.n_vertices(), m.n_vertices());
        assert_eq!(back.triangles(), m.triangles());
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            for k in 0..3 {
                assert_eq!(a[k], b[k]);
            }
        }
    }
}
