//! PLY reader (ASCII and binary little-endian) and ASCII writer.
//!
//! The reader parses the generic element/property header, extracts vertex
//! positions and face index lists, and skips everything else. The writer
//! emits ASCII with double-precision coordinates, one `float` property per
//! scalar field, and an optional `uint` face label.

use super::{parse_err, Attributes};
use crate::mesh::TriMesh;
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(tok: &str) -> Option<Self> {
        Some(match tok {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct PropDef {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct ElementDef {
    name: String,
    count: usize,
    props: Vec<PropDef>,
}

pub fn read_ply(path: &Path) -> Result<TriMesh> {
    let bytes = std::fs::read(path)?;
    // header is ASCII lines terminated by '\n' up to end_header
    let mut header_end = 0;
    let mut lines: Vec<(usize, String)> = Vec::new();
    {
        let mut start = 0;
        let mut ln = 0;
        for (i, &b) in bytes.iter().enumerate() {
            if b == b'\n' {
                ln += 1;
                let line = String::from_utf8_lossy(&bytes[start..i]).trim_end_matches('\r').to_string();
                let done = line.trim() == "end_header";
                lines.push((ln, line));
                start = i + 1;
                if done {
                    header_end = start;
                    break;
                }
            }
        }
        if header_end == 0 {
            return Err(parse_err(path, ln, "missing end_header"));
        }
    }

    let mut it = lines.iter();
    let (ln, magic) = it.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    if magic.trim() != "ply" {
        return Err(parse_err(path, *ln, "missing 'ply' magic"));
    }
    let mut ascii = None;
    let mut elements: Vec<ElementDef> = Vec::new();
    for (ln, line) in it {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("format") => match toks.next() {
                Some("ascii") => ascii = Some(true),
                Some("binary_little_endian") => ascii = Some(false),
                Some(other) => {
                    return Err(parse_err(path, *ln, format!("unsupported format '{other}'")))
                }
                None => return Err(parse_err(path, *ln, "bad format line")),
            },
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = toks
                    .next()
                    .ok_or_else(|| parse_err(path, *ln, "element without name"))?;
                let count: usize = toks
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(path, *ln, "element without count"))?;
                elements.push(ElementDef { name: name.into(), count, props: Vec::new() });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, *ln, "property before element"))?;
                let t1 = toks
                    .next()
                    .ok_or_else(|| parse_err(path, *ln, "property without type"))?;
                if t1 == "list" {
                    let count = toks
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| parse_err(path, *ln, "bad list count type"))?;
                    let item = toks
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| parse_err(path, *ln, "bad list item type"))?;
                    let name = toks
                        .next()
                        .ok_or_else(|| parse_err(path, *ln, "list property without name"))?;
                    el.props.push(PropDef { name: name.into(), kind: PropKind::List { count, item } });
                } else {
                    let ty = ScalarType::parse(t1)
                        .ok_or_else(|| parse_err(path, *ln, format!("unknown type '{t1}'")))?;
                    let name = toks
                        .next()
                        .ok_or_else(|| parse_err(path, *ln, "property without name"))?;
                    el.props.push(PropDef { name: name.into(), kind: PropKind::Scalar(ty) });
                }
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(parse_err(path, *ln, format!("unknown header keyword '{other}'")))
            }
            None => {}
        }
    }
    let ascii = ascii.ok_or_else(|| parse_err(path, 2, "missing format line"))?;

    let mut cursor: Box<dyn ValueCursor> = if ascii {
        let body = String::from_utf8_lossy(&bytes[header_end..]).to_string();
        Box::new(AsciiCursor {
            toks: body.split_whitespace().map(String::from).collect(),
            pos: 0,
        })
    } else {
        Box::new(BinaryCursor { bytes: &bytes[header_end..], pos: 0 })
    };

    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let xyz: Vec<Option<usize>> = ["x", "y", "z"]
            .iter()
            .map(|n| el.props.iter().position(|p| &p.name == n))
            .collect();
        if is_vertex && xyz.iter().any(|p| p.is_none()) {
            return Err(parse_err(path, 1, "vertex element lacks x/y/z"));
        }
        let index_prop = el
            .props
            .iter()
            .position(|p| p.name == "vertex_indices" || p.name == "vertex_index");
        if is_face && index_prop.is_none() {
            return Err(parse_err(path, 1, "face element lacks vertex_indices"));
        }

        for inst in 0..el.count {
            let mut coord = [0f64; 3];
            let mut tri: Option<[usize; 3]> = None;
            for (pi, prop) in el.props.iter().enumerate() {
                match &prop.kind {
                    PropKind::Scalar(ty) => {
                        let v = cursor
                            .scalar(*ty)
                            .map_err(|msg| parse_err(path, 0, msg))?;
                        if is_vertex {
                            for k in 0..3 {
                                if xyz[k] == Some(pi) {
                                    coord[k] = v;
                                }
                            }
                        }
                    }
                    PropKind::List { count, item } => {
                        let len = cursor
                            .scalar(*count)
                            .map_err(|msg| parse_err(path, 0, msg))? as usize;
                        let mut items = Vec::with_capacity(len);
                        for _ in 0..len {
                            items.push(
                                cursor.scalar(*item).map_err(|msg| parse_err(path, 0, msg))?,
                            );
                        }
                        if is_face && index_prop == Some(pi) {
                            if len != 3 {
                                return Err(parse_err(
                                    path,
                                    0,
                                    format!("face {inst} has {len} vertices; only triangles are supported"),
                                ));
                            }
                            let mut t = [0usize; 3];
                            for k in 0..3 {
                                if items[k] < 0.0 {
                                    return Err(parse_err(path, 0, "negative vertex index"));
                                }
                                t[k] = items[k] as usize;
                            }
                            tri = Some(t);
                        }
                    }
                }
            }
            if is_vertex {
                vertices.push(coord);
            }
            if let Some(t) = tri {
                triangles.push(t);
            }
        }
    }
    if vertices.is_empty() {
        return Err(parse_err(path, 1, "no vertex element"));
    }
    TriMesh::new(vertices, triangles)
}

trait ValueCursor {
    fn scalar(&mut self, ty: ScalarType) -> std::result::Result<f64, String>;
}

struct AsciiCursor {
    toks: Vec<String>,
    pos: usize,
}

impl ValueCursor for AsciiCursor {
    fn scalar(&mut self, _ty: ScalarType) -> std::result::Result<f64, String> {
        let tok = self
            .toks
            .get(self.pos)
            .ok_or_else(|| "unexpected end of data".to_string())?;
        self.pos += 1;
        tok.parse::<f64>().map_err(|_| format!("bad value '{tok}'"))
    }
}

struct BinaryCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BinaryCursor<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        if self.pos + n > self.bytes.len() {
            return Err("unexpected end of binary data".into());
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

impl ValueCursor for BinaryCursor<'_> {
    fn scalar(&mut self, ty: ScalarType) -> std::result::Result<f64, String> {
        let b = self.take(ty.size())?;
        Ok(match ty {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes([
                b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
            ]),
        })
    }
}

pub fn write_ply(path: &Path, mesh: &TriMesh, attrs: &Attributes) -> Result<()> {
    for (name, vals) in &attrs.vertex_scalars {
        if vals.len() != mesh.n_vertices() {
            return Err(Error::Invalid(format!(
                "scalar field '{name}' has {} values for {} vertices",
                vals.len(),
                mesh.n_vertices()
            )));
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
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.n_vertices())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    for (name, _) in &attrs.vertex_scalars {
        writeln!(w, "property float {name}")?;
    }
    writeln!(w, "element face {}", mesh.n_triangles())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    if attrs.face_labels.is_some() {
        writeln!(w, "property uint label")?;
    }
    writeln!(w, "end_header")?;
    for (i, v) in mesh.vertices().iter().enumerate() {
        write!(w, "{} {} {}", v[0], v[1], v[2])?;
        for (_, vals) in &attrs.vertex_scalars {
            write!(w, " {}", vals[i] as f32)?;
        }
        writeln!(w)?;
    }
    for (t, tri) in mesh.triangles().iter().enumerate() {
        write!(w, "3 {} {} {}", tri[0], tri[1], tri[2])?;
        if let Some(labels) = &attrs.face_labels {
            write!(w, " {}", labels[t])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn reads_ascii_with_extra_properties() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ply");
        std::fs::write(
            &p,
            "ply\nformat ascii 1.0\ncomment test\n\
             element vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
             property uchar red\n\
             element face 1\nproperty list uchar int vertex_indices\n\
             end_header\n\
             0 0 0 255\n1 0 0 0\n0 1 0 7\n3 0 1 2\n",
        )
        .unwrap();
        let m = read_ply(&p).unwrap();
        assert_eq!(m.n_vertices(), 3);
        assert_eq!(m.triangle(0), [0, 1, 2]);
    }

    #[test]
    fn reads_binary_little_endian() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ply");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(
            b"ply\nformat binary_little_endian 1.0\n\
              element vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
              element face 1\nproperty list uchar int vertex_indices\n\
              end_header\n",
        );
        for v in [[0f32, 0., 0.], [1., 0., 0.], [0., 1., 0.]] {
            for c in v {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
        }
        bytes.push(3u8);
        for i in [0i32, 1, 2] {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        std::fs::write(&p, &bytes).unwrap();
        let m = read_ply(&p).unwrap();
        assert_eq!(m.n_vertices(), 3);
        assert_eq!(m.n_triangles(), 1);
        assert_eq!(m.vertex(1), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn writes_labels_and_scalars() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ply");
        let mesh = synth::octahedron();
        let attrs = Attributes {
            vertex_scalars: vec![("mode_0".into(), vec![0.5; 6])],
            face_labels: Some(vec![1; 8]),
        };
        write_ply(&p, &mesh, &attrs).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("property float mode_0"));
        assert!(text.contains("property uint label"));
        assert!(text.contains("3 0 2 4 1"));
        assert_eq!(read_ply(&p).unwrap().n_triangles(), 8);
    }

    #[test]
    fn quad_face_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ply");
        std::fs::write(
            &p,
            "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
             element face 1\nproperty list uchar int vertex_indices\nend_header\n\
             0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n",
        )
        .unwrap();
        assert!(read_ply(&p).is_err());
    }
}
