//! Minimal Wavefront OBJ reader/writer. Geometry only: `v` and `f` lines;
//! normals, texture coordinates, materials and groups are skipped.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};

use super::TriangleMesh;

pub(super) fn load_obj(path: &Path) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_obj(&text, path)
}

pub(super) fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    // Faces are validated against the final vertex count, so remember where
    // each came from for error reporting.
    let mut faces: Vec<(usize, Vec<u32>)> = Vec::new();

    let err = |line: usize, msg: String| Error::ObjParse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let coords: Vec<f64> = parts
                    .clone()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| err(lineno, format!("bad vertex component: {e}")))?;
                if coords.len() < 3 {
                    return Err(err(lineno, "vertex needs 3 components".into()));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut indices = Vec::new();
                for token in parts {
                    // Accept i, i/j, i//k, i/j/k; only the position index matters.
                    let pos = token.split('/').next().unwrap_or("");
                    let value: i64 = pos
                        .parse()
                        .map_err(|_| err(lineno, format!("bad face index {token:?}")))?;
                    if value <= 0 {
                        return Err(err(
                            lineno,
                            format!("face index {value} invalid: OBJ indices are 1-based"),
                        ));
                    }
                    indices.push((value - 1) as u32);
                }
                if indices.len() < 3 {
                    return Err(err(lineno, "face needs at least 3 vertices".into()));
                }
                faces.push((lineno, indices));
            }
            _ => {} // vn, vt, o, g, s, usemtl, mtllib, ...
        }
    }

    let vertex_count = vertices.len();
    let mut triangles = Vec::new();
    for (lineno, indices) in faces {
        for &i in &indices {
            if i as usize >= vertex_count {
                return Err(err(
                    lineno,
                    format!("face index {} out of range (vertex count {vertex_count})", i + 1),
                ));
            }
        }
        // Fan-triangulate polygons.
        for k in 1..indices.len() - 1 {
            triangles.push([indices[0], indices[k], indices[k + 1]]);
        }
    }

    TriangleMesh::new(vertices, triangles)
}

pub(super) fn save_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for v in mesh.vertices() {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z).map_err(io_err)?;
    }
    for t in mesh.triangles() {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).map_err(io_err)?;
    }
    fs::write(path, out).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::super::parse_obj_str;
    use crate::error::Error;

    const CUBE_OBJ: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn parses_unit_cube() {
        let mesh = parse_obj_str(CUBE_OBJ).unwrap();
        assert_eq!(mesh.vertex_count(), 8);
        assert_eq!(mesh.triangle_count(), 12);
    }

    #[test]
    fn rejects_zero_index() {
        let r = parse_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n");
        match r {
            Err(Error::ObjParse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_index_with_line() {
        let r = parse_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n");
        match r {
            Err(Error::ObjParse { line, msg, .. }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("out of range"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn quad_faces_are_fan_triangulated() {
        let mesh = parse_obj_str("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(mesh.triangle_count(), 2);
    }

    #[test]
    fn slash_forms_accepted() {
        let mesh = parse_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2//3 3/2/1\n").unwrap();
        assert_eq!(mesh.triangle_count(), 1);
    }
}
