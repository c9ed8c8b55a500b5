//! Binary mesh format.
//!
//! Layout (little-endian): magic `VMSH`, u32 version = 1, u64 vertex count,
//! u64 triangle count, then vertex_count x 3 f64, then triangle_count x 3 u32.

use std::fs;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};

use super::TriangleMesh;

const MAGIC: &[u8; 4] = b"VMSH";
const VERSION: u32 = 1;

pub(super) fn save_vmsh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + mesh.vertex_count() * 24 + mesh.triangle_count() * 12);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(mesh.vertex_count() as u64).to_le_bytes());
    buf.extend_from_slice(&(mesh.triangle_count() as u64).to_le_bytes());
    for v in mesh.vertices() {
        for k in 0..3 {
            buf.extend_from_slice(&v[k].to_le_bytes());
        }
    }
    for t in mesh.triangles() {
        for &i in t {
            buf.extend_from_slice(&i.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(super) fn load_vmsh(path: &Path) -> Result<TriangleMesh> {
    let data = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |msg: &str| Error::BadFormat {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };

    let mut cursor = Reader { data: &data, pos: 0 };
    let magic = cursor.take(4).ok_or_else(|| bad("truncated header"))?;
    if magic != MAGIC {
        return Err(bad("bad magic, expected VMSH"));
    }
    let version = cursor.u32().ok_or_else(|| bad("truncated header"))?;
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let vertex_count = cursor.u64().ok_or_else(|| bad("truncated header"))? as usize;
    let triangle_count = cursor.u64().ok_or_else(|| bad("truncated header"))? as usize;

    let expected = 24 + vertex_count * 24 + triangle_count * 12;
    if data.len() != expected {
        return Err(bad(&format!(
            "size mismatch: expected {expected} bytes, file has {}",
            data.len()
        )));
    }

    let mut vertices = Vec::with_capacity(vertex_count);
    for _ in 0..vertex_count {
        let x = cursor.f64().unwrap();
        let y = cursor.f64().unwrap();
        let z = cursor.f64().unwrap();
        vertices.push(Point3::new(x, y, z));
    }
    let mut triangles = Vec::with_capacity(triangle_count);
    for _ in 0..triangle_count {
        let a = cursor.u32().unwrap();
        let b = cursor.u32().unwrap();
        let c = cursor.u32().unwrap();
        triangles.push([a, b, c]);
    }

    TriangleMesh::new(vertices, triangles).map_err(|e| match e {
        Error::IndexOutOfRange { index, vertex_count } => Error::BadFormat {
            path: path.to_path_buf(),
            msg: format!("triangle index {index} out of range (vertex count {vertex_count})"),
        },
        other => other,
    })
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.data.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }
    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use crate::mesh::{load_mesh, make_primitive, save_mesh_binary, Primitive};

    #[test]
    fn round_trip_is_bit_exact() {
        let mesh = make_primitive(&Primitive::Sphere {
            subdivisions: 2,
            radius: 0.5,
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sphere.vmsh");
        save_mesh_binary(&path, &mesh).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(mesh.vertex_count(), back.vertex_count());
        assert_eq!(mesh.triangles(), back.triangles());
        for (a, b) in mesh.vertices().iter().zip(back.vertices()) {
            for k in 0..3 {
                assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.vmsh");
        std::fs::write(&path, b"NOPE....").unwrap();
        assert!(load_mesh(&path).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let r = load_mesh("/nonexistent/mesh.vmsh");
        match r {
            Err(crate::error::Error::Io { .. }) => {}
            other => panic!("expected io error, got {other:?}"),
        }
    }
}
