//! Triangle meshes: loading, normalization, and primitive generation.
//!
//! Meshes feed the voxelizer, which assumes geometry normalized into the
//! canonical cube `[-0.5, 0.5]^3`. Voxel cell `i` at resolution `R` then
//! spans `[i/R - 0.5, (i+1)/R - 0.5)`.

mod obj;
mod primitives;
mod vmsh;

pub use primitives::{make_primitive, Primitive};

use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Tolerance below which a triangle's area counts as degenerate.
pub const DEGENERATE_AREA_TOL: f64 = 1e-12;

/// Tolerance for the normalization check performed by the voxelizer.
pub const NORMALIZED_TOL: f64 = 1e-9;

/// Indexed triangle soup.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, validating that every index is in range.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        for tri in &triangles {
            for &i in tri {
                if i as usize >= n {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        vertex_count: n,
                    });
                }
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// The three corner points of triangle `i`.
    pub fn triangle_points(&self, i: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle_points(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Tight axis-aligned bounding box over the vertices.
    pub fn aabb(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let mut it = self.vertices.iter();
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for v in it {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Some((lo, hi))
    }

    /// True when every vertex lies in `[-0.5, 0.5]^3` within `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.vertices
            .iter()
            .all(|v| (0..3).all(|k| v[k] >= -0.5 - tol && v[k] <= 0.5 + tol))
    }

    /// First vertex outside `[-0.5, 0.5]^3` beyond `tol`, if any.
    pub fn find_unnormalized_vertex(&self, tol: f64) -> Option<usize> {
        self.vertices
            .iter()
            .position(|v| (0..3).any(|k| v[k] < -0.5 - tol || v[k] > 0.5 + tol))
    }
}

/// What `normalize_mesh` did: the applied similarity transform and how many
/// zero-area triangles were dropped.
#[derive(Debug, Clone, Copy)]
pub struct NormalizeReport {
    pub dropped_degenerates: usize,
    pub scale: f64,
    pub translation: Vector3<f64>,
}

/// Uniformly scales and translates the mesh so its tight AABB is centered at
/// the origin with longest side exactly 1. Aspect ratio is preserved.
/// Triangles with area <= [`DEGENERATE_AREA_TOL`] after the transform are
/// dropped and counted in the report.
///
/// A mesh already normalized to within 1e-12 is passed through untouched
/// (scale 1, translation 0), which makes repeated normalization idempotent;
/// transformed coordinates are clamped to the cube so rounding can never
/// push a vertex outside it.
pub fn normalize_mesh(mesh: &TriangleMesh) -> Result<(TriangleMesh, NormalizeReport)> {
    if mesh.vertices.is_empty() || mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let (lo, hi) = mesh.aabb().ok_or(Error::EmptyMesh)?;
    let extent = hi - lo;
    let longest = extent.max();
    if !(longest > 0.0) {
        return Err(Error::ZeroExtent);
    }
    let center = nalgebra::center(&lo, &hi);
    let already = (longest - 1.0).abs() <= 1e-12 && center.coords.amax() <= 1e-12;
    let (scale, translation) = if already {
        (1.0, Vector3::zeros())
    } else {
        let s = 1.0 / longest;
        (s, -center.coords * s)
    };

    let vertices: Vec<Point3<f64>> = if already {
        mesh.vertices.clone()
    } else {
        mesh.vertices
            .iter()
            .map(|v| {
                let p = v.coords * scale + translation;
                Point3::new(
                    p.x.clamp(-0.5, 0.5),
                    p.y.clamp(-0.5, 0.5),
                    p.z.clamp(-0.5, 0.5),
                )
            })
            .collect()
    };

    let mut dropped = 0usize;
    let mut triangles = Vec::with_capacity(mesh.triangles.len());
    for tri in &mesh.triangles {
        let [a, b, c] = *tri;
        let (pa, pb, pc) = (
            vertices[a as usize],
            vertices[b as usize],
            vertices[c as usize],
        );
        let area = 0.5 * (pb - pa).cross(&(pc - pa)).norm();
        if area > DEGENERATE_AREA_TOL {
            triangles.push(*tri);
        } else {
            dropped += 1;
        }
    }

    let out = TriangleMesh {
        vertices,
        triangles,
    };
    Ok((
        out,
        NormalizeReport {
            dropped_degenerates: dropped,
            scale,
            translation,
        },
    ))
}

/// Loads a mesh from OBJ (by `.obj` extension) or the binary mesh format.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("obj") => obj::load_obj(path),
        _ => vmsh::load_vmsh(path),
    }
}

/// Writes the binary mesh format (magic "VMSH"). Round-trips vertices
/// bit-exactly.
pub fn save_mesh_binary(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    vmsh::save_vmsh(path.as_ref(), mesh)
}

/// Writes an ASCII OBJ with positions and 1-based faces only.
pub fn save_mesh_obj(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    obj::save_obj(path.as_ref(), mesh)
}

/// Parses OBJ text. Exposed for tests; `load_mesh` is the usual entry point.
pub fn parse_obj_str(text: &str) -> Result<TriangleMesh> {
    obj::parse_obj(text, Path::new("<string>"))
}
