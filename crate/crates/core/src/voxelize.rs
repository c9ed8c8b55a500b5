//! Conservative surface voxelization.
//!
//! A cell is active iff at least one triangle intersects the cell's *closed*
//! axis-aligned box, decided by a separating-axis test in double precision
//! with zero epsilon: only a strictly separating axis rejects, so
//! boundary-touching counts as intersecting. The closed convention is what
//! makes parent closure hold: any axis strictly separating a parent cell
//! from a triangle also separates each of its children.
//!
//! [`voxelize_surface`] accelerates by binning each triangle to the cell
//! range of its bounding box; [`voxelize_dense_oracle`] tests every cell of
//! the grid against every triangle. Both decide each (cell, triangle) pair
//! with the same predicate, so any disagreement indicts the binning.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, NORMALIZED_TOL};
use crate::voxel::{Coord, SparseVoxelGrid};

/// Largest resolution accepted by the dense oracle (O(T * R^3)).
pub const ORACLE_MAX_RESOLUTION: u32 = 32;

const MIN_RESOLUTION: u32 = 4;
const MAX_RESOLUTION: u32 = 1024;

/// Marks every cell whose closed box intersects the mesh surface.
///
/// Requires a normalized mesh (all vertices in `[-0.5, 0.5]^3` within 1e-9)
/// and a power-of-two resolution in `[4, 1024]`.
pub fn voxelize_surface(mesh: &TriangleMesh, resolution: u32) -> Result<SparseVoxelGrid> {
    validate(mesh, resolution)?;
    let r = resolution as i64;

    let chunks: Vec<Vec<Coord>> = (0..mesh.triangle_count())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangle_points(t);
            let tester = TriBoxTester::new(&tri);
            let (lo, hi) = triangle_cell_range(&tri, r);
            let mut hits = Vec::new();
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        let c = [x as u16, y as u16, z as u16];
                        if tester.overlaps_cell(c, resolution) {
                            hits.push(c);
                        }
                    }
                }
            }
            hits
        })
        .collect();

    let mut all: Vec<Coord> = chunks.into_iter().flatten().collect();
    all.sort_unstable();
    all.dedup();
    Ok(SparseVoxelGrid::from_sorted_unchecked(all, resolution))
}

/// Brute-force reference: every cell against every triangle, no acceleration
/// structure. Same cell semantics as [`voxelize_surface`].
pub fn voxelize_dense_oracle(mesh: &TriangleMesh, resolution: u32) -> Result<SparseVoxelGrid> {
    validate(mesh, resolution)?;
    if resolution > ORACLE_MAX_RESOLUTION {
        return Err(Error::ResolutionOutOfRange {
            got: resolution,
            msg: format!("dense oracle supports at most {ORACLE_MAX_RESOLUTION}"),
        });
    }
    let testers: Vec<TriBoxTester> = (0..mesh.triangle_count())
        .map(|t| TriBoxTester::new(&mesh.triangle_points(t)))
        .collect();

    let mut coords = Vec::new();
    for x in 0..resolution as u16 {
        for y in 0..resolution as u16 {
            for z in 0..resolution as u16 {
                let c = [x, y, z];
                if testers.iter().any(|t| t.overlaps_cell(c, resolution)) {
                    coords.push(c);
                }
            }
        }
    }
    Ok(SparseVoxelGrid::from_sorted_unchecked(coords, resolution))
}

fn validate(mesh: &TriangleMesh, resolution: u32) -> Result<()> {
    if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&resolution)
        || !resolution.is_power_of_two()
    {
        return Err(Error::ResolutionOutOfRange {
            got: resolution,
            msg: format!("must be a power of two in [{MIN_RESOLUTION}, {MAX_RESOLUTION}]"),
        });
    }
    if let Some(index) = mesh.find_unnormalized_vertex(NORMALIZED_TOL) {
        let v = mesh.vertices()[index];
        return Err(Error::NotNormalized {
            index,
            x: v.x,
            y: v.y,
            z: v.z,
        });
    }
    Ok(())
}

/// Inclusive cell-index range covered by the triangle's AABB, padded by one
/// cell so float rounding in the range arithmetic can never exclude a cell
/// the exact test would accept.
fn triangle_cell_range(tri: &[Point3<f64>; 3], r: i64) -> ([i64; 3], [i64; 3]) {
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for k in 0..3 {
        let tmin = tri[0][k].min(tri[1][k]).min(tri[2][k]);
        let tmax = tri[0][k].max(tri[1][k]).max(tri[2][k]);
        lo[k] = (((tmin + 0.5) * r as f64).floor() as i64 - 1).clamp(0, r - 1);
        hi[k] = (((tmax + 0.5) * r as f64).floor() as i64 + 1).clamp(0, r - 1);
    }
    (lo, hi)
}

/// Triangle vs axis-aligned box separating-axis test (Akenine-Moller).
/// Per-triangle quantities are precomputed; the per-cell call translates the
/// vertices into box-centered coordinates.
struct TriBoxTester {
    verts: [Vector3<f64>; 3],
    edges: [Vector3<f64>; 3],
    normal: Vector3<f64>,
}

impl TriBoxTester {
    fn new(tri: &[Point3<f64>; 3]) -> Self {
        let verts = [tri[0].coords, tri[1].coords, tri[2].coords];
        let edges = [
            verts[1] - verts[0],
            verts[2] - verts[1],
            verts[0] - verts[2],
        ];
        let normal = edges[0].cross(&edges[1]);
        Self {
            verts,
            edges,
            normal,
        }
    }

    /// Closed-box overlap against cell `c` of an `R^3` grid over
    /// `[-0.5, 0.5]^3`. Cell bounds are exact dyadic rationals for
    /// power-of-two `R`, so ties are decided consistently everywhere.
    fn overlaps_cell(&self, c: Coord, resolution: u32) -> bool {
        let r = resolution as f64;
        let center = Vector3::new(
            (c[0] as f64 + 0.5) / r - 0.5,
            (c[1] as f64 + 0.5) / r - 0.5,
            (c[2] as f64 + 0.5) / r - 0.5,
        );
        let h = 0.5 / r;
        let v = [
            self.verts[0] - center,
            self.verts[1] - center,
            self.verts[2] - center,
        ];

        // Box face normals: per-axis interval overlap.
        for k in 0..3 {
            let mn = v[0][k].min(v[1][k]).min(v[2][k]);
            let mx = v[0][k].max(v[1][k]).max(v[2][k]);
            if mn > h || mx < -h {
                return false;
            }
        }

        // Triangle plane.
        let d = self.normal.dot(&v[0]);
        let rb = h * (self.normal.x.abs() + self.normal.y.abs() + self.normal.z.abs());
        if d > rb || d < -rb {
            return false;
        }

        // Nine edge cross products.
        for e in &self.edges {
            for axis in [
                Vector3::new(0.0, -e.z, e.y),
                Vector3::new(e.z, 0.0, -e.x),
                Vector3::new(-e.y, e.x, 0.0),
            ] {
                let p0 = axis.dot(&v[0]);
                let p1 = axis.dot(&v[1]);
                let p2 = axis.dot(&v[2]);
                let mn = p0.min(p1).min(p2);
                let mx = p0.max(p1).max(p2);
                let rb = h * (axis.x.abs() + axis.y.abs() + axis.z.abs());
                if mn > rb || mx < -rb {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_primitive, normalize_mesh, parse_obj_str, Primitive};
    use nalgebra::Point3;

    fn square_at_x(x: f64) -> TriangleMesh {
        // Two triangles covering [-0.5, 0.5]^2 in (y, z) at the given x.
        let vs = vec![
            Point3::new(x, -0.5, -0.5),
            Point3::new(x, 0.5, -0.5),
            Point3::new(x, 0.5, 0.5),
            Point3::new(x, -0.5, 0.5),
        ];
        TriangleMesh::new(vs, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    fn plane_z0() -> TriangleMesh {
        let vs = vec![
            Point3::new(-0.5, -0.5, 0.0),
            Point3::new(0.5, -0.5, 0.0),
            Point3::new(0.5, 0.5, 0.0),
            Point3::new(-0.5, 0.5, 0.0),
        ];
        TriangleMesh::new(vs, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn face_at_boundary_marks_one_layer() {
        let mesh = square_at_x(-0.5);
        let grid = voxelize_surface(&mesh, 4).unwrap();
        assert_eq!(grid.len(), 16);
        assert!(grid.coords().iter().all(|c| c[0] == 0));
    }

    #[test]
    fn empty_mesh_gives_empty_grid() {
        let mesh = TriangleMesh::new(vec![], vec![]).unwrap();
        assert!(voxelize_surface(&mesh, 8).unwrap().is_empty());
    }

    #[test]
    fn plane_z0_touches_both_layers() {
        // z = 0 is the shared boundary of cells z=3 and z=4 at R=8.
        let grid = voxelize_surface(&plane_z0(), 8).unwrap();
        let zs: std::collections::BTreeSet<u16> = grid.coords().iter().map(|c| c[2]).collect();
        assert_eq!(zs.into_iter().collect::<Vec<_>>(), vec![3, 4]);
        assert_eq!(grid.len(), 128);
        let oracle = voxelize_dense_oracle(&plane_z0(), 8).unwrap();
        assert_eq!(grid, oracle);
    }

    #[test]
    fn cube_surface_shell_count() {
        let cube = make_primitive(&Primitive::Cube { subdivisions: 0 }).unwrap();
        let grid = voxelize_surface(&cube, 4).unwrap();
        // 4^3 - 2^3 interior
        assert_eq!(grid.len(), 56);
        let oracle = voxelize_dense_oracle(&cube, 4).unwrap();
        assert_eq!(grid, oracle);
    }

    #[test]
    fn oracle_equivalence_icosphere() {
        let sphere = make_primitive(&Primitive::Sphere {
            subdivisions: 3,
            radius: 0.5,
        })
        .unwrap();
        let fast = voxelize_surface(&sphere, 16).unwrap();
        let slow = voxelize_dense_oracle(&sphere, 16).unwrap();
        assert_eq!(fast, slow);
        assert!(!fast.is_empty());
    }

    #[test]
    fn rejects_unnormalized_mesh() {
        let mesh = parse_obj_str("v 0 0 0\nv 2 0 0\nv 0 2 0\nf 1 2 3\n").unwrap();
        assert!(matches!(
            voxelize_surface(&mesh, 8),
            Err(Error::NotNormalized { .. })
        ));
        let (normalized, _) = normalize_mesh(&mesh).unwrap();
        assert!(voxelize_surface(&normalized, 8).is_ok());
    }

    #[test]
    fn rejects_bad_resolutions() {
        let mesh = square_at_x(0.0);
        assert!(voxelize_surface(&mesh, 3).is_err());
        assert!(voxelize_surface(&mesh, 2).is_err());
        assert!(voxelize_surface(&mesh, 2048).is_err());
        assert!(voxelize_dense_oracle(&mesh, 64).is_err());
    }

    #[test]
    fn parent_closure_on_sphere() {
        let sphere = make_primitive(&Primitive::Sphere {
            subdivisions: 2,
            radius: 0.5,
        })
        .unwrap();
        let coarse = voxelize_surface(&sphere, 8).unwrap();
        let fine = voxelize_surface(&sphere, 16).unwrap();
        for c in fine.coords() {
            let parent = [c[0] / 2, c[1] / 2, c[2] / 2];
            assert!(coarse.contains(parent), "parent of {c:?} missing");
        }
    }

    #[test]
    fn scaling_band_on_smooth_closed_surfaces() {
        let torus = make_primitive(&Primitive::Torus {
            major_radius: 0.35,
            minor_radius: 0.12,
            rings: 32,
            sides: 16,
        })
        .unwrap();
        let (torus, _) = normalize_mesh(&torus).unwrap();
        for r in [8u32, 16, 32] {
            let a = voxelize_surface(&torus, r).unwrap().len() as f64;
            let b = voxelize_surface(&torus, 2 * r).unwrap().len() as f64;
            let ratio = b / a;
            assert!(
                (2.0..=6.0).contains(&ratio),
                "count ratio {ratio} at R={r} outside sanity band"
            );
        }
    }
}
