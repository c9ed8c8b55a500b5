//! Test-fixture primitives: cube, icosphere, torus, plane.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

use super::TriangleMesh;

/// Primitive shapes with their generation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// Axis-aligned cube spanning `[-0.5, 0.5]^3`; each face split into
    /// `(subdivisions+1)^2` quads.
    Cube { subdivisions: u32 },
    /// Icosphere: icosahedron subdivided `subdivisions` times and projected
    /// onto a sphere of the given radius. `V = 10*4^n + 2`, `F = 20*4^n`.
    Sphere { subdivisions: u32, radius: f64 },
    /// Torus in the xy-plane. `2 * rings * sides` triangles.
    Torus {
        major_radius: f64,
        minor_radius: f64,
        rings: u32,
        sides: u32,
    },
    /// Open unit square `[-0.5, 0.5]^2` at z = 0.
    Plane { subdivisions: u32 },
}

/// Generates a primitive mesh. Cube, sphere and torus are watertight.
pub fn make_primitive(p: &Primitive) -> Result<TriangleMesh> {
    match *p {
        Primitive::Cube { subdivisions } => {
            check(subdivisions <= 64, "cube subdivisions must be <= 64")?;
            Ok(cube(subdivisions))
        }
        Primitive::Sphere {
            subdivisions,
            radius,
        } => {
            check(subdivisions <= 7, "sphere subdivisions must be <= 7")?;
            check(radius > 0.0, "sphere radius must be positive")?;
            Ok(icosphere(subdivisions, radius))
        }
        Primitive::Torus {
            major_radius,
            minor_radius,
            rings,
            sides,
        } => {
            check(major_radius > 0.0 && minor_radius > 0.0, "torus radii must be positive")?;
            check(
                minor_radius < major_radius,
                "torus minor radius must be smaller than major radius",
            )?;
            check(rings >= 3 && sides >= 3, "torus needs rings >= 3 and sides >= 3")?;
            Ok(torus(major_radius, minor_radius, rings, sides))
        }
        Primitive::Plane { subdivisions } => {
            check(subdivisions <= 1024, "plane subdivisions must be <= 1024")?;
            Ok(plane(subdivisions))
        }
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg.to_string()))
    }
}

/// Deduplicating vertex pool keyed on exact bit patterns.
#[derive(Default)]
struct VertexPool {
    vertices: Vec<Point3<f64>>,
    index: HashMap<[u64; 3], u32>,
}

impl VertexPool {
    fn insert(&mut self, p: Point3<f64>) -> u32 {
        let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        *self.index.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            (self.vertices.len() - 1) as u32
        })
    }
}

fn cube(subdivisions: u32) -> TriangleMesh {
    let n = subdivisions + 1;
    let mut pool = VertexPool::default();
    let mut triangles = Vec::new();
    // One grid per face; shared edges deduplicate through the pool because
    // grid points on the boundary evaluate to identical coordinates.
    let faces: [(Vector3<f64>, Vector3<f64>, Vector3<f64>); 6] = [
        (Vector3::new(-0.5, -0.5, -0.5), Vector3::x(), Vector3::y()), // z = -0.5
        (Vector3::new(-0.5, -0.5, 0.5), Vector3::y(), Vector3::x()),  // z = +0.5
        (Vector3::new(-0.5, -0.5, -0.5), Vector3::z(), Vector3::x()), // y = -0.5
        (Vector3::new(-0.5, 0.5, -0.5), Vector3::x(), Vector3::z()),  // y = +0.5
        (Vector3::new(-0.5, -0.5, -0.5), Vector3::y(), Vector3::z()), // x = -0.5
        (Vector3::new(0.5, -0.5, -0.5), Vector3::z(), Vector3::y()),  // x = +0.5
    ];
    for (origin, du, dv) in faces {
        let mut grid = vec![0u32; ((n + 1) * (n + 1)) as usize];
        for j in 0..=n {
            for i in 0..=n {
                let p = Point3::from(
                    origin + du * (i as f64 / n as f64) + dv * (j as f64 / n as f64),
                );
                grid[(j * (n + 1) + i) as usize] = pool.insert(p);
            }
        }
        for j in 0..n {
            for i in 0..n {
                let a = grid[(j * (n + 1) + i) as usize];
                let b = grid[(j * (n + 1) + i + 1) as usize];
                let c = grid[((j + 1) * (n + 1) + i + 1) as usize];
                let d = grid[((j + 1) * (n + 1) + i) as usize];
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
    }
    TriangleMesh::new(pool.vertices, triangles).expect("cube indices valid")
}

fn icosphere(subdivisions: u32, radius: f64) -> TriangleMesh {
    // Icosahedron from three orthogonal golden rectangles.
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| {
        let v = Vector3::new(x, y, z).normalize() * radius;
        Point3::from(v)
    })
    .collect();

    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut split = |a: u32, b: u32, vertices: &mut Vec<Point3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let m = nalgebra::center(&vertices[a as usize], &vertices[b as usize]);
                let v = m.coords.normalize() * radius;
                vertices.push(Point3::from(v));
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = split(a, b, &mut vertices);
            let bc = split(b, c, &mut vertices);
            let ca = split(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }

    debug_assert_eq!(vertices.len(), 10 * 4usize.pow(subdivisions) + 2);
    debug_assert_eq!(faces.len(), 20 * 4usize.pow(subdivisions));
    TriangleMesh::new(vertices, faces).expect("icosphere indices valid")
}

fn torus(major_radius: f64, minor_radius: f64, rings: u32, sides: u32) -> TriangleMesh {
    let mut vertices = Vec::with_capacity((rings * sides) as usize);
    for i in 0..rings {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / rings as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..sides {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / sides as f64;
            let (sp, cp) = phi.sin_cos();
            let r = major_radius + minor_radius * cp;
            vertices.push(Point3::new(r * ct, r * st, minor_radius * sp));
        }
    }
    let idx = |i: u32, j: u32| (i % rings) * sides + (j % sides);
    let mut triangles = Vec::with_capacity((2 * rings * sides) as usize);
    for i in 0..rings {
        for j in 0..sides {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i + 1, j + 1);
            let d = idx(i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("torus indices valid")
}

fn plane(subdivisions: u32) -> TriangleMesh {
    let n = subdivisions + 1;
    let mut vertices = Vec::with_capacity(((n + 1) * (n + 1)) as usize);
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point3::new(
                i as f64 / n as f64 - 0.5,
                j as f64 / n as f64 - 0.5,
                0.0,
            ));
        }
    }
    let mut triangles = Vec::with_capacity((2 * n * n) as usize);
    for j in 0..n {
        for i in 0..n {
            let a = j * (n + 1) + i;
            let b = a + 1;
            let c = a + n + 2;
            let d = a + n + 1;
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("plane indices valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_counts() {
        let m = make_primitive(&Primitive::Cube { subdivisions: 0 }).unwrap();
        assert_eq!(m.triangle_count(), 12);
        assert_eq!(m.vertex_count(), 8);
        let m = make_primitive(&Primitive::Cube { subdivisions: 1 }).unwrap();
        assert_eq!(m.triangle_count(), 48);
    }

    #[test]
    fn icosphere_counts_follow_subdivision_formula() {
        for n in 0..4u32 {
            let m = make_primitive(&Primitive::Sphere {
                subdivisions: n,
                radius: 0.5,
            })
            .unwrap();
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(n) + 2);
            assert_eq!(m.triangle_count(), 20 * 4usize.pow(n));
        }
    }

    #[test]
    fn icosphere_vertices_on_sphere() {
        let m = make_primitive(&Primitive::Sphere {
            subdivisions: 3,
            radius: 0.5,
        })
        .unwrap();
        for v in m.vertices() {
            assert!((v.coords.norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_counts() {
        let m = make_primitive(&Primitive::Torus {
            major_radius: 0.35,
            minor_radius: 0.12,
            rings: 32,
            sides: 16,
        })
        .unwrap();
        assert_eq!(m.triangle_count(), 1024);
        assert_eq!(m.vertex_count(), 32 * 16);
    }

    #[test]
    fn plane_counts_and_extent() {
        let m = make_primitive(&Primitive::Plane { subdivisions: 0 }).unwrap();
        assert_eq!(m.triangle_count(), 2);
        let (lo, hi) = m.aabb().unwrap();
        assert_eq!((lo.x, hi.x), (-0.5, 0.5));
        assert_eq!((lo.z, hi.z), (0.0, 0.0));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(make_primitive(&Primitive::Torus {
            major_radius: 0.1,
            minor_radius: 0.2,
            rings: 8,
            sides: 8,
        })
        .is_err());
        assert!(make_primitive(&Primitive::Sphere {
            subdivisions: 0,
            radius: -1.0,
        })
        .is_err());
    }

    #[test]
    fn watertight_primitives_have_closed_edges() {
        // Every edge of a watertight mesh appears exactly twice (once per
        // direction).
        for p in [
            Primitive::Cube { subdivisions: 1 },
            Primitive::Sphere {
                subdivisions: 2,
                radius: 0.5,
            },
            Primitive::Torus {
                major_radius: 0.35,
                minor_radius: 0.12,
                rings: 8,
                sides: 6,
            },
        ] {
            let m = make_primitive(&p).unwrap();
            let mut count: HashMap<(u32, u32), i32> = HashMap::new();
            for t in m.triangles() {
                for k in 0..3 {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    *count.entry((a.min(b), a.max(b))).or_default() += 1;
                }
            }
            assert!(
                count.values().all(|&c| c == 2),
                "open edges in {p:?}"
            );
        }
    }
}
