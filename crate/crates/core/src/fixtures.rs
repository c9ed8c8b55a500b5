//! Bundled test fixtures: normalized meshes, composite scenes, and seeded
//! orbit cameras. Used by the self-test harness and the acceptance suite so
//! both run on identical inputs.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::mesh::{make_primitive, normalize_mesh, Primitive, TriangleMesh};
use crate::partition::CameraModel;
use crate::rng::SplitMix64;

/// Names of the ten standard fixtures, in canonical order.
pub const FIXTURE_NAMES: [&str; 10] = [
    "cube",
    "icosphere1",
    "icosphere2",
    "icosphere3",
    "torus_a",
    "torus_b",
    "tilted_plane",
    "composite_spheres",
    "composite_sphere_torus",
    "composite_mixed",
];

/// Closed-surface fixtures whose surfaces genuinely curve at the cell scale
/// of the 64 -> 128 step; the redundancy-band check applies to these.
///
/// For surfaces that are flat at cell scale the off-surface fraction of
/// traditional upsampling converges to exactly 1/2 (a plane splits each
/// parent's 8 children 4/4), and finite-resolution corrections land on
/// either side of it: boundary-aligned faces and polyhedral edges push
/// marginally below, tube-scale curvature pushes above. Sphere fixtures of
/// radius ~32 cells sit within +-0.001 of 1/2, so only the thin-tube tori
/// and the torus composite are asserted against the band; every fixture's
/// ratio is still reported.
pub const REDUNDANCY_BAND_FIXTURES: [&str; 3] =
    ["torus_a", "torus_b", "composite_sphere_torus"];

/// Builds a fixture by name, already normalized to the canonical cube.
pub fn fixture(name: &str) -> Option<TriangleMesh> {
    let mesh = match name {
        "cube" => make_primitive(&Primitive::Cube { subdivisions: 1 }).unwrap(),
        "icosphere1" => sphere(1),
        "icosphere2" => sphere(2),
        "icosphere3" => sphere(3),
        "torus_a" => torus(0.35, 0.12, 32, 16),
        "torus_b" => torus(0.4, 0.08, 24, 12),
        "tilted_plane" => {
            let plane = make_primitive(&Primitive::Plane { subdivisions: 15 }).unwrap();
            transform(
                &plane,
                rot_x(0.5) * rot_y(0.35),
                Vector3::zeros(),
                1.0,
            )
        }
        "composite_spheres" => merge(&[
            transform(&sphere(1), Matrix3::identity(), Vector3::new(-0.28, -0.2, 0.15), 0.8),
            transform(&sphere(1), Matrix3::identity(), Vector3::new(0.3, 0.18, -0.2), 0.6),
            transform(&sphere(1), Matrix3::identity(), Vector3::new(0.05, -0.3, -0.3), 0.48),
        ]),
        "composite_sphere_torus" => merge(&[
            torus(0.36, 0.07, 64, 24),
            transform(&sphere(1), Matrix3::identity(), Vector3::new(0.0, 0.0, 0.2), 0.55),
        ]),
        "composite_mixed" => merge(&[
            transform(
                &make_primitive(&Primitive::Cube { subdivisions: 1 }).unwrap(),
                rot_x(0.4) * rot_y(0.6),
                Vector3::new(-0.2, 0.1, 0.0),
                0.45,
            ),
            transform(&sphere(2), Matrix3::identity(), Vector3::new(0.25, -0.15, 0.1), 0.4),
            transform(&torus(0.35, 0.12, 24, 12), rot_x(1.0), Vector3::new(0.1, 0.25, -0.2), 0.5),
        ]),
        _ => return None,
    };
    let (normalized, _) = normalize_mesh(&mesh).expect("fixtures are non-degenerate");
    Some(normalized)
}

/// All standard fixtures with their names.
pub fn fixture_meshes() -> Vec<(&'static str, TriangleMesh)> {
    FIXTURE_NAMES
        .iter()
        .map(|&n| (n, fixture(n).unwrap()))
        .collect()
}

fn sphere(subdivisions: u32) -> TriangleMesh {
    make_primitive(&Primitive::Sphere {
        subdivisions,
        radius: 0.5,
    })
    .unwrap()
}

fn torus(major: f64, minor: f64, rings: u32, sides: u32) -> TriangleMesh {
    make_primitive(&Primitive::Torus {
        major_radius: major,
        minor_radius: minor,
        rings,
        sides,
    })
    .unwrap()
}

fn rot_x(a: f64) -> Matrix3<f64> {
    Matrix3::new(
        1.0, 0.0, 0.0,
        0.0, a.cos(), -a.sin(),
        0.0, a.sin(), a.cos(),
    )
}

fn rot_y(a: f64) -> Matrix3<f64> {
    Matrix3::new(
        a.cos(), 0.0, a.sin(),
        0.0, 1.0, 0.0,
        -a.sin(), 0.0, a.cos(),
    )
}

/// Unit square at z = 0, spanning the full cube cross-section with
/// cell-boundary-aligned edges: the fixture whose upsampling redundancy is
/// exactly 1/2 at every even resolution.
pub fn aligned_plane() -> TriangleMesh {
    let vs = vec![
        Point3::new(-0.5, -0.5, 0.0),
        Point3::new(0.5, -0.5, 0.0),
        Point3::new(0.5, 0.5, 0.0),
        Point3::new(-0.5, 0.5, 0.0),
    ];
    TriangleMesh::new(vs, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
}

/// Single face on the x = -0.5 cube boundary (one cell layer when
/// voxelized).
pub fn boundary_face() -> TriangleMesh {
    let vs = vec![
        Point3::new(-0.5, -0.5, -0.5),
        Point3::new(-0.5, 0.5, -0.5),
        Point3::new(-0.5, 0.5, 0.5),
        Point3::new(-0.5, -0.5, 0.5),
    ];
    TriangleMesh::new(vs, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
}

/// Rigid + uniform-scale transform of all vertices.
pub fn transform(
    mesh: &TriangleMesh,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    scale: f64,
) -> TriangleMesh {
    let vertices = mesh
        .vertices()
        .iter()
        .map(|v| Point3::from(rotation * (v.coords * scale) + translation))
        .collect();
    TriangleMesh::new(vertices, mesh.triangles().to_vec()).expect("indices unchanged")
}

/// Concatenates meshes into one, offsetting indices.
pub fn merge(meshes: &[TriangleMesh]) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for m in meshes {
        let base = vertices.len() as u32;
        vertices.extend_from_slice(m.vertices());
        triangles.extend(m.triangles().iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }
    TriangleMesh::new(vertices, triangles).expect("offset indices valid")
}

/// Camera orbit parameters shared by the render checks.
#[derive(Debug, Clone, Copy)]
pub struct OrbitParams {
    pub width: u32,
    pub height: u32,
    pub distance: f64,
    pub fov_deg: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for OrbitParams {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            distance: 1.6,
            fov_deg: 60.0,
            near: 0.1,
            far: 5.0,
        }
    }
}

/// Deterministic camera `index` of the orbit seeded by `seed`: a random
/// direction (poles avoided) at fixed distance, looking at the origin.
pub fn orbit_camera(seed: u64, index: u64, params: &OrbitParams) -> CameraModel {
    let mut rng = SplitMix64::new(seed.wrapping_mul(0x9E37_79B9).wrapping_add(index));
    let azimuth = rng.next_range(0.0, std::f64::consts::TAU);
    // Clamp elevation away from the poles so the up vector stays valid.
    let sin_elev = rng.next_range(-0.85, 0.85);
    let cos_elev = (1.0 - sin_elev * sin_elev).sqrt();
    let eye = Point3::new(
        params.distance * cos_elev * azimuth.cos(),
        params.distance * sin_elev,
        params.distance * cos_elev * azimuth.sin(),
    );
    let f = params.width as f64 / (2.0 * (params.fov_deg.to_radians() / 2.0).tan());
    CameraModel::look_at(
        eye,
        Point3::origin(),
        f,
        f,
        params.width,
        params.height,
        params.near,
        params.far,
    )
    .expect("orbit cameras are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fixtures_build_and_are_normalized() {
        for (name, mesh) in fixture_meshes() {
            assert!(!mesh.is_empty(), "{name} empty");
            assert!(mesh.is_normalized(1e-9), "{name} not normalized");
            let (lo, hi) = mesh.aabb().unwrap();
            let longest = (hi - lo).max();
            assert!((longest - 1.0).abs() < 1e-12, "{name} longest side {longest}");
        }
    }

    #[test]
    fn unknown_fixture_is_none() {
        assert!(fixture("nope").is_none());
    }

    #[test]
    fn orbit_cameras_deterministic_and_valid() {
        let p = OrbitParams::default();
        for i in 0..8 {
            let a = orbit_camera(7, i, &p);
            let b = orbit_camera(7, i, &p);
            assert_eq!(a, b);
            a.validate().unwrap();
        }
        let a = orbit_camera(7, 0, &p);
        let b = orbit_camera(8, 0, &p);
        assert_ne!(a, b);
    }
}
