//! View-domain partitioning: pinhole camera, overlapping image tiles,
//! per-tile sub-frusta, and conservative voxel culling.
//!
//! Tiles carry two distinct margins. The pixel margin grows a tile's core
//! into its expanded rect and exists for stitch bookkeeping; the world
//! margin pushes the frustum side planes outward and exists for culling
//! soundness. [`world_margin_for_splat`] couples the two: with a world
//! margin of at least `splat_radius_px * far / min(fx, fy)`, every voxel
//! whose splat can touch a pixel of the expanded rect survives culling.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::splitmix64;
use crate::voxel::{cell_center, SparseVoxelGrid};

/// Pinhole camera: intrinsics in pixels plus a rigid world-to-camera
/// transform (`p_cam = R * p_world + t`, camera looks down +z).
///
/// This struct is the camera JSON schema: all fields serialize as written,
/// with `rotation` as three row arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// World-to-camera rotation, row-major.
    pub rotation: [[f64; 3]; 3],
    /// World-to-camera translation.
    pub translation: [f64; 3],
    pub near: f64,
    pub far: f64,
}

const ORTHONORMAL_TOL: f64 = 1e-9;

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCamera(msg));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad(format!("fx/fy must be positive, got {}/{}", self.fx, self.fy));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return bad(format!(
                "need 0 < near < far, got near={} far={}",
                self.near, self.far
            ));
        }
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be nonzero".into());
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return bad("principal point must be finite".into());
        }
        let r = self.rot();
        let delta = r.transpose() * r - Matrix3::identity();
        if delta.amax() > ORTHONORMAL_TOL {
            return bad(format!(
                "rotation not orthonormal (max deviation {:.3e})",
                delta.amax()
            ));
        }
        if (r.determinant() - 1.0).abs() > 1e-6 {
            return bad("rotation must be proper (determinant +1)".into());
        }
        Ok(())
    }

    pub fn rot(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rotation[i][j])
    }

    pub fn trans(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }

    /// Camera position in world space.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rot().transpose() * self.trans()))
    }

    /// World point to camera coordinates.
    pub fn to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rot() * p.coords + self.trans()
    }

    /// Camera forward axis (+z) expressed in world coordinates.
    pub fn forward_world(&self) -> Vector3<f64> {
        self.rot().row(2).transpose()
    }

    /// Look-at constructor: camera at `eye` looking toward `target`.
    pub fn look_at(
        eye: Point3<f64>,
        target: Point3<f64>,
        fx: f64,
        fy: f64,
        width: u32,
        height: u32,
        near: f64,
        far: f64,
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidCamera("eye and target coincide".into()))?;
        let mut up = Vector3::new(0.0, 1.0, 0.0);
        if forward.cross(&up).norm() < 1e-6 {
            up = Vector3::new(1.0, 0.0, 0.0);
        }
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right); // completes a proper rotation
        let rot = Matrix3::from_rows(&[
            right.transpose(),
            down.transpose(),
            forward.transpose(),
        ]);
        let t = -(rot * eye.coords);
        let cam = Self {
            fx,
            fy,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            rotation: [
                [rot[(0, 0)], rot[(0, 1)], rot[(0, 2)]],
                [rot[(1, 0)], rot[(1, 1)], rot[(1, 2)]],
                [rot[(2, 0)], rot[(2, 1)], rot[(2, 2)]],
            ],
            translation: [t.x, t.y, t.z],
            near,
            far,
        };
        cam.validate()?;
        Ok(cam)
    }
}

/// Integer pixel rectangle `[x0, x0+w) x [y0, y0+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    pub fn x1(&self) -> u32 {
        self.x0 + self.w
    }
    pub fn y1(&self) -> u32 {
        self.y0 + self.h
    }
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }
    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }
}

/// One tile of a tiling: the disjoint core it owns plus the margin-grown
/// expanded rect it renders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Tile {
    /// Row-major index within its tiling.
    pub id: u32,
    pub core: PixelRect,
    pub margin: u32,
    pub expanded: PixelRect,
}

/// Splits the full image into `grid_n x grid_n` overlapping tiles. Cores
/// partition the image exactly (sizes differ by at most one pixel when the
/// dimensions do not divide); expanded rects are cores grown by `margin` and
/// clipped to the image.
pub fn make_tiles(camera: &CameraModel, grid_n: u32, margin: u32) -> Result<Vec<Tile>> {
    let full = PixelRect {
        x0: 0,
        y0: 0,
        w: camera.width,
        h: camera.height,
    };
    make_tiles_in_rect(&full, camera.width, camera.height, grid_n, margin)
}

/// Tiling of an arbitrary region rect. Cores partition `region`; expanded
/// rects are clipped to the full image (margin context may extend past the
/// region into the image).
pub fn make_tiles_in_rect(
    region: &PixelRect,
    image_w: u32,
    image_h: u32,
    grid_n: u32,
    margin: u32,
) -> Result<Vec<Tile>> {
    if grid_n == 0 {
        return Err(Error::InvalidArgument("grid_n must be >= 1".into()));
    }
    if region.x1() > image_w || region.y1() > image_h {
        return Err(Error::TileOutOfBounds(format!(
            "region {region:?} exceeds {image_w}x{image_h} image"
        )));
    }
    if grid_n > region.w || grid_n > region.h {
        return Err(Error::GridTooLarge {
            grid_n,
            dim: region.w.min(region.h),
        });
    }
    // Boundary k sits at ceil(k * extent / n); consecutive boundaries differ
    // by floor(extent/n) or that plus one, and boundaries of an n-tiling are
    // a subset of those of any multiple of n.
    let cut = |extent: u32, k: u32| -> u32 { (k as u64 * extent as u64).div_ceil(grid_n as u64) as u32 };
    let mut tiles = Vec::with_capacity((grid_n * grid_n) as usize);
    for gy in 0..grid_n {
        let y0 = region.y0 + cut(region.h, gy);
        let y1 = region.y0 + cut(region.h, gy + 1);
        for gx in 0..grid_n {
            let x0 = region.x0 + cut(region.w, gx);
            let x1 = region.x0 + cut(region.w, gx + 1);
            let core = PixelRect {
                x0,
                y0,
                w: x1 - x0,
                h: y1 - y0,
            };
            let ex0 = core.x0.saturating_sub(margin);
            let ey0 = core.y0.saturating_sub(margin);
            let ex1 = (core.x1() + margin).min(image_w);
            let ey1 = (core.y1() + margin).min(image_h);
            tiles.push(Tile {
                id: gy * grid_n + gx,
                core,
                margin,
                expanded: PixelRect {
                    x0: ex0,
                    y0: ey0,
                    w: ex1 - ex0,
                    h: ey1 - ey0,
                },
            });
        }
    }
    Ok(tiles)
}

/// Deterministic tile choice for a training step: splitmix64 of
/// `seed ^ step`, reduced modulo the tile count.
pub fn sample_tile(tiles: &[Tile], seed: u64, step: u64) -> Result<&Tile> {
    if tiles.is_empty() {
        return Err(Error::EmptyTiles);
    }
    let value = splitmix64(seed ^ step);
    Ok(&tiles[(value % tiles.len() as u64) as usize])
}

/// Projected pixel bounding box of the grid's voxel centers, padded by
/// `pad_px` and clipped to the image. `None` when nothing projects into the
/// depth range in front of the camera.
pub fn foreground_rect(
    grid: &SparseVoxelGrid,
    camera: &CameraModel,
    pad_px: u32,
) -> Option<PixelRect> {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for &c in grid.coords() {
        let p = camera.to_camera(&cell_center(c, grid.resolution()));
        if p.z < camera.near || p.z > camera.far {
            continue;
        }
        let u = camera.fx * p.x / p.z + camera.cx;
        let v = camera.fy * p.y / p.z + camera.cy;
        lo = (lo.0.min(u), lo.1.min(v));
        hi = (hi.0.max(u), hi.1.max(v));
        any = true;
    }
    if !any {
        return None;
    }
    let pad = pad_px as f64;
    let x0 = ((lo.0 - pad).floor().max(0.0)) as u32;
    let y0 = ((lo.1 - pad).floor().max(0.0)) as u32;
    let x1 = ((hi.0 + pad).ceil().min(camera.width as f64)) as u32;
    let y1 = ((hi.1 + pad).ceil().min(camera.height as f64)) as u32;
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    Some(PixelRect {
        x0,
        y0,
        w: x1 - x0,
        h: y1 - y0,
    })
}

/// Oriented plane `normal . p + offset >= 0` for points inside; unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) + self.offset
    }
}

/// Six world-space planes bounding a (tile) view volume. Plane order:
/// left, right, top, bottom, near, far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileFrustum {
    pub planes: [Plane; 6],
}

impl TileFrustum {
    pub fn contains_point(&self, p: &Point3<f64>) -> bool {
        self.planes.iter().all(|pl| pl.signed_distance(p) >= 0.0)
    }

    /// Conservative sphere test: true unless some plane puts the whole
    /// sphere outside.
    pub fn sphere_intersects(&self, center: &Point3<f64>, radius: f64) -> bool {
        self.planes
            .iter()
            .all(|pl| pl.signed_distance(center) >= -radius)
    }
}

/// Frustum of a tile's expanded rect, built geometrically from the rect's
/// corner rays; side planes are pushed outward by `world_margin`.
pub fn tile_frustum(camera: &CameraModel, tile: &Tile, world_margin: f64) -> Result<TileFrustum> {
    camera.validate()?;
    if tile.expanded.x1() > camera.width || tile.expanded.y1() > camera.height {
        return Err(Error::TileOutOfBounds(format!("{:?}", tile.expanded)));
    }
    frustum_of_rect(camera, &tile.expanded, world_margin)
}

fn frustum_of_rect(
    camera: &CameraModel,
    rect: &PixelRect,
    world_margin: f64,
) -> Result<TileFrustum> {
    if world_margin < 0.0 || !world_margin.is_finite() {
        return Err(Error::InvalidArgument(
            "world margin must be finite and >= 0".into(),
        ));
    }
    let ray = |u: f64, v: f64| -> Vector3<f64> {
        Vector3::new((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0)
    };
    let (x0, y0) = (rect.x0 as f64, rect.y0 as f64);
    let (x1, y1) = (rect.x1() as f64, rect.y1() as f64);
    let tl = ray(x0, y0);
    let tr = ray(x1, y0);
    let bl = ray(x0, y1);
    let br = ray(x1, y1);
    let center_ray = ray((x0 + x1) / 2.0, (y0 + y1) / 2.0);

    let rot_t = camera.rot().transpose();
    let cam_center = camera.center();
    let side = |a: &Vector3<f64>, b: &Vector3<f64>| -> Plane {
        let mut n = a.cross(b);
        if n.dot(&center_ray) < 0.0 {
            n = -n;
        }
        let n_world = (rot_t * n).normalize();
        Plane {
            normal: n_world,
            offset: -n_world.dot(&cam_center.coords) + world_margin,
        }
    };

    let forward = camera.forward_world();
    let fc = forward.dot(&cam_center.coords);
    let near = Plane {
        normal: forward,
        offset: -fc - camera.near,
    };
    let far = Plane {
        normal: -forward,
        offset: fc + camera.far,
    };

    Ok(TileFrustum {
        planes: [
            side(&bl, &tl), // left
            side(&tr, &br), // right
            side(&tl, &tr), // top
            side(&br, &bl), // bottom
            near,
            far,
        ],
    })
}

/// Whole-image frustum built analytically from the projection inequalities
/// (`u >= 0` etc.), as an independent construction route from
/// [`tile_frustum`].
pub fn global_frustum(camera: &CameraModel, world_margin: f64) -> Result<TileFrustum> {
    camera.validate()?;
    if world_margin < 0.0 || !world_margin.is_finite() {
        return Err(Error::InvalidArgument(
            "world margin must be finite and >= 0".into(),
        ));
    }
    let rot_t = camera.rot().transpose();
    let cam_center = camera.center();
    let (w, h) = (camera.width as f64, camera.height as f64);
    // u >= x0: fx*x - (x0-cx)*z >= 0, and symmetric counterparts.
    let side = |n_cam: Vector3<f64>| -> Plane {
        let n_world = (rot_t * n_cam).normalize();
        Plane {
            normal: n_world,
            offset: -n_world.dot(&cam_center.coords) + world_margin,
        }
    };
    let forward = camera.forward_world();
    let fc = forward.dot(&cam_center.coords);
    Ok(TileFrustum {
        planes: [
            side(Vector3::new(camera.fx, 0.0, camera.cx - 0.0)),
            side(Vector3::new(-camera.fx, 0.0, w - camera.cx)),
            side(Vector3::new(0.0, camera.fy, camera.cy - 0.0)),
            side(Vector3::new(0.0, -camera.fy, h - camera.cy)),
            Plane {
                normal: forward,
                offset: -fc - camera.near,
            },
            Plane {
                normal: -forward,
                offset: fc + camera.far,
            },
        ],
    })
}

/// World margin that makes culling sound for opaque splats of the given
/// pixel radius: a splat center at depth <= far whose disk reaches a rect
/// pixel sits within `r * depth / min(fx, fy)` world units of the frustum.
pub fn world_margin_for_splat(camera: &CameraModel, splat_radius_px: f64) -> f64 {
    splat_radius_px * camera.far / camera.fx.min(camera.fy)
}

/// Keeps every voxel whose bounding sphere (radius
/// `voxel_world_size * sqrt(3)/2`) intersects the frustum. Conservative:
/// may keep extras, never drops a voxel that intersects.
pub fn cull_voxels(
    grid: &SparseVoxelGrid,
    frustum: &TileFrustum,
    voxel_world_size: f64,
) -> (SparseVoxelGrid, usize) {
    let radius = voxel_world_size * 3.0f64.sqrt() / 2.0;
    let kept: Vec<_> = grid
        .coords()
        .iter()
        .copied()
        .filter(|&c| frustum.sphere_intersects(&cell_center(c, grid.resolution()), radius))
        .collect();
    let grid = SparseVoxelGrid::from_sorted_unchecked(kept, grid.resolution());
    let count = grid.len();
    (grid, count)
}
