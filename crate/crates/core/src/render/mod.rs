//! Deterministic opaque-splat renderer and stitching.
//!
//! Voxels draw as opaque fixed-radius disks at their projected centers with
//! z-buffering. Determinism rules: a pixel is overwritten only by a strictly
//! nearer depth, and voxels are visited in canonical grid order, so equal
//! depths resolve to the smaller canonical index. Tile rendering and full
//! rendering share one viewport code path; they differ only in the voxel set
//! and viewport rect, which is exactly what the stitch-equivalence tests
//! exercise.

pub mod metrics;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::partition::{CameraModel, PixelRect, Tile};
use crate::voxel::{cell_center, Coord, SparseVoxelGrid};

/// RGBA + depth framebuffer. Background is transparent black at +inf depth;
/// depth is finite exactly where alpha > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderImage {
    width: u32,
    height: u32,
    rgba: Vec<[u8; 4]>,
    depth: Vec<f32>,
}

impl RenderImage {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("zero-sized image".into()));
        }
        let n = (width as usize) * (height as usize);
        Ok(Self {
            width,
            height,
            rgba: vec![[0, 0, 0, 0]; n],
            depth: vec![f32::INFINITY; n],
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn rgba(&self) -> &[[u8; 4]] {
        &self.rgba
    }

    pub fn depth(&self) -> &[f32] {
        &self.depth
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        self.rgba[(y * self.width + x) as usize]
    }

    pub fn depth_at(&self, x: u32, y: u32) -> f32 {
        self.depth[(y * self.width + x) as usize]
    }

    /// Number of pixels whose RGBA differs, for images of equal size.
    pub fn diff_pixels(&self, other: &Self) -> Result<usize> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::LengthMismatch {
                expected: self.rgba.len(),
                got: other.rgba.len(),
            });
        }
        Ok(self
            .rgba
            .iter()
            .zip(&other.rgba)
            .filter(|(a, b)| a != b)
            .count())
    }

    /// Bitwise depth equality (infinities compare equal to themselves).
    pub fn depth_bits_equal(&self, other: &Self) -> bool {
        self.depth.len() == other.depth.len()
            && self
                .depth
                .iter()
                .zip(&other.depth)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Copy of the sub-rectangle, which must lie inside the image.
    pub fn crop(&self, rect: &PixelRect) -> Result<Self> {
        if rect.x1() > self.width || rect.y1() > self.height {
            return Err(Error::TileOutOfBounds(format!("{rect:?}")));
        }
        let mut out = Self::new(rect.w, rect.h)?;
        for y in 0..rect.h {
            for x in 0..rect.w {
                let src = ((rect.y0 + y) * self.width + rect.x0 + x) as usize;
                let dst = (y * rect.w + x) as usize;
                out.rgba[dst] = self.rgba[src];
                out.depth[dst] = self.depth[src];
            }
        }
        Ok(out)
    }

    pub fn count_nonzero_alpha(&self) -> usize {
        self.rgba.iter().filter(|p| p[3] > 0).count()
    }
}

/// Color rule applied per voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Palette {
    /// RGB from the normalized cell coordinate `(c + 0.5) / R`.
    CoordRgb,
    Solid([u8; 3]),
}

impl Palette {
    pub fn color(&self, c: Coord, resolution: u32) -> [u8; 3] {
        match *self {
            Palette::CoordRgb => {
                let r = resolution as f64;
                let ch = |x: u16| (((x as f64 + 0.5) / r) * 255.0).round() as u8;
                [ch(c[0]), ch(c[1]), ch(c[2])]
            }
            Palette::Solid(rgb) => rgb,
        }
    }
}

/// Projects a world point: `(u, v, depth)` in pixels/world units, or `None`
/// when the point is at or behind the camera plane (z <= 0).
pub fn project(camera: &CameraModel, p: &Point3<f64>) -> Option<(f64, f64, f64)> {
    let q = camera.to_camera(p);
    if q.z <= 0.0 {
        return None;
    }
    Some((
        camera.fx * q.x / q.z + camera.cx,
        camera.fy * q.y / q.z + camera.cy,
        q.z,
    ))
}

/// Inverse of [`project`] at a given depth.
pub fn unproject(camera: &CameraModel, u: f64, v: f64, depth: f64) -> Point3<f64> {
    let q = nalgebra::Vector3::new(
        (u - camera.cx) * depth / camera.fx,
        (v - camera.cy) * depth / camera.fy,
        depth,
    );
    Point3::from(camera.rot().transpose() * (q - camera.trans()))
}

/// Renders the whole image.
pub fn render_full(
    grid: &SparseVoxelGrid,
    camera: &CameraModel,
    splat_radius_px: f64,
    palette: Palette,
) -> Result<RenderImage> {
    camera.validate()?;
    let viewport = PixelRect {
        x0: 0,
        y0: 0,
        w: camera.width,
        h: camera.height,
    };
    render_viewport(grid, camera, &viewport, splat_radius_px, palette)
}

/// Renders one tile's expanded rect from a culled voxel set. With culling
/// world margin >= the splat's world extent this is pixel-identical to the
/// same crop of [`render_full`].
pub fn render_tile(
    culled: &SparseVoxelGrid,
    camera: &CameraModel,
    tile: &Tile,
    splat_radius_px: f64,
    palette: Palette,
) -> Result<RenderImage> {
    camera.validate()?;
    if tile.expanded.x1() > camera.width || tile.expanded.y1() > camera.height {
        return Err(Error::TileOutOfBounds(format!("{:?}", tile.expanded)));
    }
    render_viewport(culled, camera, &tile.expanded, splat_radius_px, palette)
}

/// Shared rasterization path. Pixel coordinates stay global throughout; the
/// viewport only selects which pixels commit, so a voxel shades a given
/// pixel identically no matter which viewport contains it.
fn render_viewport(
    grid: &SparseVoxelGrid,
    camera: &CameraModel,
    viewport: &PixelRect,
    splat_radius_px: f64,
    palette: Palette,
) -> Result<RenderImage> {
    if splat_radius_px < 0.5 {
        return Err(Error::InvalidArgument(format!(
            "splat radius {splat_radius_px} below minimum 0.5 px"
        )));
    }
    let mut img = RenderImage::new(viewport.w, viewport.h)?;
    let r2 = splat_radius_px * splat_radius_px;
    let resolution = grid.resolution();

    for &c in grid.coords() {
        let Some((u, v, depth)) = project(camera, &cell_center(c, resolution)) else {
            continue;
        };
        if depth < camera.near || depth > camera.far {
            continue;
        }
        let z = depth as f32;
        let color = palette.color(c, resolution);

        // Pixels whose centers fall inside the disk.
        let px_lo = ((u - splat_radius_px - 0.5).ceil().max(viewport.x0 as f64)) as i64;
        let px_hi = ((u + splat_radius_px - 0.5).floor()).min(viewport.x1() as f64 - 1.0) as i64;
        let py_lo = ((v - splat_radius_px - 0.5).ceil().max(viewport.y0 as f64)) as i64;
        let py_hi = ((v + splat_radius_px - 0.5).floor()).min(viewport.y1() as f64 - 1.0) as i64;
        for py in py_lo..=py_hi {
            for px in px_lo..=px_hi {
                let du = px as f64 + 0.5 - u;
                let dv = py as f64 + 0.5 - v;
                if du * du + dv * dv > r2 {
                    continue;
                }
                let idx = ((py as u32 - viewport.y0) * viewport.w + (px as u32 - viewport.x0))
                    as usize;
                if z < img.depth[idx] {
                    img.depth[idx] = z;
                    img.rgba[idx] = [color[0], color[1], color[2], 255];
                }
            }
        }
    }
    Ok(img)
}

/// Assembles per-tile patches into the full frame: each output pixel comes
/// from the unique tile whose core owns it. Errors if the cores do not
/// exactly partition the output, or a patch does not match its expanded
/// rect.
pub fn stitch(tiles: &[(Tile, RenderImage)]) -> Result<RenderImage> {
    if tiles.is_empty() {
        return Err(Error::EmptyTiles);
    }
    let width = tiles.iter().map(|(t, _)| t.core.x1()).max().unwrap();
    let height = tiles.iter().map(|(t, _)| t.core.y1()).max().unwrap();

    let area: u64 = tiles.iter().map(|(t, _)| t.core.area()).sum();
    if area != width as u64 * height as u64 {
        return Err(Error::CoreCoverage(format!(
            "core area {area} != image area {}",
            width as u64 * height as u64
        )));
    }

    let mut out = RenderImage::new(width, height)?;
    let mut covered = vec![false; (width as usize) * (height as usize)];
    for (tile, patch) in tiles {
        if patch.width != tile.expanded.w || patch.height != tile.expanded.h {
            return Err(Error::LengthMismatch {
                expected: (tile.expanded.w * tile.expanded.h) as usize,
                got: (patch.width * patch.height) as usize,
            });
        }
        for y in tile.core.y0..tile.core.y1() {
            for x in tile.core.x0..tile.core.x1() {
                let dst = (y * width + x) as usize;
                if covered[dst] {
                    return Err(Error::CoreCoverage(format!(
                        "pixel ({x}, {y}) covered by more than one core"
                    )));
                }
                covered[dst] = true;
                let src =
                    ((y - tile.expanded.y0) * patch.width + (x - tile.expanded.x0)) as usize;
                out.rgba[dst] = patch.rgba[src];
                out.depth[dst] = patch.depth[src];
            }
        }
    }
    if !covered.iter().all(|&c| c) {
        return Err(Error::CoreCoverage("core coverage gap".into()));
    }
    Ok(out)
}

/// Writes a PNG (RGBA, 8-bit).
pub fn write_png(path: impl AsRef<std::path::Path>, img: &RenderImage) -> Result<()> {
    let path = path.as_ref();
    let flat: Vec<u8> = img.rgba.iter().flatten().copied().collect();
    let buf = image::RgbaImage::from_raw(img.width, img.height, flat)
        .expect("buffer size matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })
}

/// Writes a binary PPM (P6, RGB, maxval 255). Alpha is dropped.
pub fn write_ppm(path: impl AsRef<std::path::Path>, img: &RenderImage) -> Result<()> {
    let path = path.as_ref();
    let mut buf = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for p in &img.rgba {
        buf.extend_from_slice(&p[..3]);
    }
    std::fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
