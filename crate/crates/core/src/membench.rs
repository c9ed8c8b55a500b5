//! Memory accounting for the upsampling/rendering configurations.
//!
//! This models byte counts, not real GPU allocation: the reproducible
//! content is the ordering between configurations and the voxel-count
//! ratios. `raw` carries the full upsampled candidate set; `mask` carries
//! only the surviving surface voxels; blocked configs additionally replace
//! the splat term with the peak per-tile culled count, since training peak
//! memory is set by the largest tile.

use serde::{Deserialize, Serialize};

use crate::anchor::{apply_mask, gt_mask, redundancy_report, upsample_traditional, UpsampleReport};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::partition::{cull_voxels, make_tiles, tile_frustum, world_margin_for_splat, CameraModel};
use crate::voxel::{cell_size, SparseVoxelGrid};
use crate::voxelize::voxelize_surface;

/// Byte-cost coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryModel {
    pub bytes_per_voxel_feature: u64,
    pub bytes_per_splat: u64,
    pub overhead_bytes: u64,
    /// Optional budget; reports flag configurations that exceed it, the
    /// count-model analogue of an out-of-memory ceiling.
    #[serde(default)]
    pub budget_bytes: Option<u64>,
}

impl Default for MemoryModel {
    fn default() -> Self {
        // 8 feature channels of f32 per voxel, one 14-float Gaussian per
        // splat.
        Self {
            bytes_per_voxel_feature: 32,
            bytes_per_splat: 56,
            overhead_bytes: 0,
            budget_bytes: None,
        }
    }
}

/// Benchmark configurations, ordered from most to least memory-hungry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BenchConfig {
    /// Full upsampled candidate set, no masking.
    Raw,
    /// Candidates pruned by the ground-truth mask.
    Mask,
    /// Pruned set plus per-tile culling; splat term is the peak tile count.
    MaskBlock { grid_n: u32 },
}

impl std::fmt::Display for BenchConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchConfig::Raw => write!(f, "raw"),
            BenchConfig::Mask => write!(f, "mask"),
            BenchConfig::MaskBlock { grid_n } => write!(f, "mask+block {grid_n}x{grid_n}"),
        }
    }
}

/// Modeled memory for one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigReport {
    pub config: BenchConfig,
    pub label: String,
    /// Output resolution (2R).
    pub resolution: u32,
    pub live_voxels: u64,
    /// Peak per-tile culled count across all tiles and cameras; only for
    /// blocked configs.
    pub peak_tile_voxels: Option<u64>,
    pub modeled_bytes: u64,
    pub exceeds_budget: Option<bool>,
}

/// Full comparison table across the standard four configurations, plus the
/// cross-checks tying it to the anchoring statistics.
#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub base_resolution: u32,
    pub resolution: u32,
    pub model: MemoryModel,
    pub splat_radius_px: f64,
    pub upsample: UpsampleReport,
    pub reports: Vec<ConfigReport>,
    /// live(mask) / live(raw); equals `1 - redundancy_ratio`.
    pub mask_raw_voxel_ratio: f64,
    /// raw >= mask >= mask+2x2 >= mask+4x4 in modeled bytes.
    pub ordering_ok: bool,
}

fn modeled_bytes(model: &MemoryModel, live: u64, splat_basis: u64) -> u64 {
    model.overhead_bytes
        + model.bytes_per_voxel_feature * live
        + model.bytes_per_splat * splat_basis
}

fn peak_tile_count(
    pruned: &SparseVoxelGrid,
    cameras: &[CameraModel],
    grid_n: u32,
    splat_radius_px: f64,
) -> Result<u64> {
    let vsize = cell_size(pruned.resolution());
    let mut peak = 0u64;
    for cam in cameras {
        cam.validate()?;
        let margin_px = splat_radius_px.ceil() as u32;
        let tiles = make_tiles(cam, grid_n, margin_px)?;
        let wm = world_margin_for_splat(cam, splat_radius_px);
        for tile in &tiles {
            let frustum = tile_frustum(cam, tile, wm)?;
            let (_, count) = cull_voxels(pruned, &frustum, vsize);
            peak = peak.max(count as u64);
        }
    }
    Ok(peak)
}

/// Models one configuration for the mesh's R -> 2R upsampling step.
/// Blocked configurations require at least one camera.
pub fn bench_config(
    mesh: &TriangleMesh,
    resolution: u32,
    config: BenchConfig,
    cameras: &[CameraModel],
    model: &MemoryModel,
    splat_radius_px: f64,
) -> Result<ConfigReport> {
    let coarse = voxelize_surface(mesh, resolution)?;
    let candidates = upsample_traditional(&coarse)?;
    let truth = voxelize_surface(mesh, resolution * 2)?;
    let mask = gt_mask(&candidates, &truth)?;
    let pruned = apply_mask(&candidates, &mask)?;
    build_report(
        config,
        &candidates,
        &pruned,
        cameras,
        model,
        splat_radius_px,
    )
}

fn build_report(
    config: BenchConfig,
    candidates: &SparseVoxelGrid,
    pruned: &SparseVoxelGrid,
    cameras: &[CameraModel],
    model: &MemoryModel,
    splat_radius_px: f64,
) -> Result<ConfigReport> {
    let resolution = candidates.resolution();
    let (live, peak) = match config {
        BenchConfig::Raw => (candidates.len() as u64, None),
        BenchConfig::Mask => (pruned.len() as u64, None),
        BenchConfig::MaskBlock { grid_n } => {
            if cameras.is_empty() {
                return Err(Error::InvalidArgument(
                    "blocked configurations require at least one camera".into(),
                ));
            }
            let peak = peak_tile_count(pruned, cameras, grid_n, splat_radius_px)?;
            (pruned.len() as u64, Some(peak))
        }
    };
    let bytes = modeled_bytes(model, live, peak.unwrap_or(live));
    Ok(ConfigReport {
        config,
        label: config.to_string(),
        resolution,
        live_voxels: live,
        peak_tile_voxels: peak,
        modeled_bytes: bytes,
        exceeds_budget: model.budget_bytes.map(|b| bytes > b),
    })
}

/// Runs raw, mask, mask+block 2x2 and mask+block 4x4 on one shared pipeline
/// pass and checks the ordering invariant.
pub fn bench_all(
    mesh: &TriangleMesh,
    resolution: u32,
    cameras: &[CameraModel],
    model: &MemoryModel,
    splat_radius_px: f64,
) -> Result<BenchTable> {
    let coarse = voxelize_surface(mesh, resolution)?;
    let candidates = upsample_traditional(&coarse)?;
    let truth = voxelize_surface(mesh, resolution * 2)?;
    let mask = gt_mask(&candidates, &truth)?;
    let pruned = apply_mask(&candidates, &mask)?;
    let upsample = redundancy_report(mesh, resolution)?;

    let configs = [
        BenchConfig::Raw,
        BenchConfig::Mask,
        BenchConfig::MaskBlock { grid_n: 2 },
        BenchConfig::MaskBlock { grid_n: 4 },
    ];
    let reports: Vec<ConfigReport> = configs
        .iter()
        .map(|&c| build_report(c, &candidates, &pruned, cameras, model, splat_radius_px))
        .collect::<Result<_>>()?;

    let ordering_ok = reports
        .windows(2)
        .all(|w| w[0].modeled_bytes >= w[1].modeled_bytes);
    let ratio = if candidates.is_empty() {
        1.0
    } else {
        pruned.len() as f64 / candidates.len() as f64
    };
    Ok(BenchTable {
        base_resolution: resolution,
        resolution: resolution * 2,
        model: *model,
        splat_radius_px,
        upsample,
        reports,
        mask_raw_voxel_ratio: ratio,
        ordering_ok,
    })
}

/// Renders the table as CSV (header + one row per configuration).
pub fn table_to_csv(table: &BenchTable) -> String {
    let mut out = String::from("config,resolution,live_voxels,peak_tile_voxels,modeled_bytes\n");
    for r in &table.reports {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.label,
            r.resolution,
            r.live_voxels,
            r.peak_tile_voxels
                .map_or(String::new(), |v| v.to_string()),
            r.modeled_bytes
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_primitive, Primitive};
    use nalgebra::Point3;

    fn orbit(angle: f64) -> CameraModel {
        CameraModel::look_at(
            Point3::new(1.5 * angle.cos(), 0.4, 1.5 * angle.sin()),
            Point3::origin(),
            230.0,
            230.0,
            256,
            256,
            0.1,
            5.0,
        )
        .unwrap()
    }

    #[test]
    fn ordering_chain_on_sphere() {
        let sphere = make_primitive(&Primitive::Sphere {
            subdivisions: 2,
            radius: 0.5,
        })
        .unwrap();
        let cams = [orbit(0.3), orbit(2.5)];
        let table = bench_all(&sphere, 16, &cams, &MemoryModel::default(), 3.0).unwrap();
        assert!(table.ordering_ok);
        let bytes: Vec<u64> = table.reports.iter().map(|r| r.modeled_bytes).collect();
        assert!(bytes[0] > bytes[1], "raw strictly above mask: {bytes:?}");
        assert!(bytes[1] >= bytes[2] && bytes[2] >= bytes[3], "{bytes:?}");
        // Cross-module consistency with the redundancy statistics.
        let expect = 1.0 - table.upsample.redundancy_ratio;
        assert!((table.mask_raw_voxel_ratio - expect).abs() < 1e-12);
    }

    #[test]
    fn blocked_without_cameras_rejected() {
        let sphere = make_primitive(&Primitive::Sphere {
            subdivisions: 1,
            radius: 0.5,
        })
        .unwrap();
        let r = bench_config(
            &sphere,
            8,
            BenchConfig::MaskBlock { grid_n: 2 },
            &[],
            &MemoryModel::default(),
            3.0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn budget_flag_set() {
        let sphere = make_primitive(&Primitive::Sphere {
            subdivisions: 1,
            radius: 0.5,
        })
        .unwrap();
        let model = MemoryModel {
            budget_bytes: Some(1),
            ..MemoryModel::default()
        };
        let report = bench_config(&sphere, 8, BenchConfig::Raw, &[], &model, 3.0).unwrap();
        assert_eq!(report.exceeds_budget, Some(true));
    }

    #[test]
    fn csv_has_four_rows() {
        let sphere = make_primitive(&Primitive::Sphere {
            subdivisions: 1,
            radius: 0.5,
        })
        .unwrap();
        let table = bench_all(&sphere, 8, &[orbit(1.0)], &MemoryModel::default(), 3.0).unwrap();
        let csv = table_to_csv(&table);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("mask+block 4x4"));
    }
}
