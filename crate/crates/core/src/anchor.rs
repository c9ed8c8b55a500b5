//! Surface-anchoring pipeline: traditional 8-child upsampling, ground-truth
//! mask construction, redundancy statistics, a geometric surrogate scorer,
//! and binary cross-entropy supervision.
//!
//! The pipeline for one doubling step R -> 2R:
//!
//! 1. voxelize the mesh at R and 2R to get the coarse and fine surface sets;
//! 2. expand every coarse cell into its 8 children ([`upsample_traditional`]),
//!    giving the redundant candidate set;
//! 3. label each candidate 1 if it is a true fine surface cell, else 0
//!    ([`gt_mask`]); conservative voxelization guarantees the candidates
//!    fully contain the fine set, which is what makes the labeling total;
//! 4. [`apply_mask`] recovers the fine set exactly from candidates + mask.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::point_triangle_distance_sq;
use crate::mesh::TriangleMesh;
use crate::voxel::{cell_center, cell_size, Coord, SparseVoxelGrid, VoxelMask, MAX_RESOLUTION};
use crate::voxelize::voxelize_surface;

/// Prediction clamp used by [`bce_loss`].
pub const BCE_EPS: f64 = 1e-7;

/// Counts from one upsampling step.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UpsampleReport {
    pub parent_count: u64,
    /// Always exactly `8 * parent_count`; children of distinct parents are
    /// distinct.
    pub candidate_count: u64,
    pub surface_count: u64,
    /// `1 - surface_count / candidate_count`, 0 for an empty candidate set.
    pub redundancy_ratio: f64,
}

/// Replaces each cell at resolution R with its 8 children at 2R.
pub fn upsample_traditional(grid: &SparseVoxelGrid) -> Result<SparseVoxelGrid> {
    let doubled = grid.resolution() * 2;
    if doubled > MAX_RESOLUTION {
        return Err(Error::ResolutionOutOfRange {
            got: doubled,
            msg: format!("upsampled resolution exceeds {MAX_RESOLUTION}"),
        });
    }
    let mut coords = Vec::with_capacity(grid.len() * 8);
    for &[x, y, z] in grid.coords() {
        for dx in 0..2u16 {
            for dy in 0..2u16 {
                for dz in 0..2u16 {
                    coords.push([2 * x + dx, 2 * y + dy, 2 * z + dz]);
                }
            }
        }
    }
    coords.sort_unstable();
    debug_assert!(coords.windows(2).all(|w| w[0] < w[1]));
    let out = SparseVoxelGrid::from_sorted_unchecked(coords, doubled);
    debug_assert_eq!(out.len(), grid.len() * 8);
    Ok(out)
}

/// Ground-truth mask over the candidates' canonical order: 1 where the
/// candidate is a true surface cell.
///
/// Errors with the offending coordinates if `truth` is not fully contained
/// in `candidates` — that means the upsampled set cannot represent the
/// surface and any supervision built on it would be silently wrong.
pub fn gt_mask(candidates: &SparseVoxelGrid, truth: &SparseVoxelGrid) -> Result<VoxelMask> {
    if candidates.resolution() != truth.resolution() {
        return Err(Error::ResolutionMismatch {
            a: candidates.resolution(),
            b: truth.resolution(),
        });
    }
    let mut values = vec![false; candidates.len()];
    let mut matched = 0usize;
    let (cs, ts) = (candidates.coords(), truth.coords());
    let (mut i, mut j) = (0usize, 0usize);
    while i < cs.len() && j < ts.len() {
        match cs[i].cmp(&ts[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Equal => {
                values[i] = true;
                matched += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    if matched != ts.len() {
        let missing = truth.difference(candidates)?;
        let sample: Vec<Coord> = missing.coords().iter().take(8).copied().collect();
        return Err(Error::ContainmentViolation {
            count: missing.len(),
            sample,
        });
    }
    Ok(VoxelMask::from_hard(values))
}

/// Keeps exactly the coordinates where the hard mask is 1.
pub fn apply_mask(grid: &SparseVoxelGrid, mask: &VoxelMask) -> Result<SparseVoxelGrid> {
    let values = mask
        .as_hard()
        .ok_or_else(|| Error::InvalidArgument("apply_mask needs a hard mask".into()))?;
    if values.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    let coords = grid
        .coords()
        .iter()
        .zip(values)
        .filter_map(|(&c, &keep)| keep.then_some(c))
        .collect();
    Ok(SparseVoxelGrid::from_sorted_unchecked(
        coords,
        grid.resolution(),
    ))
}

/// Runs voxelize(R) -> upsample -> voxelize(2R) -> gt_mask and reports the
/// counts. An empty mesh yields all-zero counts with ratio 0.
pub fn redundancy_report(mesh: &TriangleMesh, resolution: u32) -> Result<UpsampleReport> {
    if mesh.is_empty() {
        return Ok(UpsampleReport {
            parent_count: 0,
            candidate_count: 0,
            surface_count: 0,
            redundancy_ratio: 0.0,
        });
    }
    let coarse = voxelize_surface(mesh, resolution)?;
    let candidates = upsample_traditional(&coarse)?;
    let truth = voxelize_surface(mesh, resolution * 2)?;
    let mask = gt_mask(&candidates, &truth)?;
    let surface = mask.popcount().unwrap() as u64;
    let parent = coarse.len() as u64;
    let candidate = candidates.len() as u64;
    let ratio = if candidate == 0 {
        0.0
    } else {
        1.0 - surface as f64 / candidate as f64
    };
    Ok(UpsampleReport {
        parent_count: parent,
        candidate_count: candidate,
        surface_count: surface,
        redundancy_ratio: ratio,
    })
}

/// Distance-logistic surrogate for a learned mask predictor.
///
/// Scores each candidate `sigma(beta * (tau - d))`, with `d` the exact
/// distance from the cell center to the mesh in cell units and `tau` a
/// threshold in cell units. Cells whose center lies within `tau` of the
/// surface score above 0.5; far cells decay toward 0.
pub fn surrogate_scores(
    candidates: &SparseVoxelGrid,
    mesh: &TriangleMesh,
    tau_cells: f64,
    beta: f64,
) -> Result<VoxelMask> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if !(tau_cells > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidArgument(
            "surrogate needs tau > 0 and beta > 0".into(),
        ));
    }
    let triangles: Vec<[nalgebra::Point3<f64>; 3]> = (0..mesh.triangle_count())
        .map(|i| mesh.triangle_points(i))
        .collect();
    let cell = cell_size(candidates.resolution());
    let scores: Vec<f32> = candidates
        .coords()
        .par_iter()
        .map(|&c| {
            let p = cell_center(c, candidates.resolution());
            let d2 = triangles
                .iter()
                .map(|t| point_triangle_distance_sq(&p, &t[0], &t[1], &t[2]))
                .fold(f64::INFINITY, f64::min);
            let d_cells = d2.sqrt() / cell;
            let x = beta * (tau_cells - d_cells);
            (1.0 / (1.0 + (-x).exp())) as f32
        })
        .collect();
    VoxelMask::from_soft(scores)
}

/// Mean binary cross-entropy of soft predictions against hard targets.
/// Predictions are clamped to `[BCE_EPS, 1 - BCE_EPS]`.
pub fn bce_loss(pred: &VoxelMask, target: &VoxelMask) -> Result<f64> {
    let targets = target
        .as_hard()
        .ok_or_else(|| Error::InvalidArgument("bce target must be a hard mask".into()))?;
    if pred.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: targets.len(),
            got: pred.len(),
        });
    }
    if targets.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0f64;
    for (i, &t) in targets.iter().enumerate() {
        let p = (pred.score(i) as f64).clamp(BCE_EPS, 1.0 - BCE_EPS);
        sum -= if t { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(sum / targets.len() as f64)
}

/// Precision / recall / IoU of a thresholded prediction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MaskMetrics {
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
}

/// Thresholds the prediction at `threshold` (score >= threshold is positive)
/// and compares against the hard target. Empty denominators follow the
/// total conventions: no predicted positives -> precision 1, no actual
/// positives -> recall 1, empty union -> IoU 1.
pub fn mask_metrics(pred: &VoxelMask, target: &VoxelMask, threshold: f64) -> Result<MaskMetrics> {
    let targets = target
        .as_hard()
        .ok_or_else(|| Error::InvalidArgument("metrics target must be a hard mask".into()))?;
    if pred.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: targets.len(),
            got: pred.len(),
        });
    }
    let (mut tp, mut fp, mut fne) = (0u64, 0u64, 0u64);
    for (i, &t) in targets.iter().enumerate() {
        let p = pred.score(i) as f64 >= threshold;
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fne == 0 {
        1.0
    } else {
        tp as f64 / (tp + fne) as f64
    };
    let iou = if tp + fp + fne == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp + fne) as f64
    };
    Ok(MaskMetrics {
        precision,
        recall,
        iou,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_primitive, normalize_mesh, Primitive};
    use crate::voxelize::voxelize_dense_oracle;
    use nalgebra::Point3;

    fn grid(coords: &[[u16; 3]], r: u32) -> SparseVoxelGrid {
        SparseVoxelGrid::canonicalize(coords.to_vec(), r).unwrap()
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
    fn upsample_single_cell_fills_2x2x2() {
        let g = grid(&[[0, 0, 0]], 1);
        let up = upsample_traditional(&g).unwrap();
        assert_eq!(up.resolution(), 2);
        assert_eq!(up.len(), 8);
    }

    #[test]
    fn upsample_empty_is_empty() {
        let g = SparseVoxelGrid::empty(4).unwrap();
        let up = upsample_traditional(&g).unwrap();
        assert!(up.is_empty());
        assert_eq!(up.resolution(), 8);
    }

    #[test]
    fn upsample_size_exactly_eight_fold() {
        let sphere = make_primitive(&Primitive::Sphere {
            subdivisions: 2,
            radius: 0.5,
        })
        .unwrap();
        let v16 = voxelize_surface(&sphere, 16).unwrap();
        let up = upsample_traditional(&v16).unwrap();
        assert_eq!(up.len(), 8 * v16.len());
        let v32 = voxelize_surface(&sphere, 32).unwrap();
        assert!(up.contains_all(&v32).unwrap());
    }

    #[test]
    fn upsample_overflow_rejected() {
        let g = SparseVoxelGrid::empty(4096).unwrap();
        assert!(upsample_traditional(&g).is_err());
    }

    #[test]
    fn gt_mask_identity_and_empty() {
        let g = grid(&[[0, 0, 0], [1, 1, 1]], 2);
        let all = gt_mask(&g, &g).unwrap();
        assert_eq!(all.popcount().unwrap(), 2);
        let none = gt_mask(&g, &SparseVoxelGrid::empty(2).unwrap()).unwrap();
        assert_eq!(none.popcount().unwrap(), 0);
    }

    #[test]
    fn gt_mask_containment_violation_reports_coords() {
        let candidates = grid(&[[0, 0, 0]], 2);
        let truth = grid(&[[0, 0, 0], [1, 1, 1]], 2);
        match gt_mask(&candidates, &truth) {
            Err(Error::ContainmentViolation { count, sample }) => {
                assert_eq!(count, 1);
                assert_eq!(sample, vec![[1, 1, 1]]);
            }
            other => panic!("expected containment violation, got {other:?}"),
        }
    }

    #[test]
    fn mask_round_trip_recovers_truth() {
        let sphere = make_primitive(&Primitive::Sphere {
            subdivisions: 3,
            radius: 0.5,
        })
        .unwrap();
        let candidates = upsample_traditional(&voxelize_surface(&sphere, 16).unwrap()).unwrap();
        let truth = voxelize_surface(&sphere, 32).unwrap();
        let mask = gt_mask(&candidates, &truth).unwrap();
        assert_eq!(mask.popcount().unwrap(), truth.len());
        let recovered = apply_mask(&candidates, &mask).unwrap();
        assert_eq!(recovered, truth);
        // Cross-check the truth itself against the dense oracle.
        assert_eq!(truth, voxelize_dense_oracle(&sphere, 32).unwrap());
    }

    #[test]
    fn apply_mask_all_ones_zeros() {
        let g = grid(&[[0, 0, 0], [1, 0, 1]], 2);
        let ones = VoxelMask::from_hard(vec![true, true]);
        assert_eq!(apply_mask(&g, &ones).unwrap(), g);
        let zeros = VoxelMask::from_hard(vec![false, false]);
        assert!(apply_mask(&g, &zeros).unwrap().is_empty());
    }

    #[test]
    fn aligned_plane_redundancy_is_exactly_half() {
        for r in [8u32, 16, 64] {
            let report = redundancy_report(&plane_z0(), r).unwrap();
            assert_eq!(report.redundancy_ratio, 0.5, "at R={r}");
            assert_eq!(report.candidate_count, 8 * report.parent_count);
        }
    }

    #[test]
    fn empty_mesh_report_is_zero() {
        let mesh = TriangleMesh::new(vec![], vec![]).unwrap();
        let report = redundancy_report(&mesh, 8).unwrap();
        assert_eq!(report.parent_count, 0);
        assert_eq!(report.redundancy_ratio, 0.0);
    }

    #[test]
    fn bce_all_half_is_ln2() {
        let pred = VoxelMask::from_soft(vec![0.5; 100]).unwrap();
        let target = VoxelMask::from_hard((0..100).map(|i| i % 3 == 0).collect());
        let loss = bce_loss(&pred, &target).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn bce_perfect_prediction_is_eps_level() {
        let target = VoxelMask::from_hard(vec![true, false, true, false]);
        let pred = VoxelMask::from_soft(vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let loss = bce_loss(&pred, &target).unwrap();
        assert!(loss < 1e-6);
        assert!(loss >= 0.0);
    }

    #[test]
    fn bce_matches_reference_loop() {
        // Independent scalar-loop computation with a different accumulation
        // pattern.
        let mut rng = crate::rng::SplitMix64::new(7);
        let n = 1000;
        let pred: Vec<f32> = (0..n).map(|_| rng.next_f64() as f32).collect();
        let target: Vec<bool> = (0..n).map(|_| rng.next_u64() & 1 == 1).collect();
        let mut expect = 0.0f64;
        for i in 0..n {
            let p = (pred[i] as f64).clamp(1e-7, 1.0 - 1e-7);
            let t = if target[i] { 1.0 } else { 0.0 };
            expect += -(t * p.ln() + (1.0 - t) * (1.0 - p).ln()) / n as f64;
        }
        let got = bce_loss(
            &VoxelMask::from_soft(pred).unwrap(),
            &VoxelMask::from_hard(target),
        )
        .unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn metrics_conventions() {
        let target = VoxelMask::from_hard(vec![true, true, false, false]);
        let perfect = VoxelMask::from_soft(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let m = mask_metrics(&perfect, &target, 0.5).unwrap();
        assert_eq!((m.precision, m.recall, m.iou), (1.0, 1.0, 1.0));

        let none = VoxelMask::from_soft(vec![0.0; 4]).unwrap();
        let m = mask_metrics(&none, &target, 0.5).unwrap();
        assert_eq!(m.precision, 1.0); // empty-prediction convention
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.iou, 0.0);
    }

    #[test]
    fn metrics_hand_confusion_matrix() {
        // 800 entries, 100 true; flip 10 each way.
        let mut target = vec![false; 800];
        for t in target.iter_mut().take(100) {
            *t = true;
        }
        let mut pred: Vec<f32> = target.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
        for p in pred.iter_mut().take(10) {
            *p = 0.0; // 10 false negatives
        }
        for p in pred.iter_mut().skip(100).take(10) {
            *p = 1.0; // 10 false positives
        }
        let m = mask_metrics(
            &VoxelMask::from_soft(pred).unwrap(),
            &VoxelMask::from_hard(target),
            0.5,
        )
        .unwrap();
        assert!((m.precision - 0.9).abs() < 1e-12);
        assert!((m.recall - 0.9).abs() < 1e-12);
        assert!((m.iou - 90.0 / 110.0).abs() < 1e-12);
    }

    #[test]
    fn surrogate_sign_behavior() {
        let sphere = make_primitive(&Primitive::Sphere {
            subdivisions: 2,
            radius: 0.5,
        })
        .unwrap();
        let v16 = voxelize_surface(&sphere, 16).unwrap();
        let scores = surrogate_scores(&v16, &sphere, 0.866, 8.0).unwrap();
        // Every surface cell's center is within half a cell diagonal of the
        // surface, so all score above 0.5.
        let s = scores.as_soft().unwrap();
        assert!(s.iter().all(|&x| x > 0.5));

        // A cell far from the sphere scores near zero.
        let far = grid(&[[0, 0, 0]], 16);
        let far_scores = surrogate_scores(&far, &sphere, 0.866, 8.0).unwrap();
        assert!(far_scores.as_soft().unwrap()[0] < 0.05);
    }

    #[test]
    fn surrogate_rejects_empty_mesh_and_bad_params() {
        let g = grid(&[[0, 0, 0]], 4);
        let empty = TriangleMesh::new(vec![], vec![]).unwrap();
        assert!(surrogate_scores(&g, &empty, 0.8, 8.0).is_err());
        let (mesh, _) = normalize_mesh(
            &make_primitive(&Primitive::Cube { subdivisions: 0 }).unwrap(),
        )
        .unwrap();
        assert!(surrogate_scores(&g, &mesh, 0.0, 8.0).is_err());
        assert!(surrogate_scores(&g, &mesh, 0.8, 0.0).is_err());
    }
}
