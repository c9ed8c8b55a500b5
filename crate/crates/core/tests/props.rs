//! Property tests for the set-algebra, alignment, loss and projection
//! invariants.

use proptest::collection::vec;
use proptest::prelude::*;

use voxup_core::anchor::{apply_mask, bce_loss, gt_mask, upsample_traditional};
use voxup_core::mesh::normalize_mesh;
use voxup_core::partition::CameraModel;
use voxup_core::render::{project, unproject};
use voxup_core::voxel::{apply_permutation, hash_align, Coord, SparseVoxelGrid, VoxelMask};

fn coord_strategy(r: u16) -> impl Strategy<Value = Coord> {
    (0..r, 0..r, 0..r).prop_map(|(x, y, z)| [x, y, z])
}

fn grid_strategy(r: u16, max_len: usize) -> impl Strategy<Value = SparseVoxelGrid> {
    vec(coord_strategy(r), 0..max_len)
        .prop_map(move |coords| SparseVoxelGrid::canonicalize(coords, r as u32).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// canonicalize is a pure function of the coordinate *set*: membership
    /// matches an independent hash-set oracle and the order is strictly
    /// increasing.
    #[test]
    fn canonicalize_matches_set_oracle(coords in vec(coord_strategy(16), 0..1000)) {
        let grid = SparseVoxelGrid::canonicalize(coords.clone(), 16).unwrap();
        let set: std::collections::HashSet<Coord> = coords.into_iter().collect();
        prop_assert_eq!(grid.len(), set.len());
        for c in grid.coords() {
            prop_assert!(set.contains(c));
        }
        prop_assert!(grid.coords().windows(2).all(|w| w[0] < w[1]));
    }

    /// |A∩B| + |A\B| = |A|, and the results match hash-set oracles.
    #[test]
    fn set_algebra_partition_law(a in grid_strategy(16, 600), b in grid_strategy(16, 600)) {
        let inter = a.intersect(&b).unwrap();
        let diff = a.difference(&b).unwrap();
        prop_assert_eq!(inter.len() + diff.len(), a.len());

        let sa: std::collections::HashSet<Coord> = a.coords().iter().copied().collect();
        let sb: std::collections::HashSet<Coord> = b.coords().iter().copied().collect();
        let oracle_inter: std::collections::HashSet<Coord> = sa.intersection(&sb).copied().collect();
        let oracle_union: std::collections::HashSet<Coord> = sa.union(&sb).copied().collect();
        prop_assert_eq!(inter.len(), oracle_inter.len());
        prop_assert!(inter.coords().iter().all(|c| oracle_inter.contains(c)));
        let uni = a.union(&b).unwrap();
        prop_assert_eq!(uni.len(), oracle_union.len());
        prop_assert!(a.contains_all(&inter).unwrap());
        prop_assert!(uni.contains_all(&a).unwrap());
        prop_assert!(uni.contains_all(&b).unwrap());
    }

    /// Aligning to a shuffled order and applying the permutation reproduces
    /// the shuffled view; composing with the inverse is the identity.
    #[test]
    fn alignment_round_trip(
        grid in grid_strategy(16, 400).prop_filter("nonempty", |g| !g.is_empty()),
        seed in any::<u64>(),
    ) {
        let mut order: Vec<Coord> = grid.coords().to_vec();
        let mut rng = voxup_core::rng::SplitMix64::new(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.next_index(i + 1));
        }
        let perm = hash_align(&grid, &order).unwrap();
        for (i, &c) in order.iter().enumerate() {
            prop_assert_eq!(grid.coords()[perm.as_slice()[i] as usize], c);
        }
        let mask = VoxelMask::from_hard(
            (0..grid.len()).map(|i| i % 3 == 0).collect(),
        );
        let shuffled = apply_permutation(&mask, &perm).unwrap();
        let back = apply_permutation(&shuffled, &perm.inverse()).unwrap();
        prop_assert_eq!(back, mask);
    }

    /// hash_align rejects any target whose coordinate multiset differs.
    #[test]
    fn alignment_rejects_corrupted_targets(
        grid in grid_strategy(16, 200).prop_filter("len>=2", |g| g.len() >= 2),
        k in any::<prop::sample::Index>(),
    ) {
        let mut order: Vec<Coord> = grid.coords().to_vec();
        // duplicate one entry over another
        let i = k.index(order.len());
        let j = (i + 1) % order.len();
        order[j] = order[i];
        prop_assert!(hash_align(&grid, &order).is_err());
        // truncation
        prop_assert!(hash_align(&grid, &grid.coords()[1..]).is_err());
    }

    /// Exact recovery: apply_mask(upsampled, gt_mask(upsampled, S)) == S for
    /// any sub-selection S of the upsampled set.
    #[test]
    fn gt_mask_exact_recovery(
        base in grid_strategy(8, 100),
        selector in any::<u64>(),
    ) {
        let candidates = upsample_traditional(&base).unwrap();
        let mut rng = voxup_core::rng::SplitMix64::new(selector);
        let chosen: Vec<Coord> = candidates
            .coords()
            .iter()
            .copied()
            .filter(|_| rng.next_u64() & 1 == 1)
            .collect();
        let truth = SparseVoxelGrid::canonicalize(chosen, candidates.resolution()).unwrap();
        let mask = gt_mask(&candidates, &truth).unwrap();
        prop_assert_eq!(mask.popcount().unwrap(), truth.len());
        prop_assert_eq!(apply_mask(&candidates, &mask).unwrap(), truth);
    }

    /// Moving any single prediction toward its target strictly decreases the
    /// BCE loss.
    #[test]
    fn bce_monotone_in_each_coordinate(
        n in 1usize..64,
        seed in any::<u64>(),
    ) {
        let mut rng = voxup_core::rng::SplitMix64::new(seed);
        let pred: Vec<f32> = (0..n).map(|_| rng.next_range(0.02, 0.98) as f32).collect();
        let target: Vec<bool> = (0..n).map(|_| rng.next_u64() & 1 == 1).collect();
        let i = rng.next_index(n);
        let mut better = pred.clone();
        let t = if target[i] { 1.0f32 } else { 0.0 };
        better[i] = pred[i] + 0.5 * (t - pred[i]);
        prop_assume!(better[i] != pred[i]);
        let base = bce_loss(
            &VoxelMask::from_soft(pred).unwrap(),
            &VoxelMask::from_hard(target.clone()),
        )
        .unwrap();
        let moved = bce_loss(
            &VoxelMask::from_soft(better).unwrap(),
            &VoxelMask::from_hard(target),
        )
        .unwrap();
        prop_assert!(moved < base, "{moved} !< {base}");
    }

    /// Normalization is idempotent for arbitrary scaled/offset boxes.
    #[test]
    fn normalize_idempotent_random_boxes(
        sx in 0.1f64..10.0,
        sy in 0.1f64..10.0,
        sz in 0.1f64..10.0,
        tx in -5.0f64..5.0,
        ty in -5.0f64..5.0,
        tz in -5.0f64..5.0,
    ) {
        use voxup_core::mesh::{make_primitive, Primitive};
        use nalgebra::{Matrix3, Vector3};
        let cube = make_primitive(&Primitive::Cube { subdivisions: 0 }).unwrap();
        let scaled = voxup_core::fixtures::transform(
            &cube,
            Matrix3::from_diagonal(&Vector3::new(sx, sy, sz)) ,
            Vector3::new(tx, ty, tz),
            1.0,
        );
        let (once, _) = normalize_mesh(&scaled).unwrap();
        let (twice, _) = normalize_mesh(&once).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.is_normalized(0.0));
    }

    /// unproject is a right inverse of project everywhere in the view
    /// volume.
    #[test]
    fn projection_round_trip(
        u in 0.0f64..640.0,
        v in 0.0f64..480.0,
        d in 0.2f64..4.5,
        azim in 0.0f64..6.28,
    ) {
        let cam = CameraModel::look_at(
            nalgebra::Point3::new(1.5 * azim.cos(), 0.3, 1.5 * azim.sin()),
            nalgebra::Point3::origin(),
            500.0,
            510.0,
            640,
            480,
            0.1,
            5.0,
        )
        .unwrap();
        let p = unproject(&cam, u, v, d);
        let (u2, v2, d2) = project(&cam, &p).unwrap();
        prop_assert!((u2 - u).abs() < 1e-6 * u.abs().max(1.0));
        prop_assert!((v2 - v).abs() < 1e-6 * v.abs().max(1.0));
        prop_assert!((d2 - d).abs() < 1e-6 * d);
    }
}
