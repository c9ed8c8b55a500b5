//! `voxup selftest`: runs the invariant suite on bundled primitives and
//! writes deterministic artifacts. Two runs with the same seed produce
//! byte-identical artifacts; only the manifest's timing fields differ.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use voxup_core::anchor::{
    apply_mask, bce_loss, gt_mask, mask_metrics, redundancy_report, upsample_traditional,
};
use voxup_core::error::{Error, Result};
use voxup_core::fixtures::{aligned_plane, boundary_face, fixture, orbit_camera, OrbitParams};
use voxup_core::mesh::{load_mesh, make_primitive, normalize_mesh, save_mesh_binary, Primitive};
use voxup_core::partition::{
    cull_voxels, foreground_rect, global_frustum, make_tiles, make_tiles_in_rect, sample_tile,
    tile_frustum, world_margin_for_splat,
};
use voxup_core::render::metrics::{l1_loss, psnr, ssim, FloatImage, PSNR_SENTINEL_DB};
use voxup_core::render::{render_full, render_tile, stitch, write_png, Palette};
use voxup_core::rng::SplitMix64;
use voxup_core::voxel::{
    apply_permutation, cell_size, hash_align, write_mask, write_svox, Coord, SparseVoxelGrid,
    VoxelMask,
};
use voxup_core::voxelize::{voxelize_dense_oracle, voxelize_surface};

use crate::{Cli, RunRecord};

#[derive(Args)]
pub struct SelftestArgs {}

#[derive(Serialize)]
struct GroupResult {
    name: &'static str,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct SelftestReport {
    seed: u64,
    groups: Vec<GroupResult>,
    all_passed: bool,
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("invariant violated: {msg}")))
    }
}

pub fn run_selftest(_args: &SelftestArgs, cli: &Cli, record: &mut RunRecord) -> Result<()> {
    let dir = cli.out_dir.join("selftest");
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let seed = cli.seed;

    let mut artifacts: Vec<PathBuf> = Vec::new();
    let mut results: Vec<GroupResult> = Vec::new();
    let mut run = |name: &'static str, outcome: Result<String>| {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(e) => (false, e.to_string()),
        };
        println!("selftest: {name:<14} {}  {detail}", if passed { "PASS" } else { "FAIL" });
        results.push(GroupResult {
            name,
            passed,
            detail,
        });
    };

    run("mesh", group_mesh(&dir, &mut artifacts));
    run("voxel-algebra", group_voxel(seed, &dir, &mut artifacts));
    run("alignment", group_alignment(seed, &mut artifacts));
    run("voxelizer", group_voxelizer(&mut artifacts));
    run("anchor", group_anchor(&dir, &mut artifacts));
    run("partition", group_partition(seed, &mut artifacts));
    run("render", group_render(&dir, &mut artifacts));
    run("membench", group_membench(&dir, &mut artifacts));

    let all_passed = results.iter().all(|r| r.passed);
    let report = SelftestReport {
        seed,
        groups: results,
        all_passed,
    };
    let report_path = cli.out_dir.join("selftest_report.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&report_path, json + "\n").map_err(|e| Error::Io {
        path: report_path.clone(),
        source: e,
    })?;
    record.outputs.push(report_path);
    record.outputs.extend(artifacts);

    if all_passed {
        println!("selftest: all groups passed");
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "selftest failures; see selftest_report.json".into(),
        ))
    }
}

fn group_mesh(dir: &std::path::Path, artifacts: &mut Vec<PathBuf>) -> Result<String> {
    let cube = make_primitive(&Primitive::Cube { subdivisions: 0 })?;
    check(cube.triangle_count() == 12, "cube has 12 triangles")?;
    for n in 0..3 {
        let s = make_primitive(&Primitive::Sphere {
            subdivisions: n,
            radius: 0.5,
        })?;
        check(
            s.triangle_count() == 20 * 4usize.pow(n) && s.vertex_count() == 10 * 4usize.pow(n) + 2,
            "icosphere counts follow the subdivision recurrence",
        )?;
    }
    let torus = make_primitive(&Primitive::Torus {
        major_radius: 0.35,
        minor_radius: 0.12,
        rings: 32,
        sides: 16,
    })?;
    check(torus.triangle_count() == 1024, "torus 32x16 has 1024 triangles")?;

    let (normalized, _) = normalize_mesh(&torus)?;
    let (twice, _) = normalize_mesh(&normalized)?;
    check(normalized == twice, "normalize is idempotent")?;
    check(normalized.is_normalized(0.0), "normalized mesh inside the cube")?;

    check(
        voxup_core::mesh::parse_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n").is_err(),
        "0-based OBJ face index rejected",
    )?;

    let sphere = fixture("icosphere2").unwrap();
    let path = dir.join("icosphere2.vmsh");
    save_mesh_binary(&path, &sphere)?;
    let back = load_mesh(&path)?;
    check(
        back.vertices()
            .iter()
            .zip(sphere.vertices())
            .all(|(a, b)| (0..3).all(|k| a[k].to_bits() == b[k].to_bits())),
        "binary mesh round trip is bit-exact",
    )?;
    artifacts.push(path);
    Ok("primitive counts, normalize idempotence, OBJ errors, VMSH round trip".into())
}

fn group_voxel(seed: u64, dir: &std::path::Path, artifacts: &mut Vec<PathBuf>) -> Result<String> {
    let mut rng = SplitMix64::new(seed ^ 0xA11CE);
    let mut random_grid = |n: usize| -> SparseVoxelGrid {
        let coords: Vec<Coord> = (0..n)
            .map(|_| {
                [
                    rng.next_index(16) as u16,
                    rng.next_index(16) as u16,
                    rng.next_index(16) as u16,
                ]
            })
            .collect();
        SparseVoxelGrid::canonicalize(coords, 16).unwrap()
    };
    for _ in 0..20 {
        let a = random_grid(800);
        let b = random_grid(800);
        let inter = a.intersect(&b)?;
        let diff = a.difference(&b)?;
        check(
            inter.len() + diff.len() == a.len(),
            "|A int B| + |A \\ B| == |A|",
        )?;
        let sa: std::collections::HashSet<Coord> = a.coords().iter().copied().collect();
        let sb: std::collections::HashSet<Coord> = b.coords().iter().copied().collect();
        check(
            inter.len() == sa.intersection(&sb).count(),
            "intersection matches hash-set oracle",
        )?;
        check(
            a.union(&b)?.len() == sa.union(&sb).count(),
            "union matches hash-set oracle",
        )?;
    }

    let sphere = fixture("icosphere2").unwrap();
    let grid = voxelize_surface(&sphere, 32)?;
    let path = dir.join("icosphere2_32.svox");
    write_svox(&path, &grid)?;
    check(
        voxup_core::voxel::read_svox(&path)? == grid,
        "svox round trip",
    )?;
    artifacts.push(path);
    Ok("set algebra vs hash-set oracle (20 random pairs), svox round trip".into())
}

fn group_alignment(seed: u64, _artifacts: &mut Vec<PathBuf>) -> Result<String> {
    let sphere = fixture("icosphere2").unwrap();
    let grid = voxelize_surface(&sphere, 32)?;
    let mask = VoxelMask::from_hard((0..grid.len()).map(|i| i % 5 != 0).collect());
    let mut rng = SplitMix64::new(seed ^ 0x5_0FF);
    for _ in 0..20 {
        let mut order: Vec<Coord> = grid.coords().to_vec();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.next_index(i + 1));
        }
        let perm = hash_align(&grid, &order)?;
        let shuffled = apply_permutation(&mask, &perm)?;
        for (i, &c) in order.iter().enumerate() {
            let canon_idx = grid.index_of(c).unwrap();
            check(
                shuffled.score(i) == mask.score(canon_idx),
                "permuted mask matches shuffled order",
            )?;
        }
        let back = apply_permutation(&shuffled, &perm.inverse())?;
        check(back == mask, "inverse permutation restores canonical mask")?;
    }
    // Corrupted targets must error.
    let mut order: Vec<Coord> = grid.coords().to_vec();
    order[0] = order[1];
    check(hash_align(&grid, &order).is_err(), "duplicate target rejected")?;
    check(
        hash_align(&grid, &grid.coords()[1..]).is_err(),
        "size mismatch rejected",
    )?;
    let mut order: Vec<Coord> = grid.coords().to_vec();
    order[0] = [31, 31, 31];
    check(
        hash_align(&grid, &order).is_err() || grid.contains([31, 31, 31]),
        "foreign coordinate rejected",
    )?;
    Ok(format!(
        "20 shuffle round trips on a {}-voxel grid, corrupted targets rejected",
        grid.len()
    ))
}

fn group_voxelizer(_artifacts: &mut Vec<PathBuf>) -> Result<String> {
    // Boundary face: one layer of 16 cells.
    let face = boundary_face();
    let grid = voxelize_surface(&face, 4)?;
    check(
        grid.len() == 16 && grid.coords().iter().all(|c| c[0] == 0),
        "boundary face marks exactly the 16 x=0 cells",
    )?;

    // Cube shell at R=4: all 56 shell cells.
    let cube = make_primitive(&Primitive::Cube { subdivisions: 0 })?;
    check(
        voxelize_surface(&cube, 4)?.len() == 56,
        "cube shell count 4^3 - 2^3",
    )?;

    // Plane through z=0 touches both adjacent layers.
    let pg = voxelize_surface(&aligned_plane(), 8)?;
    check(
        pg.len() == 128 && pg.coords().iter().all(|c| c[2] == 3 || c[2] == 4),
        "boundary plane marks layers z=3 and z=4",
    )?;

    // Oracle equivalence.
    let mut pairs = 0;
    for name in ["cube", "icosphere2", "torus_b"] {
        let mesh = fixture(name).unwrap();
        for r in [8u32, 16] {
            check(
                voxelize_surface(&mesh, r)? == voxelize_dense_oracle(&mesh, r)?,
                "surface voxelizer equals dense oracle",
            )?;
            pairs += 1;
        }
    }
    Ok(format!(
        "boundary counts exact, oracle equivalence on {pairs} mesh/resolution pairs"
    ))
}

fn group_anchor(dir: &std::path::Path, artifacts: &mut Vec<PathBuf>) -> Result<String> {
    let report = redundancy_report(&aligned_plane(), 16)?;
    check(
        report.redundancy_ratio == 0.5,
        "aligned plane redundancy exactly 0.5",
    )?;

    let sphere = fixture("icosphere2").unwrap();
    let coarse = voxelize_surface(&sphere, 16)?;
    let candidates = upsample_traditional(&coarse)?;
    let truth = voxelize_surface(&sphere, 32)?;
    check(
        candidates.contains_all(&truth)?,
        "upsampled candidates contain the fine surface set",
    )?;
    let mask = gt_mask(&candidates, &truth)?;
    check(
        mask.popcount().unwrap() == truth.len(),
        "mask popcount equals |truth|",
    )?;
    let pruned = apply_mask(&candidates, &mask)?;
    check(pruned == truth, "apply_mask recovers the truth set exactly")?;

    let half = VoxelMask::from_soft(vec![0.5; 64])?;
    let target = VoxelMask::from_hard((0..64).map(|i| i % 2 == 0).collect());
    check(
        (bce_loss(&half, &target)? - std::f64::consts::LN_2).abs() < 1e-9,
        "BCE(0.5) == ln 2",
    )?;
    let none = VoxelMask::from_soft(vec![0.0; 64])?;
    let m = mask_metrics(&none, &target, 0.5)?;
    check(
        m.precision == 1.0 && m.recall == 0.0 && m.iou == 0.0,
        "empty-prediction metric conventions",
    )?;

    let mask_path = dir.join("anchor_mask_16_32.vmsk");
    write_mask(&mask_path, &mask)?;
    artifacts.push(mask_path);
    let pruned_path = dir.join("anchor_pruned_32.svox");
    write_svox(&pruned_path, &pruned)?;
    artifacts.push(pruned_path);
    let report_path = dir.join("anchor_report.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&report_path, json + "\n").map_err(|e| Error::Io {
        path: report_path.clone(),
        source: e,
    })?;
    artifacts.push(report_path);
    Ok(format!(
        "plane ratio exact 0.5, exact recovery at 16->32 ({} voxels), BCE/metric identities",
        truth.len()
    ))
}

fn group_partition(seed: u64, _artifacts: &mut Vec<PathBuf>) -> Result<String> {
    let params = OrbitParams {
        width: 513,
        height: 513,
        ..OrbitParams::default()
    };
    let cam = orbit_camera(seed, 0, &params);
    for grid_n in [2u32, 4, 5] {
        let tiles = make_tiles(&cam, grid_n, 7)?;
        let mut covered = vec![0u8; 513 * 513];
        for t in &tiles {
            for y in t.core.y0..t.core.y1() {
                for x in t.core.x0..t.core.x1() {
                    covered[(y * 513 + x) as usize] += 1;
                }
            }
            check(
                t.expanded.x0 <= t.core.x0 && t.expanded.x1() >= t.core.x1(),
                "expanded rect contains core",
            )?;
        }
        check(
            covered.iter().all(|&c| c == 1),
            "tile cores partition the image exactly",
        )?;
    }

    let tiles = make_tiles(&cam, 2, 0)?;
    let mut counts = [0u32; 4];
    for step in 0..40_000u64 {
        counts[sample_tile(&tiles, seed, step)?.id as usize] += 1;
    }
    for &c in &counts {
        check(
            (c as f64 / 40_000.0 - 0.25).abs() <= 0.02,
            "sampled tile frequency within 2% of uniform",
        )?;
    }

    // Frustum vs projection oracle.
    let cam = orbit_camera(seed, 1, &OrbitParams::default());
    let tiles = make_tiles(&cam, 4, 8)?;
    let tile = &tiles[5];
    let frustum = tile_frustum(&cam, tile, 0.0)?;
    let mut rng = SplitMix64::new(seed ^ 0xF8);
    let mut checked = 0;
    while checked < 20_000 {
        let p = nalgebra::Point3::new(
            rng.next_range(-1.5, 1.5),
            rng.next_range(-1.5, 1.5),
            rng.next_range(-1.5, 1.5),
        );
        let q = cam.to_camera(&p);
        if q.z <= 1e-6 {
            continue;
        }
        let u = cam.fx * q.x / q.z + cam.cx;
        let v = cam.fy * q.y / q.z + cam.cy;
        let eps = 1e-9;
        let near_boundary = (u - tile.expanded.x0 as f64).abs() < eps
            || (u - tile.expanded.x1() as f64).abs() < eps
            || (v - tile.expanded.y0 as f64).abs() < eps
            || (v - tile.expanded.y1() as f64).abs() < eps
            || (q.z - cam.near).abs() < eps
            || (q.z - cam.far).abs() < eps;
        if near_boundary {
            continue;
        }
        let oracle = u >= tile.expanded.x0 as f64
            && u <= tile.expanded.x1() as f64
            && v >= tile.expanded.y0 as f64
            && v <= tile.expanded.y1() as f64
            && q.z >= cam.near
            && q.z <= cam.far;
        check(
            frustum.contains_point(&p) == oracle,
            "frustum inside-test agrees with projection oracle",
        )?;
        checked += 1;
    }

    // Tile-union culling covers the global frustum's kept set.
    let sphere = fixture("icosphere2").unwrap();
    let grid = voxelize_surface(&sphere, 32)?;
    let vsize = cell_size(32);
    let (gkept, _) = cull_voxels(&grid, &global_frustum(&cam, 0.0)?, vsize);
    let mut union = SparseVoxelGrid::empty(32)?;
    for t in &tiles {
        let (kept, _) = cull_voxels(&grid, &tile_frustum(&cam, t, 0.0)?, vsize);
        union = union.union(&kept)?;
    }
    check(
        union.contains_all(&gkept)?,
        "tile-union kept set covers the global kept set",
    )?;

    // Foreground mode tiles the projected bounding rect exactly.
    if let Some(rect) = foreground_rect(&grid, &cam, 4) {
        let ftiles = make_tiles_in_rect(&rect, cam.width, cam.height, 3, 4)?;
        let area: u64 = ftiles.iter().map(|t| t.core.area()).sum();
        check(area == rect.area(), "foreground tile cores cover the region")?;
    }
    Ok("tilings partition, sampling uniform, frustum oracle (20k points), union covers".into())
}

fn group_render(dir: &std::path::Path, artifacts: &mut Vec<PathBuf>) -> Result<String> {
    let splat = 3.0;
    let params = OrbitParams {
        width: 256,
        height: 256,
        ..OrbitParams::default()
    };
    let mut stitched_artifact: Option<PathBuf> = None;
    for (si, scene) in ["icosphere2", "torus_a"].iter().enumerate() {
        let mesh = fixture(scene).unwrap();
        let grid = voxelize_surface(&mesh, 64)?;
        let vsize = cell_size(64);
        for cam_i in 0..2u64 {
            let cam = orbit_camera(7, cam_i, &params);
            let full = render_full(&grid, &cam, splat, Palette::CoordRgb)?;
            for grid_n in [2u32, 4] {
                let tiles = make_tiles(&cam, grid_n, splat as u32)?;
                let wm = world_margin_for_splat(&cam, splat);
                let mut patches = Vec::new();
                for t in &tiles {
                    let f = tile_frustum(&cam, t, wm)?;
                    let (culled, _) = cull_voxels(&grid, &f, vsize);
                    patches.push((*t, render_tile(&culled, &cam, t, splat, Palette::CoordRgb)?));
                }
                let stitched = stitch(&patches)?;
                check(
                    stitched.diff_pixels(&full)? == 0,
                    "stitched render equals full render",
                )?;
                check(
                    stitched.depth_bits_equal(&full),
                    "stitched depth equals full depth",
                )?;
                if si == 0 && cam_i == 0 && grid_n == 4 {
                    let full_path = dir.join("render_full.png");
                    write_png(&full_path, &full)?;
                    artifacts.push(full_path);
                    let st_path = dir.join("render_stitched.png");
                    write_png(&st_path, &stitched)?;
                    stitched_artifact = Some(st_path.clone());
                    artifacts.push(st_path);
                }
            }
            // Negative control: zero margins must produce differences.
            let tiles = make_tiles(&cam, 4, 0)?;
            let mut patches = Vec::new();
            for t in &tiles {
                let f = tile_frustum(&cam, t, 0.0)?;
                let (culled, _) = cull_voxels(&grid, &f, vsize);
                patches.push((*t, render_tile(&culled, &cam, t, splat, Palette::CoordRgb)?));
            }
            check(
                stitch(&patches)?.diff_pixels(&full)? > 0,
                "zero-margin negative control differs from full render",
            )?;
        }
    }
    let _ = stitched_artifact;

    // Metric identities.
    let img = FloatImage::uniform(32, 32, 0.25);
    let shifted = FloatImage::uniform(32, 32, 0.75);
    check(l1_loss(&img, &img)? == 0.0, "L1(x,x) == 0")?;
    check(ssim(&img, &img)? == 1.0, "SSIM(x,x) == 1")?;
    check(psnr(&img, &img)? == PSNR_SENTINEL_DB, "PSNR sentinel on equal")?;
    check(l1_loss(&img, &shifted)? == 0.5, "L1 of 0.5 shift == 0.5")?;
    Ok("stitch exactness (2 scenes x 2 cams x {2x2,4x4}), negative control, metric identities"
        .into())
}

fn group_membench(dir: &std::path::Path, artifacts: &mut Vec<PathBuf>) -> Result<String> {
    let mesh = fixture("torus_b").unwrap();
    let cams = [
        orbit_camera(5, 0, &OrbitParams::default()),
        orbit_camera(5, 1, &OrbitParams::default()),
    ];
    let table = voxup_core::membench::bench_all(
        &mesh,
        32,
        &cams,
        &voxup_core::membench::MemoryModel::default(),
        3.0,
    )?;
    check(table.ordering_ok, "raw >= mask >= 2x2 >= 4x4 in modeled bytes")?;
    check(
        table.reports[0].modeled_bytes > table.reports[1].modeled_bytes,
        "raw strictly above mask when redundancy > 0",
    )?;
    check(
        (table.mask_raw_voxel_ratio - (1.0 - table.upsample.redundancy_ratio)).abs() < 1e-12,
        "mask/raw ratio equals 1 - redundancy_ratio",
    )?;
    let path = dir.join("bench.json");
    let json = serde_json::to_string_pretty(&table).expect("table serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    artifacts.push(path);
    Ok("ordering chain, strict raw>mask, ratio consistency".into())
}
