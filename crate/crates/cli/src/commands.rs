//! Subcommand implementations.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use voxup_core::anchor::{
    apply_mask, gt_mask, mask_metrics, redundancy_report, surrogate_scores, upsample_traditional,
    MaskMetrics, UpsampleReport,
};
use voxup_core::error::{Error, Result};
use voxup_core::fixtures::{orbit_camera, OrbitParams};
use voxup_core::membench::{bench_all, table_to_csv, MemoryModel};
use voxup_core::mesh::{load_mesh, normalize_mesh, TriangleMesh};
use voxup_core::partition::{
    cull_voxels, foreground_rect, global_frustum, make_tiles, make_tiles_in_rect, tile_frustum,
    world_margin_for_splat, CameraModel, PixelRect, Tile,
};
use voxup_core::render::{
    render_full, render_tile, stitch, write_png, write_ppm, Palette, RenderImage,
};
use voxup_core::voxel::{cell_size, read_svox, write_mask, write_svox};
use voxup_core::voxelize::{voxelize_dense_oracle, voxelize_surface};

use crate::{Cli, RunRecord};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::BadFormat {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("report types serialize");
    std::fs::write(path, json + "\n").map_err(|e| io_err(path, e))
}

/// Loads a mesh and normalizes it into the canonical cube.
fn load_normalized(path: &Path) -> Result<(TriangleMesh, usize)> {
    let raw = load_mesh(path)?;
    let (mesh, report) = normalize_mesh(&raw)?;
    Ok((mesh, report.dropped_degenerates))
}

fn parse_palette(s: &str) -> Result<Palette> {
    if s == "coord" {
        return Ok(Palette::CoordRgb);
    }
    if let Some(hex) = s.strip_prefix("solid:") {
        if hex.len() == 6 {
            if let Ok(v) = u32::from_str_radix(hex, 16) {
                return Ok(Palette::Solid([
                    (v >> 16) as u8,
                    (v >> 8) as u8,
                    v as u8,
                ]));
            }
        }
    }
    Err(Error::InvalidArgument(format!(
        "palette must be 'coord' or 'solid:RRGGBB', got {s:?}"
    )))
}

// ---------------------------------------------------------------- voxelize

#[derive(Args)]
pub struct VoxelizeArgs {
    /// Input mesh (.obj or binary .vmsh); normalized before voxelization.
    #[arg(long = "in")]
    input: PathBuf,
    /// Grid resolution (power of two in [4, 1024]).
    #[arg(long)]
    res: u32,
    /// Output sparse grid (.svox).
    #[arg(long)]
    out: PathBuf,
    /// Use the brute-force dense path (R <= 32).
    #[arg(long)]
    oracle: bool,
}

pub fn run_voxelize(args: &VoxelizeArgs, record: &mut RunRecord) -> Result<()> {
    record.inputs.push(args.input.clone());
    let (mesh, dropped) = load_normalized(&args.input)?;
    let grid = if args.oracle {
        voxelize_dense_oracle(&mesh, args.res)?
    } else {
        voxelize_surface(&mesh, args.res)?
    };
    write_svox(&args.out, &grid)?;
    record.outputs.push(args.out.clone());
    println!(
        "voxelize: {} triangles ({dropped} degenerate dropped) -> {} voxels at {}^3",
        mesh.triangle_count(),
        grid.len(),
        args.res
    );
    Ok(())
}

// ---------------------------------------------------------------- upsample

#[derive(Args)]
pub struct UpsampleArgs {
    /// Input sparse grid (.svox).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output sparse grid at doubled resolution.
    #[arg(long)]
    out: PathBuf,
}

pub fn run_upsample(args: &UpsampleArgs, record: &mut RunRecord) -> Result<()> {
    record.inputs.push(args.input.clone());
    let grid = read_svox(&args.input)?;
    let up = upsample_traditional(&grid)?;
    write_svox(&args.out, &up)?;
    record.outputs.push(args.out.clone());
    println!(
        "upsample: {} voxels at {}^3 -> {} voxels at {}^3",
        grid.len(),
        grid.resolution(),
        up.len(),
        up.resolution()
    );
    Ok(())
}

// ------------------------------------------------------------------ anchor

#[derive(Args)]
pub struct AnchorArgs {
    /// Input mesh; normalized before processing.
    #[arg(long = "in")]
    input: PathBuf,
    /// Base resolution R of the R -> 2R step.
    #[arg(long)]
    res: u32,
    /// Report JSON path.
    #[arg(long)]
    report: PathBuf,
    /// Ground-truth mask output (.vmsk).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Pruned grid output (.svox): candidates with the mask applied.
    #[arg(long)]
    pruned: Option<PathBuf>,
    /// Also score candidates with the distance-logistic surrogate and write
    /// the soft mask here.
    #[arg(long)]
    soft_mask: Option<PathBuf>,
    /// Surrogate distance threshold in cell units (default: half cell
    /// diagonal).
    #[arg(long, default_value_t = 0.8660254037844386)]
    tau: f64,
    /// Surrogate logistic sharpness.
    #[arg(long, default_value_t = 50.0)]
    beta: f64,
}

#[derive(Serialize)]
struct AnchorReport<'a> {
    mesh: String,
    resolution: u32,
    upsampled_resolution: u32,
    dropped_degenerates: usize,
    #[serde(flatten)]
    upsample: &'a UpsampleReport,
    mask_popcount: usize,
    pruned_count: usize,
    surrogate: Option<SurrogateReport>,
}

#[derive(Serialize)]
struct SurrogateReport {
    tau_cells: f64,
    beta: f64,
    threshold: f64,
    #[serde(flatten)]
    metrics: MaskMetrics,
}

pub fn run_anchor(args: &AnchorArgs, record: &mut RunRecord) -> Result<()> {
    record.inputs.push(args.input.clone());
    let (mesh, dropped) = load_normalized(&args.input)?;
    let coarse = voxelize_surface(&mesh, args.res)?;
    let candidates = upsample_traditional(&coarse)?;
    let truth = voxelize_surface(&mesh, args.res * 2)?;
    let mask = gt_mask(&candidates, &truth)?;
    let pruned = apply_mask(&candidates, &mask)?;
    let report = redundancy_report(&mesh, args.res)?;

    if let Some(path) = &args.mask {
        write_mask(path, &mask)?;
        record.outputs.push(path.clone());
    }
    if let Some(path) = &args.pruned {
        write_svox(path, &pruned)?;
        record.outputs.push(path.clone());
    }
    let surrogate = if let Some(path) = &args.soft_mask {
        let scores = surrogate_scores(&candidates, &mesh, args.tau, args.beta)?;
        let metrics = mask_metrics(&scores, &mask, 0.5)?;
        write_mask(path, &scores)?;
        record.outputs.push(path.clone());
        Some(SurrogateReport {
            tau_cells: args.tau,
            beta: args.beta,
            threshold: 0.5,
            metrics,
        })
    } else {
        None
    };

    write_json(
        &args.report,
        &AnchorReport {
            mesh: args.input.display().to_string(),
            resolution: args.res,
            upsampled_resolution: args.res * 2,
            dropped_degenerates: dropped,
            upsample: &report,
            mask_popcount: mask.popcount().unwrap_or(0),
            pruned_count: pruned.len(),
            surrogate,
        },
    )?;
    record.outputs.push(args.report.clone());
    println!(
        "anchor: {} parents -> {} candidates, {} on-surface (redundancy {:.4})",
        report.parent_count, report.candidate_count, report.surface_count, report.redundancy_ratio
    );
    Ok(())
}

// --------------------------------------------------------------- partition

#[derive(Args)]
pub struct PartitionArgs {
    /// Tiling grid size N (N x N tiles).
    #[arg(long)]
    grid: u32,
    /// Pixel overlap margin of each tile.
    #[arg(long, default_value_t = 0)]
    margin: u32,
    /// Camera JSON file.
    #[arg(long)]
    camera: PathBuf,
    /// Input sparse grid (.svox).
    #[arg(long = "in")]
    input: PathBuf,
    /// Stats JSON output.
    #[arg(long)]
    stats: PathBuf,
    /// Splat radius (px) used to derive the culling world margin.
    #[arg(long, default_value_t = 3.0)]
    splat_radius: f64,
    /// Restrict the tiled region to the projected bounding box of the grid.
    #[arg(long)]
    foreground: bool,
}

#[derive(Serialize)]
struct TileStats {
    id: u32,
    core: PixelRect,
    expanded: PixelRect,
    kept: usize,
}

#[derive(Serialize)]
struct PartitionStats {
    grid_n: u32,
    margin_px: u32,
    splat_radius_px: f64,
    world_margin: f64,
    image_width: u32,
    image_height: u32,
    region: PixelRect,
    foreground: bool,
    total_voxels: usize,
    global_kept: usize,
    max_tile_kept: usize,
    sampled_tile_id: u32,
    tiles: Vec<TileStats>,
}

pub fn run_partition(args: &PartitionArgs, cli: &Cli, record: &mut RunRecord) -> Result<()> {
    record.inputs.push(args.camera.clone());
    record.inputs.push(args.input.clone());
    let camera: CameraModel = read_json(&args.camera)?;
    camera.validate()?;
    let grid = read_svox(&args.input)?;
    let vsize = cell_size(grid.resolution());
    let world_margin = world_margin_for_splat(&camera, args.splat_radius);

    let region = if args.foreground {
        foreground_rect(&grid, &camera, args.margin + args.splat_radius.ceil() as u32)
            .ok_or_else(|| {
                Error::InvalidArgument("no voxel projects into the view; foreground empty".into())
            })?
    } else {
        PixelRect {
            x0: 0,
            y0: 0,
            w: camera.width,
            h: camera.height,
        }
    };
    let tiles = make_tiles_in_rect(&region, camera.width, camera.height, args.grid, args.margin)?;

    let (_, global_kept) = cull_voxels(&grid, &global_frustum(&camera, world_margin)?, vsize);
    let stats: Vec<TileStats> = tiles
        .iter()
        .map(|t| -> Result<TileStats> {
            let f = tile_frustum(&camera, t, world_margin)?;
            let (_, kept) = cull_voxels(&grid, &f, vsize);
            Ok(TileStats {
                id: t.id,
                core: t.core,
                expanded: t.expanded,
                kept,
            })
        })
        .collect::<Result<_>>()?;
    let max_tile_kept = stats.iter().map(|s| s.kept).max().unwrap_or(0);
    let sampled = voxup_core::partition::sample_tile(&tiles, cli.seed, 0)?;

    write_json(
        &args.stats,
        &PartitionStats {
            grid_n: args.grid,
            margin_px: args.margin,
            splat_radius_px: args.splat_radius,
            world_margin,
            image_width: camera.width,
            image_height: camera.height,
            region,
            foreground: args.foreground,
            total_voxels: grid.len(),
            global_kept,
            max_tile_kept,
            sampled_tile_id: sampled.id,
            tiles: stats,
        },
    )?;
    record.outputs.push(args.stats.clone());
    println!(
        "partition: {}x{} tiles, global kept {global_kept}/{}, peak tile {max_tile_kept}",
        args.grid,
        args.grid,
        grid.len()
    );
    Ok(())
}

// ------------------------------------------------------------------ render

#[derive(Args)]
pub struct RenderArgs {
    /// Input sparse grid (.svox).
    #[arg(long = "in")]
    input: PathBuf,
    /// Camera JSON file.
    #[arg(long)]
    camera: PathBuf,
    /// Output image (.png, or .ppm for the fallback format).
    #[arg(long)]
    out: PathBuf,
    /// Render only tile `i` of a --grid N tiling (culled like training).
    #[arg(long)]
    tile: Option<u32>,
    /// Tiling grid size when --tile is given.
    #[arg(long, default_value_t = 2)]
    grid: u32,
    /// Pixel margin when --tile is given.
    #[arg(long, default_value_t = 3)]
    margin: u32,
    /// Splat radius in pixels.
    #[arg(long, default_value_t = 3.0)]
    splat_radius: f64,
    /// Voxel color rule: 'coord' or 'solid:RRGGBB'.
    #[arg(long, default_value = "coord")]
    palette: String,
}

pub fn run_render(args: &RenderArgs, record: &mut RunRecord) -> Result<()> {
    record.inputs.push(args.input.clone());
    record.inputs.push(args.camera.clone());
    let camera: CameraModel = read_json(&args.camera)?;
    camera.validate()?;
    let grid = read_svox(&args.input)?;
    let palette = parse_palette(&args.palette)?;

    let image = match args.tile {
        None => render_full(&grid, &camera, args.splat_radius, palette)?,
        Some(i) => {
            let tiles = make_tiles(&camera, args.grid, args.margin)?;
            let tile = tiles
                .iter()
                .find(|t| t.id == i)
                .ok_or_else(|| Error::InvalidArgument(format!("tile {i} out of range")))?;
            let wm = world_margin_for_splat(&camera, args.splat_radius);
            let f = tile_frustum(&camera, tile, wm)?;
            let (culled, kept) = cull_voxels(&grid, &f, cell_size(grid.resolution()));
            println!("render: tile {i} kept {kept}/{} voxels", grid.len());
            render_tile(&culled, &camera, tile, args.splat_radius, palette)?
        }
    };
    save_image(&args.out, &image)?;
    record.outputs.push(args.out.clone());
    println!(
        "render: {}x{} image, {} lit pixels -> {}",
        image.width(),
        image.height(),
        image.count_nonzero_alpha(),
        args.out.display()
    );
    Ok(())
}

fn save_image(path: &Path, image: &RenderImage) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("ppm") => write_ppm(path, image),
        _ => write_png(path, image),
    }
}

// ------------------------------------------------------------ stitch-check

#[derive(Args)]
pub struct StitchCheckArgs {
    /// Directory of .svox scene files.
    #[arg(long)]
    scenes: PathBuf,
    /// Tiling grid size N.
    #[arg(long)]
    grid: u32,
    /// Pixel margin; the culling world margin is derived from it (0 => 0).
    #[arg(long)]
    margin: u32,
    /// Report JSON output.
    #[arg(long)]
    report: PathBuf,
    /// Seeded orbit cameras per scene.
    #[arg(long, default_value_t = 4)]
    cameras: u32,
    /// Splat radius in pixels.
    #[arg(long, default_value_t = 3.0)]
    splat_radius: f64,
    /// Negative-control mode: PASS means differences were found.
    #[arg(long)]
    negative: bool,
    /// Rendered image width/height.
    #[arg(long, default_value_t = 512)]
    image_size: u32,
}

#[derive(Serialize)]
struct StitchCase {
    scene: String,
    camera_index: u32,
    grid_n: u32,
    differing_pixels: usize,
    pass: bool,
}

#[derive(Serialize)]
struct StitchReport {
    grid_n: u32,
    margin_px: u32,
    splat_radius_px: f64,
    negative_control: bool,
    cases: Vec<StitchCase>,
    passed: usize,
    failed: usize,
    all_pass: bool,
}

pub fn run_stitch_check(args: &StitchCheckArgs, cli: &Cli, record: &mut RunRecord) -> Result<()> {
    record.inputs.push(args.scenes.clone());
    let mut scene_files: Vec<PathBuf> = std::fs::read_dir(&args.scenes)
        .map_err(|e| io_err(&args.scenes, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("svox"))
        .collect();
    scene_files.sort();
    if scene_files.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no .svox scenes in {}",
            args.scenes.display()
        )));
    }

    let params = OrbitParams {
        width: args.image_size,
        height: args.image_size,
        ..OrbitParams::default()
    };
    let mut cases = Vec::new();
    for path in &scene_files {
        let grid = read_svox(path)?;
        let vsize = cell_size(grid.resolution());
        let scene = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scene")
            .to_string();
        for cam_i in 0..args.cameras {
            let cam = orbit_camera(cli.seed, cam_i as u64, &params);
            let full = render_full(&grid, &cam, args.splat_radius, Palette::CoordRgb)?;
            let tiles = make_tiles(&cam, args.grid, args.margin)?;
            let wm = if args.margin == 0 {
                0.0
            } else {
                world_margin_for_splat(&cam, args.splat_radius)
            };
            let patches: Vec<(Tile, RenderImage)> = tiles
                .iter()
                .map(|t| -> Result<(Tile, RenderImage)> {
                    let f = tile_frustum(&cam, t, wm)?;
                    let (culled, _) = cull_voxels(&grid, &f, vsize);
                    Ok((
                        *t,
                        render_tile(&culled, &cam, t, args.splat_radius, Palette::CoordRgb)?,
                    ))
                })
                .collect::<Result<_>>()?;
            let stitched = stitch(&patches)?;
            let differing = stitched.diff_pixels(&full)?;
            let pass = if args.negative {
                differing > 0
            } else {
                differing == 0
            };
            cases.push(StitchCase {
                scene: scene.clone(),
                camera_index: cam_i,
                grid_n: args.grid,
                differing_pixels: differing,
                pass,
            });
        }
    }
    let passed = cases.iter().filter(|c| c.pass).count();
    let failed = cases.len() - passed;
    let all_pass = failed == 0;
    write_json(
        &args.report,
        &StitchReport {
            grid_n: args.grid,
            margin_px: args.margin,
            splat_radius_px: args.splat_radius,
            negative_control: args.negative,
            cases,
            passed,
            failed,
            all_pass,
        },
    )?;
    record.outputs.push(args.report.clone());
    println!("stitch-check: {passed} passed, {failed} failed");
    if all_pass {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "stitch-check found failing cases; see report".into(),
        ))
    }
}

// ------------------------------------------------------------------- bench

#[derive(Args)]
pub struct BenchArgs {
    /// Input mesh; normalized before processing.
    #[arg(long = "in")]
    input: PathBuf,
    /// Base resolution R of the modeled R -> 2R step.
    #[arg(long)]
    res: u32,
    /// JSON array of CameraModel used by the blocked configurations.
    #[arg(long)]
    cameras: PathBuf,
    /// MemoryModel JSON; defaults to the built-in model when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output JSON table; a CSV twin is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Splat radius coupling the per-tile culling margin.
    #[arg(long, default_value_t = 3.0)]
    splat_radius: f64,
}

pub fn run_bench(args: &BenchArgs, record: &mut RunRecord) -> Result<()> {
    record.inputs.push(args.input.clone());
    record.inputs.push(args.cameras.clone());
    let (mesh, _) = load_normalized(&args.input)?;
    let cameras: Vec<CameraModel> = read_json(&args.cameras)?;
    for c in &cameras {
        c.validate()?;
    }
    let model = match &args.model {
        Some(p) => {
            record.inputs.push(p.clone());
            read_json(p)?
        }
        None => MemoryModel::default(),
    };
    let table = bench_all(&mesh, args.res, &cameras, &model, args.splat_radius)?;
    write_json(&args.out, &table)?;
    record.outputs.push(args.out.clone());
    let csv_path = args.out.with_extension("csv");
    std::fs::write(&csv_path, table_to_csv(&table)).map_err(|e| io_err(&csv_path, e))?;
    record.outputs.push(csv_path);
    for r in &table.reports {
        println!(
            "bench: {:<16} live={:<8} peak_tile={:<8} bytes={}",
            r.label,
            r.live_voxels,
            r.peak_tile_voxels
                .map_or("-".to_string(), |v| v.to_string()),
            r.modeled_bytes
        );
    }
    println!(
        "bench: ordering_ok={} mask/raw={:.6}",
        table.ordering_ok, table.mask_raw_voxel_ratio
    );
    Ok(())
}
