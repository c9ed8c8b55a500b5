//! `voxup` — command-line front end for the sparse-voxel toolkit.
//!
//! Every run writes a `manifest.json` into the output directory recording
//! the invocation, inputs, outputs, seed and timings, so any artifact can be
//! regenerated from one command line. All randomness flows from `--seed`;
//! no wall-clock entropy is used anywhere in the pipeline (the manifest's
//! timing fields are the only nondeterministic bytes any run produces).

mod commands;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "voxup", version, about = "Sparse-voxel upsampling and tiled-rendering toolkit")]
struct Cli {
    /// Seed for every randomized stage.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker thread cap (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Directory for manifests and default outputs (env: VOXUP_OUT_DIR).
    #[arg(long, global = true, env = "VOXUP_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize a mesh surface into a sparse grid (.svox).
    Voxelize(commands::VoxelizeArgs),
    /// Upsample a sparse grid R -> 2R by 8-child expansion.
    Upsample(commands::UpsampleArgs),
    /// Run the surface-anchoring pipeline: GT mask, pruned grid, report.
    Anchor(commands::AnchorArgs),
    /// Tile an image region and report per-tile frustum-culled voxel counts.
    Partition(commands::PartitionArgs),
    /// Render a grid (full frame or a single culled tile) to PNG/PPM.
    Render(commands::RenderArgs),
    /// Verify stitched tile renders against full renders for a scene set.
    StitchCheck(commands::StitchCheckArgs),
    /// Model memory for raw/mask/blocked configurations.
    Bench(commands::BenchArgs),
    /// Run the bundled invariant suite and write deterministic artifacts.
    Selftest(selftest::SelftestArgs),
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    subcommand: String,
    argv: Vec<String>,
    seed: u64,
    threads: usize,
    out_dir: String,
    inputs: Vec<ManifestFile>,
    outputs: Vec<String>,
    timings: Timings,
}

#[derive(Serialize)]
struct ManifestFile {
    path: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Timings {
    total_ms: u128,
    timestamp_unix_s: u64,
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
}

/// Context a command reports back for the manifest.
#[derive(Default)]
pub struct RunRecord {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Thread count affects scheduling only; all parallel stages merge
        // deterministically.
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("warning: could not set thread pool size: {e}");
        }
    }
    let started = Instant::now();
    if let Err(e) = std::fs::create_dir_all(&cli.out_dir) {
        return fail("IO_ERROR", format!("cannot create out dir: {e}"));
    }

    let mut record = RunRecord::default();
    let result = match &cli.command {
        Command::Voxelize(args) => commands::run_voxelize(args, &mut record),
        Command::Upsample(args) => commands::run_upsample(args, &mut record),
        Command::Anchor(args) => commands::run_anchor(args, &mut record),
        Command::Partition(args) => commands::run_partition(args, &cli, &mut record),
        Command::Render(args) => commands::run_render(args, &mut record),
        Command::StitchCheck(args) => commands::run_stitch_check(args, &cli, &mut record),
        Command::Bench(args) => commands::run_bench(args, &mut record),
        Command::Selftest(args) => selftest::run_selftest(args, &cli, &mut record),
    };

    let code = match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let json = ErrorJson {
                error: ErrorBody {
                    code: e.code(),
                    message: e.to_string(),
                },
            };
            eprintln!("{}", serde_json::to_string(&json).unwrap());
            ExitCode::FAILURE
        }
    };

    write_manifest(&cli, &record, started);
    code
}

fn fail(code: &str, message: String) -> ExitCode {
    let json = ErrorJson {
        error: ErrorBody { code, message },
    };
    eprintln!("{}", serde_json::to_string(&json).unwrap());
    ExitCode::FAILURE
}

fn write_manifest(cli: &Cli, record: &RunRecord, started: Instant) {
    let subcommand = match &cli.command {
        Command::Voxelize(_) => "voxelize",
        Command::Upsample(_) => "upsample",
        Command::Anchor(_) => "anchor",
        Command::Partition(_) => "partition",
        Command::Render(_) => "render",
        Command::StitchCheck(_) => "stitch-check",
        Command::Bench(_) => "bench",
        Command::Selftest(_) => "selftest",
    };
    let inputs = record
        .inputs
        .iter()
        .map(|p| ManifestFile {
            path: p.display().to_string(),
            bytes: std::fs::metadata(p).map(|m| m.len()).unwrap_or(0),
        })
        .collect();
    let manifest = Manifest {
        tool: "voxup",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: subcommand.to_string(),
        argv: std::env::args().collect(),
        seed: cli.seed,
        threads: cli.threads,
        out_dir: cli.out_dir.display().to_string(),
        inputs,
        outputs: record
            .outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        timings: Timings {
            total_ms: started.elapsed().as_millis(),
            timestamp_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        },
    };
    let path = cli.out_dir.join("manifest.json");
    if let Ok(json) = serde_json::to_string_pretty(&manifest) {
        let _ = std::fs::write(path, json + "\n");
    }
}
