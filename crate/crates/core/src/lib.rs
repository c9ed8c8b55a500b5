//! Surface-anchored sparse-voxel upsampling and view-domain-partitioned
//! rendering.
//!
//! The crate covers the non-neural algorithmic core of that pipeline:
//!
//! - conservative surface voxelization of normalized triangle meshes, with a
//!   brute-force oracle for equivalence testing ([`voxelize`]);
//! - traditional 8-child voxel upsampling, ground-truth anchoring masks,
//!   redundancy statistics and BCE supervision ([`anchor`]);
//! - canonical sparse voxel sets with explicit hash-based order alignment
//!   ([`voxel`]);
//! - overlapping image tiles, per-tile frusta and conservative culling
//!   ([`partition`]);
//! - a deterministic opaque-splat renderer whose tiled renders stitch
//!   bit-exactly into the full frame, plus L1/SSIM/PSNR metrics ([`render`]);
//! - a memory-accounting model comparing raw, masked and blocked
//!   configurations ([`membench`]).

pub mod anchor;
pub mod error;
pub mod fixtures;
mod geom;
pub mod membench;
pub mod mesh;
pub mod partition;
pub mod render;
pub mod rng;
pub mod voxel;
pub mod voxelize;

pub use error::{Error, Result};
pub use mesh::TriangleMesh;
pub use partition::{CameraModel, Tile};
pub use render::RenderImage;
pub use voxel::{SparseVoxelGrid, VoxelMask};
