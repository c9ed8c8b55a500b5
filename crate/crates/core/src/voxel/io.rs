//! Sparse voxel and mask file formats.
//!
//! `SVOX` (little-endian): magic `SVOX`, u32 version = 1, u32 resolution,
//! u64 count, then count x (u16, u16, u16) coordinates in canonical order.
//!
//! `VMSK` (little-endian): magic `VMSK`, u32 version = 1, u64 count, one
//! flag byte (0 = hard, 1 = soft), then count bytes of 0/1 values or count
//! f32 scores.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{MaskData, SparseVoxelGrid, VoxelMask};

const SVOX_MAGIC: &[u8; 4] = b"SVOX";
const VMSK_MAGIC: &[u8; 4] = b"VMSK";
const VERSION: u32 = 1;

pub fn write_svox(path: impl AsRef<Path>, grid: &SparseVoxelGrid) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(20 + grid.len() * 6);
    buf.extend_from_slice(SVOX_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&grid.resolution().to_le_bytes());
    buf.extend_from_slice(&(grid.len() as u64).to_le_bytes());
    for c in grid.coords() {
        for &x in c {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_svox(path: impl AsRef<Path>) -> Result<SparseVoxelGrid> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |msg: String| Error::BadFormat {
        path: path.to_path_buf(),
        msg,
    };
    if data.len() < 20 {
        return Err(bad("truncated header".into()));
    }
    if &data[0..4] != SVOX_MAGIC {
        return Err(bad("bad magic, expected SVOX".into()));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let resolution = u32::from_le_bytes(data[8..12].try_into().unwrap());
    let count = u64::from_le_bytes(data[12..20].try_into().unwrap()) as usize;
    if data.len() != 20 + count * 6 {
        return Err(bad(format!(
            "size mismatch: expected {} bytes, file has {}",
            20 + count * 6,
            data.len()
        )));
    }
    let mut coords = Vec::with_capacity(count);
    for i in 0..count {
        let o = 20 + i * 6;
        coords.push([
            u16::from_le_bytes(data[o..o + 2].try_into().unwrap()),
            u16::from_le_bytes(data[o + 2..o + 4].try_into().unwrap()),
            u16::from_le_bytes(data[o + 4..o + 6].try_into().unwrap()),
        ]);
    }
    SparseVoxelGrid::from_sorted(coords, resolution).map_err(|e| bad(e.to_string()))
}

pub fn write_mask(path: impl AsRef<Path>, mask: &VoxelMask) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(17 + mask.len() * 4);
    buf.extend_from_slice(VMSK_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(mask.len() as u64).to_le_bytes());
    match mask.data() {
        MaskData::Hard(v) => {
            buf.push(0);
            buf.extend(v.iter().map(|&b| b as u8));
        }
        MaskData::Soft(v) => {
            buf.push(1);
            for &s in v {
                buf.extend_from_slice(&s.to_le_bytes());
            }
        }
    }
    fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<VoxelMask> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |msg: String| Error::BadFormat {
        path: path.to_path_buf(),
        msg,
    };
    if data.len() < 17 {
        return Err(bad("truncated header".into()));
    }
    if &data[0..4] != VMSK_MAGIC {
        return Err(bad("bad magic, expected VMSK".into()));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(data[8..16].try_into().unwrap()) as usize;
    let flag = data[16];
    match flag {
        0 => {
            if data.len() != 17 + count {
                return Err(bad("size mismatch for hard mask".into()));
            }
            let mut values = Vec::with_capacity(count);
            for &b in &data[17..] {
                match b {
                    0 => values.push(false),
                    1 => values.push(true),
                    other => return Err(bad(format!("hard mask byte {other} not 0/1"))),
                }
            }
            Ok(VoxelMask::from_hard(values))
        }
        1 => {
            if data.len() != 17 + count * 4 {
                return Err(bad("size mismatch for soft mask".into()));
            }
            let mut values = Vec::with_capacity(count);
            for i in 0..count {
                let o = 17 + i * 4;
                values.push(f32::from_le_bytes(data[o..o + 4].try_into().unwrap()));
            }
            VoxelMask::from_soft(values).map_err(|e| bad(e.to_string()))
        }
        other => Err(bad(format!("unknown mask flag {other}"))),
    }
}
