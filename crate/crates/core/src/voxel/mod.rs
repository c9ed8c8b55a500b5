//! Canonical sparse voxel sets, masks, and order alignment.
//!
//! A [`SparseVoxelGrid`] stores the active cells of an `R^3` grid as integer
//! triples in strictly increasing lexicographic (x, y, z) order. That order
//! is the canonical one: every operation producing a grid returns it sorted
//! and deduplicated, so two grids are equal as sets iff their coordinate
//! vectors are equal elementwise. External orderings (e.g. whatever a sparse
//! tensor library uses internally) are handled explicitly through
//! [`hash_align`] rather than assumed away.

mod io;

pub use io::{read_mask, read_svox, write_mask, write_svox};

use std::collections::HashMap;

use nalgebra::Point3;

use crate::error::{Error, Result};

/// Integer cell coordinate. Sized for resolutions up to [`MAX_RESOLUTION`].
pub type Coord = [u16; 3];

/// Largest supported grid resolution (cells per axis).
pub const MAX_RESOLUTION: u32 = 4096;

/// World-space center of cell `c` at resolution `r`: `(c + 0.5)/r - 0.5`.
pub fn cell_center(c: Coord, r: u32) -> Point3<f64> {
    let r = r as f64;
    Point3::new(
        (c[0] as f64 + 0.5) / r - 0.5,
        (c[1] as f64 + 0.5) / r - 0.5,
        (c[2] as f64 + 0.5) / r - 0.5,
    )
}

/// World-space edge length of one cell at resolution `r`.
pub fn cell_size(r: u32) -> f64 {
    1.0 / r as f64
}

/// Sparse set of active cells in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseVoxelGrid {
    resolution: u32,
    coords: Vec<Coord>,
}

impl SparseVoxelGrid {
    /// Sorts, deduplicates and range-checks an arbitrary coordinate list.
    pub fn canonicalize(mut coords: Vec<Coord>, resolution: u32) -> Result<Self> {
        validate_resolution(resolution)?;
        for &c in &coords {
            check_coord(c, resolution)?;
        }
        coords.sort_unstable();
        coords.dedup();
        Ok(Self { resolution, coords })
    }

    /// Builds from a list that must already be strictly sorted (canonical).
    pub fn from_sorted(coords: Vec<Coord>, resolution: u32) -> Result<Self> {
        validate_resolution(resolution)?;
        for &c in &coords {
            check_coord(c, resolution)?;
        }
        if !coords.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "coordinates not in strict canonical order".into(),
            ));
        }
        Ok(Self { resolution, coords })
    }

    pub(crate) fn from_sorted_unchecked(coords: Vec<Coord>, resolution: u32) -> Self {
        debug_assert!(coords.windows(2).all(|w| w[0] < w[1]));
        Self { resolution, coords }
    }

    pub fn empty(resolution: u32) -> Result<Self> {
        validate_resolution(resolution)?;
        Ok(Self {
            resolution,
            coords: Vec::new(),
        })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn contains(&self, c: Coord) -> bool {
        self.coords.binary_search(&c).is_ok()
    }

    /// Canonical index of a coordinate, if present.
    pub fn index_of(&self, c: Coord) -> Option<usize> {
        self.coords.binary_search(&c).ok()
    }

    /// Set intersection. Errors on resolution mismatch.
    pub fn intersect(&self, other: &Self) -> Result<Self> {
        self.check_same_resolution(other)?;
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.coords.len() && j < other.coords.len() {
            match self.coords[i].cmp(&other.coords[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.coords[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(Self::from_sorted_unchecked(out, self.resolution))
    }

    /// Set union.
    pub fn union(&self, other: &Self) -> Result<Self> {
        self.check_same_resolution(other)?;
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.coords.len() && j < other.coords.len() {
            match self.coords[i].cmp(&other.coords[j]) {
                std::cmp::Ordering::Less => {
                    out.push(self.coords[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.coords[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(self.coords[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.coords[i..]);
        out.extend_from_slice(&other.coords[j..]);
        Ok(Self::from_sorted_unchecked(out, self.resolution))
    }

    /// Set difference `self \ other`.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.check_same_resolution(other)?;
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.coords.len() {
            if j >= other.coords.len() {
                out.extend_from_slice(&self.coords[i..]);
                break;
            }
            match self.coords[i].cmp(&other.coords[j]) {
                std::cmp::Ordering::Less => {
                    out.push(self.coords[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(Self::from_sorted_unchecked(out, self.resolution))
    }

    /// True iff every coordinate of `other` is in `self`.
    pub fn contains_all(&self, other: &Self) -> Result<bool> {
        self.check_same_resolution(other)?;
        Ok(self.intersect(other)?.len() == other.len())
    }

    fn check_same_resolution(&self, other: &Self) -> Result<()> {
        if self.resolution != other.resolution {
            return Err(Error::ResolutionMismatch {
                a: self.resolution,
                b: other.resolution,
            });
        }
        Ok(())
    }
}

fn validate_resolution(r: u32) -> Result<()> {
    if r == 0 || r > MAX_RESOLUTION {
        return Err(Error::ResolutionOutOfRange {
            got: r,
            msg: format!("must be in [1, {MAX_RESOLUTION}]"),
        });
    }
    Ok(())
}

fn check_coord(c: Coord, r: u32) -> Result<()> {
    if c.iter().any(|&x| x as u32 >= r) {
        return Err(Error::CoordOutOfRange {
            coord: c,
            resolution: r,
        });
    }
    Ok(())
}

/// Boolean or soft-score labels aligned one-to-one with a grid's canonical
/// ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMask {
    data: MaskData,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskData {
    Hard(Vec<bool>),
    Soft(Vec<f32>),
}

impl VoxelMask {
    pub fn from_hard(values: Vec<bool>) -> Self {
        Self {
            data: MaskData::Hard(values),
        }
    }

    /// Soft scores must be finite and in [0, 1].
    pub fn from_soft(values: Vec<f32>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "soft mask score {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            data: MaskData::Soft(values),
        })
    }

    pub fn len(&self) -> usize {
        match &self.data {
            MaskData::Hard(v) => v.len(),
            MaskData::Soft(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_hard(&self) -> bool {
        matches!(self.data, MaskData::Hard(_))
    }

    pub fn as_hard(&self) -> Option<&[bool]> {
        match &self.data {
            MaskData::Hard(v) => Some(v),
            MaskData::Soft(_) => None,
        }
    }

    pub fn as_soft(&self) -> Option<&[f32]> {
        match &self.data {
            MaskData::Soft(v) => Some(v),
            MaskData::Hard(_) => None,
        }
    }

    /// Score of entry `i`; hard values map to 0.0 / 1.0.
    pub fn score(&self, i: usize) -> f32 {
        match &self.data {
            MaskData::Hard(v) => {
                if v[i] {
                    1.0
                } else {
                    0.0
                }
            }
            MaskData::Soft(v) => v[i],
        }
    }

    /// Number of `true` entries of a hard mask.
    pub fn popcount(&self) -> Option<usize> {
        self.as_hard().map(|v| v.iter().filter(|&&b| b).count())
    }

    pub fn data(&self) -> &MaskData {
        &self.data
    }
}

/// Bijection on `[0, N)` mapping one ordering onto another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentPermutation {
    mapping: Vec<u32>,
}

impl AlignmentPermutation {
    /// Validates that `mapping` is a permutation of `[0, len)`.
    pub fn new(mapping: Vec<u32>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &m in &mapping {
            let m = m as usize;
            if m >= n || seen[m] {
                return Err(Error::InvalidArgument(
                    "mapping is not a permutation".into(),
                ));
            }
            seen[m] = true;
        }
        Ok(Self { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mapping: (0..n as u32).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.mapping
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.mapping.len()];
        for (i, &m) in self.mapping.iter().enumerate() {
            inv[m as usize] = i as u32;
        }
        Self { mapping: inv }
    }
}

/// Finds the permutation `p` with `source.coords()[p[i]] == target_order[i]`.
///
/// This is the order-alignment step between a canonical grid and the same
/// coordinate set in some foreign order. Errors whenever the target is not
/// exactly a permutation of the source: size mismatch, a coordinate missing
/// from the source, or a duplicate in the target. It never silently
/// misaligns.
pub fn hash_align(source: &SparseVoxelGrid, target_order: &[Coord]) -> Result<AlignmentPermutation> {
    if source.len() != target_order.len() {
        return Err(Error::AlignmentSizeMismatch {
            source_len: source.len(),
            target_len: target_order.len(),
        });
    }
    let index: HashMap<Coord, u32> = source
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i as u32))
        .collect();
    let mut mapping = Vec::with_capacity(target_order.len());
    let mut used = vec![false; source.len()];
    for &c in target_order {
        let &i = index
            .get(&c)
            .ok_or(Error::AlignmentMissingCoord { coord: c })?;
        if used[i as usize] {
            return Err(Error::AlignmentDuplicateCoord { coord: c });
        }
        used[i as usize] = true;
        mapping.push(i);
    }
    Ok(AlignmentPermutation { mapping })
}

/// Reorders a mask: `out[i] = mask[perm[i]]`.
///
/// With `perm = hash_align(source, target)`, a mask aligned with the source's
/// canonical order becomes aligned with the target order.
pub fn apply_permutation(mask: &VoxelMask, perm: &AlignmentPermutation) -> Result<VoxelMask> {
    if mask.len() != perm.len() {
        return Err(Error::LengthMismatch {
            expected: perm.len(),
            got: mask.len(),
        });
    }
    let data = match mask.data() {
        MaskData::Hard(v) => MaskData::Hard(perm.mapping.iter().map(|&m| v[m as usize]).collect()),
        MaskData::Soft(v) => MaskData::Soft(perm.mapping.iter().map(|&m| v[m as usize]).collect()),
    };
    Ok(VoxelMask { data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(coords: &[[u16; 3]], r: u32) -> SparseVoxelGrid {
        SparseVoxelGrid::canonicalize(coords.to_vec(), r).unwrap()
    }

    #[test]
    fn canonicalize_sorts_and_dedups() {
        let g = grid(&[[1, 0, 0], [0, 0, 0], [0, 0, 0]], 2);
        assert_eq!(g.coords(), &[[0, 0, 0], [1, 0, 0]]);
    }

    #[test]
    fn canonicalize_empty() {
        let g = grid(&[], 4);
        assert!(g.is_empty());
    }

    #[test]
    fn canonicalize_rejects_out_of_range() {
        let r = SparseVoxelGrid::canonicalize(vec![[2, 0, 0]], 2);
        assert!(matches!(r, Err(Error::CoordOutOfRange { .. })));
    }

    #[test]
    fn set_ops_basic() {
        let a = grid(&[[0, 0, 0]], 2);
        let b = grid(&[[0, 0, 0], [1, 1, 1]], 2);
        assert_eq!(a.intersect(&b).unwrap(), a);
        assert!(b.contains_all(&a).unwrap());
        assert!(!a.contains_all(&b).unwrap());
        assert_eq!(b.difference(&a).unwrap().coords(), &[[1, 1, 1]]);
        assert_eq!(a.union(&b).unwrap(), b);
    }

    #[test]
    fn disjoint_intersection_empty() {
        let a = grid(&[[0, 0, 0]], 4);
        let b = grid(&[[1, 2, 3]], 4);
        assert!(a.intersect(&b).unwrap().is_empty());
    }

    #[test]
    fn resolution_mismatch_rejected() {
        let a = grid(&[[0, 0, 0]], 2);
        let b = grid(&[[0, 0, 0]], 4);
        assert!(matches!(
            a.intersect(&b),
            Err(Error::ResolutionMismatch { .. })
        ));
    }

    #[test]
    fn hash_align_hand_case() {
        // source [a,b,c], target [c,a,b] -> perm [2,0,1]
        let a = [0u16, 0, 0];
        let b = [0u16, 1, 0];
        let c = [1u16, 0, 0];
        let source = grid(&[a, b, c], 2);
        let perm = hash_align(&source, &[c, a, b]).unwrap();
        assert_eq!(perm.as_slice(), &[2, 0, 1]);

        let mask = VoxelMask::from_hard(vec![true, false, false]);
        let aligned = apply_permutation(&mask, &perm).unwrap();
        assert_eq!(aligned.as_hard().unwrap(), &[false, true, false]);
    }

    #[test]
    fn hash_align_identity() {
        let source = grid(&[[0, 0, 0], [0, 0, 1], [1, 1, 1]], 2);
        let perm = hash_align(&source, source.coords()).unwrap();
        assert_eq!(perm.as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn hash_align_error_cases() {
        let source = grid(&[[0, 0, 0], [1, 0, 0]], 2);
        // size mismatch
        assert!(matches!(
            hash_align(&source, &[[0, 0, 0]]),
            Err(Error::AlignmentSizeMismatch { .. })
        ));
        // missing coordinate
        assert!(matches!(
            hash_align(&source, &[[0, 0, 0], [0, 1, 0]]),
            Err(Error::AlignmentMissingCoord { .. })
        ));
        // duplicate in target
        assert!(matches!(
            hash_align(&source, &[[0, 0, 0], [0, 0, 0]]),
            Err(Error::AlignmentDuplicateCoord { .. })
        ));
    }

    #[test]
    fn permutation_inverse_round_trip() {
        let source = grid(&[[0, 0, 0], [0, 1, 0], [1, 0, 1], [1, 1, 1]], 2);
        let shuffled = vec![[1, 0, 1], [0, 0, 0], [1, 1, 1], [0, 1, 0]];
        let perm = hash_align(&source, &shuffled).unwrap();
        let mask = VoxelMask::from_soft(vec![0.1, 0.4, 0.7, 0.9]).unwrap();
        let there = apply_permutation(&mask, &perm).unwrap();
        let back = apply_permutation(&there, &perm.inverse()).unwrap();
        assert_eq!(back, mask);
    }

    #[test]
    fn apply_permutation_length_mismatch() {
        let mask = VoxelMask::from_hard(vec![true]);
        let perm = AlignmentPermutation::identity(2);
        assert!(matches!(
            apply_permutation(&mask, &perm),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn soft_mask_range_checked() {
        assert!(VoxelMask::from_soft(vec![1.5]).is_err());
        assert!(VoxelMask::from_soft(vec![f32::NAN]).is_err());
        assert!(VoxelMask::from_soft(vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn cell_center_convention() {
        // cell i spans [i/R - 0.5, (i+1)/R - 0.5); center is the midpoint
        let c = cell_center([0, 0, 3], 4);
        assert_eq!(c.x, -0.375);
        assert_eq!(c.z, 0.375);
    }
}
