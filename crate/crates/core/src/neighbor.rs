//! Cell-binned neighbor lists and spatial sorting of owned atoms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atoms::AtomStore;
use crate::domain::Decomposition;
use crate::params::SimParams;
use crate::vec3::{self, Vec3, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeighborError {
    #[error("atom in slot {slot} at {pos:?} lies outside the binnable region (missed exchange?)")]
    OutsideGrid { slot: usize, pos: Vec3 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PermutationError {
    #[error("array of length {values} cannot be permuted by a permutation of length {perm}")]
    LengthMismatch { values: usize, perm: usize },
    #[error("not a bijection: slot {slot} is targeted twice or out of range")]
    NotBijection { slot: usize },
}

/// Uniform bins over a subdomain extended by the halo on every side.
///
/// Bin side is at least half the halo width, so any pair closer than
/// `r_cut + skin` lies within two bins of each other along every axis.
#[derive(Debug, Clone)]
pub struct CellGrid {
    origin: Vec3,
    inv_side: Vec3,
    bins: [usize; 3],
    /// CSR layout: slots of bin `b` are `slots[start[b]..start[b + 1]]`, ascending.
    start: Vec<usize>,
    slots: Vec<usize>,
    /// Positions in `slots` order.
    pos: Vec<Vec3>,
}

/// Stencil half-width in bins.
const REACH: usize = 2;

impl CellGrid {
    /// Geometry only; no atoms binned.
    pub fn geometry(decomp: &Decomposition) -> CellGrid {
        let halo = decomp.halo_width;
        let mut origin = [0.0; 3];
        let mut inv_side = [0.0; 3];
        let mut bins = [1; 3];
        for axis in 0..3 {
            origin[axis] = decomp.lo(axis) - halo;
            let extent = decomp.side(axis) + 2.0 * halo;
            let n = if halo > 0.0 {
                ((extent * REACH as f64 / halo).floor() as usize).max(1)
            } else {
                1
            };
            bins[axis] = n;
            inv_side[axis] = n as f64 / extent;
        }
        CellGrid {
            origin,
            inv_side,
            bins,
            start: Vec::new(),
            slots: Vec::new(),
            pos: Vec::new(),
        }
    }

    /// Bins every owned and ghost atom of `atoms`.
    pub fn build(decomp: &Decomposition, atoms: &AtomStore) -> Result<CellGrid, NeighborError> {
        let mut grid = CellGrid::geometry(decomp);
        let bin_of: Vec<usize> = atoms
            .x
            .iter()
            .enumerate()
            .map(|(slot, &p)| grid.bin_index(p).ok_or(NeighborError::OutsideGrid { slot, pos: p }))
            .collect::<Result<_, _>>()?;
        let n_bins = grid.n_bins();
        let mut start = vec![0usize; n_bins + 1];
        for &b in &bin_of {
            start[b + 1] += 1;
        }
        for b in 0..n_bins {
            start[b + 1] += start[b];
        }
        let mut fill = start.clone();
        let mut slots = vec![0usize; bin_of.len()];
        let mut pos = vec![ZERO; bin_of.len()];
        for (slot, &b) in bin_of.iter().enumerate() {
            slots[fill[b]] = slot;
            pos[fill[b]] = atoms.x[slot];
            fill[b] += 1;
        }
        grid.start = start;
        grid.slots = slots;
        grid.pos = pos;
        Ok(grid)
    }

    pub fn bins(&self) -> [usize; 3] {
        self.bins
    }

    pub fn n_bins(&self) -> usize {
        self.bins.iter().product()
    }

    fn axis_bin(&self, axis: usize, value: f64) -> Option<usize> {
        let f = (value - self.origin[axis]) * self.inv_side[axis];
        let n = self.bins[axis] as f64;
        // tolerate rounding at the outer faces of the halo
        if !(f > -1e-9 && f < n + 1e-9) {
            return None;
        }
        Some((f.floor().max(0.0) as usize).min(self.bins[axis] - 1))
    }

    fn bin_coords(&self, p: Vec3) -> Option<[usize; 3]> {
        Some([
            self.axis_bin(0, p[0])?,
            self.axis_bin(1, p[1])?,
            self.axis_bin(2, p[2])?,
        ])
    }

    /// Row-major bin index (x fastest), or `None` outside the region.
    pub fn bin_index(&self, p: Vec3) -> Option<usize> {
        self.bin_coords(p)
            .map(|c| (c[2] * self.bins[1] + c[1]) * self.bins[0] + c[0])
    }

    pub fn bin_slots(&self, bin: usize) -> &[usize] {
        &self.slots[self.start[bin]..self.start[bin + 1]]
    }

    /// Ranges of binned entries covering the stencil around `p`: one
    /// contiguous run of bins along x per (y, z) row.
    fn stencil(&self, p: Vec3, out: &mut Vec<(usize, usize)>) {
        out.clear();
        let c = match self.bin_coords(p) {
            Some(c) => c,
            None => return,
        };
        let lo = |axis: usize| c[axis].saturating_sub(REACH);
        let hi = |axis: usize| (c[axis] + REACH).min(self.bins[axis] - 1);
        for z in lo(2)..=hi(2) {
            for y in lo(1)..=hi(1) {
                let row = (z * self.bins[1] + y) * self.bins[0];
                out.push((self.start[row + lo(0)], self.start[row + hi(0) + 1]));
            }
        }
    }
}

/// Full neighbor lists for owned atoms, in CSR form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    pub build_iteration: usize,
}

impl NeighborList {
    pub fn from_parts(offsets: Vec<usize>, neighbors: Vec<u32>, build_iteration: usize) -> Self {
        assert!(!offsets.is_empty() && offsets[0] == 0);
        assert_eq!(*offsets.last().unwrap(), neighbors.len());
        NeighborList {
            offsets,
            neighbors,
            build_iteration,
        }
    }

    pub fn empty(n_atoms: usize) -> Self {
        NeighborList {
            offsets: vec![0; n_atoms + 1],
            neighbors: Vec::new(),
            build_iteration: 0,
        }
    }

    /// Number of owned atoms the list covers.
    pub fn n_atoms(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_pairs(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors_of(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn flat(&self) -> &[u32] {
        &self.neighbors
    }
}

const BUILD_CHUNK: usize = 256;

/// Builds full lists of all slots within `r_cut + skin` of each owned atom.
///
/// Ghosts must be current. Runs on the ambient rayon pool; the output is
/// independent of the thread count.
pub fn neighbor_build(
    atoms: &AtomStore,
    params: &SimParams,
    decomp: &Decomposition,
    iteration: usize,
) -> Result<NeighborList, NeighborError> {
    let grid = CellGrid::build(decomp, atoms)?;
    let cut2 = params.halo_width() * params.halo_width();
    let n = atoms.n_local();
    let x = &atoms.x;

    let chunks: Vec<(Vec<usize>, Vec<u32>)> = (0..n.div_ceil(BUILD_CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * BUILD_CHUNK;
            let hi = (lo + BUILD_CHUNK).min(n);
            let mut counts = Vec::with_capacity(hi - lo);
            let mut list = Vec::new();
            let mut stencil = Vec::with_capacity((2 * REACH + 1) * (2 * REACH + 1));
            for i in lo..hi {
                let xi = x[i];
                let before = list.len();
                grid.stencil(xi, &mut stencil);
                let candidates: usize = stencil.iter().map(|&(a, b)| b - a).sum();
                list.resize(before + candidates, 0);
                let mut k = before;
                for &(a, b) in &stencil {
                    for (&xj, &j) in grid.pos[a..b].iter().zip(&grid.slots[a..b]) {
                        // branch-free append: write always, advance on a hit
                        list[k] = j as u32;
                        k += ((vec3::norm2(vec3::sub(xi, xj)) < cut2) & (j != i)) as usize;
                    }
                }
                list.truncate(k);
                counts.push(list.len() - before);
            }
            (counts, list)
        })
        .collect();

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    let total: usize = chunks.iter().map(|(_, l)| l.len()).sum();
    let mut neighbors = Vec::with_capacity(total);
    for (counts, list) in chunks {
        for c in counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        neighbors.extend_from_slice(&list);
    }
    Ok(NeighborList {
        offsets,
        neighbors,
        build_iteration: iteration,
    })
}

/// `perm[j]` is the new slot of the atom previously at slot `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationRecord {
    pub perm: Vec<usize>,
}

impl PermutationRecord {
    pub fn identity(n: usize) -> Self {
        PermutationRecord {
            perm: (0..n).collect(),
        }
    }

    /// Checks that `perm` is a bijection on `0..perm.len()`.
    pub fn new(perm: Vec<usize>) -> Result<Self, PermutationError> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(PermutationError::NotBijection { slot: p });
            }
            seen[p] = true;
        }
        Ok(PermutationRecord { perm })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(j, &p)| j == p)
    }

    /// Applying `self` then `next` equals applying the returned permutation.
    pub fn then(&self, next: &PermutationRecord) -> PermutationRecord {
        PermutationRecord {
            perm: self.perm.iter().map(|&p| next.perm[p]).collect(),
        }
    }
}

/// `out[perm[j]] = values[j]`.
pub fn apply_permutation<T: Copy>(values: &[T], perm: &PermutationRecord) -> Result<Vec<T>, PermutationError> {
    if values.len() != perm.len() {
        return Err(PermutationError::LengthMismatch {
            values: values.len(),
            perm: perm.len(),
        });
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = vec![values[0]; values.len()];
    for (j, &p) in perm.perm.iter().enumerate() {
        out[p] = values[j];
    }
    Ok(out)
}

/// Reorders owned atoms by ascending bin index, stable by prior slot.
///
/// `x`, `v`, `f` and `id` of owned atoms move together; ghosts are left in
/// place and become stale, so `border` must run before the next build.
pub fn sort_atoms(atoms: &mut AtomStore, decomp: &Decomposition) -> PermutationRecord {
    let grid = CellGrid::geometry(decomp);
    let n = atoms.n_local();
    let max_bin = grid.n_bins() - 1;
    let keys: Vec<usize> = atoms.x[..n]
        .iter()
        .map(|&p| grid.bin_index(p).unwrap_or(max_bin))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal bins keep prior slot order
    order.sort_by_key(|&j| keys[j]);
    let mut perm = vec![0usize; n];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    let rec = PermutationRecord { perm };
    let n_ghost = atoms.n_ghost();
    let reorder = |vals: &mut Vec<Vec3>, len: usize| {
        let moved = apply_permutation(&vals[..len], &rec).expect("length checked");
        vals[..len].copy_from_slice(&moved);
    };
    reorder(&mut atoms.x, n);
    reorder(&mut atoms.v, n);
    if atoms.f.len() >= n {
        reorder(&mut atoms.f, n);
    }
    let ids = apply_permutation(&atoms.id[..n], &rec).expect("length checked");
    atoms.id[..n].copy_from_slice(&ids);
    debug_assert_eq!(atoms.n_ghost(), n_ghost);
    rec
}
