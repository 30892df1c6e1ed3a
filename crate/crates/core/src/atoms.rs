//! Per-worker atom arrays.
//!
//! Slot index `i` is a transient identity: it names the same atom only until
//! the next exchange or sort reorders the arrays. `id` carries a stable global
//! identifier alongside so the reorderings can be checked.

use serde::{Deserialize, Serialize};

use crate::vec3::{self, Vec3, ZERO};

/// Atom state tagged by its stable global id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub id: u64,
    pub x: Vec3,
    pub v: Vec3,
}

/// Owned atoms occupy slots `0..n_local`; ghost images follow in `x` and `id`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AtomStore {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub f: Vec<Vec3>,
    pub id: Vec<u64>,
    n_local: usize,
}

impl AtomStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Store holding only owned atoms with zeroed forces.
    pub fn from_owned(x: Vec<Vec3>, v: Vec<Vec3>, id: Vec<u64>) -> Self {
        assert_eq!(x.len(), v.len());
        assert_eq!(x.len(), id.len());
        let n = x.len();
        AtomStore {
            x,
            v,
            f: vec![ZERO; n],
            id,
            n_local: n,
        }
    }

    pub fn from_records(records: &[AtomRecord]) -> Self {
        let mut s = AtomStore::new();
        for r in records {
            s.push_owned(r.x, r.v, r.id);
        }
        s
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn n_ghost(&self) -> usize {
        self.x.len() - self.n_local
    }

    pub fn is_empty(&self) -> bool {
        self.n_local == 0
    }

    /// Appends an owned atom. Ghosts must have been cleared.
    pub fn push_owned(&mut self, x: Vec3, v: Vec3, id: u64) {
        debug_assert_eq!(self.n_ghost(), 0, "push_owned with ghosts present");
        self.x.push(x);
        self.v.push(v);
        self.f.push(ZERO);
        self.id.push(id);
        self.n_local += 1;
    }

    pub fn push_ghost(&mut self, x: Vec3, id: u64) {
        self.x.push(x);
        self.id.push(id);
    }

    pub fn clear_ghosts(&mut self) {
        self.x.truncate(self.n_local);
        self.id.truncate(self.n_local);
    }

    /// Removes owned slot `i`, moving the last owned atom into the hole.
    ///
    /// Returns the removed `(x, v, id)`. Ghosts must have been cleared.
    pub fn swap_remove_owned(&mut self, i: usize) -> (Vec3, Vec3, u64) {
        debug_assert_eq!(self.n_ghost(), 0, "swap_remove_owned with ghosts present");
        let x = self.x.swap_remove(i);
        let v = self.v.swap_remove(i);
        self.f.swap_remove(i);
        let id = self.id.swap_remove(i);
        self.n_local -= 1;
        (x, v, id)
    }

    /// Replaces the owned positions, resizing the ghost region to `n_ghost` zero entries.
    ///
    /// Used by workers that hold positions only (no velocities) and refresh
    /// ghosts through a recorded border map.
    pub fn set_positions(&mut self, x_owned: Vec<Vec3>, ids: Vec<u64>, n_ghost: usize) {
        let n = x_owned.len();
        self.x = x_owned;
        self.x.resize(n + n_ghost, ZERO);
        self.id = ids;
        self.id.resize(n + n_ghost, u64::MAX);
        self.v.resize(n, ZERO);
        self.f.clear();
        self.f.resize(n, ZERO);
        self.n_local = n;
    }

    pub fn records(&self) -> Vec<AtomRecord> {
        (0..self.n_local)
            .map(|i| AtomRecord {
                id: self.id[i],
                x: self.x[i],
                v: self.v[i],
            })
            .collect()
    }

    /// Returns `(sum of m|v|^2, total momentum)` over owned atoms.
    pub fn kinetic_sums(&self, mass: f64) -> (f64, Vec3) {
        let mut mv2 = 0.0;
        let mut p = ZERO;
        for v in &self.v[..self.n_local] {
            mv2 += mass * vec3::norm2(*v);
            p = vec3::add(p, vec3::scale(*v, mass));
        }
        (mv2, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_remove_fills_hole_with_last() {
        let mut s = AtomStore::new();
        for k in 0..4 {
            s.push_owned([k as f64; 3], [0.0; 3], k);
        }
        let (x, _, id) = s.swap_remove_owned(1);
        assert_eq!(x, [1.0; 3]);
        assert_eq!(id, 1);
        assert_eq!(s.id, vec![0, 3, 2]);
        assert_eq!(s.n_local(), 3);
    }

    #[test]
    fn ghosts_follow_owned() {
        let mut s = AtomStore::from_owned(vec![[0.0; 3]; 2], vec![[0.0; 3]; 2], vec![7, 8]);
        s.push_ghost([1.0; 3], 9);
        assert_eq!(s.n_ghost(), 1);
        assert_eq!(s.x.len(), 3);
        s.clear_ghosts();
        assert_eq!(s.n_ghost(), 0);
        assert_eq!(s.records().len(), 2);
    }
}
