//! Deterministic fcc initial conditions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::atoms::{AtomRecord, AtomStore};
use crate::domain::{wrap_periodic, Decomposition};
use crate::params::SimParams;
use crate::vec3::{self, Vec3, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("subdomain {coords:?} of grid {grid:?} holds no lattice sites")]
    EmptySubdomain { coords: [usize; 3], grid: [usize; 3] },
}

const FCC_BASIS: [Vec3; 4] = [
    [0.0, 0.0, 0.0],
    [0.5, 0.5, 0.0],
    [0.5, 0.0, 0.5],
    [0.0, 0.5, 0.5],
];

/// Position of global lattice site `site` (4 sites per cell, x fastest).
fn site_position(site: u64, cells: [usize; 3], a: f64) -> Vec3 {
    let b = (site % 4) as usize;
    let cell = site / 4;
    let i = (cell % cells[0] as u64) as f64;
    let j = ((cell / cells[0] as u64) % cells[1] as u64) as f64;
    let k = (cell / (cells[0] * cells[1]) as u64) as f64;
    let basis = FCC_BASIS[b];
    [(i + basis[0]) * a, (j + basis[1]) * a, (k + basis[2]) * a]
}

/// Raw velocity for a lattice site: its own ChaCha stream, so the draw does not
/// depend on which worker owns the site.
fn raw_velocity(seed: u64, site: u64) -> Vec3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(site);
    [
        rng.gen::<f64>() - 0.5,
        rng.gen::<f64>() - 0.5,
        rng.gen::<f64>() - 0.5,
    ]
}

/// Velocity shift and scale applied to every raw draw: zero net momentum and
/// temperature `t_init`. Every worker recomputes these over all sites in site
/// order, so the result is bitwise independent of the decomposition.
fn velocity_normalization(params: &SimParams) -> (Vec3, f64) {
    let n = params.n_atoms() as u64;
    let mut sum = ZERO;
    for s in 0..n {
        sum = vec3::add(sum, raw_velocity(params.rng_seed, s));
    }
    let mean = vec3::scale(sum, 1.0 / n as f64);
    let mut mv2 = 0.0;
    for s in 0..n {
        let v = vec3::sub(raw_velocity(params.rng_seed, s), mean);
        mv2 += params.mass * vec3::norm2(v);
    }
    let t_raw = mv2 / (3.0 * n as f64);
    let factor = if t_raw > 0.0 {
        (params.t_init / t_raw).sqrt()
    } else {
        0.0
    };
    (mean, factor)
}

/// All lattice atoms of the global system, in site order.
pub fn lattice_records(params: &SimParams) -> Vec<AtomRecord> {
    let a = params.cell_edge();
    let (mean, factor) = velocity_normalization(params);
    (0..params.n_atoms() as u64)
        .map(|s| AtomRecord {
            id: s,
            x: site_position(s, params.unit_cells, a),
            v: vec3::scale(vec3::sub(raw_velocity(params.rng_seed, s), mean), factor),
        })
        .collect()
}

/// Owned atoms of `decomp`'s subdomain on the fcc lattice.
pub fn create_lattice(params: &SimParams, decomp: &Decomposition) -> Result<AtomStore, LatticeError> {
    let a = params.cell_edge();
    let (mean, factor) = velocity_normalization(params);
    let mut store = AtomStore::new();
    for s in 0..params.n_atoms() as u64 {
        let x = wrap_periodic(site_position(s, params.unit_cells, a), &decomp.global);
        if !decomp.owns(x) {
            continue;
        }
        let v = vec3::scale(vec3::sub(raw_velocity(params.rng_seed, s), mean), factor);
        store.push_owned(x, v, s);
    }
    if store.is_empty() {
        return Err(LatticeError::EmptySubdomain {
            coords: decomp.coords,
            grid: decomp.grid,
        });
    }
    Ok(store)
}

/// Owned subset of an externally supplied atom set (snapshot loading).
pub fn distribute_records(records: &[AtomRecord], decomp: &Decomposition) -> Result<AtomStore, LatticeError> {
    let mut store = AtomStore::new();
    for r in records {
        let x = wrap_periodic(r.x, &decomp.global);
        if decomp.owns(x) {
            store.push_owned(x, r.v, r.id);
        }
    }
    if store.is_empty() {
        return Err(LatticeError::EmptySubdomain {
            coords: decomp.coords,
            grid: decomp.grid,
        });
    }
    Ok(store)
}


#[cfg(test)]
mod degenerate {
    use super::*;
    use crate::domain::GlobalBox;

    #[test]
    fn empty_subdomain_is_rejected() {
        let p = SimParams {
            unit_cells: [1, 1, 1],
            ..SimParams::default()
        };
        let b = GlobalBox::for_lattice(p.unit_cells, p.density);
        // one fcc cell split four ways along x: planes at 0 and a/2 only
        let d = Decomposition::new(b, [4, 1, 1], 1, 0.1).unwrap();
        assert!(matches!(
            create_lattice(&p, &d),
            Err(LatticeError::EmptySubdomain { .. })
        ));
        let d0 = Decomposition::new(b, [4, 1, 1], 0, 0.1).unwrap();
        assert_eq!(create_lattice(&p, &d0).unwrap().n_local(), 2);
    }
}
