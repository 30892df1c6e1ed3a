//! Truncated Lennard-Jones forces and velocity-Verlet integration.

use rayon::prelude::*;
use thiserror::Error;

use crate::atoms::AtomStore;
use crate::neighbor::NeighborList;
use crate::params::SimParams;
use crate::vec3::{self, ZERO};

/// Pairs closer than this many sigma abort the force evaluation.
pub const MIN_SEPARATION: f64 = 0.001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForceError {
    #[error("atoms in slots {i} and {j} are {r:e} apart, below the separation floor")]
    Collapse { i: usize, j: usize, r: f64 },
    #[error("neighbor list covers {list} atoms but the store owns {owned}")]
    ListMismatch { list: usize, owned: usize },
}

/// Fills `f` for owned atoms and returns the potential energy, each pair counted once.
///
/// Each owned atom accumulates independently over its full list, so the
/// result is bitwise independent of the rayon thread count. Listed pairs
/// beyond `r_cut` contribute nothing.
pub fn force_compute(atoms: &mut AtomStore, nlist: &NeighborList, params: &SimParams) -> Result<f64, ForceError> {
    let n = atoms.n_local();
    if nlist.n_atoms() != n {
        return Err(ForceError::ListMismatch {
            list: nlist.n_atoms(),
            owned: n,
        });
    }
    let cut2 = params.r_cut * params.r_cut;
    let sigma2 = params.sigma * params.sigma;
    let floor2 = (MIN_SEPARATION * params.sigma).powi(2);
    let eps48 = 48.0 * params.epsilon;
    let eps4 = 4.0 * params.epsilon;

    let AtomStore { x, f, .. } = atoms;
    f.resize(n, ZERO);
    let x: &[_] = x;
    let pe_parts: Vec<f64> = f[..n]
        .par_iter_mut()
        .enumerate()
        .with_min_len(128)
        .map(|(i, fi)| {
            let xi = x[i];
            let mut acc = ZERO;
            let mut pe = 0.0;
            for &j in nlist.neighbors_of(i) {
                let d = vec3::sub(xi, x[j as usize]);
                let r2 = vec3::norm2(d);
                if r2 < cut2 {
                    if r2 < floor2 {
                        return Err(ForceError::Collapse {
                            i,
                            j: j as usize,
                            r: r2.sqrt(),
                        });
                    }
                    let sr2 = sigma2 / r2;
                    let sr6 = sr2 * sr2 * sr2;
                    let fpair = eps48 * sr6 * (sr6 - 0.5) / r2;
                    acc = vec3::add(acc, vec3::scale(d, fpair));
                    pe += eps4 * sr6 * (sr6 - 1.0);
                }
            }
            *fi = acc;
            Ok(pe)
        })
        .collect::<Result<_, _>>()?;
    Ok(0.5 * pe_parts.iter().sum::<f64>())
}

/// Half-kick then drift for owned atoms: `v += dt/2 f/m; x += dt v`.
pub fn initial_integrate(atoms: &mut AtomStore, params: &SimParams) {
    let dtf = 0.5 * params.dt / params.mass;
    let dt = params.dt;
    let n = atoms.n_local();
    for i in 0..n {
        let v = vec3::add(atoms.v[i], vec3::scale(atoms.f[i], dtf));
        atoms.v[i] = v;
        atoms.x[i] = vec3::add(atoms.x[i], vec3::scale(v, dt));
    }
}

/// Second half-kick for owned atoms: `v += dt/2 f/m`.
pub fn final_integrate(atoms: &mut AtomStore, params: &SimParams) {
    let dtf = 0.5 * params.dt / params.mass;
    let n = atoms.n_local();
    for i in 0..n {
        atoms.v[i] = vec3::add(atoms.v[i], vec3::scale(atoms.f[i], dtf));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms(r: f64) -> (AtomStore, NeighborList) {
        let atoms = AtomStore::from_owned(
            vec![[1.0, 1.0, 1.0], [1.0 + r, 1.0, 1.0]],
            vec![ZERO; 2],
            vec![0, 1],
        );
        let list = NeighborList::from_parts(vec![0, 1, 2], vec![1, 0], 0);
        (atoms, list)
    }

    #[test]
    fn isolated_atom_feels_nothing() {
        let mut a = AtomStore::from_owned(vec![[1.0; 3]], vec![ZERO], vec![0]);
        a.f[0] = [9.0; 3];
        let pe = force_compute(&mut a, &NeighborList::empty(1), &SimParams::default()).unwrap();
        assert_eq!(a.f[0], ZERO);
        assert_eq!(pe, 0.0);
    }

    #[test]
    fn zero_force_at_potential_minimum() {
        // dU/dr = 0 at r = 2^(1/6) sigma
        let (mut a, l) = two_atoms(2f64.powf(1.0 / 6.0));
        let pe = force_compute(&mut a, &l, &SimParams::default()).unwrap();
        assert!(a.f[0][0].abs() < 1e-12 && a.f[1][0].abs() < 1e-12);
        assert!((pe + 1.0).abs() < 1e-12, "well depth is -epsilon, got {pe}");
    }

    #[test]
    fn force_at_unit_separation() {
        // 24 (2 r^-13 - r^-7) at r = 1
        let (mut a, l) = two_atoms(1.0);
        force_compute(&mut a, &l, &SimParams::default()).unwrap();
        assert!((a.f[0][0] + 24.0).abs() < 1e-12);
        assert!((a.f[1][0] - 24.0).abs() < 1e-12);
        assert_eq!(a.f[0][1], 0.0);
    }

    #[test]
    fn listed_pair_beyond_cutoff_contributes_nothing() {
        let (mut a, l) = two_atoms(2.7);
        let pe = force_compute(&mut a, &l, &SimParams::default()).unwrap();
        assert_eq!(a.f[0], ZERO);
        assert_eq!(pe, 0.0);
    }

    #[test]
    fn collapse_is_flagged() {
        let (mut a, l) = two_atoms(1e-4);
        assert!(matches!(
            force_compute(&mut a, &l, &SimParams::default()),
            Err(ForceError::Collapse { .. })
        ));
    }

    #[test]
    fn integration_examples() {
        let p = SimParams::default();
        let mut a = AtomStore::from_owned(vec![[1.0; 3]], vec![ZERO], vec![0]);
        initial_integrate(&mut a, &p);
        assert_eq!(a.x[0], [1.0; 3]);

        let mut a = AtomStore::from_owned(vec![[0.0; 3]], vec![[1.0, 0.0, 0.0]], vec![0]);
        initial_integrate(&mut a, &p);
        assert!((a.x[0][0] - 0.005).abs() < 1e-15);

        let mut a = AtomStore::from_owned(vec![[0.0; 3]], vec![ZERO], vec![0]);
        a.f[0] = [2.0, 0.0, 0.0];
        initial_integrate(&mut a, &p);
        assert!((a.v[0][0] - 0.005).abs() < 1e-15);
        assert!((a.x[0][0] - 0.005 * 0.005).abs() < 1e-18);

        let mut a = AtomStore::from_owned(vec![[0.0; 3]], vec![[0.3, 0.0, 0.0]], vec![0]);
        final_integrate(&mut a, &p);
        assert_eq!(a.v[0], [0.3, 0.0, 0.0]);
    }

    #[test]
    fn constant_force_step_matches_kinematics() {
        // x(t) = x0 + v0 t + a t^2 / 2 and v(t) = v0 + a t hold exactly for one step
        let p = SimParams {
            dt: 0.01,
            mass: 2.0,
            ..SimParams::default()
        };
        let f = [3.0, -1.0, 0.5];
        let (x0, v0) = ([1.0, 2.0, 3.0], [0.1, 0.2, -0.3]);
        let mut a = AtomStore::from_owned(vec![x0], vec![v0], vec![0]);
        a.f[0] = f;
        initial_integrate(&mut a, &p);
        final_integrate(&mut a, &p);
        for d in 0..3 {
            let acc = f[d] / p.mass;
            let x = x0[d] + v0[d] * p.dt + 0.5 * acc * p.dt * p.dt;
            let v = v0[d] + acc * p.dt;
            assert!((a.x[0][d] - x).abs() < 1e-14);
            assert!((a.v[0][d] - v).abs() < 1e-14);
        }
    }
}
