use serde::{Deserialize, Serialize};

use crate::atoms::AtomRecord;
use crate::vec3::{self, Vec3, ZERO};

/// One worker's contribution to a thermo sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoPartial {
    pub iteration: usize,
    /// Sum of m|v|^2 over owned atoms.
    pub mv2: f64,
    pub pe: f64,
    pub momentum: Vec3,
    pub n_local: usize,
}

/// Globally reduced thermodynamic state. Energies are totals, not per atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoSample {
    pub iteration: usize,
    pub temperature: f64,
    pub pe: f64,
    pub ke: f64,
    pub total: f64,
    pub momentum: Vec3,
    pub n_atoms: usize,
}

/// T = sum m|v|^2 / (3N) with k_B = 1.
pub fn compute_temperature(atoms: &[AtomRecord], mass: f64) -> f64 {
    if atoms.is_empty() {
        return 0.0;
    }
    let mv2: f64 = atoms.iter().map(|a| mass * vec3::norm2(a.v)).sum();
    mv2 / (3.0 * atoms.len() as f64)
}

/// Sums per-worker partials of one iteration. Partials are added in the
/// order given, so callers pass them in node order for reproducible sums.
pub fn reduce_thermo(parts: &[ThermoPartial]) -> Option<ThermoSample> {
    let first = parts.first()?;
    let mut mv2 = 0.0;
    let mut pe = 0.0;
    let mut momentum = ZERO;
    let mut n = 0;
    for p in parts {
        debug_assert_eq!(p.iteration, first.iteration);
        mv2 += p.mv2;
        pe += p.pe;
        momentum = vec3::add(momentum, p.momentum);
        n += p.n_local;
    }
    let ke = 0.5 * mv2;
    Some(ThermoSample {
        iteration: first.iteration,
        temperature: if n == 0 { 0.0 } else { mv2 / (3.0 * n as f64) },
        pe,
        ke,
        total: ke + pe,
        momentum,
        n_atoms: n,
    })
}
