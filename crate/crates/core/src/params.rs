//! Simulation parameters in reduced Lennard-Jones units.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{name} must be {requirement}, got {value}")]
    OutOfRange {
        name: &'static str,
        requirement: &'static str,
        value: String,
    },
}

fn out_of_range(name: &'static str, requirement: &'static str, value: impl ToString) -> ParamError {
    ParamError::OutOfRange {
        name,
        requirement,
        value: value.to_string(),
    }
}

/// Physical and scheduling parameters shared by every worker.
///
/// Defaults follow the MiniMD reference Lennard-Jones input: liquid state
/// point (density 0.8442, T = 1.44), cutoff 2.5, skin 0.3, timestep 0.005.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub epsilon: f64,
    pub sigma: f64,
    pub mass: f64,
    pub r_cut: f64,
    /// Extra buffer beyond `r_cut` included in neighbor lists.
    pub skin: f64,
    pub dt: f64,
    /// Timesteps between neighbor-list rebuilds.
    pub reneigh_interval: usize,
    /// Neighbor rebuilds between spatial sorts of the owned atoms; 0 disables sorting.
    pub sort_interval: usize,
    pub n_iterations: usize,
    pub unit_cells: [usize; 3],
    pub density: f64,
    pub t_init: f64,
    pub rng_seed: u64,
    /// Iterations between thermodynamic samples.
    pub thermo_interval: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            epsilon: 1.0,
            sigma: 1.0,
            mass: 1.0,
            r_cut: 2.5,
            skin: 0.3,
            dt: 0.005,
            reneigh_interval: 20,
            sort_interval: 5,
            n_iterations: 100,
            unit_cells: [10, 10, 10],
            density: 0.8442,
            t_init: 1.44,
            rng_seed: 5287,
            thermo_interval: 10,
        }
    }
}

impl SimParams {
    /// fcc lattice: four atoms per unit cell.
    pub fn n_atoms(&self) -> usize {
        4 * self.unit_cells.iter().product::<usize>()
    }

    /// Width of the ghost region around each subdomain.
    pub fn halo_width(&self) -> f64 {
        self.r_cut + self.skin
    }

    /// Edge length of the cubic fcc cell at the configured density.
    pub fn cell_edge(&self) -> f64 {
        (4.0 / self.density).cbrt()
    }

    pub fn is_rebuild(&self, iteration: usize) -> bool {
        iteration % self.reneigh_interval == 0
    }

    /// Whether the rebuild at `iteration` also sorts the owned atoms.
    pub fn is_sort(&self, iteration: usize) -> bool {
        self.sort_interval > 0
            && self.is_rebuild(iteration)
            && (iteration / self.reneigh_interval) % self.sort_interval == 0
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("epsilon", self.epsilon),
            ("sigma", self.sigma),
            ("mass", self.mass),
            ("r_cut", self.r_cut),
            ("dt", self.dt),
            ("density", self.density),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(out_of_range(name, "finite and > 0", value));
            }
        }
        if !(self.skin.is_finite() && self.skin >= 0.0) {
            return Err(out_of_range("skin", "finite and >= 0", self.skin));
        }
        if !(self.t_init.is_finite() && self.t_init >= 0.0) {
            return Err(out_of_range("t_init", "finite and >= 0", self.t_init));
        }
        if self.reneigh_interval < 1 {
            return Err(out_of_range("reneigh_interval", ">= 1", self.reneigh_interval));
        }
        if self.thermo_interval < 1 {
            return Err(out_of_range("thermo_interval", ">= 1", self.thermo_interval));
        }
        if self.unit_cells.iter().any(|&c| c == 0) {
            return Err(out_of_range(
                "unit_cells",
                "positive on every axis",
                format!("{:?}", self.unit_cells),
            ));
        }
        Ok(())
    }
}
