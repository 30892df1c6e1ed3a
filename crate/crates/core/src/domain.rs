//! Periodic global box and its spatial decomposition into subdomains.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec3::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("processor grid {grid:?} has {cells} subdomains but {ranks} were requested")]
    GridMismatch {
        grid: [usize; 3],
        cells: usize,
        ranks: usize,
    },
    #[error("rank {rank} is outside a grid of {ranks} subdomains")]
    RankOutOfRange { rank: usize, ranks: usize },
    #[error("subdomain side {side:.4} on axis {axis} is narrower than the halo width {halo:.4}")]
    SubdomainTooSmall { axis: usize, side: f64, halo: f64 },
}

/// Orthorhombic box, periodic on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalBox {
    pub lengths: Vec3,
}

impl GlobalBox {
    pub fn new(lengths: Vec3) -> Self {
        GlobalBox { lengths }
    }

    /// Box holding `cells` cubic fcc cells at the given number density.
    pub fn for_lattice(cells: [usize; 3], density: f64) -> Self {
        let a = (4.0 / density).cbrt();
        GlobalBox {
            lengths: [cells[0] as f64 * a, cells[1] as f64 * a, cells[2] as f64 * a],
        }
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }
}

/// Maps each component of `pos` into `[0, length)`.
///
/// Assumes the position is less than one box length outside the box.
pub fn wrap_periodic(pos: Vec3, global: &GlobalBox) -> Vec3 {
    let mut out = pos;
    for (c, &l) in out.iter_mut().zip(global.lengths.iter()) {
        if *c < 0.0 {
            *c += l;
            // -tiny + L can round up to exactly L
            if *c >= l {
                *c = 0.0;
            }
        } else if *c >= l {
            *c -= l;
        }
    }
    out
}

/// Side of a face exchange, relative to this subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Lower,
    Upper,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Lower, Direction::Upper];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Lower => Direction::Upper,
            Direction::Upper => Direction::Lower,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Direction::Lower => 0,
            Direction::Upper => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Direction> {
        match code {
            0 => Some(Direction::Lower),
            1 => Some(Direction::Upper),
            _ => None,
        }
    }
}

/// One node's view of the processor grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub grid: [usize; 3],
    pub coords: [usize; 3],
    pub global: GlobalBox,
    pub halo_width: f64,
}

impl Decomposition {
    pub fn new(
        global: GlobalBox,
        grid: [usize; 3],
        rank: usize,
        halo_width: f64,
    ) -> Result<Self, DomainError> {
        let ranks: usize = grid.iter().product();
        if rank >= ranks {
            return Err(DomainError::RankOutOfRange { rank, ranks });
        }
        for axis in 0..3 {
            let side = global.lengths[axis] / grid[axis] as f64;
            if side < halo_width {
                return Err(DomainError::SubdomainTooSmall {
                    axis,
                    side,
                    halo: halo_width,
                });
            }
        }
        let coords = [
            rank % grid[0],
            (rank / grid[0]) % grid[1],
            rank / (grid[0] * grid[1]),
        ];
        Ok(Decomposition {
            grid,
            coords,
            global,
            halo_width,
        })
    }

    /// Decompositions for every rank of `grid`, after checking the grid holds `ranks` cells.
    pub fn all(
        global: GlobalBox,
        grid: [usize; 3],
        ranks: usize,
        halo_width: f64,
    ) -> Result<Vec<Self>, DomainError> {
        let cells: usize = grid.iter().product();
        if cells != ranks {
            return Err(DomainError::GridMismatch { grid, cells, ranks });
        }
        (0..ranks)
            .map(|r| Decomposition::new(global, grid, r, halo_width))
            .collect()
    }

    pub fn n_ranks(&self) -> usize {
        self.grid.iter().product()
    }

    pub fn rank(&self) -> usize {
        self.rank_of(self.coords)
    }

    pub fn rank_of(&self, coords: [usize; 3]) -> usize {
        (coords[2] * self.grid[1] + coords[1]) * self.grid[0] + coords[0]
    }

    /// Rank of the face neighbor along `axis`, with periodic wrap.
    pub fn neighbor(&self, axis: usize, dir: Direction) -> usize {
        let p = self.grid[axis];
        let mut c = self.coords;
        c[axis] = match dir {
            Direction::Lower => (c[axis] + p - 1) % p,
            Direction::Upper => (c[axis] + 1) % p,
        };
        self.rank_of(c)
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.global.lengths[axis] / self.grid[axis] as f64
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.coords[axis] as f64 * self.global.lengths[axis] / self.grid[axis] as f64
    }

    pub fn hi(&self, axis: usize) -> f64 {
        (self.coords[axis] + 1) as f64 * self.global.lengths[axis] / self.grid[axis] as f64
    }

    /// Grid coordinate owning `value` on `axis`; `value` must be wrapped.
    ///
    /// This is the single ownership rule used by lattice creation, exchange and tests.
    pub fn axis_coord(&self, axis: usize, value: f64) -> usize {
        let p = self.grid[axis];
        let c = (value * p as f64 / self.global.lengths[axis]).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(p - 1)
        }
    }

    pub fn owner_coords(&self, pos: Vec3) -> [usize; 3] {
        [
            self.axis_coord(0, pos[0]),
            self.axis_coord(1, pos[1]),
            self.axis_coord(2, pos[2]),
        ]
    }

    pub fn owner_rank(&self, pos: Vec3) -> usize {
        self.rank_of(self.owner_coords(pos))
    }

    pub fn owns(&self, pos: Vec3) -> bool {
        self.owner_coords(pos) == self.coords
    }
}

/// Factorization of `ranks` into a 3-D grid that minimizes subdomain surface area.
pub fn choose_proc_grid(ranks: usize, global: &GlobalBox) -> [usize; 3] {
    let [lx, ly, lz] = global.lengths;
    let mut best = [ranks, 1, 1];
    let mut best_area = f64::INFINITY;
    for px in 1..=ranks {
        if ranks % px != 0 {
            continue;
        }
        let rest = ranks / px;
        for py in 1..=rest {
            if rest % py != 0 {
                continue;
            }
            let pz = rest / py;
            let (sx, sy, sz) = (lx / px as f64, ly / py as f64, lz / pz as f64);
            let area = sx * sy + sy * sz + sx * sz;
            if area < best_area - 1e-12 {
                best_area = area;
                best = [px, py, pz];
            }
        }
    }
    best
}
