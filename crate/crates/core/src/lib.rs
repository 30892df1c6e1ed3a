pub mod analysis;
pub mod atoms;
pub mod bench;
pub mod domain;
pub mod dynamics;
pub mod halo;
pub mod lattice;
pub mod neighbor;
pub mod params;
pub mod scheduler;
pub mod snapshot;
pub mod transport;
pub mod vec3;
