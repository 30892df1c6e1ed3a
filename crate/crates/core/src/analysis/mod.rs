//! Thermodynamic reporting, the temperature divergence metric and the
//! runtime models.

pub mod model;
pub mod tdr;
pub mod thermo;

pub use model::{
    auxiliary_node_estimate, estimate_offpath_time, find_knee, improvement, max_comm_offload_improvement, peak_ratio,
    ModelError, PerfMeasurement, RoutineCosts, TimingBreakdown,
};
pub use tdr::{compute_tdr, default_delta, TdrError, TdrReport};
pub use thermo::{compute_temperature, reduce_thermo, ThermoPartial, ThermoSample};
