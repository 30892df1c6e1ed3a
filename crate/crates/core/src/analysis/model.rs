use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("reneighbor interval must be positive")]
    NonPositiveInterval,
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
}

/// Whole-run routine times in seconds.
///
/// `t_comm` covers data preparation as well as transfer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingBreakdown {
    pub t_total: f64,
    pub t_force: f64,
    pub t_neigh: f64,
    pub t_comm: f64,
}

impl TimingBreakdown {
    pub fn t_other(&self) -> f64 {
        self.t_total - self.t_force - self.t_neigh - self.t_comm
    }
}

/// Per-call routine times of one side, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RoutineCosts {
    pub t_force: f64,
    pub t_neigh: f64,
    pub t_comm: f64,
}

/// Inputs of the off-path runtime model for a `p/h/b` configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfMeasurement {
    pub nodes: usize,
    pub host_threads: usize,
    pub offload_threads: usize,
    /// Per-call times of the original algorithm on the hosts (`p/h/0`).
    pub host: RoutineCosts,
    /// Per-call times of the original algorithm on the offload side only (`p/0/b`).
    pub offload: RoutineCosts,
    /// Whole-run time of the `p/h/0` run.
    pub t_total: f64,
}

impl PerfMeasurement {
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.nodes, self.host_threads, self.offload_threads)
    }
}

/// Fractional improvement of the off-path run over the baseline.
pub fn improvement(baseline_total: f64, offpath_total: f64) -> f64 {
    (baseline_total - offpath_total) / baseline_total
}

/// Percent of the run that offloading every communication routine could hide.
pub fn max_comm_offload_improvement(b: &TimingBreakdown) -> f64 {
    if b.t_total <= 0.0 {
        return 0.0;
    }
    b.t_comm / b.t_total * 100.0
}

/// Predicted off-path runtime: every rebuild iteration saves the host's
/// force, neighbor and communication time, minus the longer of the host's
/// rebuild work and the offload side's force work.
pub fn estimate_offpath_time(m: &PerfMeasurement, n_iterations: usize, reneigh_interval: usize) -> Result<f64, ModelError> {
    if reneigh_interval == 0 {
        return Err(ModelError::NonPositiveInterval);
    }
    let h = &m.host;
    let o = &m.offload;
    let saved = h.t_force + h.t_neigh + h.t_comm - (h.t_neigh + h.t_comm).max(o.t_force + o.t_comm);
    Ok(m.t_total - saved * (n_iterations as f64 / reneigh_interval as f64))
}

/// Same model with the offload side replaced by a single host-class core,
/// whose per-call costs are those of a one-thread host run.
pub fn auxiliary_node_estimate(
    m: &PerfMeasurement,
    single_core: RoutineCosts,
    n_iterations: usize,
    reneigh_interval: usize,
) -> Result<f64, ModelError> {
    let aux = PerfMeasurement {
        offload: single_core,
        offload_threads: 1,
        ..*m
    };
    estimate_offpath_time(&aux, n_iterations, reneigh_interval)
}

/// Host peak over offload peak.
pub fn peak_ratio(host_peak_per_socket: f64, sockets: u32, offload_peak: f64) -> Result<f64, ModelError> {
    if !(host_peak_per_socket > 0.0 && host_peak_per_socket.is_finite()) {
        return Err(ModelError::NonPositive("host peak"));
    }
    if !(offload_peak > 0.0 && offload_peak.is_finite()) {
        return Err(ModelError::NonPositive("offload peak"));
    }
    Ok(host_peak_per_socket * sockets as f64 / offload_peak)
}

/// Host thread count whose rebuild time (`t_neigh + t_comm`) is closest to
/// the offload side's force time. `host` holds `(threads, costs)` pairs.
pub fn find_knee(host: &[(usize, RoutineCosts)], offload: RoutineCosts) -> Option<usize> {
    let target = offload.t_force + offload.t_comm;
    host.iter()
        .min_by(|a, b| {
            let da = (a.1.t_neigh + a.1.t_comm - target).abs();
            let db = (b.1.t_neigh + b.1.t_comm - target).abs();
            da.total_cmp(&db).then(a.0.cmp(&b.0))
        })
        .map(|p| p.0)
}
