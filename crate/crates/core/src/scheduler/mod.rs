//! Baseline and off-path drivers.
//!
//! A run has `nodes` node slots. Baseline runs use one host worker per node
//! (ranks `0..nodes`). Off-path runs add one offload worker per node at rank
//! `nodes + node`; it evaluates forces with the previous neighbor list while
//! its host rebuilds the list.

mod host;
pub mod ledger;
mod offload;
mod wire;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{reduce_thermo, RoutineCosts, ThermoPartial, ThermoSample, TimingBreakdown};
use crate::atoms::AtomRecord;
use crate::domain::{choose_proc_grid, Decomposition, DomainError, GlobalBox};
use crate::dynamics::ForceError;
use crate::halo::HaloError;
use crate::lattice::LatticeError;
use crate::neighbor::NeighborError;
use crate::params::{ParamError, SimParams};
use crate::transport::{local_mesh, Rank, Tag, Throttle, Transport, TransportError};

pub use ledger::{Category, IterationRecord, Routine, Stamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RunMode {
    Baseline,
    Offpath,
    /// Off-path message flow, but the offload worker waits for the new list.
    OffpathSyncDebug,
}

impl RunMode {
    pub fn uses_offload(self) -> bool {
        self != RunMode::Baseline
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Baseline => "baseline",
            RunMode::Offpath => "offpath",
            RunMode::OffpathSyncDebug => "offpath-sync-debug",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('_', "-").as_str() {
            "baseline" => Ok(RunMode::Baseline),
            "offpath" => Ok(RunMode::Offpath),
            "offpath-sync-debug" => Ok(RunMode::OffpathSyncDebug),
            _ => Err(format!(
                "unknown mode {s:?}; expected baseline, offpath or offpath-sync-debug"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Host,
    Offload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSetup {
    pub params: SimParams,
    pub mode: RunMode,
    pub nodes: usize,
    /// Processor grid; chosen to minimize subdomain surface when `None`.
    pub grid: Option<[usize; 3]>,
    pub host_threads: usize,
    pub offload_threads: usize,
    /// Applied to every host force evaluation.
    pub host_throttle: Throttle,
    /// Applied to every offload force evaluation.
    pub offload_throttle: Throttle,
    pub recv_timeout: Option<Duration>,
}

impl RunSetup {
    pub fn new(params: SimParams, mode: RunMode, nodes: usize) -> Self {
        RunSetup {
            params,
            mode,
            nodes,
            grid: None,
            host_threads: 1,
            offload_threads: 1,
            host_throttle: Throttle::default(),
            offload_throttle: Throttle::default(),
            recv_timeout: None,
        }
    }

    pub fn n_workers(&self) -> usize {
        if self.mode.uses_offload() {
            2 * self.nodes
        } else {
            self.nodes
        }
    }

    pub fn host_rank(&self, node: usize) -> Rank {
        node
    }

    pub fn offload_rank(&self, node: usize) -> Rank {
        self.nodes + node
    }

    pub fn role_of(&self, rank: Rank) -> (Role, usize) {
        if rank < self.nodes {
            (Role::Host, rank)
        } else {
            (Role::Offload, rank - self.nodes)
        }
    }

    pub fn global_box(&self) -> GlobalBox {
        GlobalBox::for_lattice(self.params.unit_cells, self.params.density)
    }

    pub fn proc_grid(&self) -> [usize; 3] {
        self.grid
            .unwrap_or_else(|| choose_proc_grid(self.nodes, &self.global_box()))
    }

    pub fn decomposition(&self, node: usize) -> Result<Decomposition, DomainError> {
        let grid = self.proc_grid();
        let cells: usize = grid.iter().product();
        if cells != self.nodes {
            return Err(DomainError::GridMismatch {
                grid,
                cells,
                ranks: self.nodes,
            });
        }
        Decomposition::new(self.global_box(), grid, node, self.params.halo_width())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        if self.nodes == 0 {
            return Err(SimError::Setup("at least one node is required".into()));
        }
        if self.host_threads == 0 || self.offload_threads == 0 {
            return Err(SimError::Setup("thread counts must be at least 1".into()));
        }
        self.decomposition(0)?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("invalid run setup: {0}")]
    Setup(String),
    #[error("iteration {iteration}: halo communication failed: {source}")]
    Halo { iteration: usize, source: HaloError },
    #[error("iteration {iteration}: neighbor build failed: {source}")]
    Neighbor { iteration: usize, source: NeighborError },
    #[error("iteration {iteration}: force evaluation failed: {source}")]
    Force { iteration: usize, source: ForceError },
    #[error("iteration {iteration}: non-finite {what}")]
    Blowup { iteration: usize, what: &'static str },
    #[error("protocol desync at iteration {iteration} on tag {tag}: {detail}")]
    Desync {
        iteration: usize,
        tag: Tag,
        detail: String,
        /// The peer went away rather than sending something unexpected.
        disconnected: bool,
    },
    #[error("iteration {iteration}: force slot {slot} belongs to atom {got}, expected atom {expected}")]
    IndexMismatch {
        iteration: usize,
        slot: usize,
        expected: u64,
        got: u64,
    },
    #[error("worker {0} panicked")]
    Panicked(Rank),
    /// Failure reported by a worker running in another process.
    #[error("worker {rank}: {message}")]
    Worker {
        rank: Rank,
        message: String,
        exit_code: i32,
        consequence: bool,
    },
}

impl SimError {
    /// True for failures that are only the echo of another worker failing first.
    pub fn is_consequence(&self) -> bool {
        match self {
            SimError::Desync { disconnected, .. } => *disconnected,
            SimError::Worker { consequence, .. } => *consequence,
            SimError::Halo {
                source: HaloError::Transport(e),
                ..
            } => matches!(
                e,
                TransportError::Disconnected { .. } | TransportError::PeerUnreachable { .. }
            ),
            _ => false,
        }
    }

    /// Process exit status for this failure: 2 for configuration errors, 3 for
    /// protocol desync, 4 for numerical blow-up, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Params(_) | SimError::Domain(_) | SimError::Lattice(_) | SimError::Setup(_) => 2,
            SimError::Desync { .. } | SimError::IndexMismatch { .. } => 3,
            SimError::Force { .. }
            | SimError::Blowup { .. }
            | SimError::Halo {
                source: HaloError::TooFar { .. },
                ..
            } => 4,
            SimError::Worker { exit_code, .. } => *exit_code,
            _ => 1,
        }
    }

    pub(crate) fn desync(iteration: usize, tag: Tag, e: TransportError) -> SimError {
        let disconnected = matches!(
            e,
            TransportError::Disconnected { .. } | TransportError::PeerUnreachable { .. }
        );
        SimError::Desync {
            iteration,
            tag,
            detail: e.to_string(),
            disconnected,
        }
    }

    pub(crate) fn malformed(iteration: usize, tag: Tag, e: impl fmt::Display) -> SimError {
        SimError::Desync {
            iteration,
            tag,
            detail: format!("malformed payload: {e}"),
            disconnected: false,
        }
    }
}

/// Everything one worker reports back to the launcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerOutcome {
    pub rank: Rank,
    pub node: usize,
    pub role: Role,
    pub thermo: Vec<ThermoPartial>,
    pub ledger: Vec<IterationRecord>,
    /// Owned atoms at the end of the run; empty for offload workers.
    pub final_state: Vec<AtomRecord>,
    pub offload_rounds: usize,
    /// Wall time of the timestep loop, setup excluded.
    pub t_loop: f64,
}

impl WorkerOutcome {
    pub fn breakdown(&self) -> TimingBreakdown {
        let mut b = TimingBreakdown {
            t_total: self.t_loop,
            ..Default::default()
        };
        for r in self.ledger.iter().filter(|r| r.iteration > 0) {
            b.t_force += r.time_in_category(Category::Force);
            b.t_neigh += r.time_in_category(Category::Neigh);
            b.t_comm += r.time_in_category(Category::Comm);
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub mode: RunMode,
    pub nodes: usize,
    pub thermo: Vec<ThermoSample>,
    /// `t_total` is the slowest host's loop time; components are host means.
    pub timing: TimingBreakdown,
    pub final_state: Vec<AtomRecord>,
    pub host_ledgers: Vec<Vec<IterationRecord>>,
    pub offload_ledgers: Vec<Vec<IterationRecord>>,
    /// Rounds served by the offload worker of node 0.
    pub offload_rounds: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

impl SimulationResult {
    pub fn temperature_series(&self) -> Vec<(usize, f64)> {
        self.thermo.iter().map(|s| (s.iteration, s.temperature)).collect()
    }

    /// Median over rebuild iterations (setup excluded) of the host-mean
    /// per-call force, neighbor (sort + build) and rebuild communication
    /// (wrap + exchange + border) times.
    pub fn rebuild_costs(&self) -> RoutineCosts {
        let per_iter = |f: &dyn Fn(&IterationRecord) -> f64| -> Vec<f64> {
            let Some(first) = self.host_ledgers.first() else {
                return Vec::new();
            };
            (0..first.len())
                .filter(|&k| first[k].rebuild && first[k].iteration > 0)
                .map(|k| {
                    self.host_ledgers.iter().map(|l| f(&l[k])).sum::<f64>() / self.host_ledgers.len() as f64
                })
                .collect()
        };
        RoutineCosts {
            t_force: median(per_iter(&|r| r.time_in(Routine::Force))),
            t_neigh: median(per_iter(&|r| r.time_in_category(Category::Neigh))),
            t_comm: median(per_iter(&|r| {
                r.time_in(Routine::Pbc) + r.time_in(Routine::Exchange) + r.time_in(Routine::Border)
            })),
        }
    }

    /// Host time blocked on the offload worker, per rebuild iteration of node 0.
    pub fn stall_per_rebuild(&self) -> Vec<f64> {
        self.host_ledgers
            .first()
            .map(|l| {
                l.iter()
                    .filter(|r| r.rebuild && r.iteration > 0)
                    .map(|r| r.time_in(Routine::OffloadWait))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Which list version each iteration's forces used, from node 0.
    pub fn list_versions(&self) -> Vec<(usize, Option<usize>)> {
        self.host_ledgers
            .first()
            .map(|l| l.iter().map(|r| (r.iteration, r.list_version)).collect())
            .unwrap_or_default()
    }
}

/// What a worker process hands back to its launcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WorkerReport {
    Done(WorkerOutcome),
    Failed {
        message: String,
        exit_code: i32,
        consequence: bool,
    },
}

impl WorkerReport {
    pub fn from_result(r: Result<WorkerOutcome, SimError>) -> Self {
        match r {
            Ok(o) => WorkerReport::Done(o),
            Err(e) => WorkerReport::Failed {
                message: e.to_string(),
                exit_code: e.exit_code(),
                consequence: e.is_consequence(),
            },
        }
    }

    pub fn into_result(self, rank: Rank) -> Result<WorkerOutcome, SimError> {
        match self {
            WorkerReport::Done(o) => Ok(o),
            WorkerReport::Failed {
                message,
                exit_code,
                consequence,
            } => Err(SimError::Worker {
                rank,
                message,
                exit_code,
                consequence,
            }),
        }
    }
}

/// Gathers per-worker results: the root-cause error if any failed, else the merged result.
pub fn collect(setup: &RunSetup, results: Vec<Result<WorkerOutcome, SimError>>) -> Result<SimulationResult, SimError> {
    let mut outcomes = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(pick_root_cause(errors));
    }
    merge(setup, outcomes)
}

/// Runs one worker to completion on `transport`.
pub fn run_worker(setup: &RunSetup, rank: Rank, transport: &dyn Transport) -> Result<WorkerOutcome, SimError> {
    let (role, node) = setup.role_of(rank);
    let threads = match role {
        Role::Host => setup.host_threads,
        Role::Offload => setup.offload_threads,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .thread_name(move |i| format!("{role:?}-{node}-{i}").to_lowercase())
        .build()
        .map_err(|e| SimError::Setup(format!("thread pool: {e}")))?;
    pool.install(|| match role {
        Role::Host => host::run(setup, node, transport),
        Role::Offload => offload::run(setup, node, transport),
    })
}

/// Runs every worker as a thread of this process over the in-process transport.
pub fn simulate(setup: &RunSetup) -> Result<SimulationResult, SimError> {
    setup.validate()?;
    let mut mesh = local_mesh(setup.n_workers());
    for ep in &mut mesh {
        ep.set_recv_timeout(setup.recv_timeout);
    }
    simulate_with(setup, mesh)
}

/// Runs one thread per endpoint; endpoint `k` must be rank `k`.
pub fn simulate_with<T: Transport>(setup: &RunSetup, endpoints: Vec<T>) -> Result<SimulationResult, SimError> {
    setup.validate()?;
    if endpoints.len() != setup.n_workers() {
        return Err(SimError::Setup(format!(
            "{} endpoints for {} workers",
            endpoints.len(),
            setup.n_workers()
        )));
    }
    let results: Vec<Result<WorkerOutcome, SimError>> = std::thread::scope(|s| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .enumerate()
            .map(|(rank, ep)| {
                std::thread::Builder::new()
                    .name(format!("worker-{rank}"))
                    .spawn_scoped(s, move || run_worker(setup, rank, &ep))
                    .expect("spawn worker thread")
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(rank, h)| h.join().unwrap_or(Err(SimError::Panicked(rank))))
            .collect()
    });
    collect(setup, results)
}

/// The first error that is not merely a reaction to another worker's failure.
pub fn pick_root_cause(mut errors: Vec<SimError>) -> SimError {
    let k = errors.iter().position(|e| !e.is_consequence()).unwrap_or(0);
    errors.swap_remove(k)
}

/// Combines worker outcomes, in any order, into one result.
pub fn merge(setup: &RunSetup, mut outcomes: Vec<WorkerOutcome>) -> Result<SimulationResult, SimError> {
    outcomes.sort_by_key(|o| o.rank);
    let hosts: Vec<&WorkerOutcome> = outcomes.iter().filter(|o| o.role == Role::Host).collect();
    let offloads: Vec<&WorkerOutcome> = outcomes.iter().filter(|o| o.role == Role::Offload).collect();
    if hosts.len() != setup.nodes {
        return Err(SimError::Setup(format!(
            "{} host outcomes for {} nodes",
            hosts.len(),
            setup.nodes
        )));
    }
    let n_samples = hosts[0].thermo.len();
    if hosts.iter().any(|h| h.thermo.len() != n_samples) {
        return Err(SimError::Setup("hosts recorded different thermo schedules".into()));
    }
    let mut thermo = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let parts: Vec<ThermoPartial> = hosts.iter().map(|h| h.thermo[k]).collect();
        thermo.extend(reduce_thermo(&parts));
    }

    let mut timing = TimingBreakdown::default();
    for h in &hosts {
        let b = h.breakdown();
        timing.t_total = timing.t_total.max(b.t_total);
        timing.t_force += b.t_force;
        timing.t_neigh += b.t_neigh;
        timing.t_comm += b.t_comm;
    }
    let n = hosts.len() as f64;
    timing.t_force /= n;
    timing.t_neigh /= n;
    timing.t_comm /= n;

    let mut final_state: Vec<AtomRecord> = hosts.iter().flat_map(|h| h.final_state.iter().copied()).collect();
    final_state.sort_by_key(|a| a.id);

    Ok(SimulationResult {
        mode: setup.mode,
        nodes: setup.nodes,
        thermo,
        timing,
        final_state,
        host_ledgers: hosts.iter().map(|h| h.ledger.clone()).collect(),
        offload_ledgers: offloads.iter().map(|o| o.ledger.clone()).collect(),
        offload_rounds: offloads.first().map_or(0, |o| o.offload_rounds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for m in [RunMode::Baseline, RunMode::Offpath, RunMode::OffpathSyncDebug] {
            assert_eq!(m.as_str().parse::<RunMode>().unwrap(), m);
        }
        assert_eq!("offpath_sync_debug".parse::<RunMode>().unwrap(), RunMode::OffpathSyncDebug);
        assert!("fast".parse::<RunMode>().is_err());
    }

    #[test]
    fn rank_layout() {
        let s = RunSetup::new(SimParams::default(), RunMode::Offpath, 4);
        assert_eq!(s.n_workers(), 8);
        assert_eq!(s.role_of(2), (Role::Host, 2));
        assert_eq!(s.role_of(6), (Role::Offload, 2));
        assert_eq!(s.offload_rank(3), 7);
    }

    #[test]
    fn root_cause_skips_disconnect_echoes() {
        let echo = SimError::desync(40, Tag::F_RESULT, TransportError::Disconnected { peer: 1, tag: Tag::F_RESULT });
        let root = SimError::Blowup { iteration: 40, what: "energy" };
        assert!(matches!(pick_root_cause(vec![echo, root]), SimError::Blowup { .. }));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(vec![]), 0.0);
    }
}
