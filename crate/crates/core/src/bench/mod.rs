//! Benchmark harness: configuration, experiment drivers and CSV reports.

pub mod config;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analysis::{
    compute_tdr, estimate_offpath_time, improvement, max_comm_offload_improvement, ModelError, PerfMeasurement,
    TdrError, TdrReport,
};
use crate::scheduler::{RunMode, RunSetup, SimError, SimulationResult};
use crate::transport::Throttle;

pub use config::{parse_kv, ConfigError, ModeSelection, RunConfig, TransportKind, OUT_DIR_ENV};
pub use table::{Table, TableError};

/// Fewest iterations `measure_for_model` accepts.
pub const MIN_MODEL_ITERATIONS: usize = 50;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tdr(#[from] TdrError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{got} iterations give unstable per-call medians; use at least {min}")]
    TooFewIterations { got: usize, min: usize },
}

/// Executes one scheduler setup; lets callers choose the transport.
pub type Runner<'a> = &'a dyn Fn(&RunSetup) -> Result<SimulationResult, SimError>;

pub fn local_runner() -> impl Fn(&RunSetup) -> Result<SimulationResult, SimError> {
    crate::scheduler::simulate
}

/// Baseline and off-path runs of one configuration.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub baseline: SimulationResult,
    pub offpath: SimulationResult,
    /// Fraction of the baseline time saved.
    pub improvement: f64,
    /// Percent bound from offloading all communication of the baseline.
    pub max_comm_offload: f64,
}

pub fn compare(cfg: &RunConfig, run: Runner<'_>) -> Result<Comparison, BenchError> {
    let baseline = run(&cfg.setup(RunMode::Baseline))?;
    let offpath = run(&cfg.setup(RunMode::Offpath))?;
    Ok(Comparison {
        improvement: improvement(baseline.timing.t_total, offpath.timing.t_total),
        max_comm_offload: max_comm_offload_improvement(&baseline.timing),
        baseline,
        offpath,
    })
}

/// Per-call routine times of the original algorithm, once on the hosts and
/// once on emulated offload workers: a baseline run with `offload_threads`
/// threads per worker and every force evaluation throttled.
pub fn measure_for_model(cfg: &RunConfig, run: Runner<'_>) -> Result<PerfMeasurement, BenchError> {
    let iters = cfg.params.n_iterations;
    if iters < MIN_MODEL_ITERATIONS {
        return Err(BenchError::TooFewIterations {
            got: iters,
            min: MIN_MODEL_ITERATIONS,
        });
    }
    let host = run(&cfg.setup(RunMode::Baseline))?;
    let mut off = cfg.setup(RunMode::Baseline);
    off.host_threads = cfg.offload_threads;
    off.host_throttle = Throttle::new(cfg.throttle).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let offload = run(&off)?;
    Ok(PerfMeasurement {
        nodes: cfg.nodes,
        host_threads: cfg.host_threads,
        offload_threads: cfg.offload_threads,
        host: host.rebuild_costs(),
        offload: offload.rebuild_costs(),
        t_total: host.timing.t_total,
    })
}

/// Modeled off-path runtime for `cfg` from a fresh measurement.
pub fn predict(cfg: &RunConfig, run: Runner<'_>) -> Result<(PerfMeasurement, f64), BenchError> {
    let m = measure_for_model(cfg, run)?;
    let t = estimate_offpath_time(&m, cfg.params.n_iterations, cfg.params.reneigh_interval)?;
    Ok((m, t))
}

pub fn tdr_against(test: &SimulationResult, reference: &SimulationResult, delta: f64) -> Result<TdrReport, TdrError> {
    compute_tdr(&test.temperature_series(), &reference.temperature_series(), delta)
}

pub fn sweep_columns() -> [&'static str; 13] {
    [
        "atoms",
        "reneigh",
        "skin",
        "baseline_total",
        "baseline_force",
        "baseline_neigh",
        "baseline_comm",
        "offpath_total",
        "improvement",
        "max_comm_offload_pct",
        "alpha_baseline",
        "alpha_offpath",
        "tdr_pass",
    ]
}

/// Baseline against off-path over every combination of the sweep axes.
///
/// Empty axes fall back to the single configured value. TDR uses a
/// baseline run at interval 1 with the same size and skin as reference.
pub fn sweep(cfg: &RunConfig, run: Runner<'_>, mut on_row: impl FnMut(&[String])) -> Result<Table, BenchError> {
    let cells: Vec<[usize; 3]> = if cfg.sweep_cells.is_empty() {
        vec![cfg.params.unit_cells]
    } else {
        cfg.sweep_cells.iter().map(|&c| [c; 3]).collect()
    };
    let intervals = if cfg.sweep_reneigh.is_empty() {
        vec![cfg.params.reneigh_interval]
    } else {
        cfg.sweep_reneigh.clone()
    };
    let skins = if cfg.sweep_skin.is_empty() {
        vec![cfg.params.skin]
    } else {
        cfg.sweep_skin.clone()
    };
    let mut table = Table::new(cfg.to_kv(), &sweep_columns());
    for &c in &cells {
        for &skin in &skins {
            let mut base = cfg.clone();
            base.params.unit_cells = c;
            base.params.skin = skin;
            base.validate()?;
            let mut ref_cfg = base.clone();
            ref_cfg.params.reneigh_interval = 1;
            let reference = run(&ref_cfg.setup(RunMode::Baseline))?;
            for &n in &intervals {
                let mut point = base.clone();
                point.params.reneigh_interval = n;
                let cmp = compare(&point, run)?;
                let tb = tdr_against(&cmp.baseline, &reference, cfg.delta)?;
                let to = tdr_against(&cmp.offpath, &reference, cfg.delta)?;
                let b = cmp.baseline.timing;
                let row = vec![
                    point.params.n_atoms().to_string(),
                    n.to_string(),
                    skin.to_string(),
                    b.t_total.to_string(),
                    b.t_force.to_string(),
                    b.t_neigh.to_string(),
                    b.t_comm.to_string(),
                    cmp.offpath.timing.t_total.to_string(),
                    cmp.improvement.to_string(),
                    cmp.max_comm_offload.to_string(),
                    tb.alpha.to_string(),
                    to.alpha.to_string(),
                    to.pass.to_string(),
                ];
                on_row(&row);
                table.push(row);
            }
        }
    }
    Ok(table)
}

pub fn write_table(path: &Path, table: &Table) -> Result<(), BenchError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| BenchError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, table.to_bytes()).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_table(path: &Path) -> Result<Table, BenchError> {
    let bytes = fs::read(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Table::read(&bytes[..])?)
}
