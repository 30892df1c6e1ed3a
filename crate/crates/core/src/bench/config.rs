//! Run configuration as `key=value` settings.
//!
//! The same keys are accepted from config files, the environment and
//! command-line flags; later sources override earlier ones.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::params::SimParams;
use crate::scheduler::{RunMode, RunSetup};
use crate::transport::Throttle;

pub const OUT_DIR_ENV: &str = "MDBENCH_OUT_DIR";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown setting {0:?}")]
    UnknownKey(String),
    #[error("{key}: cannot use {value:?}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Which modes a `run` executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelection {
    Single(RunMode),
    /// Baseline followed by off-path, with a comparison summary.
    Both,
}

impl FromStr for ModeSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "both" {
            Ok(ModeSelection::Both)
        } else {
            s.parse().map(ModeSelection::Single)
        }
    }
}

impl ModeSelection {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeSelection::Single(m) => m.as_str(),
            ModeSelection::Both => "both",
        }
    }

    pub fn modes(self) -> Vec<RunMode> {
        match self {
            ModeSelection::Single(m) => vec![m],
            ModeSelection::Both => vec![RunMode::Baseline, RunMode::Offpath],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Local,
    Socket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SimParams,
    pub mode: ModeSelection,
    pub nodes: usize,
    pub grid: Option<[usize; 3]>,
    pub host_threads: usize,
    pub offload_threads: usize,
    pub throttle: f64,
    pub transport: TransportKind,
    /// One address per worker rank, for the socket transport. Empty picks free local ports.
    pub peers: Vec<SocketAddr>,
    pub out_dir: PathBuf,
    pub sweep_cells: Vec<usize>,
    pub sweep_reneigh: Vec<usize>,
    pub sweep_skin: Vec<f64>,
    /// Seconds a worker waits for any single message; 0 waits forever.
    pub timeout: f64,
    /// TDR pass threshold on |dT|.
    pub delta: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: SimParams {
                unit_cells: [10, 10, 10],
                ..SimParams::default()
            },
            mode: ModeSelection::Single(RunMode::Baseline),
            nodes: 2,
            grid: None,
            host_threads: 1,
            offload_threads: 1,
            throttle: 2.0,
            transport: TransportKind::Local,
            peers: Vec::new(),
            out_dir: PathBuf::from("mdbench-out"),
            sweep_cells: Vec::new(),
            sweep_reneigh: Vec::new(),
            sweep_skin: Vec::new(),
            timeout: 0.0,
            delta: DEFAULT_DELTA,
        }
    }
}

/// Seed-to-seed spread of the reference temperature: largest |dT| over five
/// seeds, from `mdbench report --calibrate-delta --iters 1000` on the default
/// 4,000-atom, two-node system (0.0361).
pub const DEFAULT_DELTA: f64 = 0.036;

fn bad(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| bad(key, value, e))
}

/// `N` or `AxBxC`.
fn triple(key: &str, value: &str) -> Result<[usize; 3], ConfigError> {
    let parts: Vec<&str> = value.split('x').collect();
    match parts.as_slice() {
        [n] => {
            let n = num(key, n)?;
            Ok([n; 3])
        }
        [a, b, c] => Ok([num(key, a)?, num(key, b)?, num(key, c)?]),
        _ => Err(bad(key, value, "expected N or AxBxC")),
    }
}

fn show_triple(t: [usize; 3]) -> String {
    format!("{}x{}x{}", t[0], t[1], t[2])
}

/// Comma-separated items; integer items may be inclusive ranges `a..b`.
pub fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>, ConfigError> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b): (usize, usize) = (num(key, a)?, num(key, b)?);
            if a > b {
                return Err(bad(key, item, "empty range"));
            }
            out.extend(a..=b);
        } else {
            out.push(num(key, item)?);
        }
    }
    Ok(out)
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: k + 1,
            text: raw.to_string(),
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let p = &mut self.params;
        match key {
            "epsilon" => p.epsilon = num(key, value)?,
            "sigma" => p.sigma = num(key, value)?,
            "mass" => p.mass = num(key, value)?,
            "r_cut" => p.r_cut = num(key, value)?,
            "skin" => p.skin = num(key, value)?,
            "dt" => p.dt = num(key, value)?,
            "reneigh" => p.reneigh_interval = num(key, value)?,
            "sort" => p.sort_interval = num(key, value)?,
            "iters" => p.n_iterations = num(key, value)?,
            "cells" => p.unit_cells = triple(key, value)?,
            "density" => p.density = num(key, value)?,
            "temp" => p.t_init = num(key, value)?,
            "seed" => p.rng_seed = num(key, value)?,
            "thermo" => p.thermo_interval = num(key, value)?,
            "mode" => self.mode = value.parse().map_err(|e: String| bad(key, value, e))?,
            "nodes" => self.nodes = num(key, value)?,
            "grid" => {
                self.grid = if value == "auto" {
                    None
                } else {
                    Some(triple(key, value)?)
                }
            }
            "host_threads" => self.host_threads = num(key, value)?,
            "offload_threads" => self.offload_threads = num(key, value)?,
            "throttle" => self.throttle = num(key, value)?,
            "transport" => {
                self.transport = match value {
                    "local" => TransportKind::Local,
                    "socket" => TransportKind::Socket,
                    _ => return Err(bad(key, value, "expected local or socket")),
                }
            }
            "peers" => {
                self.peers = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_, _>>()?
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "sweep_cells" => self.sweep_cells = parse_usize_list(key, value)?,
            "sweep_reneigh" => self.sweep_reneigh = parse_usize_list(key, value)?,
            "sweep_skin" => self.sweep_skin = parse_f64_list(key, value)?,
            "timeout" => self.timeout = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn apply(&mut self, settings: &[(String, String)]) -> Result<(), ConfigError> {
        settings.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    /// Applies environment overrides read through `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(dir) = lookup(OUT_DIR_ENV) {
            self.out_dir = PathBuf::from(dir);
        }
    }

    /// Every setting, in a fixed order; `from_kv(to_kv())` reproduces the config.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let mut kv: Vec<(&str, String)> = vec![
            ("epsilon", p.epsilon.to_string()),
            ("sigma", p.sigma.to_string()),
            ("mass", p.mass.to_string()),
            ("r_cut", p.r_cut.to_string()),
            ("skin", p.skin.to_string()),
            ("dt", p.dt.to_string()),
            ("reneigh", p.reneigh_interval.to_string()),
            ("sort", p.sort_interval.to_string()),
            ("iters", p.n_iterations.to_string()),
            ("cells", show_triple(p.unit_cells)),
            ("density", p.density.to_string()),
            ("temp", p.t_init.to_string()),
            ("seed", p.rng_seed.to_string()),
            ("thermo", p.thermo_interval.to_string()),
            ("mode", self.mode.as_str().to_string()),
            ("nodes", self.nodes.to_string()),
            ("grid", self.grid.map_or("auto".to_string(), show_triple)),
            ("host_threads", self.host_threads.to_string()),
            ("offload_threads", self.offload_threads.to_string()),
            ("throttle", self.throttle.to_string()),
            (
                "transport",
                match self.transport {
                    TransportKind::Local => "local",
                    TransportKind::Socket => "socket",
                }
                .to_string(),
            ),
            ("peers", join(&self.peers)),
            ("out_dir", self.out_dir.display().to_string()),
            ("sweep_cells", join(&self.sweep_cells)),
            ("sweep_reneigh", join(&self.sweep_reneigh)),
            ("sweep_skin", join(&self.sweep_skin)),
            ("timeout", self.timeout.to_string()),
            ("delta", self.delta.to_string()),
        ];
        kv.drain(..).map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn from_kv(settings: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        c.apply(settings)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.throttle.is_finite() && self.throttle >= 1.0) {
            return Err(ConfigError::Invalid(format!("throttle must be >= 1, got {}", self.throttle)));
        }
        if !(self.timeout.is_finite() && self.timeout >= 0.0) {
            return Err(ConfigError::Invalid(format!("timeout must be >= 0, got {}", self.timeout)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(ConfigError::Invalid(format!("delta must be >= 0, got {}", self.delta)));
        }
        if self.sweep_reneigh.contains(&0) {
            return Err(ConfigError::Invalid("sweep_reneigh entries must be >= 1".into()));
        }
        if self.transport == TransportKind::Socket && !self.peers.is_empty() {
            let want = self.modes_max_workers();
            if self.peers.len() != want {
                return Err(ConfigError::Invalid(format!(
                    "{} peer addresses for {} workers",
                    self.peers.len(),
                    want
                )));
            }
        }
        for mode in self.mode.modes() {
            self.setup(mode)
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    fn modes_max_workers(&self) -> usize {
        self.mode
            .modes()
            .into_iter()
            .map(|m| self.setup(m).n_workers())
            .max()
            .unwrap_or(0)
    }

    /// Scheduler setup for one mode; the throttle applies to offload workers.
    pub fn setup(&self, mode: RunMode) -> RunSetup {
        let mut s = RunSetup::new(self.params.clone(), mode, self.nodes);
        s.grid = self.grid;
        s.host_threads = self.host_threads;
        s.offload_threads = self.offload_threads;
        s.offload_throttle = Throttle::new(self.throttle).unwrap_or_default();
        s.recv_timeout = (self.timeout > 0.0).then(|| Duration::from_secs_f64(self.timeout));
        s
    }
}
