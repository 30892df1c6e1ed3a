//! Per-iteration record of which neighbor-list version fed the forces and
//! when each routine ran.

use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Routine {
    InitialIntegrate,
    Pbc,
    Exchange,
    Sort,
    Border,
    NeighborBuild,
    Communicate,
    Force,
    /// Packing and sending offload protocol messages.
    OffloadSend,
    /// Blocked on the peer worker of the same node.
    OffloadWait,
    /// Offload side: migrating and permuting F.
    Reorder,
    FinalIntegrate,
    Thermo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Force,
    Neigh,
    Comm,
    Other,
}

impl Routine {
    pub fn category(self) -> Category {
        match self {
            Routine::Force => Category::Force,
            Routine::Sort | Routine::NeighborBuild => Category::Neigh,
            Routine::Pbc
            | Routine::Exchange
            | Routine::Border
            | Routine::Communicate
            | Routine::OffloadSend
            | Routine::Reorder => Category::Comm,
            Routine::InitialIntegrate | Routine::FinalIntegrate | Routine::Thermo | Routine::OffloadWait => {
                Category::Other
            }
        }
    }
}

/// Seconds since the worker started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub routine: Routine,
    pub start: f64,
    pub end: f64,
}

impl Stamp {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub rebuild: bool,
    /// Version of the list the forces of this iteration used; versions count
    /// builds, the setup build being 0.
    pub list_version: Option<usize>,
    pub stamps: Vec<Stamp>,
}

impl IterationRecord {
    pub fn time_in(&self, routine: Routine) -> f64 {
        self.stamps.iter().filter(|s| s.routine == routine).map(Stamp::duration).sum()
    }

    pub fn time_in_category(&self, cat: Category) -> f64 {
        self.stamps
            .iter()
            .filter(|s| s.routine.category() == cat)
            .map(Stamp::duration)
            .sum()
    }

    pub fn ran(&self, routine: Routine) -> bool {
        self.stamps.iter().any(|s| s.routine == routine)
    }
}

pub(crate) struct Recorder {
    t0: Instant,
    records: Vec<IterationRecord>,
}

impl Recorder {
    pub(crate) fn new() -> Self {
        Recorder {
            t0: Instant::now(),
            records: Vec::new(),
        }
    }

    pub(crate) fn begin(&mut self, iteration: usize, rebuild: bool) {
        self.records.push(IterationRecord {
            iteration,
            rebuild,
            list_version: None,
            stamps: Vec::with_capacity(8),
        });
    }

    pub(crate) fn set_version(&mut self, version: usize) {
        if let Some(r) = self.records.last_mut() {
            r.list_version = Some(version);
        }
    }

    pub(crate) fn time<R>(&mut self, routine: Routine, f: impl FnOnce() -> R) -> R {
        let start = self.t0.elapsed().as_secs_f64();
        let out = f();
        let end = self.t0.elapsed().as_secs_f64();
        if let Some(r) = self.records.last_mut() {
            r.stamps.push(Stamp { routine, start, end });
        }
        out
    }

    pub(crate) fn finish(self) -> Vec<IterationRecord> {
        self.records
    }
}
