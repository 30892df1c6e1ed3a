use std::sync::Arc;
use std::thread::ScopedJoinHandle;
use std::time::Instant;

use super::ledger::{Recorder, Routine};
use super::{wire, RunMode, RunSetup, SimError, WorkerOutcome, Role};
use crate::analysis::ThermoPartial;
use crate::atoms::AtomStore;
use crate::domain::{wrap_periodic, Decomposition};
use crate::dynamics::{final_integrate, force_compute, initial_integrate};
use crate::halo::{border, communicate, encode_permutation, exchange, BorderMap, ExchangePlan, HaloError, HaloLink};
use crate::lattice::create_lattice;
use crate::neighbor::{neighbor_build, sort_atoms, NeighborList, PermutationRecord};
use crate::transport::{Encoder, Message, Rank, Tag, Transport};

fn halo(iteration: usize) -> impl Fn(HaloError) -> SimError {
    move |source| SimError::Halo { iteration, source }
}

struct Rebuilt {
    plan: ExchangePlan,
    perm: PermutationRecord,
    map: BorderMap,
    list: NeighborList,
}

/// Wrap, exchange, optional sort, border and neighbor build.
fn rebuild(
    rec: &mut Recorder,
    atoms: &mut AtomStore,
    decomp: &Decomposition,
    link: &HaloLink<'_>,
    setup: &RunSetup,
    iteration: usize,
) -> Result<Rebuilt, SimError> {
    let p = &setup.params;
    rec.time(Routine::Pbc, || {
        atoms.clear_ghosts();
        for x in atoms.x.iter_mut() {
            *x = wrap_periodic(*x, &decomp.global);
        }
    });
    let plan = rec
        .time(Routine::Exchange, || exchange(atoms, decomp, link))
        .map_err(halo(iteration))?;
    let perm = if p.is_sort(iteration) {
        rec.time(Routine::Sort, || sort_atoms(atoms, decomp))
    } else {
        PermutationRecord::identity(atoms.n_local())
    };
    let map = rec
        .time(Routine::Border, || border(atoms, decomp, link))
        .map_err(halo(iteration))?;
    let list = rec
        .time(Routine::NeighborBuild, || neighbor_build(atoms, p, decomp, iteration))
        .map_err(|source| SimError::Neighbor { iteration, source })?;
    Ok(Rebuilt { plan, perm, map, list })
}

fn force(
    rec: &mut Recorder,
    atoms: &mut AtomStore,
    list: &NeighborList,
    setup: &RunSetup,
    iteration: usize,
) -> Result<f64, SimError> {
    rec.time(Routine::Force, || {
        setup.host_throttle.run(|| force_compute(atoms, list, &setup.params))
    })
    .map_err(|source| SimError::Force { iteration, source })
}

fn sample(atoms: &AtomStore, mass: f64, iteration: usize, pe: f64) -> Result<ThermoPartial, SimError> {
    let (mv2, momentum) = atoms.kinetic_sums(mass);
    if !mv2.is_finite() {
        return Err(SimError::Blowup { iteration, what: "kinetic energy" });
    }
    if !pe.is_finite() {
        return Err(SimError::Blowup { iteration, what: "potential energy" });
    }
    Ok(ThermoPartial {
        iteration,
        mv2,
        pe,
        momentum,
        n_local: atoms.n_local(),
    })
}

struct Offload<'a> {
    transport: &'a dyn Transport,
    rank: Rank,
}

impl Offload<'_> {
    fn send(&self, iteration: usize, tag: Tag, payload: Vec<u8>) -> Result<(), SimError> {
        self.transport
            .send(self.rank, Message::new(tag, payload))
            .map_err(|e| SimError::desync(iteration, tag, e))
    }

    fn recv(&self, iteration: usize, tag: Tag) -> Result<Vec<u8>, SimError> {
        self.transport
            .recv(self.rank, tag)
            .map(|m| m.payload)
            .map_err(|e| SimError::desync(iteration, tag, e))
    }

    /// Starts a round: the control word, then positions and ids as they stand after initial integration.
    fn start_round(&self, iteration: usize, atoms: &AtomStore) -> Result<(), SimError> {
        self.send(iteration, Tag::CONTROL, wire::control(iteration as u64))?;
        let n = atoms.n_local();
        self.send(iteration, Tag::X_SNAPSHOT, wire::snapshot(&atoms.x[..n], &atoms.id[..n]))
    }

    fn send_reorderings(&self, iteration: usize, r: &Rebuilt) -> Result<(), SimError> {
        self.send(iteration, Tag::PLAN, wire::plan(&r.plan))?;
        let mut e = Encoder::with_capacity(8 + 8 * r.perm.len());
        encode_permutation(&r.perm, &mut e);
        self.send(iteration, Tag::PERMUTATION, e.finish())
    }

    /// Installs the offload worker's forces after checking every slot holds the expected atom.
    fn take_forces(&self, iteration: usize, atoms: &mut AtomStore) -> Result<f64, SimError> {
        let bytes = self.recv(iteration, Tag::F_RESULT)?;
        let (f, pe, ids) = wire::decode_forces(&bytes).map_err(|e| SimError::malformed(iteration, Tag::F_RESULT, e))?;
        let n = atoms.n_local();
        if f.len() != n || ids.len() != n {
            return Err(SimError::Desync {
                iteration,
                tag: Tag::F_RESULT,
                detail: format!("{} forces for {} owned atoms", f.len(), n),
                disconnected: false,
            });
        }
        if let Some(slot) = (0..n).find(|&i| ids[i] != atoms.id[i]) {
            return Err(SimError::IndexMismatch {
                iteration,
                slot,
                expected: atoms.id[slot],
                got: ids[slot],
            });
        }
        atoms.f = f;
        Ok(pe)
    }
}

pub(super) fn run(setup: &RunSetup, node: usize, transport: &dyn Transport) -> Result<WorkerOutcome, SimError> {
    let p = &setup.params;
    let mode = setup.mode;
    let decomp = setup.decomposition(node)?;
    let link = HaloLink::new(transport, (0..setup.nodes).map(|n| setup.host_rank(n)).collect());
    let offload = Offload {
        transport,
        rank: setup.offload_rank(node),
    };
    let mut atoms = create_lattice(p, &decomp)?;
    let mut rec = Recorder::new();
    let mut thermo = Vec::new();
    let mut rounds = 0;
    let due = |it: usize| it % p.thermo_interval == 0;

    std::thread::scope(|scope| {
        rec.begin(0, true);
        let mut map = rec
            .time(Routine::Border, || border(&mut atoms, &decomp, &link))
            .map_err(halo(0))?;
        let first = rec
            .time(Routine::NeighborBuild, || neighbor_build(&atoms, p, &decomp, 0))
            .map_err(|source| SimError::Neighbor { iteration: 0, source })?;
        let mut list = Arc::new(first);
        let mut version = 0;
        rec.set_version(version);
        let mut pe = force(&mut rec, &mut atoms, &list, setup, 0)?;
        thermo.push(rec.time(Routine::Thermo, || sample(&atoms, p.mass, 0, pe))?);
        if mode == RunMode::Offpath {
            rec.time(Routine::OffloadSend, || offload.send(0, Tag::NLIST, wire::nlist(&list, &map)))?;
        }

        let mut pending: Option<ScopedJoinHandle<'_, Result<(), SimError>>> = None;
        let t_start = Instant::now();
        for it in 1..=p.n_iterations {
            let rebuilding = p.is_rebuild(it);
            rec.begin(it, rebuilding);
            rec.time(Routine::InitialIntegrate, || initial_integrate(&mut atoms, p));
            let mut ship_list = false;
            if !rebuilding {
                rec.time(Routine::Communicate, || communicate(&mut atoms, &map, &link))
                    .map_err(halo(it))?;
                rec.set_version(version);
                pe = force(&mut rec, &mut atoms, &list, setup, it)?;
            } else {
                match mode {
                    RunMode::Baseline => {
                        let r = rebuild(&mut rec, &mut atoms, &decomp, &link, setup, it)?;
                        map = r.map;
                        list = Arc::new(r.list);
                        version += 1;
                        rec.set_version(version);
                        pe = force(&mut rec, &mut atoms, &list, setup, it)?;
                    }
                    RunMode::Offpath => {
                        if let Some(h) = pending.take() {
                            h.join().map_err(|_| SimError::Panicked(transport.rank()))??;
                        }
                        rec.time(Routine::OffloadSend, || offload.start_round(it, &atoms))?;
                        let r = rebuild(&mut rec, &mut atoms, &decomp, &link, setup, it)?;
                        rec.time(Routine::OffloadSend, || offload.send_reorderings(it, &r))?;
                        pe = rec.time(Routine::OffloadWait, || offload.take_forces(it, &mut atoms))?;
                        // forces came from the previous list; the new one applies from the next iteration
                        rec.set_version(version);
                        version += 1;
                        map = r.map;
                        list = Arc::new(r.list);
                        rounds += 1;
                        ship_list = true;
                    }
                    RunMode::OffpathSyncDebug => {
                        rec.time(Routine::OffloadSend, || offload.start_round(it, &atoms))?;
                        let r = rebuild(&mut rec, &mut atoms, &decomp, &link, setup, it)?;
                        rec.time(Routine::OffloadSend, || {
                            offload.send_reorderings(it, &r)?;
                            offload.send(it, Tag::NLIST, wire::nlist(&r.list, &r.map))
                        })?;
                        pe = rec.time(Routine::OffloadWait, || offload.take_forces(it, &mut atoms))?;
                        version += 1;
                        rec.set_version(version);
                        map = r.map;
                        list = Arc::new(r.list);
                        rounds += 1;
                    }
                }
            }
            rec.time(Routine::FinalIntegrate, || final_integrate(&mut atoms, p));
            if ship_list {
                let l = Arc::clone(&list);
                let m = map.clone();
                let off = Offload {
                    transport,
                    rank: offload.rank,
                };
                pending = Some(scope.spawn(move || off.send(it, Tag::NLIST, wire::nlist(&l, &m))));
            }
            if due(it) {
                thermo.push(rec.time(Routine::Thermo, || sample(&atoms, p.mass, it, pe))?);
            }
        }
        let t_loop = t_start.elapsed().as_secs_f64();
        if let Some(h) = pending.take() {
            h.join().map_err(|_| SimError::Panicked(transport.rank()))??;
        }
        if mode.uses_offload() {
            offload.send(p.n_iterations, Tag::CONTROL, wire::control(wire::SHUTDOWN))?;
        }
        Ok(WorkerOutcome {
            rank: transport.rank(),
            node,
            role: Role::Host,
            thermo: std::mem::take(&mut thermo),
            ledger: std::mem::replace(&mut rec, Recorder::new()).finish(),
            final_state: atoms.records(),
            offload_rounds: rounds,
            t_loop,
        })
    })
}
