use std::time::Instant;

use super::ledger::{Recorder, Routine};
use super::{wire, RunMode, RunSetup, SimError, WorkerOutcome, Role};
use crate::atoms::AtomStore;
use crate::domain::wrap_periodic;
use crate::dynamics::force_compute;
use crate::halo::{communicate, decode_permutation, replay_exchange, BorderMap, ExchangePlan, HaloLink};
use crate::neighbor::{apply_permutation, NeighborList, PermutationRecord};
use crate::transport::{Decoder, Message, Tag, Transport};
use crate::vec3::Vec3;

/// Serves force rounds for one host until it sends the shutdown word.
pub(super) fn run(setup: &RunSetup, node: usize, transport: &dyn Transport) -> Result<WorkerOutcome, SimError> {
    let p = &setup.params;
    let global = setup.global_box();
    let host = setup.host_rank(node);
    let link = HaloLink::new(transport, (0..setup.nodes).map(|n| setup.offload_rank(n)).collect());
    let recv = |it: usize, tag: Tag| -> Result<Vec<u8>, SimError> {
        transport
            .recv(host, tag)
            .map(|m| m.payload)
            .map_err(|e| SimError::desync(it, tag, e))
    };
    let send = |it: usize, tag: Tag, payload: Vec<u8>| -> Result<(), SimError> {
        transport
            .send(host, Message::new(tag, payload))
            .map_err(|e| SimError::desync(it, tag, e))
    };
    let nlist = |it: usize| -> Result<(NeighborList, BorderMap), SimError> {
        wire::decode_nlist(&recv(it, Tag::NLIST)?).map_err(|e| SimError::malformed(it, Tag::NLIST, e))
    };

    let force = |rec: &mut Recorder, atoms: &mut AtomStore, list: &NeighborList, it: usize| {
        rec.time(Routine::Force, || setup.offload_throttle.run(|| force_compute(atoms, list, p)))
            .map_err(|source| SimError::Force { iteration: it, source })
    };

    let mut rec = Recorder::new();
    let mut current = None;
    let mut version = 0;
    if setup.mode == RunMode::Offpath {
        rec.begin(0, true);
        current = Some(rec.time(Routine::OffloadWait, || nlist(0))?);
    }
    let mut atoms = AtomStore::new();
    let mut rounds = 0;
    let mut last = 0;
    let t_start = Instant::now();
    loop {
        let code = wire::decode_control(&recv(last, Tag::CONTROL)?)
            .map_err(|e| SimError::malformed(last, Tag::CONTROL, e))?;
        if code == wire::SHUTDOWN {
            break;
        }
        let it = code as usize;
        last = it;
        rec.begin(it, true);
        let (x, ids) = rec
            .time(Routine::OffloadWait, || recv(it, Tag::X_SNAPSHOT))
            .and_then(|b| wire::decode_snapshot(&b).map_err(|e| SimError::malformed(it, Tag::X_SNAPSHOT, e)))?;
        let halo = |source| SimError::Halo { iteration: it, source };
        let reorderings = || -> Result<(ExchangePlan, PermutationRecord), SimError> {
            let plan = wire::decode_plan(&recv(it, Tag::PLAN)?).map_err(|e| SimError::malformed(it, Tag::PLAN, e))?;
            let bytes = recv(it, Tag::PERMUTATION)?;
            let perm = decode_permutation(&mut Decoder::new(&bytes))
                .map_err(|e| SimError::malformed(it, Tag::PERMUTATION, e))?;
            Ok((plan, perm))
        };
        let reorder = |rec: &mut Recorder, values: Vec<(Vec3, u64)>, plan: &ExchangePlan, perm: &PermutationRecord| {
            let moved = rec
                .time(Routine::Reorder, || replay_exchange(values, plan, &link))
                .map_err(halo)?;
            apply_permutation(&moved, perm).map_err(|e| SimError::malformed(it, Tag::PERMUTATION, e))
        };

        if setup.mode == RunMode::Offpath {
            // forces with the list of the previous rebuild, on the pre-exchange slot order
            let (list, map) = current.take().ok_or_else(|| SimError::Desync {
                iteration: it,
                tag: Tag::NLIST,
                detail: "round started without a neighbor list".into(),
                disconnected: false,
            })?;
            check_count(it, Tag::X_SNAPSHOT, x.len(), &map)?;
            atoms.set_positions(x, ids, map.n_ghost);
            rec.time(Routine::Communicate, || communicate(&mut atoms, &map, &link))
                .map_err(halo)?;
            rec.set_version(version);
            let pe = force(&mut rec, &mut atoms, &list, it)?;
            let (plan, perm) = rec.time(Routine::OffloadWait, reorderings)?;
            let n = atoms.n_local();
            let tagged: Vec<(Vec3, u64)> = atoms.f.iter().copied().zip(atoms.id[..n].iter().copied()).collect();
            let (f, ids): (Vec<Vec3>, Vec<u64>) = reorder(&mut rec, tagged, &plan, &perm)?.into_iter().unzip();
            rec.time(Routine::OffloadSend, || send(it, Tag::F_RESULT, wire::forces(&f, pe, &ids)))?;
            current = Some(rec.time(Routine::OffloadWait, || nlist(it))?);
            version += 1;
        } else {
            // replay the host's reorderings on X and use the new list
            let (plan, perm, (list, map)) = rec.time(Routine::OffloadWait, || -> Result<_, SimError> {
                let (plan, perm) = reorderings()?;
                Ok((plan, perm, nlist(it)?))
            })?;
            let tagged: Vec<(Vec3, u64)> = x.into_iter().map(|xi| wrap_periodic(xi, &global)).zip(ids).collect();
            let (x, ids): (Vec<Vec3>, Vec<u64>) = reorder(&mut rec, tagged, &plan, &perm)?.into_iter().unzip();
            check_count(it, Tag::NLIST, x.len(), &map)?;
            atoms.set_positions(x, ids, map.n_ghost);
            rec.time(Routine::Communicate, || communicate(&mut atoms, &map, &link))
                .map_err(halo)?;
            version += 1;
            rec.set_version(version);
            let pe = force(&mut rec, &mut atoms, &list, it)?;
            let n = atoms.n_local();
            rec.time(Routine::OffloadSend, || send(it, Tag::F_RESULT, wire::forces(&atoms.f, pe, &atoms.id[..n])))?;
        }
        rounds += 1;
    }
    Ok(WorkerOutcome {
        rank: transport.rank(),
        node,
        role: Role::Offload,
        thermo: Vec::new(),
        ledger: rec.finish(),
        final_state: Vec::new(),
        offload_rounds: rounds,
        t_loop: t_start.elapsed().as_secs_f64(),
    })
}

fn check_count(iteration: usize, tag: Tag, got: usize, map: &BorderMap) -> Result<(), SimError> {
    if got == map.n_local {
        return Ok(());
    }
    Err(SimError::Desync {
        iteration,
        tag,
        detail: format!("{got} positions for a list built over {} atoms", map.n_local),
        disconnected: false,
    })
}
