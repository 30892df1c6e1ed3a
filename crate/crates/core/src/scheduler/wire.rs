//! Payload layouts of the host/offload protocol messages.

use crate::halo::{BorderMap, ExchangePlan};
use crate::neighbor::NeighborList;
use crate::transport::{CodecError, Decoder, Encoder};
use crate::vec3::Vec3;

pub(crate) const SHUTDOWN: u64 = u64::MAX;

pub(crate) fn control(code: u64) -> Vec<u8> {
    let mut e = Encoder::with_capacity(8);
    e.u64(code);
    e.finish()
}

pub(crate) fn decode_control(b: &[u8]) -> Result<u64, CodecError> {
    let mut d = Decoder::new(b);
    let c = d.u64()?;
    d.finish()?;
    Ok(c)
}

/// Owned positions and their global ids.
pub(crate) fn snapshot(x: &[Vec3], ids: &[u64]) -> Vec<u8> {
    let mut e = Encoder::with_capacity(16 + x.len() * 32);
    e.vec3s(x).u64s(ids);
    e.finish()
}

pub(crate) fn decode_snapshot(b: &[u8]) -> Result<(Vec<Vec3>, Vec<u64>), CodecError> {
    let mut d = Decoder::new(b);
    let x = d.vec3s()?;
    let ids = d.u64s()?;
    d.finish()?;
    if x.len() != ids.len() {
        return Err(CodecError::Invalid("snapshot position/id count mismatch".into()));
    }
    Ok((x, ids))
}

pub(crate) fn forces(f: &[Vec3], pe: f64, ids: &[u64]) -> Vec<u8> {
    let mut e = Encoder::with_capacity(24 + f.len() * 32);
    e.vec3s(f).f64(pe).u64s(ids);
    e.finish()
}

pub(crate) fn decode_forces(b: &[u8]) -> Result<(Vec<Vec3>, f64, Vec<u64>), CodecError> {
    let mut d = Decoder::new(b);
    let f = d.vec3s()?;
    let pe = d.f64()?;
    let ids = d.u64s()?;
    d.finish()?;
    Ok((f, pe, ids))
}

pub(crate) fn plan(p: &ExchangePlan) -> Vec<u8> {
    let mut e = Encoder::new();
    p.encode(&mut e);
    e.finish()
}

pub(crate) fn decode_plan(b: &[u8]) -> Result<ExchangePlan, CodecError> {
    let mut d = Decoder::new(b);
    let p = ExchangePlan::decode(&mut d)?;
    d.finish()?;
    Ok(p)
}

pub(crate) fn nlist(list: &NeighborList, map: &BorderMap) -> Vec<u8> {
    let mut e = Encoder::with_capacity(64 + list.n_pairs() * 4 + list.n_atoms() * 8);
    e.u64(list.build_iteration as u64)
        .usizes(list.offsets())
        .u32s(list.flat());
    map.encode(&mut e);
    e.finish()
}

pub(crate) fn decode_nlist(b: &[u8]) -> Result<(NeighborList, BorderMap), CodecError> {
    let mut d = Decoder::new(b);
    let built = d.u64()? as usize;
    let offsets = d.usizes()?;
    let neighbors = d.u32s()?;
    let map = BorderMap::decode(&mut d)?;
    d.finish()?;
    let ok = !offsets.is_empty()
        && offsets[0] == 0
        && offsets.windows(2).all(|w| w[0] <= w[1])
        && *offsets.last().unwrap() == neighbors.len()
        && offsets.len() == map.n_local + 1
        && neighbors.iter().all(|&j| (j as usize) < map.n_local + map.n_ghost);
    if !ok {
        return Err(CodecError::Invalid("neighbor list inconsistent with its border map".into()));
    }
    Ok((NeighborList::from_parts(offsets, neighbors, built), map))
}
