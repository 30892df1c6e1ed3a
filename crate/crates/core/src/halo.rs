//! Exchange, border and communicate, plus replay of a recorded exchange on
//! another array.
//!
//! All three routines walk the axes in order x, y, z. Along each axis a node
//! sends a Lower message then an Upper message, and receives first from its
//! upper neighbor (that neighbor's Lower message) then from its lower
//! neighbor. With two nodes on an axis both neighbors are the same peer, and
//! FIFO delivery yields the same order.

use thiserror::Error;

use crate::atoms::AtomStore;
use crate::domain::{Decomposition, Direction};
use crate::transport::{CodecError, Decoder, Encoder, Message, Rank, Tag, Transport, TransportError, WireItem};
use crate::vec3::{Vec3, ZERO};

#[derive(Debug, Error)]
pub enum HaloError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("malformed {tag} payload: {source}")]
    Codec { tag: Tag, source: CodecError },
    #[error("atom {id} at {pos:?} left its subdomain by more than one neighbor along axis {axis}; skin or reneighbor interval is too large")]
    TooFar { id: u64, axis: usize, pos: Vec3 },
    #[error("array length {got} does not match the {expected} slots the plan was recorded on")]
    LengthMismatch { expected: usize, got: usize },
    #[error("plan does not match the received data: {0}")]
    PlanMismatch(String),
}

fn codec(tag: Tag) -> impl Fn(CodecError) -> HaloError {
    move |source| HaloError::Codec { tag, source }
}

/// A transport endpoint together with the rank of every node's peer on it.
///
/// Host workers and offload workers address different ranks for the same
/// node index.
pub struct HaloLink<'a> {
    pub transport: &'a dyn Transport,
    pub ranks: Vec<Rank>,
}

impl<'a> HaloLink<'a> {
    pub fn new(transport: &'a dyn Transport, ranks: Vec<Rank>) -> Self {
        HaloLink { transport, ranks }
    }

    /// Node index `n` maps to rank `n`.
    pub fn identity(transport: &'a dyn Transport, nodes: usize) -> Self {
        HaloLink::new(transport, (0..nodes).collect())
    }

    fn send(&self, node: usize, tag: Tag, payload: Vec<u8>) -> Result<(), HaloError> {
        Ok(self.transport.send(self.ranks[node], Message::new(tag, payload))?)
    }

    fn recv(&self, node: usize, tag: Tag) -> Result<Vec<u8>, HaloError> {
        Ok(self.transport.recv(self.ranks[node], tag)?.payload)
    }
}

fn dir_index(d: Direction) -> usize {
    match d {
        Direction::Lower => 0,
        Direction::Upper => 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Departure {
    /// Slot at the moment of removal; the last owned atom then moves into it.
    pub slot: usize,
    pub dir: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arrival {
    /// Direction the sender shipped these atoms in.
    pub sent_dir: Direction,
    pub source: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangePass {
    pub axis: usize,
    /// Node indices of the lower and upper neighbors; `None` when the axis is not split.
    pub neighbors: Option<[usize; 2]>,
    pub n_before: usize,
    pub departures: Vec<Departure>,
    pub arrivals: Vec<Arrival>,
}

/// Every reordering an exchange applied to the owned arrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangePlan {
    pub passes: Vec<ExchangePass>,
    pub n_before: usize,
    pub n_after: usize,
}

impl ExchangePlan {
    pub fn is_identity(&self) -> bool {
        self.passes
            .iter()
            .all(|p| p.departures.is_empty() && p.arrivals.iter().all(|a| a.count == 0))
    }

    pub fn n_departures(&self) -> usize {
        self.passes.iter().map(|p| p.departures.len()).sum()
    }

    pub fn encode(&self, e: &mut Encoder) {
        e.u64(self.n_before as u64).u64(self.n_after as u64);
        e.u32(self.passes.len() as u32);
        for p in &self.passes {
            e.u32(p.axis as u32);
            match p.neighbors {
                None => {
                    e.u32(0);
                }
                Some([lo, hi]) => {
                    e.u32(1).u64(lo as u64).u64(hi as u64);
                }
            }
            e.u64(p.n_before as u64);
            e.u64(p.departures.len() as u64);
            for d in &p.departures {
                e.u64(d.slot as u64).u32(d.dir.code());
            }
            e.u32(p.arrivals.len() as u32);
            for a in &p.arrivals {
                e.u32(a.sent_dir.code()).u64(a.source as u64).u64(a.count as u64);
            }
        }
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let n_before = d.u64()? as usize;
        let n_after = d.u64()? as usize;
        let n_passes = d.u32()?;
        let dir = |c: u32| Direction::from_code(c).ok_or(CodecError::Invalid("direction code".into()));
        let mut passes = Vec::with_capacity(n_passes.min(3) as usize);
        for _ in 0..n_passes {
            let axis = d.u32()? as usize;
            if axis > 2 {
                return Err(CodecError::Invalid("axis".into()));
            }
            let neighbors = match d.u32()? {
                0 => None,
                1 => Some([d.u64()? as usize, d.u64()? as usize]),
                _ => return Err(CodecError::Invalid("neighbor flag".into())),
            };
            let pass_before = d.u64()? as usize;
            let n_dep = d.u64()? as usize;
            let mut departures = Vec::with_capacity(n_dep.min(1 << 16));
            for _ in 0..n_dep {
                let slot = d.u64()? as usize;
                departures.push(Departure { slot, dir: dir(d.u32()?)? });
            }
            let n_arr = d.u32()?;
            let mut arrivals = Vec::with_capacity(n_arr.min(4) as usize);
            for _ in 0..n_arr {
                let sent_dir = dir(d.u32()?)?;
                let source = d.u64()? as usize;
                let count = d.u64()? as usize;
                arrivals.push(Arrival { sent_dir, source, count });
            }
            passes.push(ExchangePass {
                axis,
                neighbors,
                n_before: pass_before,
                departures,
                arrivals,
            });
        }
        Ok(ExchangePlan {
            passes,
            n_before,
            n_after,
        })
    }
}

/// Receive order along an axis: (peer node, direction the peer sent in).
fn receive_order(lower: usize, upper: usize) -> [(usize, Direction); 2] {
    [(upper, Direction::Lower), (lower, Direction::Upper)]
}

/// Migrates owned atoms that left the subdomain to the owning neighbors.
///
/// Positions must be wrapped into the global box and ghosts cleared.
pub fn exchange(atoms: &mut AtomStore, decomp: &Decomposition, link: &HaloLink<'_>) -> Result<ExchangePlan, HaloError> {
    atoms.clear_ghosts();
    let n_start = atoms.n_local();
    let mut passes = Vec::with_capacity(3);
    for axis in 0..3 {
        let p = decomp.grid[axis];
        let n_before = atoms.n_local();
        if p == 1 {
            passes.push(ExchangePass {
                axis,
                neighbors: None,
                n_before,
                departures: Vec::new(),
                arrivals: Vec::new(),
            });
            continue;
        }
        let me = decomp.coords[axis];
        let up = (me + 1) % p;
        let down = (me + p - 1) % p;
        let mut departures = Vec::new();
        let mut out: [(Vec<Vec3>, Vec<Vec3>, Vec<u64>); 2] = Default::default();
        let mut i = 0;
        while i < atoms.n_local() {
            let c = decomp.axis_coord(axis, atoms.x[i][axis]);
            if c == me {
                i += 1;
                continue;
            }
            let dir = if c == up {
                Direction::Upper
            } else if c == down {
                Direction::Lower
            } else {
                return Err(HaloError::TooFar {
                    id: atoms.id[i],
                    axis,
                    pos: atoms.x[i],
                });
            };
            departures.push(Departure { slot: i, dir });
            let (x, v, id) = atoms.swap_remove_owned(i);
            let buf = &mut out[dir_index(dir)];
            buf.0.push(x);
            buf.1.push(v);
            buf.2.push(id);
        }
        let lower = decomp.neighbor(axis, Direction::Lower);
        let upper = decomp.neighbor(axis, Direction::Upper);
        for dir in Direction::BOTH {
            let (x, v, id) = &out[dir_index(dir)];
            let mut e = Encoder::with_capacity(24 + x.len() * 56);
            e.vec3s(x).vec3s(v).u64s(id);
            let to = if dir == Direction::Lower { lower } else { upper };
            link.send(to, Tag::EXCHANGE, e.finish())?;
        }
        let mut arrivals = Vec::with_capacity(2);
        for (source, sent_dir) in receive_order(lower, upper) {
            let bytes = link.recv(source, Tag::EXCHANGE)?;
            let mut d = Decoder::new(&bytes);
            let err = codec(Tag::EXCHANGE);
            let x = d.vec3s().map_err(&err)?;
            let v = d.vec3s().map_err(&err)?;
            let id = d.u64s().map_err(&err)?;
            d.finish().map_err(&err)?;
            if x.len() != v.len() || x.len() != id.len() {
                return Err(HaloError::PlanMismatch("exchange arrays of unequal length".into()));
            }
            for k in 0..x.len() {
                atoms.push_owned(x[k], v[k], id[k]);
            }
            arrivals.push(Arrival {
                sent_dir,
                source,
                count: x.len(),
            });
        }
        passes.push(ExchangePass {
            axis,
            neighbors: Some([lower, upper]),
            n_before,
            departures,
            arrivals,
        });
    }
    Ok(ExchangePlan {
        passes,
        n_before: n_start,
        n_after: atoms.n_local(),
    })
}

/// Applies a recorded exchange to `values`, migrating entries between the
/// peers on `link` exactly as the recorded exchange migrated atoms.
///
/// Every node of the plan must replay its own plan concurrently.
pub fn replay_exchange<T: WireItem>(
    mut values: Vec<T>,
    plan: &ExchangePlan,
    link: &HaloLink<'_>,
) -> Result<Vec<T>, HaloError> {
    if values.len() != plan.n_before {
        return Err(HaloError::LengthMismatch {
            expected: plan.n_before,
            got: values.len(),
        });
    }
    for pass in &plan.passes {
        if values.len() != pass.n_before {
            return Err(HaloError::LengthMismatch {
                expected: pass.n_before,
                got: values.len(),
            });
        }
        let Some([lower, upper]) = pass.neighbors else {
            if !pass.departures.is_empty() || !pass.arrivals.is_empty() {
                return Err(HaloError::PlanMismatch(format!("axis {} is not split but has traffic", pass.axis)));
            }
            continue;
        };
        let mut out: [Vec<T>; 2] = [Vec::new(), Vec::new()];
        for dep in &pass.departures {
            if dep.slot >= values.len() {
                return Err(HaloError::PlanMismatch(format!(
                    "departure slot {} beyond {} entries",
                    dep.slot,
                    values.len()
                )));
            }
            out[dir_index(dep.dir)].push(values.swap_remove(dep.slot));
        }
        for dir in Direction::BOTH {
            let mut e = Encoder::new();
            T::encode_all(&out[dir_index(dir)], &mut e);
            let to = if dir == Direction::Lower { lower } else { upper };
            link.send(to, Tag::EXCHANGE, e.finish())?;
        }
        let order = receive_order(lower, upper);
        if pass.arrivals.len() != order.len() {
            return Err(HaloError::PlanMismatch("arrival manifest length".into()));
        }
        for (arrival, (source, sent_dir)) in pass.arrivals.iter().zip(order) {
            if arrival.source != source || arrival.sent_dir != sent_dir {
                return Err(HaloError::PlanMismatch(format!(
                    "arrival from node {} ({:?}) recorded, topology expects node {} ({:?})",
                    arrival.source, arrival.sent_dir, source, sent_dir
                )));
            }
            let bytes = link.recv(source, Tag::EXCHANGE)?;
            let mut d = Decoder::new(&bytes);
            let got = T::decode_all(&mut d).map_err(codec(Tag::EXCHANGE))?;
            d.finish().map_err(codec(Tag::EXCHANGE))?;
            if got.len() != arrival.count {
                return Err(HaloError::PlanMismatch(format!(
                    "node {} sent {} entries, plan recorded {}",
                    source,
                    got.len(),
                    arrival.count
                )));
            }
            values.extend(got);
        }
    }
    if values.len() != plan.n_after {
        return Err(HaloError::LengthMismatch {
            expected: plan.n_after,
            got: values.len(),
        });
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swap {
    pub axis: usize,
    pub dir: Direction,
    /// Node the selected atoms are sent to.
    pub to: usize,
    pub send_slots: Vec<usize>,
    /// Added to the sent positions when they cross the periodic boundary.
    pub shift: Vec3,
    /// Node whose ghosts land in `first_ghost..first_ghost + recv_count`.
    pub from: usize,
    pub first_ghost: usize,
    pub recv_count: usize,
}

/// Ghost layout recorded by [`border`] and reused by [`communicate`].
#[derive(Debug, Clone, PartialEq)]
pub struct BorderMap {
    pub n_local: usize,
    pub n_ghost: usize,
    /// Ordered as sent: per axis, Lower then Upper.
    pub swaps: Vec<Swap>,
}

impl BorderMap {
    pub fn encode(&self, e: &mut Encoder) {
        e.u64(self.n_local as u64).u64(self.n_ghost as u64).u32(self.swaps.len() as u32);
        for s in &self.swaps {
            e.u32(s.axis as u32)
                .u32(s.dir.code())
                .u64(s.to as u64)
                .usizes(&s.send_slots)
                .vec3(s.shift)
                .u64(s.from as u64)
                .u64(s.first_ghost as u64)
                .u64(s.recv_count as u64);
        }
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let n_local = d.u64()? as usize;
        let n_ghost = d.u64()? as usize;
        let n = d.u32()?;
        let mut swaps = Vec::with_capacity(n.min(6) as usize);
        for _ in 0..n {
            let axis = d.u32()? as usize;
            if axis > 2 {
                return Err(CodecError::Invalid("axis".into()));
            }
            let dir = Direction::from_code(d.u32()?).ok_or(CodecError::Invalid("direction code".into()))?;
            swaps.push(Swap {
                axis,
                dir,
                to: d.u64()? as usize,
                send_slots: d.usizes()?,
                shift: d.vec3()?,
                from: d.u64()? as usize,
                first_ghost: d.u64()? as usize,
                recv_count: d.u64()? as usize,
            });
        }
        Ok(BorderMap { n_local, n_ghost, swaps })
    }
}

fn shifted(x: Vec3, shift: Vec3) -> Vec3 {
    if shift == ZERO {
        x
    } else {
        [x[0] + shift[0], x[1] + shift[1], x[2] + shift[2]]
    }
}

/// Builds ghost images of every atom within the halo of a face, including
/// periodic images of this node's own atoms.
pub fn border(atoms: &mut AtomStore, decomp: &Decomposition, link: &HaloLink<'_>) -> Result<BorderMap, HaloError> {
    atoms.clear_ghosts();
    let halo = decomp.halo_width;
    let mut swaps = Vec::with_capacity(6);
    for axis in 0..3 {
        let p = decomp.grid[axis];
        let n_axis = atoms.x.len();
        let lo = decomp.lo(axis);
        let hi = decomp.hi(axis);
        let length = decomp.global.lengths[axis];
        let lower = decomp.neighbor(axis, Direction::Lower);
        let upper = decomp.neighbor(axis, Direction::Upper);
        let mut sent = Vec::with_capacity(2);
        for dir in Direction::BOTH {
            let mut shift = ZERO;
            let (send_slots, to): (Vec<usize>, usize) = match dir {
                Direction::Lower => {
                    if decomp.coords[axis] == 0 {
                        shift[axis] = length;
                    }
                    ((0..n_axis).filter(|&i| atoms.x[i][axis] < lo + halo).collect(), lower)
                }
                Direction::Upper => {
                    if decomp.coords[axis] == p - 1 {
                        shift[axis] = -length;
                    }
                    ((0..n_axis).filter(|&i| atoms.x[i][axis] >= hi - halo).collect(), upper)
                }
            };
            let mut e = Encoder::with_capacity(16 + send_slots.len() * 32);
            e.u64(send_slots.len() as u64);
            for &i in &send_slots {
                e.vec3(shifted(atoms.x[i], shift)).u64(atoms.id[i]);
            }
            link.send(to, Tag::BORDER, e.finish())?;
            sent.push((dir, to, send_slots, shift));
        }
        let mut received = [(0usize, 0usize, 0usize); 2];
        for (k, (source, sent_dir)) in receive_order(lower, upper).into_iter().enumerate() {
            let bytes = link.recv(source, Tag::BORDER)?;
            let mut d = Decoder::new(&bytes);
            let err = codec(Tag::BORDER);
            let n = d.u64().map_err(&err)? as usize;
            let first = atoms.x.len();
            for _ in 0..n {
                let x = d.vec3().map_err(&err)?;
                let id = d.u64().map_err(&err)?;
                atoms.push_ghost(x, id);
            }
            d.finish().map_err(&err)?;
            received[dir_index(sent_dir)] = (source, first, n);
            debug_assert_eq!(k, dir_index(sent_dir));
        }
        for (dir, to, send_slots, shift) in sent {
            // ghosts of this swap are the ones the peer shipped in the same direction
            let (from, first_ghost, recv_count) = received[dir_index(dir)];
            swaps.push(Swap {
                axis,
                dir,
                to,
                send_slots,
                shift,
                from,
                first_ghost,
                recv_count,
            });
        }
    }
    Ok(BorderMap {
        n_local: atoms.n_local(),
        n_ghost: atoms.n_ghost(),
        swaps,
    })
}

/// Refreshes every ghost position from its owner's current position.
pub fn communicate(atoms: &mut AtomStore, map: &BorderMap, link: &HaloLink<'_>) -> Result<(), HaloError> {
    if atoms.n_local() != map.n_local || atoms.x.len() != map.n_local + map.n_ghost {
        return Err(HaloError::LengthMismatch {
            expected: map.n_local + map.n_ghost,
            got: atoms.x.len(),
        });
    }
    for pair in map.swaps.chunks(2) {
        for s in pair {
            let mut e = Encoder::with_capacity(8 + s.send_slots.len() * 24);
            e.u64(s.send_slots.len() as u64);
            for &i in &s.send_slots {
                e.vec3(shifted(atoms.x[i], s.shift));
            }
            link.send(s.to, Tag::COMMUNICATE, e.finish())?;
        }
        // the upper neighbor's Lower message arrives first, matching swap order
        for s in pair {
            let bytes = link.recv(s.from, Tag::COMMUNICATE)?;
            let mut d = Decoder::new(&bytes);
            let err = codec(Tag::COMMUNICATE);
            let n = d.u64().map_err(&err)? as usize;
            if n != s.recv_count {
                return Err(HaloError::PlanMismatch(format!(
                    "node {} refreshed {} ghosts, border recorded {}",
                    s.from, n, s.recv_count
                )));
            }
            for k in 0..n {
                atoms.x[s.first_ghost + k] = d.vec3().map_err(&err)?;
            }
            d.finish().map_err(&err)?;
        }
    }
    Ok(())
}

/// Wire form of a sort permutation.
pub fn encode_permutation(perm: &crate::neighbor::PermutationRecord, e: &mut Encoder) {
    e.usizes(&perm.perm);
}

pub fn decode_permutation(d: &mut Decoder<'_>) -> Result<crate::neighbor::PermutationRecord, HaloError> {
    let perm = d.usizes().map_err(codec(Tag::PERMUTATION))?;
    crate::neighbor::PermutationRecord::new(perm).map_err(|e| HaloError::PlanMismatch(e.to_string()))
}
