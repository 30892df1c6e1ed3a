//! Reliable FIFO point-to-point messaging between workers.
//!
//! Two implementations share one interface: [`local::local_mesh`] connects
//! threads of one process through channels, [`socket::SocketEndpoint`]
//! connects processes over TCP. Frames on the wire are a 4-byte tag, a
//! 4-byte payload length (both little-endian) and the payload.

pub mod codec;
pub mod local;
mod mailbox;
pub mod socket;
pub mod throttle;

use std::fmt;
use std::time::Duration;

use thiserror::Error;

pub use codec::{CodecError, Decoder, Encoder, WireItem};
pub use local::{local_mesh, LocalEndpoint};
pub use socket::{SocketEndpoint, SocketListener};
pub use throttle::Throttle;

pub type Rank = usize;

/// Message namespace; receives match on `(peer, tag)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tag(pub u32);

impl Tag {
    pub const EXCHANGE: Tag = Tag(1);
    pub const BORDER: Tag = Tag(2);
    pub const COMMUNICATE: Tag = Tag(3);
    pub const X_SNAPSHOT: Tag = Tag(4);
    pub const PLAN: Tag = Tag(5);
    pub const PERMUTATION: Tag = Tag(6);
    pub const F_RESULT: Tag = Tag(7);
    pub const NLIST: Tag = Tag(8);
    pub const CONTROL: Tag = Tag(9);

    pub fn name(self) -> &'static str {
        match self {
            Tag::EXCHANGE => "exchange",
            Tag::BORDER => "border",
            Tag::COMMUNICATE => "communicate",
            Tag::X_SNAPSHOT => "x-snapshot",
            Tag::PLAN => "plan",
            Tag::PERMUTATION => "permutation",
            Tag::F_RESULT => "f-result",
            Tag::NLIST => "nlist",
            Tag::CONTROL => "control",
            _ => "user",
        }
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.0)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub tag: Tag,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn new(tag: Tag, payload: Vec<u8>) -> Self {
        Message { tag, payload }
    }

    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("peer {peer} is unreachable (sending {tag})")]
    PeerUnreachable { peer: Rank, tag: Tag },
    #[error("peer {peer} disconnected while {tag} was expected")]
    Disconnected { peer: Rank, tag: Tag },
    #[error("timed out after {waited:?} waiting for {tag} from peer {peer}")]
    Timeout { peer: Rank, tag: Tag, waited: Duration },
    #[error("peer {peer} is not in a mesh of {size} workers")]
    InvalidPeer { peer: Rank, size: usize },
    #[error("payload of {0} bytes exceeds the frame limit")]
    Oversize(usize),
    #[error("socket transport: {0}")]
    Io(#[from] std::io::Error),
}

impl TransportError {
    /// Tag of the operation that failed, when known.
    pub fn tag(&self) -> Option<Tag> {
        match self {
            TransportError::PeerUnreachable { tag, .. }
            | TransportError::Disconnected { tag, .. }
            | TransportError::Timeout { tag, .. } => Some(*tag),
            _ => None,
        }
    }
}

/// One worker's endpoint. Sends are buffered and do not wait for the
/// receiver; receives block until a message with the requested tag arrives
/// from the requested peer. Messages between an ordered pair of workers are
/// delivered in send order.
pub trait Transport: Send + Sync {
    fn rank(&self) -> Rank;
    fn size(&self) -> usize;
    fn send(&self, peer: Rank, msg: Message) -> Result<(), TransportError>;
    fn recv(&self, peer: Rank, tag: Tag) -> Result<Message, TransportError>;
    /// True if a message with `tag` from `peer` can be received without blocking.
    fn probe(&self, peer: Rank, tag: Tag) -> Result<bool, TransportError>;
}

pub(crate) const MAX_FRAME: usize = u32::MAX as usize;
