//! In-process transport: one unbounded channel per ordered worker pair.

use std::time::Duration;

use crossbeam_channel::{unbounded, Sender};

use super::mailbox::{Frame, Mailbox};
use super::{Message, Rank, Tag, Transport, TransportError, MAX_FRAME};

pub struct LocalEndpoint {
    rank: Rank,
    senders: Vec<Sender<Frame>>,
    mailbox: Mailbox,
    timeout: Option<Duration>,
}

/// Fully connected endpoints for `n` workers, including self-loops.
///
/// Dropping an endpoint disconnects it: peers waiting on it get
/// [`TransportError::Disconnected`] and sends to it fail.
pub fn local_mesh(n: usize) -> Vec<LocalEndpoint> {
    // channels[src][dst]
    let mut txs: Vec<Vec<Sender<Frame>>> = vec![Vec::with_capacity(n); n];
    let mut rxs: Vec<Vec<_>> = (0..n).map(|_| Vec::with_capacity(n)).collect();
    for tx_row in txs.iter_mut() {
        for rx_row in rxs.iter_mut() {
            let (tx, rx) = unbounded();
            tx_row.push(tx);
            rx_row.push(rx);
        }
    }
    txs.into_iter()
        .zip(rxs)
        .enumerate()
        .map(|(rank, (senders, receivers))| LocalEndpoint {
            rank,
            senders,
            mailbox: Mailbox::new(receivers),
            timeout: None,
        })
        .collect()
}

impl LocalEndpoint {
    pub fn set_recv_timeout(&mut self, timeout: Option<Duration>) {
        self.timeout = timeout;
    }
}

impl Transport for LocalEndpoint {
    fn rank(&self) -> Rank {
        self.rank
    }

    fn size(&self) -> usize {
        self.senders.len()
    }

    fn send(&self, peer: Rank, msg: Message) -> Result<(), TransportError> {
        if msg.payload.len() > MAX_FRAME {
            return Err(TransportError::Oversize(msg.payload.len()));
        }
        let tx = self.senders.get(peer).ok_or(TransportError::InvalidPeer {
            peer,
            size: self.senders.len(),
        })?;
        tx.send((msg.tag.0, msg.payload))
            .map_err(|_| TransportError::PeerUnreachable { peer, tag: msg.tag })
    }

    fn recv(&self, peer: Rank, tag: Tag) -> Result<Message, TransportError> {
        self.mailbox.recv(peer, tag, self.timeout)
    }

    fn probe(&self, peer: Rank, tag: Tag) -> Result<bool, TransportError> {
        self.mailbox.probe(peer, tag)
    }
}
