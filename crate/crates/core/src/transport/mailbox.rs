//! Per-peer inbound queues with tag demultiplexing.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError, TryRecvError};

use super::{Message, Rank, Tag, TransportError};

pub(crate) type Frame = (u32, Vec<u8>);

struct Inbox {
    rx: Receiver<Frame>,
    /// Frames that arrived while a different tag was being waited for.
    pending: HashMap<u32, VecDeque<Vec<u8>>>,
}

pub(crate) struct Mailbox {
    inboxes: Vec<Mutex<Inbox>>,
}

impl Mailbox {
    pub(crate) fn new(receivers: Vec<Receiver<Frame>>) -> Self {
        Mailbox {
            inboxes: receivers
                .into_iter()
                .map(|rx| {
                    Mutex::new(Inbox {
                        rx,
                        pending: HashMap::new(),
                    })
                })
                .collect(),
        }
    }

    fn inbox(&self, peer: Rank) -> Result<&Mutex<Inbox>, TransportError> {
        self.inboxes.get(peer).ok_or(TransportError::InvalidPeer {
            peer,
            size: self.inboxes.len(),
        })
    }

    pub(crate) fn recv(&self, peer: Rank, tag: Tag, timeout: Option<Duration>) -> Result<Message, TransportError> {
        let mut inbox = self.inbox(peer)?.lock().expect("mailbox poisoned");
        if let Some(p) = inbox.pending.get_mut(&tag.0).and_then(|q| q.pop_front()) {
            return Ok(Message::new(tag, p));
        }
        let deadline = timeout.map(|t| Instant::now() + t);
        loop {
            let frame = match deadline {
                None => inbox.rx.recv().map_err(|_| TransportError::Disconnected { peer, tag }),
                Some(d) => inbox.rx.recv_deadline(d).map_err(|e| match e {
                    RecvTimeoutError::Timeout => TransportError::Timeout {
                        peer,
                        tag,
                        waited: timeout.unwrap_or_default(),
                    },
                    RecvTimeoutError::Disconnected => TransportError::Disconnected { peer, tag },
                }),
            }?;
            if frame.0 == tag.0 {
                return Ok(Message::new(tag, frame.1));
            }
            inbox.pending.entry(frame.0).or_default().push_back(frame.1);
        }
    }

    pub(crate) fn probe(&self, peer: Rank, tag: Tag) -> Result<bool, TransportError> {
        let mut inbox = self.inbox(peer)?.lock().expect("mailbox poisoned");
        loop {
            match inbox.rx.try_recv() {
                Ok((t, payload)) => inbox.pending.entry(t).or_default().push_back(payload),
                Err(TryRecvError::Empty) | Err(TryRecvError::Disconnected) => break,
            }
        }
        Ok(inbox.pending.get(&tag.0).is_some_and(|q| !q.is_empty()))
    }
}
