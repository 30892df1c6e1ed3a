//! TCP transport. Each ordered worker pair uses its own connection: the
//! sender dials the receiver's listener and announces its rank, and a reader
//! thread on the receiving side decodes frames into that peer's inbox.

use std::io::{BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::Mutex;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Sender};

use super::mailbox::{Frame, Mailbox};
use super::{Message, Rank, Tag, Transport, TransportError, MAX_FRAME};

/// A bound listener whose address can be shared before the mesh is connected.
pub struct SocketListener {
    listener: TcpListener,
}

impl SocketListener {
    pub fn bind(addr: SocketAddr) -> std::io::Result<Self> {
        Ok(SocketListener {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }
}

pub struct SocketEndpoint {
    rank: Rank,
    writers: Vec<Option<Mutex<TcpStream>>>,
    self_tx: Sender<Frame>,
    mailbox: Mailbox,
    timeout: Option<Duration>,
    readers: Vec<JoinHandle<()>>,
}

fn read_frame<R: Read>(r: &mut R) -> std::io::Result<Frame> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head)?;
    let tag = u32::from_le_bytes(head[..4].try_into().unwrap());
    let len = u32::from_le_bytes(head[4..].try_into().unwrap()) as usize;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok((tag, payload))
}

fn reader_loop(stream: TcpStream, tx: Sender<Frame>) {
    let mut r = BufReader::with_capacity(1 << 16, stream);
    // EOF or a broken stream ends the loop; dropping `tx` tells the
    // mailbox the peer is gone.
    while let Ok(frame) = read_frame(&mut r) {
        if tx.send(frame).is_err() {
            break;
        }
    }
}

impl SocketEndpoint {
    /// Connects rank `rank` to every other address in `peers` and waits until
    /// all peers have connected back, or `connect_timeout` elapses.
    pub fn establish(
        rank: Rank,
        listener: SocketListener,
        peers: &[SocketAddr],
        connect_timeout: Duration,
    ) -> Result<Self, TransportError> {
        let n = peers.len();
        if rank >= n {
            return Err(TransportError::InvalidPeer { peer: rank, size: n });
        }
        let mut txs = Vec::with_capacity(n);
        let mut rxs = Vec::with_capacity(n);
        for _ in 0..n {
            let (tx, rx) = unbounded();
            txs.push(tx);
            rxs.push(rx);
        }
        let self_tx = txs[rank].clone();

        let deadline = Instant::now() + connect_timeout;
        let accept_txs = txs.clone();
        let acceptor = thread::spawn(move || -> Result<Vec<JoinHandle<()>>, TransportError> {
            let l = listener.listener;
            l.set_nonblocking(true)?;
            let mut readers = Vec::new();
            let mut seen = vec![false; n];
            while readers.len() < n - 1 {
                match l.accept() {
                    Ok((mut s, _)) => {
                        s.set_nonblocking(false)?;
                        s.set_nodelay(true)?;
                        let mut who = [0u8; 4];
                        s.read_exact(&mut who)?;
                        let peer = u32::from_le_bytes(who) as usize;
                        if peer >= n || peer == rank || seen[peer] {
                            return Err(TransportError::InvalidPeer { peer, size: n });
                        }
                        seen[peer] = true;
                        let tx = accept_txs[peer].clone();
                        readers.push(thread::spawn(move || reader_loop(s, tx)));
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        if Instant::now() > deadline {
                            return Err(TransportError::Io(std::io::Error::new(
                                std::io::ErrorKind::TimedOut,
                                format!("rank {rank}: only {} of {} peers connected", readers.len(), n - 1),
                            )));
                        }
                        thread::sleep(Duration::from_millis(2));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(readers)
        });
        drop(txs);

        let mut writers: Vec<Option<Mutex<TcpStream>>> = (0..n).map(|_| None).collect();
        for (peer, addr) in peers.iter().enumerate() {
            if peer == rank {
                continue;
            }
            let stream = loop {
                match TcpStream::connect_timeout(addr, Duration::from_millis(500)) {
                    Ok(s) => break s,
                    Err(e) => {
                        if Instant::now() > deadline {
                            return Err(e.into());
                        }
                        thread::sleep(Duration::from_millis(10));
                    }
                }
            };
            stream.set_nodelay(true)?;
            (&stream).write_all(&(rank as u32).to_le_bytes())?;
            writers[peer] = Some(Mutex::new(stream));
        }

        let readers = acceptor
            .join()
            .map_err(|_| TransportError::Io(std::io::Error::other("acceptor thread panicked")))??;
        Ok(SocketEndpoint {
            rank,
            writers,
            self_tx,
            mailbox: Mailbox::new(rxs),
            timeout: None,
            readers,
        })
    }

    pub fn set_recv_timeout(&mut self, timeout: Option<Duration>) {
        self.timeout = timeout;
    }
}

impl Drop for SocketEndpoint {
    fn drop(&mut self) {
        for w in self.writers.iter().flatten() {
            if let Ok(s) = w.lock() {
                let _ = s.shutdown(std::net::Shutdown::Write);
            }
        }
        // readers exit when the peers close their side
        self.readers.clear();
    }
}

impl Transport for SocketEndpoint {
    fn rank(&self) -> Rank {
        self.rank
    }

    fn size(&self) -> usize {
        self.writers.len()
    }

    fn send(&self, peer: Rank, msg: Message) -> Result<(), TransportError> {
        if msg.payload.len() > MAX_FRAME {
            return Err(TransportError::Oversize(msg.payload.len()));
        }
        if peer >= self.writers.len() {
            return Err(TransportError::InvalidPeer {
                peer,
                size: self.writers.len(),
            });
        }
        if peer == self.rank {
            return self
                .self_tx
                .send((msg.tag.0, msg.payload))
                .map_err(|_| TransportError::PeerUnreachable { peer, tag: msg.tag });
        }
        let writer = self.writers[peer].as_ref().expect("connected to every peer");
        let mut frame = Vec::with_capacity(8 + msg.payload.len());
        frame.extend_from_slice(&msg.tag.0.to_le_bytes());
        frame.extend_from_slice(&(msg.payload.len() as u32).to_le_bytes());
        frame.extend_from_slice(&msg.payload);
        let mut s = writer.lock().expect("socket writer poisoned");
        s.write_all(&frame)
            .map_err(|_| TransportError::PeerUnreachable { peer, tag: msg.tag })
    }

    fn recv(&self, peer: Rank, tag: Tag) -> Result<Message, TransportError> {
        self.mailbox.recv(peer, tag, self.timeout)
    }

    fn probe(&self, peer: Rank, tag: Tag) -> Result<bool, TransportError> {
        self.mailbox.probe(peer, tag)
    }
}
