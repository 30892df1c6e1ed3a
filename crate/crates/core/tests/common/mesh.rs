use std::net::SocketAddr;
use std::time::Duration;

use offpath_md::transport::{Message, SocketEndpoint, SocketListener, Tag, Transport};

/// Socket endpoints for `n` workers on loopback, connected in parallel.
pub fn socket_mesh(n: usize) -> Vec<SocketEndpoint> {
    let listeners: Vec<SocketListener> = (0..n)
        .map(|_| SocketListener::bind("127.0.0.1:0".parse().unwrap()).unwrap())
        .collect();
    let addrs: Vec<SocketAddr> = listeners.iter().map(|l| l.local_addr().unwrap()).collect();
    std::thread::scope(|s| {
        let hs: Vec<_> = listeners
            .into_iter()
            .enumerate()
            .map(|(rank, l)| {
                let addrs = &addrs;
                s.spawn(move || SocketEndpoint::establish(rank, l, addrs, Duration::from_secs(20)).unwrap())
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

pub const USER_A: Tag = Tag(100);
pub const USER_B: Tag = Tag(101);

fn payload(from: usize, to: usize, seq: u32, len: usize) -> Vec<u8> {
    let mut p = Vec::with_capacity(len.max(12));
    p.extend_from_slice(&(from as u32).to_le_bytes());
    p.extend_from_slice(&(to as u32).to_le_bytes());
    p.extend_from_slice(&seq.to_le_bytes());
    let mut k = seq.wrapping_mul(2654435761) ^ from as u32;
    while p.len() < len {
        k = k.wrapping_mul(1664525).wrapping_add(1013904223);
        p.push((k >> 24) as u8);
    }
    p
}

/// Every worker sends `per_peer` messages on two tags to every worker
/// (itself included), then receives them, checking order and content.
pub fn stress<T: Transport>(endpoints: &[T], per_peer: u32) {
    let n = endpoints.len();
    std::thread::scope(|s| {
        for t in endpoints {
            s.spawn(move || {
                let me = t.rank();
                for seq in 0..per_peer {
                    for peer in 0..n {
                        let tag = if seq % 3 == 0 { USER_B } else { USER_A };
                        let len = 12 + ((seq as usize * 37 + peer * 11) % 300);
                        t.send(peer, Message::new(tag, payload(me, peer, seq, len))).unwrap();
                    }
                }
                // tags drained in opposite orders so demultiplexing is exercised
                for peer in (0..n).rev() {
                    for tag in [USER_B, USER_A] {
                        for seq in (0..per_peer).filter(|s| (s % 3 == 0) == (tag == USER_B)) {
                            let m = t.recv(peer, tag).unwrap();
                            let len = 12 + ((seq as usize * 37 + me * 11) % 300);
                            assert_eq!(m.tag, tag);
                            assert_eq!(m.payload, payload(peer, me, seq, len), "{peer} -> {me} seq {seq}");
                        }
                    }
                    assert!(!t.probe(peer, USER_A).unwrap());
                }
            });
        }
    });
}

pub fn round_trip<T: Transport>(endpoints: &[T]) {
    let kib: Vec<u8> = (0..1024u32).map(|i| (i * 7 % 251) as u8).collect();
    std::thread::scope(|s| {
        let (a, b) = (&endpoints[0], &endpoints[1]);
        s.spawn(|| {
            let m = b.recv(0, USER_A).unwrap();
            b.send(0, Message::new(USER_B, m.payload)).unwrap();
        });
        a.send(1, Message::new(USER_A, kib.clone())).unwrap();
        let back = a.recv(1, USER_B).unwrap();
        assert_eq!(back.payload, kib);
    });
    endpoints[0].send(0, Message::new(USER_A, Vec::new())).unwrap();
    assert!(endpoints[0].probe(0, USER_A).unwrap());
    assert!(endpoints[0].recv(0, USER_A).unwrap().is_empty());
}

