mod common;

use std::time::{Duration, Instant};

use common::mesh::{round_trip, socket_mesh, stress, USER_A};
use offpath_md::transport::{local_mesh, Message, Throttle, Transport, TransportError};

#[test]
fn local_round_trip_1kib() {
    round_trip(&local_mesh(2));
}

#[test]
fn socket_round_trip_1kib() {
    round_trip(&socket_mesh(2));
}

#[test]
fn local_stress_16_workers() {
    stress(&local_mesh(16), 200);
}

#[test]
fn socket_stress_16_workers() {
    let t = Instant::now();
    stress(&socket_mesh(16), 200);
    assert!(t.elapsed() < Duration::from_secs(60));
}

#[test]
fn large_socket_frame() {
    let m = socket_mesh(2);
    let big: Vec<u8> = (0..3_000_000u32).map(|i| (i % 253) as u8).collect();
    m[0].send(1, Message::new(USER_A, big.clone())).unwrap();
    assert_eq!(m[1].recv(0, USER_A).unwrap().payload, big);
}

#[test]
fn local_dropped_peer_is_reported() {
    let mut mesh = local_mesh(2);
    let gone = mesh.pop().unwrap();
    gone.send(0, Message::new(USER_A, vec![1])).unwrap();
    drop(gone);
    // the message sent before the drop is still delivered
    assert_eq!(mesh[0].recv(1, USER_A).unwrap().payload, vec![1]);
    match mesh[0].recv(1, USER_A) {
        Err(TransportError::Disconnected { peer: 1, tag }) => assert_eq!(tag, USER_A),
        other => panic!("expected disconnect, got {other:?}"),
    }
    assert!(mesh[0].send(1, Message::new(USER_A, vec![])).is_err());
}

#[test]
fn socket_dropped_peer_is_reported() {
    let mut mesh = socket_mesh(2);
    let gone = mesh.pop().unwrap();
    gone.send(0, Message::new(USER_A, vec![2; 10])).unwrap();
    drop(gone);
    assert_eq!(mesh[0].recv(1, USER_A).unwrap().payload, vec![2; 10]);
    assert!(matches!(
        mesh[0].recv(1, USER_A),
        Err(TransportError::Disconnected { peer: 1, .. })
    ));
}

#[test]
fn receive_timeout() {
    let mut mesh = local_mesh(2);
    mesh[0].set_recv_timeout(Some(Duration::from_millis(30)));
    assert!(matches!(mesh[0].recv(1, USER_A), Err(TransportError::Timeout { .. })));
}

#[test]
fn invalid_peer() {
    let mesh = local_mesh(2);
    assert!(matches!(
        mesh[0].send(5, Message::new(USER_A, vec![])),
        Err(TransportError::InvalidPeer { peer: 5, size: 2 })
    ));
}

#[test]
fn throttle_doubles_kernel_time() {
    let kernel = || {
        let t = Instant::now();
        let mut acc = 0u64;
        while t.elapsed() < Duration::from_millis(40) {
            acc = acc.wrapping_add(1);
        }
        acc
    };
    let th = Throttle::new(2.0).unwrap();
    let mut ratios = Vec::new();
    for _ in 0..5 {
        let t0 = Instant::now();
        kernel();
        let plain = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        th.run(kernel);
        ratios.push(t1.elapsed().as_secs_f64() / plain);
    }
    ratios.sort_by(f64::total_cmp);
    let median = ratios[2];
    assert!((median - 2.0).abs() <= 0.4, "ratio {median}");
}
