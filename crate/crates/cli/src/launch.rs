//! Multi-process runs over the socket transport: one child process per worker rank.

use std::fs;
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use offpath_md::scheduler::{collect, run_worker, RunSetup, SimError, SimulationResult, WorkerReport};
use offpath_md::transport::{SocketEndpoint, SocketListener};

pub const CONNECT_TIMEOUT: Duration = Duration::from_secs(30);

static RUNS: AtomicUsize = AtomicUsize::new(0);

fn free_local_addrs(n: usize) -> std::io::Result<Vec<SocketAddr>> {
    let held: Vec<TcpListener> = (0..n)
        .map(|_| TcpListener::bind("127.0.0.1:0"))
        .collect::<Result<_, _>>()?;
    held.iter().map(|l| l.local_addr()).collect()
}

fn setup_err(what: &str, e: impl std::fmt::Display) -> SimError {
    SimError::Setup(format!("{what}: {e}"))
}

/// Runs `setup` with every worker in its own process, connected over TCP.
pub fn socket_run(setup: &RunSetup, peers: &[SocketAddr], workdir: &Path) -> Result<SimulationResult, SimError> {
    setup.validate()?;
    let n = setup.n_workers();
    let addrs = if peers.len() >= n {
        peers[..n].to_vec()
    } else {
        free_local_addrs(n).map_err(|e| setup_err("reserving local ports", e))?
    };
    fs::create_dir_all(workdir).map_err(|e| setup_err("creating work directory", e))?;
    let tag = format!("{}-{}", std::process::id(), RUNS.fetch_add(1, Ordering::Relaxed));
    let setup_path = workdir.join(format!("setup-{tag}.json"));
    fs::write(&setup_path, serde_json::to_vec(setup).expect("setup serializes"))
        .map_err(|e| setup_err("writing setup", e))?;
    let exe = std::env::current_exe().map_err(|e| setup_err("locating executable", e))?;
    let peer_list = addrs.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",");

    let mut children = Vec::with_capacity(n);
    for rank in 0..n {
        let report = workdir.join(format!("report-{tag}-{rank}.json"));
        let child = Command::new(&exe)
            .arg("worker")
            .arg("--setup")
            .arg(&setup_path)
            .arg("--rank")
            .arg(rank.to_string())
            .arg("--peers")
            .arg(&peer_list)
            .arg("--report")
            .arg(&report)
            .spawn()
            .map_err(|e| setup_err("spawning worker", e))?;
        children.push((rank, child, report));
    }
    let mut results = Vec::with_capacity(n);
    for (rank, mut child, report) in children {
        let status = child.wait().map_err(|e| setup_err("waiting for worker", e))?;
        let parsed: Option<WorkerReport> = fs::read(&report)
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok());
        let _ = fs::remove_file(&report);
        results.push(match parsed {
            Some(r) => r.into_result(rank),
            None => Err(SimError::Worker {
                rank,
                message: format!("exited with {status} without a report"),
                exit_code: status.code().unwrap_or(1),
                consequence: false,
            }),
        });
    }
    let _ = fs::remove_file(&setup_path);
    collect(setup, results)
}

/// Body of the hidden `worker` subcommand.
pub fn worker_main(setup_path: &Path, rank: usize, peers: &[SocketAddr], report: &PathBuf) -> i32 {
    let result = (|| {
        let bytes = fs::read(setup_path).map_err(|e| setup_err("reading setup", e))?;
        let setup: RunSetup = serde_json::from_slice(&bytes).map_err(|e| setup_err("parsing setup", e))?;
        let addr = *peers
            .get(rank)
            .ok_or_else(|| SimError::Setup(format!("no address for rank {rank}")))?;
        let listener = SocketListener::bind(addr).map_err(|e| setup_err("binding", e))?;
        let mut ep = SocketEndpoint::establish(rank, listener, peers, CONNECT_TIMEOUT)
            .map_err(|e| setup_err("connecting", e))?;
        ep.set_recv_timeout(setup.recv_timeout);
        run_worker(&setup, rank, &ep)
    })();
    let code = match &result {
        Ok(_) => 0,
        Err(e) => e.exit_code(),
    };
    let r = WorkerReport::from_result(result);
    if let Err(e) = fs::write(report, serde_json::to_vec(&r).expect("report serializes")) {
        eprintln!("worker {rank}: cannot write report: {e}");
        return 1;
    }
    code
}
