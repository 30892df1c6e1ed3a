//! One PASS/FAIL line per acceptance criterion.
//!
//! Timing criteria need real parallel hardware: a node pair runs `h + b`
//! threads at once. When the machine has fewer cores than a criterion's
//! configurations need, its line is still printed with the measured numbers
//! but marked not enforced, and it does not fail the target.

mod common;

use std::time::Instant;

use common::mesh::{round_trip, socket_mesh, stress};
use common::*;
use offpath_md::analysis::{compute_tdr, estimate_offpath_time, improvement, max_comm_offload_improvement, peak_ratio};
use offpath_md::bench::{measure_for_model, RunConfig};
use offpath_md::params::SimParams;
use offpath_md::scheduler::{simulate, RunMode, RunSetup, SimulationResult};
use offpath_md::transport::local_mesh;

struct Outcome {
    pass: bool,
    detail: String,
    /// Cores the criterion's configurations need to be meaningful.
    cores_needed: usize,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome {
        pass,
        detail,
        cores_needed: 1,
    }
}

fn run(p: &SimParams, mode: RunMode, nodes: usize) -> SimulationResult {
    simulate(&RunSetup::new(p.clone(), mode, nodes)).expect("simulation")
}

fn bitwise_equal(a: &SimulationResult, b: &SimulationResult) -> bool {
    a.final_state == b.final_state
        && a.thermo.len() == b.thermo.len()
        && a.thermo.iter().zip(&b.thermo).all(|(x, y)| {
            x.temperature.to_bits() == y.temperature.to_bits()
                && x.pe.to_bits() == y.pe.to_bits()
                && x.total.to_bits() == y.total.to_bits()
        })
}

fn neighbor_oracle() -> Outcome {
    let mut bad = Vec::new();
    for (cells, nodes) in [(3, 1), (5, 1), (5, 2), (10, 1), (10, 2)] {
        let p = params(cells);
        let m = neighbor_mismatches(&p, &jittered(&p, 0.1, cells as u64), nodes);
        if m > 0 {
            bad.push(format!("N={} P={nodes}: {m} atoms differ", p.n_atoms()));
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "N in {108, 500, 4000} exact".into() } else { bad.join("; ") })
}

fn force_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for (cells, nodes) in [(3, 1), (5, 1), (5, 2)] {
        let p = params(cells);
        let (f, e) = force_error(&p, &jittered(&p, 0.1, 40 + cells as u64), nodes);
        worst = worst.max(f).max(e);
    }
    outcome(worst <= 1e-12, format!("worst relative error {worst:.2e} (N <= 500)"))
}

fn sync_debug_equivalence() -> Outcome {
    let mut bad = Vec::new();
    for nodes in [1, 2, 4] {
        for interval in [1, 5, 20] {
            let p = SimParams {
                reneigh_interval: interval,
                n_iterations: 200,
                ..params(10)
            };
            if !bitwise_equal(&run(&p, RunMode::Baseline, nodes), &run(&p, RunMode::OffpathSyncDebug, nodes)) {
                bad.push(format!("P={nodes} n={interval}"));
            }
        }
    }
    let detail = if bad.is_empty() { "9 configurations bitwise identical".into() } else { format!("differ: {}", bad.join(", ")) };
    outcome(bad.is_empty(), detail)
}

fn conservation() -> Outcome {
    let p = SimParams {
        n_iterations: 1000,
        thermo_interval: 50,
        ..params(10)
    };
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for mode in [RunMode::Baseline, RunMode::Offpath, RunMode::OffpathSyncDebug] {
        let (count_ok, dp) = conservation_error(&run(&p, mode, 2), p.n_atoms());
        ok &= count_ok;
        worst = worst.max(dp);
    }
    let coarse = SimParams {
        reneigh_interval: 1,
        n_iterations: 400,
        thermo_interval: 10,
        ..params(6)
    };
    let fine = SimParams {
        dt: coarse.dt / 10.0,
        n_iterations: 4000,
        thermo_interval: 100,
        ..coarse.clone()
    };
    let dc = energy_drift(&run(&coarse, RunMode::Baseline, 1).thermo);
    let df = energy_drift(&run(&fine, RunMode::Baseline, 1).thermo);
    outcome(
        ok && worst <= 1e-10 && dc <= 10.0 * df,
        format!("counts {}, max momentum change {worst:.1e}, drift/atom dt {dc:.3e} vs dt/10 {df:.3e}", if ok { "kept" } else { "CHANGED" }),
    )
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn accuracy() -> Outcome {
    let mut alt = Vec::new();
    let mut off = Vec::new();
    let mut b40 = Vec::new();
    for seed in 1..=5u64 {
        let p = |n: usize| SimParams {
            reneigh_interval: n,
            n_iterations: 5000,
            rng_seed: seed,
            ..params(6)
        };
        let reference = run(&p(1), RunMode::Baseline, 2).temperature_series();
        let alpha = |r: SimulationResult| compute_tdr(&r.temperature_series(), &reference, f64::INFINITY).unwrap().alpha;
        alt.push(alpha(run(&p(1), RunMode::Baseline, 1)));
        off.push(alpha(run(&p(20), RunMode::Offpath, 2)));
        b40.push(alpha(run(&p(40), RunMode::Baseline, 2)));
    }
    let (m, s) = mean_sd(&alt);
    let bound = 2.776 * s / 5f64.sqrt();
    let zero_ok = m.abs() <= bound;
    let mean_abs = |v: &[f64]| v.iter().map(|a| a.abs()).sum::<f64>() / v.len() as f64;
    let (ao, ab) = (mean_abs(&off), mean_abs(&b40));
    outcome(
        zero_ok && ao <= ab,
        format!("interval-1 alpha {m:+.2e} (95% bound {bound:.2e}); |alpha| offpath n=20 {ao:.2e} vs baseline n=40 {ab:.2e}"),
    )
}

fn model_prediction() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let mut rows = 0;
    for throttle in [1.64, 2.0, 2.5] {
        for h in [1, 2, 4] {
            for b in [1, 2, 4] {
                let mut cfg = RunConfig::default();
                cfg.params.n_iterations = 200;
                cfg.params.reneigh_interval = 5;
                cfg.nodes = 1;
                cfg.host_threads = h;
                cfg.offload_threads = b;
                cfg.throttle = throttle;
                let m = measure_for_model(&cfg, &simulate).unwrap();
                let pred = estimate_offpath_time(&m, cfg.params.n_iterations, cfg.params.reneigh_interval).unwrap();
                let meas = simulate(&cfg.setup(RunMode::Offpath)).unwrap().timing.t_total;
                let err = (pred - meas).abs() / meas;
                rows += 1;
                if err > worst {
                    worst = err;
                    worst_at = format!("1/{h}/{b} throttle {throttle}: predicted {pred:.3}s measured {meas:.3}s");
                }
            }
        }
    }
    Outcome {
        pass: worst <= 0.15,
        detail: format!("{rows} configurations, worst error {:.1}% at {worst_at}", 100.0 * worst),
        cores_needed: 8,
    }
}

fn profitable_regime() -> Outcome {
    let mut best = None::<(f64, f64, String)>;
    let mut found = false;
    for interval in [1, 2, 5] {
        for throttle in [1.64, 2.0] {
            let mut cfg = RunConfig::default();
            cfg.params.n_iterations = 200;
            cfg.params.reneigh_interval = interval;
            cfg.nodes = 2;
            cfg.throttle = throttle;
            let b = simulate(&cfg.setup(RunMode::Baseline)).unwrap();
            let o = simulate(&cfg.setup(RunMode::Offpath)).unwrap();
            let imp = 100.0 * improvement(b.timing.t_total, o.timing.t_total);
            let bound = max_comm_offload_improvement(&b.timing);
            found |= imp > 0.0 && imp > bound;
            if best.as_ref().is_none_or(|x| imp - bound > x.0 - x.1) {
                best = Some((imp, bound, format!("n={interval} throttle {throttle}")));
            }
        }
    }
    let (imp, bound, at) = best.unwrap();
    Outcome {
        pass: found,
        detail: format!("best {at}: improvement {imp:+.1}% vs communication-offload bound {bound:.1}%"),
        cores_needed: 4,
    }
}

fn peak() -> Outcome {
    let r = peak_ratio(656.6, 2, 80.0).unwrap();
    outcome((r - 16.4).abs() <= 0.05, format!("ratio {r:.3}"))
}

fn transports() -> Outcome {
    let t = Instant::now();
    let local = local_mesh(16);
    round_trip(&local);
    stress(&local, 200);
    let sock = socket_mesh(16);
    round_trip(&sock);
    stress(&sock, 200);
    let secs = t.elapsed().as_secs_f64();
    outcome(secs < 60.0, format!("local and socket, 16 workers, {secs:.1}s"))
}

fn main() {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("neighbor-oracle", neighbor_oracle),
        ("force-oracle", force_oracle),
        ("sync-debug-bitwise", sync_debug_equivalence),
        ("conservation", conservation),
        ("accuracy-tdr", accuracy),
        ("model-prediction", model_prediction),
        ("profitable-regime", profitable_regime),
        ("peak-ratio", peak),
        ("transport-conformance", transports),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let enforced = cores >= o.cores_needed;
        let note = if enforced { String::new() } else { format!(" [not enforced: needs {} cores, have {cores}]", o.cores_needed) };
        println!(
            "{} {} {name}: {} ({:.0}s){note}",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass && enforced {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} enforced criteria failed");
        std::process::exit(1);
    }
}
