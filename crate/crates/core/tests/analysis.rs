use offpath_md::analysis::{
    compute_tdr, estimate_offpath_time, find_knee, improvement, max_comm_offload_improvement, peak_ratio,
    PerfMeasurement, RoutineCosts, TimingBreakdown,
};
use proptest::prelude::*;

/// Uncentered normal equations solved by Cramer's rule.
fn normal_equations(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = sxx * n - sx * sx;
    ((sxy * n - sx * sy) / det, (sxx * sy - sx * sxy) / det)
}

proptest! {
    #[test]
    fn tdr_matches_normal_equations(
        stride in 1usize..50,
        temps in prop::collection::vec((0.5f64..2.0, -0.05f64..0.05), 3..200),
    ) {
        let reference: Vec<(usize, f64)> = temps.iter().enumerate().map(|(k, t)| (k * stride, t.0)).collect();
        let test: Vec<(usize, f64)> = temps.iter().enumerate().map(|(k, t)| (k * stride, t.0 + t.1)).collect();
        let pts: Vec<(f64, f64)> = test.iter().zip(&reference).map(|(a, b)| (a.0 as f64, a.1 - b.1)).collect();
        let (alpha, beta) = normal_equations(&pts);
        let r = compute_tdr(&test, &reference, 0.03).unwrap();
        let scale = temps.iter().map(|t| t.1.abs()).fold(1e-3, f64::max);
        prop_assert!((r.alpha - alpha).abs() <= 1e-8 * scale / stride as f64, "alpha {} vs {}", r.alpha, alpha);
        prop_assert!((r.beta - beta).abs() <= 1e-7 * scale, "beta {} vs {}", r.beta, beta);
        let max = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        prop_assert_eq!(r.max_abs_dt, max);
        prop_assert_eq!(r.pass, max <= 0.03);
    }

    #[test]
    fn offpath_estimate_is_the_model_identity(
        hf in 1e-4f64..1.0, hn in 1e-4f64..1.0, hc in 1e-5f64..0.5,
        of in 1e-4f64..3.0, oc in 1e-5f64..0.5,
        total in 10.0f64..1e4, iters in 1usize..100_000, interval in 1usize..100,
    ) {
        let m = PerfMeasurement {
            nodes: 2,
            host_threads: 4,
            offload_threads: 2,
            host: RoutineCosts { t_force: hf, t_neigh: hn, t_comm: hc },
            offload: RoutineCosts { t_force: of, t_neigh: 0.0, t_comm: oc },
            t_total: total,
        };
        let literal = total - (hf + hn + hc - f64::max(hn + hc, of + oc)) * iters as f64 / interval as f64;
        let got = estimate_offpath_time(&m, iters, interval).unwrap();
        prop_assert!((got - literal).abs() <= 1e-9 * total.max(literal.abs()));
        // the overlap never saves more than the host's force time per rebuild
        prop_assert!(got >= total - hf * iters as f64 / interval as f64 - 1e-9 * total);
        prop_assert_eq!(got <= total, of + oc <= hf + hn + hc);
    }

    #[test]
    fn improvement_is_relative_saving(base in 1e-3f64..1e4, frac in -1.0f64..0.99) {
        let off = base * (1.0 - frac);
        prop_assert!((improvement(base, off) - frac).abs() < 1e-12);
    }
}

#[test]
fn peak_ratio_on_table_one() {
    let r = peak_ratio(656.6, 2, 80.0).unwrap();
    assert!((r - 16.4).abs() <= 0.05, "{r}");
    assert!((r - 16.415).abs() < 1e-12);
    assert!(peak_ratio(0.0, 2, 80.0).is_err());
    assert!(peak_ratio(656.6, 2, f64::NAN).is_err());
}

#[test]
fn comm_bound_is_comm_share() {
    let b = TimingBreakdown { t_total: 200.0, t_force: 120.0, t_neigh: 40.0, t_comm: 10.0 };
    assert!((max_comm_offload_improvement(&b) - 5.0).abs() < 1e-12);
    assert!((b.t_other() - 30.0).abs() < 1e-12);
}

#[test]
fn model_rejects_zero_interval() {
    let m = PerfMeasurement {
        nodes: 1,
        host_threads: 1,
        offload_threads: 1,
        host: RoutineCosts::default(),
        offload: RoutineCosts::default(),
        t_total: 1.0,
    };
    assert!(estimate_offpath_time(&m, 100, 0).is_err());
}

#[test]
fn knee_is_where_rebuild_meets_offload_force() {
    let host: Vec<(usize, RoutineCosts)> = [1usize, 2, 4, 8, 16]
        .iter()
        .map(|&h| (h, RoutineCosts { t_force: 1.0 / h as f64, t_neigh: 0.4 / h as f64, t_comm: 0.02 }))
        .collect();
    let offload = RoutineCosts { t_force: 0.1, t_neigh: 0.0, t_comm: 0.02 };
    assert_eq!(find_knee(&host, offload), Some(4));
    assert_eq!(find_knee(&[], offload), None);
}
