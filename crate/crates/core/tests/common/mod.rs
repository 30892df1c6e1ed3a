#![allow(dead_code)]

pub mod mesh;

use offpath_md::analysis::ThermoSample;
use offpath_md::atoms::{AtomRecord, AtomStore};
use offpath_md::scheduler::SimulationResult;
use offpath_md::domain::{choose_proc_grid, wrap_periodic, Decomposition, GlobalBox};
use offpath_md::halo::{border, BorderMap, HaloLink};
use offpath_md::lattice::{distribute_records, lattice_records};
use offpath_md::params::SimParams;
use offpath_md::transport::local_mesh;
use offpath_md::vec3::{self, Vec3, ZERO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn params(cells: usize) -> SimParams {
    SimParams {
        unit_cells: [cells; 3],
        ..SimParams::default()
    }
}

pub fn global_box(p: &SimParams) -> GlobalBox {
    GlobalBox::for_lattice(p.unit_cells, p.density)
}

/// Lattice atoms displaced by up to `amp` per component, wrapped into the box.
pub fn jittered(p: &SimParams, amp: f64, seed: u64) -> Vec<AtomRecord> {
    let b = global_box(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lattice_records(p)
        .into_iter()
        .map(|mut r| {
            for c in r.x.iter_mut() {
                *c += rng.gen_range(-amp..amp);
            }
            r.x = wrap_periodic(r.x, &b);
            r
        })
        .collect()
}

pub fn decomps(p: &SimParams, nodes: usize) -> Vec<Decomposition> {
    let b = global_box(p);
    let grid = choose_proc_grid(nodes, &b);
    Decomposition::all(b, grid, nodes, p.halo_width()).unwrap()
}

pub struct Worker {
    pub decomp: Decomposition,
    pub atoms: AtomStore,
    pub map: BorderMap,
}

/// Distributes `records` over `nodes` workers and runs `border` on all of them.
pub fn ghosted(p: &SimParams, records: &[AtomRecord], nodes: usize) -> Vec<Worker> {
    let ds = decomps(p, nodes);
    let mesh = local_mesh(nodes);
    std::thread::scope(|s| {
        let hs: Vec<_> = ds
            .into_iter()
            .zip(&mesh)
            .map(|(decomp, t)| {
                s.spawn(move || {
                    let link = HaloLink::identity(t, nodes);
                    let mut atoms = distribute_records(records, &decomp).unwrap();
                    let map = border(&mut atoms, &decomp, &link).unwrap();
                    Worker { decomp, atoms, map }
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

/// Integer image shift taking `owner` to `image`.
pub fn image_of(owner: Vec3, image: Vec3, b: &GlobalBox) -> [i64; 3] {
    let mut s = [0i64; 3];
    for d in 0..3 {
        let k = (image[d] - owner[d]) / b.lengths[d];
        s[d] = k.round() as i64;
        assert!((k - k.round()).abs() < 1e-9, "not a periodic image");
    }
    s
}

/// Direct-sum minimum-image LJ oracle: per-atom force, per-component sum of
/// absolute pair terms, and total potential energy.
pub fn direct_forces(p: &SimParams, recs: &[AtomRecord]) -> (Vec<Vec3>, Vec<Vec3>, f64) {
    let b = global_box(p);
    let n = recs.len();
    let mut f = vec![ZERO; n];
    let mut mag = vec![ZERO; n];
    let mut pe = 0.0;
    let rc2 = p.r_cut * p.r_cut;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut d = vec3::sub(recs[i].x, recs[j].x);
            for k in 0..3 {
                d[k] -= b.lengths[k] * (d[k] / b.lengths[k]).round();
            }
            let r2 = vec3::norm2(d);
            if r2 >= rc2 {
                continue;
            }
            let inv6 = (p.sigma * p.sigma / r2).powi(3);
            let fr = 24.0 * p.epsilon * (2.0 * inv6 * inv6 - inv6) / r2;
            for k in 0..3 {
                f[i][k] += fr * d[k];
                mag[i][k] += (fr * d[k]).abs();
            }
            if i < j {
                pe += 4.0 * p.epsilon * (inv6 * inv6 - inv6);
            }
        }
    }
    (f, mag, pe)
}

/// All-pairs, all-images neighbor sets: for each atom, every `(id, shift)`
/// within the halo width, excluding itself at zero shift.
pub fn all_pairs_neighbors(p: &SimParams, recs: &[AtomRecord]) -> Vec<Vec<(u64, [i64; 3])>> {
    let b = global_box(p);
    let cut2 = p.halo_width() * p.halo_width();
    let shifts: Vec<[i64; 3]> = (0..27).map(|k| [k % 3 - 1, (k / 3) % 3 - 1, k / 9 - 1]).collect();
    recs.iter()
        .map(|a| {
            let mut out = Vec::new();
            for c in recs {
                for s in &shifts {
                    if c.id == a.id && *s == [0, 0, 0] {
                        continue;
                    }
                    let mut img = c.x;
                    for d in 0..3 {
                        if s[d] != 0 {
                            img[d] += s[d] as f64 * b.lengths[d];
                        }
                    }
                    if vec3::norm2(vec3::sub(a.x, img)) < cut2 {
                        out.push((c.id, *s));
                    }
                }
            }
            out.sort();
            out
        })
        .collect()
}

/// Number of owned atoms whose built neighbor set differs from the oracle.
pub fn neighbor_mismatches(p: &SimParams, recs: &[AtomRecord], nodes: usize) -> usize {
    use offpath_md::neighbor::neighbor_build;
    let b = global_box(p);
    let oracle = all_pairs_neighbors(p, recs);
    let pos: std::collections::HashMap<u64, Vec3> = recs.iter().map(|r| (r.id, r.x)).collect();
    let mut bad = 0;
    let mut seen = 0;
    for w in ghosted(p, recs, nodes) {
        let list = neighbor_build(&w.atoms, p, &w.decomp, 0).unwrap();
        for i in 0..w.atoms.n_local() {
            seen += 1;
            let mut got: Vec<(u64, [i64; 3])> = list
                .neighbors_of(i)
                .iter()
                .map(|&j| {
                    let id = w.atoms.id[j as usize];
                    (id, image_of(pos[&id], w.atoms.x[j as usize], &b))
                })
                .collect();
            got.sort();
            if got != oracle[w.atoms.id[i] as usize] {
                bad += 1;
            }
        }
    }
    assert_eq!(seen, recs.len(), "owned atoms lost in distribution");
    bad
}

/// Largest per-component force error divided by the sum of absolute pair
/// terms, and the absolute energy error.
pub fn force_error(p: &SimParams, recs: &[AtomRecord], nodes: usize) -> (f64, f64) {
    use offpath_md::dynamics::force_compute;
    use offpath_md::neighbor::neighbor_build;
    let (f_ref, mag, pe_ref) = direct_forces(p, recs);
    let mut worst: f64 = 0.0;
    let mut pe = 0.0;
    for mut w in ghosted(p, recs, nodes) {
        let list = neighbor_build(&w.atoms, p, &w.decomp, 0).unwrap();
        pe += force_compute(&mut w.atoms, &list, p).unwrap();
        for i in 0..w.atoms.n_local() {
            let id = w.atoms.id[i] as usize;
            for k in 0..3 {
                let err = (w.atoms.f[i][k] - f_ref[id][k]).abs();
                worst = worst.max(err / mag[id][k].max(f64::MIN_POSITIVE));
            }
        }
    }
    (worst, (pe - pe_ref).abs() / pe_ref.abs())
}

/// Largest |E(t) - E(0)| per atom over the samples.
pub fn energy_drift(samples: &[ThermoSample]) -> f64 {
    let e0 = samples[0].total;
    let n = samples[0].n_atoms as f64;
    samples.iter().map(|s| (s.total - e0).abs() / n).fold(0.0, f64::max)
}

pub fn conservation_error(r: &SimulationResult, n_atoms: usize) -> (bool, f64) {
    let counts = r.thermo.iter().all(|s| s.n_atoms == n_atoms) && r.final_state.len() == n_atoms;
    let mut ids: Vec<u64> = r.final_state.iter().map(|a| a.id).collect();
    ids.dedup();
    let p0 = r.thermo[0].momentum;
    let mut worst: f64 = 0.0;
    for s in &r.thermo {
        for k in 0..3 {
            worst = worst.max((s.momentum[k] - p0[k]).abs());
        }
    }
    let mut pf = ZERO;
    for a in &r.final_state {
        pf = vec3::add(pf, a.v);
    }
    for k in 0..3 {
        worst = worst.max((pf[k] - p0[k]).abs());
    }
    (counts && ids.len() == n_atoms, worst)
}

