mod common;

use common::wirings;
use fklab::geometry::RegionSpec;
use fklab::ising::{beta_to_p, boundary_field, FieldPreset};
use fklab::oracle::{
    boundary_gap, fk_connection_prob, fk_edge_marginals, fk_enumerate, fk_event_prob, fk_partition, ginibre_gap,
    ising_enumerate, russo_check, EventPredicate, FkParams, Observable,
};
use fklab::{BondConfig, BoundarySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn set_partitions_of_four() {
    // Bell number B_4 = 15.
    assert_eq!(wirings(&[0, 1, 2, 3]).len(), 15);
    assert_eq!(wirings(&[0, 1]).len(), 2);
}

#[test]
fn single_edge_closed_forms() {
    let r = RegionSpec::single_edge().build().unwrap();
    let free = BoundarySpec::free();
    let wired = BoundarySpec::from_blocks(vec![vec![0, 1]]);
    for p in [0.1, 0.5, 0.9] {
        for q in [1.0, 2.0, 4.0] {
            let params = FkParams::new(p, q).unwrap();
            let f = fk_edge_marginals(&r, &free, &params).unwrap()[0];
            let w = fk_edge_marginals(&r, &wired, &params).unwrap()[0];
            assert!((f - p / (p + q * (1.0 - p))).abs() < 1e-12);
            assert!((w - p).abs() < 1e-12);
        }
    }
}

#[test]
fn partition_function_of_plaquette() {
    // Closed-form sum over the 16 configurations of the square: every
    // configuration has 4 − |ω| + [ω = all] clusters.
    let r = RegionSpec::plaquette().build().unwrap();
    let (p, q) = (0.35f64, 2.5f64);
    let mut z = 0.0;
    for bits in 0u32..16 {
        let n = bits.count_ones() as i32;
        let k = 4 - n + i32::from(n == 4);
        z += p.powi(n) * (1.0 - p).powi(4 - n) * q.powi(k);
    }
    let got = fk_partition(&r, &BoundarySpec::free(), &FkParams::new(p, q).unwrap()).unwrap();
    assert!((got - z).abs() < 1e-12 * z);
}

#[test]
fn q_one_is_bernoulli_for_any_wiring() {
    let r = RegionSpec::boxed(2, 1).build().unwrap();
    let params = FkParams::new(0.37, 1.0).unwrap();
    for bc in [BoundarySpec::free(), BoundarySpec::wired(&r)] {
        for m in fk_edge_marginals(&r, &bc, &params).unwrap() {
            assert!((m - 0.37).abs() < 1e-12);
        }
    }
}

/// The 168 increasing events on four edges, as truth tables over `ω ∈ {0,1}^4`.
fn increasing_events() -> Vec<u16> {
    (0u32..1 << 16)
        .map(|t| t as u16)
        .filter(|&t| {
            (0..16u16).all(|w| {
                (0..4).all(|e| {
                    let up = w | 1 << e;
                    t >> w & 1 == 0 || t >> up & 1 == 1
                })
            })
        })
        .collect()
}

fn event_prob(r: &fklab::geometry::Region, bc: &BoundarySpec, params: &FkParams, table: u16) -> f64 {
    let ev = EventPredicate::new("table", move |w: &BondConfig, _| {
        let idx = (0..4).fold(0u16, |acc, e| acc | u16::from(w.get(e)) << e);
        table >> idx & 1 == 1
    });
    fk_event_prob(r, bc, params, &ev).unwrap()
}

#[test]
fn fkg_monotonicity_on_plaquette() {
    let events = increasing_events();
    assert_eq!(events.len(), 168);
    let r = RegionSpec::plaquette().build().unwrap();
    let ws = wirings(&[0, 1, 2, 3]);
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    for q in [1.0, 2.0, 4.0] {
        for bc in &ws {
            let probs: Vec<Vec<f64>> = grid
                .iter()
                .map(|&p| {
                    let params = FkParams::new(p, q).unwrap();
                    events.iter().map(|&t| event_prob(&r, bc, &params, t)).collect()
                })
                .collect();
            for w in probs.windows(2) {
                for (a, b) in w[0].iter().zip(&w[1]) {
                    assert!(b + 1e-12 >= *a, "not increasing in p: {a} > {b}");
                }
            }
        }
        for fine in &ws {
            for coarse in ws.iter().filter(|c| fine.is_finer_than(c, &r)) {
                let params = FkParams::new(0.4, q).unwrap();
                for &t in &events {
                    let a = event_prob(&r, fine, &params, t);
                    let b = event_prob(&r, coarse, &params, t);
                    assert!(b + 1e-12 >= a, "coarsening lowered an increasing event");
                }
            }
        }
    }
}

#[test]
fn edwards_sokal_two_point_functions() {
    let regions = [
        RegionSpec::boxed(2, 0),
        RegionSpec::half_box(2, 1),
        RegionSpec::sites(2, vec![vec![0, 0], vec![1, 0], vec![2, 0]], true),
    ];
    for spec in &regions {
        let r = spec.build().unwrap();
        let plus = boundary_field(&r, FieldPreset::Plus).unwrap();
        for beta in [0.1, 0.44, 1.0] {
            let params = FkParams::new(beta_to_p(beta).unwrap(), 2.0).unwrap();
            let bc = BoundarySpec::wired(&r);
            let verts: Vec<u32> = r.vertices().collect();
            let pairs: Vec<(u32, u32)> =
                verts.iter().flat_map(|&x| verts.iter().filter(move |&&y| y > x).map(move |&y| (x, y))).collect();
            let sets: Vec<Vec<u32>> = pairs.iter().map(|&(x, y)| vec![x, y]).collect();
            let spins = ising_enumerate(&r, beta, &plus, &sets).unwrap().correlations;
            let obs: Vec<Observable> = pairs.iter().map(|&(x, y)| Observable::Connected(vec![x], vec![y])).collect();
            let fk = fk_enumerate(&r, &bc, &params, None, &obs).unwrap().observables;
            for (a, b) in spins.iter().zip(&fk) {
                assert!((a - b).abs() < 1e-12, "{spec:?} β={beta}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn one_point_function_is_connection_to_ghosts() {
    let r = RegionSpec::boxed(2, 1).build().unwrap();
    let plus = boundary_field(&r, FieldPreset::Plus).unwrap();
    let beta = 0.3;
    let params = FkParams::new(beta_to_p(beta).unwrap(), 2.0).unwrap();
    let ghosts: Vec<u32> = r.ghosts().collect();
    let center = r.vertex_at(&[0, 0]).unwrap();
    let spin = ising_enumerate(&r, beta, &plus, &[vec![center]]).unwrap().correlations[0];
    let fk = fk_connection_prob(&r, &BoundarySpec::wired(&r), &params, &[center], &ghosts).unwrap();
    assert!((spin - fk).abs() < 1e-12);
}

#[test]
fn russo_on_plaquette_and_box() {
    let plaq = RegionSpec::plaquette().build().unwrap();
    let all = BoundarySpec::from_blocks(vec![vec![0, 1, 2, 3]]);
    for (r, bc) in [(&plaq, BoundarySpec::free()), (&plaq, all)] {
        for q in [1.0, 2.0, 3.5] {
            for p in [0.2, 0.5, 0.8] {
                let params = FkParams::new(p, q).unwrap();
                for e in 0..r.n_edges() as u32 {
                    let rep = russo_check(r, &bc, &params, e, 1e-4).unwrap();
                    assert!(rep.relative_error() < 1e-6, "{rep:?}");
                    assert!(rep.covariance_form >= 1.0 / q - 1e-9);
                }
            }
        }
    }
    let b = RegionSpec::boxed(2, 1).build().unwrap();
    let params = FkParams::new(0.5, 2.0).unwrap();
    let rep = russo_check(&b, &BoundarySpec::wired(&b), &params, 0, 1e-4).unwrap();
    assert!(rep.relative_error() < 1e-6);
}

#[test]
fn boundary_gap_plaquette_sample() {
    let r = RegionSpec::plaquette().build().unwrap();
    let ws = wirings(&[0, 1, 2, 3]);
    for fine in &ws {
        for coarse in ws.iter().filter(|c| fine.is_finer_than(c, &r)) {
            for e in 0..4 {
                let g = boundary_gap(&r, fine, coarse, 0.3, 0.6, 2.0, e).unwrap();
                assert!(g >= -1e-12);
            }
        }
    }
}

#[test]
fn ginibre_on_a_chain() {
    let r = RegionSpec::sites(2, vec![vec![0, 0], vec![1, 0], vec![2, 0]], true).build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ng = r.n_ghosts();
    for _ in 0..10 {
        let eta: Vec<f64> = (0..ng).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eta_p: Vec<f64> = eta.iter().map(|x: &f64| x.abs() + rng.gen_range(0.0..0.5)).collect();
        let beta = rng.gen_range(0.05..1.5);
        for a in 0..3u32 {
            for b in 0..3u32 {
                assert!(ginibre_gap(&r, beta, &eta, &eta_p, &[a], &[b]).unwrap() >= -1e-12);
            }
        }
    }
}
