mod common;

use common::z_exact;
use fklab::bonds::label_with;
use fklab::events::estimate;
use fklab::geometry::RegionSpec;
use fklab::ising::{plus_minus_split, weak_mixing_gap, weak_mixing_setup, wired_surface_tension_estimate};
use fklab::oracle::{fk_edge_marginals, fk_event_prob, EventPredicate, FkParams};
use fklab::sampler::{run_chains, sequential_coupling, Kernel, SamplerSpec};
use fklab::stats::EstimatorResult;
use fklab::BoundarySpec;

fn spec(kernel: Kernel, samples: u64) -> SamplerSpec {
    SamplerSpec { kernel, burn_in: 200, thinning: 2, samples, chains: 4, threads: 0 }
}

#[test]
fn heat_bath_plaquette_marginals() {
    let r = RegionSpec::plaquette().build().unwrap();
    let bc = BoundarySpec::free();
    let params = FkParams::new(0.55, 3.0).unwrap();
    let exact = fk_edge_marginals(&r, &bc, &params).unwrap();
    let chains = run_chains(&r, &bc, &params, &spec(Kernel::HeatBath, 20_000), 11, |w, _| w.get(0) as u8 as f64).unwrap();
    let est = EstimatorResult::from_chains("edge0", Default::default(), &chains);
    assert!(z_exact(&est, exact[0]) < 3.0, "{} vs {}", est.estimate, exact[0]);
}

#[test]
fn wired_surface_tension_micro_rectangle() {
    let (l, m, p) = (1, 1, 0.5);
    let r = RegionSpec::rect(2, l, m).build().unwrap();
    assert!(r.n_edges() <= 24);
    let split = plus_minus_split(&r);
    let (gp, gm) = (split.blocks[0][0], split.blocks[1][0]);
    let region = r.clone();
    let ev = EventPredicate::new("split", move |w, _| !label_with(&region, &split, |e| w.get(e)).same(gp, gm));
    let exact = fk_event_prob(&r, &BoundarySpec::wired(&r), &FkParams::new(p, 2.0).unwrap(), &ev).unwrap();
    let est = wired_surface_tension_estimate(2, l, m, p, &spec(Kernel::Auto, 20_000), 3).unwrap();
    assert!(z_exact(&est, exact) < 3.0, "{} ± {} vs {exact}", est.estimate, est.stderr);
    let tau = est.derived.as_ref().unwrap();
    assert!((tau.value + est.estimate.ln() / (l as f64)).abs() < 1e-12);
}

#[test]
fn weak_mixing_gap_micro_half_box() {
    let (k, s, p) = (1, 0.5, 0.6);
    let (r, wired, free, b0) = weak_mixing_setup(2, k, s).unwrap();
    assert!(r.n_edges() <= 24);
    let params = FkParams::new(p, 2.0).unwrap();
    let exact = fk_edge_marginals(&r, &wired, &params).unwrap()[b0 as usize]
        - fk_edge_marginals(&r, &free, &params).unwrap()[b0 as usize];
    assert!(exact >= 0.0);
    let est = weak_mixing_gap(2, k, s, p, &spec(Kernel::Auto, 40_000), 8).unwrap();
    assert!(z_exact(&est, exact) < 3.0, "{} ± {} vs {exact}", est.estimate, est.stderr);
}

#[test]
fn top_bottom_disconnection_on_small_grid() {
    // The free-boundary disconnection event of the smallest box instance has
    // 40 edges, past the enumeration cap; the same event on a 3×3 grid is
    // checked instead.
    let sites: Vec<Vec<i32>> = (-1..=1).flat_map(|x| (-1..=1).map(move |y| vec![x, y])).collect();
    let r = RegionSpec::sites(2, sites, false).build().unwrap();
    let top = r.vertices_where(|x| x[1] == 1);
    let bot = r.vertices_where(|x| x[1] == -1);
    let ev = EventPredicate::new("free_disconnection", move |_, l| !l.is_connected(&bot, &top).unwrap());
    let bc = BoundarySpec::free();
    let params = FkParams::new(0.5, 2.0).unwrap();
    let exact = fk_event_prob(&r, &bc, &params, &ev).unwrap();
    let est = estimate(&r, &bc, &params, &ev, &spec(Kernel::HeatBath, 20_000), 4).unwrap();
    assert!(z_exact(&est, exact) < 3.0, "{} ± {} vs {exact}", est.estimate, est.stderr);
}

#[test]
fn sequential_coupling_marginals_and_order() {
    let r = RegionSpec::plaquette().build().unwrap();
    let (p, pp, q) = (0.3, 0.6, 2.0);
    let lo = fk_edge_marginals(&r, &BoundarySpec::free(), &FkParams::new(p, q).unwrap()).unwrap();
    let hi = fk_edge_marginals(&r, &BoundarySpec::free(), &FkParams::new(pp, q).unwrap()).unwrap();
    let n = 4000;
    let mut count = [0.0f64; 2];
    for seed in 0..n {
        let (a, b) = sequential_coupling(&r, p, pp, q, seed).unwrap();
        assert!(a.is_below(&b));
        count[0] += a.get(3) as u8 as f64;
        count[1] += b.get(3) as u8 as f64;
    }
    for (c, m) in count.iter().zip([lo[3], hi[3]]) {
        let f = c / n as f64;
        let se = (m * (1.0 - m) / n as f64).sqrt();
        assert!((f - m).abs() < 3.0 * se, "{f} vs {m}");
    }
}

#[test]
fn kernels_agree_on_box() {
    let r = RegionSpec::boxed(2, 2).build().unwrap();
    let bc = BoundarySpec::wired(&r);
    let params = FkParams::new(0.5, 2.0).unwrap();
    let obs = |w: &fklab::BondConfig, _: &mut fklab::sampler::SampleCtx| w.count_open() as f64 / w.len() as f64;
    let hb = run_chains(&r, &bc, &params, &spec(Kernel::HeatBath, 10_000), 1, obs).unwrap();
    let sw = run_chains(&r, &bc, &params, &spec(Kernel::SwendsenWang, 10_000), 2, obs).unwrap();
    let a = EstimatorResult::from_chains("hb", Default::default(), &hb);
    let b = EstimatorResult::from_chains("sw", Default::default(), &sw);
    let z = fklab::stats::z_distance(a.estimate, a.stderr, b.estimate, b.stderr);
    assert!(z < 3.0, "{} vs {} (z = {z})", a.estimate, b.estimate);
}

#[test]
fn results_ignore_worker_count() {
    let r = RegionSpec::boxed(2, 3).build().unwrap();
    let params = FkParams::new(0.5, 1.5).unwrap();
    let run = |threads| {
        let s = SamplerSpec { threads, ..spec(Kernel::HeatBath, 300) };
        run_chains(&r, &BoundarySpec::free(), &params, &s, 9, |w, _| w.to_hex()).unwrap()
    };
    assert_eq!(run(1), run(3));
}
