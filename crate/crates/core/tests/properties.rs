use fklab::bonds::label_clusters;
use fklab::events::{u_sequence, unique_event, UniqueEvaluator};
use fklab::geometry::{Region, RegionSpec};
use fklab::harness::output::{parse_results_csv, results_csv};
use fklab::oracle::{fk_conditional_edge, FkParams};
use fklab::renorm::{renorm_sites, witness_check, EtaBuilder};
use fklab::sampler::sequential_coupling;
use fklab::stats::{EstimatorResult, ParamRecord};
use fklab::{BondConfig, BoundarySpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_config(r: &Region, seed: u64, density: f64) -> BondConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BondConfig::from_fn(r, |_| rng.gen::<f64>() < density)
}

/// `base` with extra edges opened at the given density.
fn enlarge(r: &Region, base: &BondConfig, seed: u64, density: f64) -> BondConfig {
    base.union(&random_config(r, seed, density)).unwrap()
}

fn box2(n: i32) -> Region {
    RegionSpec::boxed(2, n).build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn hex_round_trip(seed: u64, density in 0.0f64..1.0) {
        let r = box2(3);
        let w = random_config(&r, seed, density);
        prop_assert_eq!(BondConfig::from_hex(&r, &w.to_hex()).unwrap(), w);
    }

    #[test]
    fn opening_edges_never_adds_clusters(seed: u64, density in 0.0f64..1.0, extra in 0.0f64..0.3, wired: bool) {
        let r = box2(4);
        let bc = if wired { BoundarySpec::wired(&r) } else { BoundarySpec::free() };
        let w = random_config(&r, seed, density);
        let w2 = enlarge(&r, &w, seed ^ 1, extra);
        let k1 = label_clusters(&r, &w, &bc).unwrap().k();
        let k2 = label_clusters(&r, &w2, &bc).unwrap().k();
        prop_assert!(k2 <= k1);
        let n = r.n_vertices() + usize::from(wired);
        prop_assert!(k1 <= n);
    }

    #[test]
    fn unique_is_increasing_in_gamma(seed: u64, density in 0.3f64..0.7, g in 0.0f64..0.3, extra in 0.0f64..0.3) {
        let r = box2(10);
        let w = random_config(&r, seed, density);
        let g1 = random_config(&r, seed ^ 2, g);
        let g2 = enlarge(&r, &g1, seed ^ 3, extra);
        let c = [0, 0];
        let mut ev = UniqueEvaluator::new(&r, 8).unwrap();
        let a = ev.parts(&r, &w, &g1, &c).unwrap();
        let b = ev.parts(&r, &w, &g2, &c).unwrap();
        prop_assert_eq!(a.crossing, b.crossing);
        prop_assert!(!a.merged || b.merged);
        prop_assert_eq!(unique_event(&r, &w, &g1, &c, 8).unwrap(), a.holds());
    }

    #[test]
    fn u_sequence_is_nonincreasing_and_monotone(seed: u64, density in 0.2f64..0.8, g in 0.0f64..0.5, extra in 0.0f64..0.3) {
        let r = box2(16);
        let w = random_config(&r, seed, density);
        let g1 = random_config(&r, seed ^ 4, g);
        let g2 = enlarge(&r, &g1, seed ^ 5, extra);
        let c = [0, 0];
        let a = u_sequence(&r, &w, &g1, &c, 32, 0.5).unwrap();
        let b = u_sequence(&r, &w, &g2, &c, 32, 0.5).unwrap();
        prop_assert!(a.is_nonincreasing());
        prop_assert!(b.is_nonincreasing());
        prop_assert_eq!(a.values[0], b.values[0]);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!(y.1 <= x.1);
        }
    }

    #[test]
    fn conditional_lies_between_free_and_wired_values(bits in 0u32..8, p in 0.01f64..0.99, q in 1.0f64..6.0) {
        let r = RegionSpec::plaquette().build().unwrap();
        let params = FkParams::new(p, q).unwrap();
        let revealed: Vec<(u32, bool)> = (1..4).map(|f| (f, bits >> (f - 1) & 1 == 1)).collect();
        let c = fk_conditional_edge(&r, &BoundarySpec::free(), &params, 0, &revealed).unwrap();
        let lo = p / (p + q * (1.0 - p));
        prop_assert!(c >= lo - 1e-12 && c <= p + 1e-12);
    }

    #[test]
    fn sequential_coupling_is_ordered(seed: u64, p in 0.0f64..1.0, dp in 0.0f64..1.0, q in 1.0f64..5.0) {
        let r = RegionSpec::plaquette().build().unwrap();
        let pp = p + (1.0 - p) * dp;
        let (a, b) = sequential_coupling(&r, p, pp, q, seed).unwrap();
        prop_assert!(a.is_below(&b));
    }

    #[test]
    fn csv_round_trip(est in -1e6f64..1e6, se in 0.0f64..10.0, n in 0u64..1_000_000, p in proptest::option::of(0.0f64..1.0)) {
        let row = EstimatorResult::new("obs", ParamRecord { p, d: Some(3), ..Default::default() }, n, est, se)
            .with_derived("tau", est / 3.0, se);
        let back = parse_results_csv(&results_csv(std::slice::from_ref(&row))).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(back[0].estimate, row.estimate);
        prop_assert_eq!(back[0].stderr, row.stderr);
        prop_assert_eq!(&back[0].params, &row.params);
        prop_assert_eq!(&back[0].derived, &row.derived);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn eta_witness_and_gamma_monotonicity(seed: u64, density in 0.4f64..0.8, g in 0.0f64..0.2, extra in 0.0f64..0.2) {
        let r = RegionSpec::slab(3, 8, 12).build().unwrap();
        let sites = renorm_sites(3, 8, 12, 1.0).unwrap();
        let mut b = EtaBuilder::new(&r, sites).unwrap();
        let w = random_config(&r, seed, density);
        let g1 = random_config(&r, seed ^ 6, g);
        let g2 = enlarge(&r, &g1, seed ^ 7, extra);
        let f1 = b.field(&r, &w, &g1).unwrap();
        let f2 = b.field(&r, &w, &g2).unwrap();
        for (x, y) in f1.values.iter().zip(&f2.values) {
            prop_assert!(!x || *y);
        }
        for (gamma, f) in [(&g1, &f1), (&g2, &f2)] {
            let eta = w.union(gamma).unwrap();
            prop_assert_eq!(witness_check(&b, &r, &eta, f).violations, 0);
        }
    }
}
