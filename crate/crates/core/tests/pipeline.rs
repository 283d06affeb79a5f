mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vcim::model_reduction::{reduce_model, EigenReduction, ModelReducer};
use vcim::plausibility::{pl_at, PlOptions};
use vcim::sim_harness::oracles::ks_uniform;
use vcim::sim_harness::{gen_baseline, gen_oneway};

const SIZES: [usize; 4] = [2, 4, 4, 5];

#[test]
fn raw_and_baseline_generators_agree() {
    // the same coverage event computed from raw one-way data and from
    // direct draws of the sufficient statistics
    let (sa, se, alpha) = (1.0, 1.0, 0.05);
    let rho = sa / (sa + se);
    let opts = PlOptions::default();
    let (x, z, a) = vcim::model_reduction::oneway_design(&SIZES);
    let reducer = ModelReducer::new(&x, &z, &a, None).unwrap();
    let eigen = reducer.eigenstructure().clone();
    let n = 2000;
    let mut raw_hits = 0;
    let mut base_hits = 0;
    let mut raw_pl = Vec::new();
    for rep in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(rep);
        let m = gen_oneway(&SIZES, sa, se, &mut rng).unwrap();
        let p = pl_at(&reducer.reduce(&m.y).unwrap(), rho, &opts).unwrap();
        raw_hits += usize::from(p > alpha);
        raw_pl.push(p);
        let s = gen_baseline(&eigen, sa, se, &mut rng).unwrap();
        let p = pl_at(&EigenReduction::from_stats(&eigen, s).unwrap(), rho, &opts).unwrap();
        base_hits += usize::from(p > alpha);
    }
    let (pr, pb) = (raw_hits as f64 / n as f64, base_hits as f64 / n as f64);
    let sigma = (0.95 * 0.05 * 2.0 / n as f64).sqrt();
    assert!((pr - pb).abs() < 2.0 * sigma, "raw {pr} baseline {pb}");
    assert!(ks_uniform(&raw_pl).passes(0.01));
}

#[test]
fn assay_null_data_usually_plausible_at_zero() {
    let eigen = common::assay();
    let opts = PlOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let reps = 200;
    let mut above = 0;
    for _ in 0..reps {
        let s = gen_baseline(&eigen, 0.0, 1.0, &mut rng).unwrap();
        let red = EigenReduction::from_stats(&eigen, s).unwrap();
        above += usize::from(pl_at(&red, 0.0, &opts).unwrap() > 0.2);
    }
    // pl(0) is uniform under the null, so P(pl > 0.2) = 0.8
    assert!(above * 2 > reps, "{above} of {reps}");
}

#[test]
fn assay_pl_true_is_uniform() {
    let eigen = common::assay();
    let opts = PlOptions::default();
    for (sa, se) in [(0.0, 1.0), (1.0, 1.0), (4.0, 0.25)] {
        let rho = sa / (sa + se);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pls: Vec<f64> = (0..1000)
            .map(|_| {
                let s = gen_baseline(&eigen, sa, se, &mut rng).unwrap();
                pl_at(&EigenReduction::from_stats(&eigen, s).unwrap(), rho, &opts).unwrap()
            })
            .collect();
        let ks = ks_uniform(&pls);
        assert!(ks.passes(0.01), "({sa},{se}) {ks:?}");
    }
}

#[test]
fn scale_invariance_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let opts = PlOptions::default();
    let mut m = gen_oneway(&SIZES, 0.7, 1.3, &mut rng).unwrap();
    let base = reduce_model(&m, None).unwrap();
    for c in [1e-3, 0.37, 12.0, 4e4] {
        m.y *= c;
        let scaled = reduce_model(&m, None).unwrap();
        m.y /= c;
        for rho in [0.0, 0.2, 0.5, 0.9] {
            let d = (pl_at(&scaled, rho, &opts).unwrap() - pl_at(&base, rho, &opts).unwrap()).abs();
            assert!(d < 1e-10, "c={c} rho={rho} d={d}");
        }
    }
}

#[test]
fn lamb_fixture_reduces_through_statistics() {
    let eigen = common::lamb();
    assert_eq!(eigen.len(), 18);
    assert_eq!(eigen.mults[17], 37);
    assert_eq!(eigen.lambdas[7], 2.0);
    let s = gen_baseline(&eigen, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let red = EigenReduction::from_stats(&eigen, s).unwrap();
    let p = pl_at(&red, 0.5, &PlOptions::default()).unwrap();
    assert!((0.0..=1.0).contains(&p));
}
