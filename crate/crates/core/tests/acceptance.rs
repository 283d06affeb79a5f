//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vcim::cli_io::load::load_eigen;
use vcim::conditional_law::LawOptions;
use vcim::model_reduction::{oneway_design, EigenReduction, ModelReducer};
use vcim::plausibility::{pl_curve, GridSpec, PlOptions};
use vcim::sim_harness::oracles::{closed_form_two_strata, density_ks, invariance_check, ks_uniform};
use vcim::sim_harness::{gen_baseline, run_study, Design, SimConfig, StudyResult};

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(id: u32, name: &str, o: &Outcome) {
    let tag = if o.passed { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id}: {name}: {}", o.detail);
}

const CELLS: [(f64, f64); 3] = [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)];

fn coverage_studies() -> Vec<(StudyResult, Duration)> {
    CELLS
        .iter()
        .enumerate()
        .map(|(i, &(sa, se))| {
            let mut cfg = SimConfig::new(
                Design::Oneway {
                    sizes: vec![2, 4, 4, 5],
                },
                sa,
                se,
                1000,
            );
            cfg.seed = 20_160_301 + i as u64;
            let start = Instant::now();
            let r = run_study(&cfg).expect("coverage study");
            (r, start.elapsed())
        })
        .collect()
}

fn criterion_1(studies: &[(StudyResult, Duration)]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (r, t) in studies {
        let ok = (0.93..=0.97).contains(&r.empirical_coverage) && r.failed == 0 && t.as_secs() <= 600;
        passed &= ok;
        parts.push(format!(
            "({}, {}) coverage {:.3} mean length {:.3} failed {} in {:.0}s",
            r.config.sigma_a2,
            r.config.sigma_e2,
            r.empirical_coverage,
            r.mean_length,
            r.failed,
            t.as_secs_f64()
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn criterion_2(studies: &[(StudyResult, Duration)]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (r, _) in studies {
        let ks = ks_uniform(&r.pl_true_values());
        passed &= ks.passes(0.01) && ks.n == 1000;
        parts.push(format!(
            "({}, {}) D {:.4} p {:.3}",
            r.config.sigma_a2, r.config.sigma_e2, ks.statistic, ks.p_value
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn criterion_3() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (r1, r2) in [(2, 4), (1, 10), (5, 37)] {
        match closed_form_two_strata(r1, r2, &LawOptions::default()) {
            Ok(c) => {
                passed &= c.cdf_sup_error < 1e-6 && c.mu_error < 1e-6;
                parts.push(format!("({r1},{r2}) cdf {:.1e} mu {:.1e}", c.cdf_sup_error, c.mu_error));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("({r1},{r2}) error {e}"));
            }
        }
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn criterion_4() -> Outcome {
    let cases: [(&str, &[usize], &[f64]); 7] = [
        ("L3 w1", &[1, 1, 10], &[1.0, 0.0]),
        ("L3 w2", &[1, 1, 10], &[0.0, 1.0]),
        ("L3 sum", &[1, 1, 10], &[1.0, 1.0]),
        ("L4 w1", &[2, 1, 3, 9], &[1.0, 0.0, 0.0]),
        ("L4 w2", &[2, 1, 3, 9], &[0.0, 1.0, 0.0]),
        ("L4 w3", &[2, 1, 3, 9], &[0.0, 0.0, 1.0]),
        ("L4 sum", &[2, 1, 3, 9], &[1.0, 1.0, 1.0]),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, (name, mults, coeffs)) in cases.iter().enumerate() {
        match density_ks(mults, coeffs, 100_000, 500 + i as u64) {
            Ok(ks) => {
                passed &= ks.passes(0.01);
                parts.push(format!("{name} p {:.3}", ks.p_value));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("{name} error {e}"));
            }
        }
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn criterion_5() -> Outcome {
    match invariance_check(20, 77, &PlOptions::default()) {
        Ok(r) => Outcome {
            passed: r.max() < 1e-8 && r.instances == 20,
            detail: format!(
                "max |change| basis {:.1e} rotation {:.1e} scale {:.1e} over {} instances",
                r.basis, r.rotation, r.scale, r.instances
            ),
        },
        Err(e) => Outcome {
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn criterion_6() -> Outcome {
    let (x, z, a) = oneway_design(&[2, 2, 2]);
    let balanced = ModelReducer::new(&x, &z, &a, None).map(|r| r.eigenstructure().clone());
    let assay = load_eigen(common::ASSAY);
    let ok_bal = matches!(&balanced, Ok(e) if e.mults == vec![2, 3]
        && (e.lambdas[0] - 2.0).abs() < 1e-12 && e.lambdas[1] == 0.0);
    let ok_assay = matches!(&assay, Ok(e) if e.lambdas == vec![4.55, 1.0, 0.0] && e.mults == vec![1, 1, 10]);
    Outcome {
        passed: ok_bal && ok_assay,
        detail: format!("balanced {balanced:?}; assay {assay:?}"),
    }
}

fn criterion_7() -> Outcome {
    let eigen = common::lamb();
    let s = gen_baseline(&eigen, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(2012)).unwrap();
    let red = EigenReduction::from_stats(&eigen, s).unwrap();
    let grid = GridSpec::new(0.0, 0.9999, 200).unwrap();
    let start = Instant::now();
    let res = pl_curve(&red, &grid, &PlOptions::default());
    let t = start.elapsed();
    match res {
        Ok(r) => Outcome {
            passed: r.failures() == 0 && r.pl.len() == 200 && t.as_secs_f64() < 60.0,
            detail: format!(
                "L = {}, 200 points in {:.2}s, {} failures",
                eigen.len(),
                t.as_secs_f64(),
                r.failures()
            ),
        },
        Err(e) => Outcome {
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn criterion_8() -> Outcome {
    let mut cfg = SimConfig::new(
        Design::Oneway {
            sizes: vec![2, 4, 4, 5],
        },
        1.0,
        1.0,
        24,
    );
    cfg.seed = 424_242;
    let run = |threads: Option<usize>| {
        let mut c = cfg.clone();
        c.threads = threads;
        serde_json::to_string(&run_study(&c).unwrap()).unwrap()
    };
    let base = run(Some(1));
    let same = [run(Some(1)), run(Some(2)), run(Some(4)), run(None)]
        .iter()
        .all(|s| *s == base);
    Outcome {
        passed: same,
        detail: format!(
            "{} bytes of study JSON compared across runs and 1/2/4/default threads",
            base.len()
        ),
    }
}

fn main() {
    let mut all = true;
    let mut record = |id: u32, name: &str, o: Outcome| {
        report(id, name, &o);
        all &= o.passed;
    };
    let studies = coverage_studies();
    record(
        1,
        "coverage of the 95% interval, pattern (2,4,4,5)",
        criterion_1(&studies),
    );
    record(2, "uniformity of pl at the true value", criterion_2(&studies));
    record(3, "two-stratum closed form", criterion_3());
    record(4, "kernel marginals vs chi-square Monte Carlo", criterion_4());
    record(5, "invariance to basis, rotation and scale", criterion_5());
    record(6, "eigen fixtures", criterion_6());
    record(7, "lamb-scale curve", criterion_7());
    record(8, "determinism across runs and threads", criterion_8());
    if !all {
        std::process::exit(1);
    }
}
