#![allow(dead_code)]

use vcim::model_reduction::Eigenstructure;

pub const ASSAY: &str = "4.55:1,1:1,0:10";

pub fn assay() -> Eigenstructure {
    Eigenstructure::new(vec![4.55, 1.0, 0.0], vec![1, 1, 10]).unwrap()
}

/// Eighteen strata: 5.09 down to 2 (which has multiplicity 2), then evenly
/// spaced single eigenvalues down to 0.2, and a null stratum of size 37.
pub fn lamb() -> Eigenstructure {
    let mut lam: Vec<f64> = (0..8).map(|i| 5.09 - (5.09 - 2.0) * i as f64 / 7.0).collect();
    lam.extend((1..=9).map(|k| 2.0 * (1.0 - k as f64 / 10.0)));
    lam.push(0.0);
    let mut mults = vec![1; 18];
    mults[7] = 2;
    mults[17] = 37;
    Eigenstructure::new(lam, mults).unwrap()
}

/// `group,value` CSV text for the given group sizes and values.
pub fn oneway_csv(sizes: &[usize], y: &[f64]) -> String {
    let mut out = String::from("group,value\n");
    let mut i = 0;
    for (g, &m) in sizes.iter().enumerate() {
        for _ in 0..m {
            out.push_str(&format!("g{g},{}\n", y[i]));
            i += 1;
        }
    }
    out
}
