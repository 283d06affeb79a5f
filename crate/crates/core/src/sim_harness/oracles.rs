//! Independent reference computations used by the `check` command and the
//! test suites: Kolmogorov–Smirnov tests, the two-stratum closed form, a
//! nested-quadrature marginal of the multivariate-F kernel, Monte Carlo
//! draws built from chi-squares, and the invariance suite.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::gamma::digamma;

use crate::association::{AssociationContext, DEFAULT_RHO_MAX};
use crate::conditional_law::{build_law, log_density_u, LawOptions};
use crate::error::{Error, Result};
use crate::model_reduction::{build_residual_projector, ModelReducer};
use crate::plausibility::{pl_from_context, PlOptions};
use crate::quadrature::{gk15_nodes, gk15_panel, maximize_unimodal};

/// Outcome of a one-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

impl KsResult {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

/// Asymptotic Kolmogorov tail `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (-j * j * c).exp()
            })
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        2.0 * (1..=100)
            .map(|k| {
                let kf = k as f64;
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * kf * kf * lambda * lambda).exp()
            })
            .sum::<f64>()
    };
    p.clamp(0.0, 1.0)
}

/// KS test of `samples` against a continuous `cdf`. The p-value uses the
/// asymptotic distribution with Stephens' small-sample correction.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let sn = nf.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    KsResult {
        n,
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    }
}

pub fn ks_uniform(samples: &[f64]) -> KsResult {
    ks_test(samples, |x| x.clamp(0.0, 1.0))
}

/// Accuracy of the conditional law at `L = 2` against `log F(r₁, r₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormReport {
    pub r1: usize,
    pub r2: usize,
    pub cdf_sup_error: f64,
    pub mu: f64,
    pub mu_exact: f64,
    pub mu_error: f64,
}

/// `E log F(r₁, r₂) = ψ(r₁/2) − ψ(r₂/2) + log(r₂/r₁)`.
pub fn log_f_mean(r1: usize, r2: usize) -> f64 {
    let (a, b) = (r1 as f64, r2 as f64);
    digamma(0.5 * a) - digamma(0.5 * b) + (b / a).ln()
}

/// Build the law for a two-stratum model and compare it with the closed form
/// at every knot and knot midpoint.
pub fn closed_form_two_strata(r1: usize, r2: usize, opts: &LawOptions) -> Result<ClosedFormReport> {
    let ctx = AssociationContext::new(0.3, &[2.0, 0.0], &[1.0], DEFAULT_RHO_MAX)?;
    let law = build_law(&ctx, &[r1, r2], opts)?;
    let f = FisherSnedecor::new(r1 as f64, r2 as f64).map_err(|e| Error::Config(e.to_string()))?;
    let knots = law.knots();
    let mut err: f64 = 0.0;
    for pair in knots.windows(2) {
        let (a, b) = (pair[0].0, pair[1].0);
        for v in [a, 0.5 * (a + b)] {
            if v.abs() < 700.0 {
                err = err.max((law.cdf(v) - f.cdf(v.exp())).abs());
            }
        }
    }
    let mu_exact = log_f_mean(r1, r2);
    Ok(ClosedFormReport {
        r1,
        r2,
        cdf_sup_error: err,
        mu: law.mu,
        mu_exact,
        mu_error: (law.mu - mu_exact).abs(),
    })
}

const MAX_DIM: usize = 3;
/// Log-density drop that bounds each integration range.
const ORACLE_DROP: f64 = 32.0;
const INNER_PANELS: usize = 10;
const OUTER_PANELS: usize = 48;

/// Distribution of `c·w` where `w = log u` and `u` has the multivariate-F
/// kernel, obtained by integrating the kernel over the remaining
/// coordinates. Supports `L − 1 ≤ 3`.
#[derive(Debug, Clone)]
pub struct KernelMarginal {
    knots: Vec<f64>,
    cdf: Vec<f64>,
    values: Vec<[f64; PANEL_POINTS]>,
    weights: [f64; PANEL_POINTS],
}

struct MarginalSetup<'a> {
    mults: &'a [usize],
    coeffs: [f64; MAX_DIM],
    /// Coordinate solved for from `s`; the others are integrated out.
    pivot: usize,
    dim: usize,
}

impl MarginalSetup<'_> {
    fn log_kernel_w(&self, w: &[f64; MAX_DIM]) -> f64 {
        let mut u = [0.0; MAX_DIM];
        for i in 0..self.dim {
            u[i] = w[i].exp();
        }
        match log_density_u(&u[..self.dim], self.mults) {
            Ok(v) => v + w[..self.dim].iter().sum::<f64>(),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Others in the order they are integrated.
    fn free(&self) -> Vec<usize> {
        (0..self.dim).filter(|&i| i != self.pivot).collect()
    }

    fn log_slice(&self, s: f64, w: &mut [f64; MAX_DIM], level: usize, free: &[usize]) -> f64 {
        if level == free.len() {
            let rest: f64 = free.iter().map(|&j| self.coeffs[j] * w[j]).sum();
            w[self.pivot] = (s - rest) / self.coeffs[self.pivot];
            return self.log_kernel_w(w) - self.coeffs[self.pivot].abs().ln();
        }
        let j = free[level];
        let base = *w;
        let g = |t: f64| {
            let mut c = base;
            c[j] = t;
            self.log_slice(s, &mut c, level + 1, free)
        };
        log_integral(&g, 0.0, INNER_PANELS).unwrap_or(f64::NEG_INFINITY)
    }
}

/// `log ∫ exp g` for a log-concave `g`, over the range where `g` is within
/// `ORACLE_DROP` of its peak.
fn log_integral<G: Fn(f64) -> f64>(g: &G, start: f64, panels: usize) -> Option<f64> {
    let mut gm = |x: f64| g(x);
    let m = maximize_unimodal(&mut gm, start, 80)?;
    let lo = drop_edge(g, m.x, m.value, -1.0)?;
    let hi = drop_edge(g, m.x, m.value, 1.0)?;
    let f = |x: f64| (g(x) - m.value).exp();
    let h = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let a = lo + h * i as f64;
        total += gk15_panel(&f, a, a + h, 0.0, 0.0, 0.0).integral;
    }
    Some(m.value + total.ln())
}

fn drop_edge<G: Fn(f64) -> f64>(g: &G, mode: f64, peak: f64, dir: f64) -> Option<f64> {
    let mut inside = mode;
    let mut step = 1.0;
    let mut outside = loop {
        let x = mode + dir * step;
        if g(x) < peak - ORACLE_DROP {
            break x;
        }
        inside = x;
        step *= 2.0;
        if step > 1e6 {
            return None;
        }
    };
    for _ in 0..10 {
        let mid = 0.5 * (inside + outside);
        if g(mid) < peak - ORACLE_DROP {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    Some(outside)
}

/// Panel edges plus the 15 Kronrod nodes, ascending.
const PANEL_POINTS: usize = 17;

fn panel_points(a: f64, b: f64) -> [f64; PANEL_POINTS] {
    let mut out = [0.0; PANEL_POINTS];
    out[0] = a;
    out[1..16].copy_from_slice(&gk15_nodes(a, b));
    out[16] = b;
    out
}

/// Barycentric weights of `panel_points(-1, 1)`; affine maps only rescale
/// them, which cancels in the barycentric formula.
fn barycentric_weights() -> [f64; PANEL_POINTS] {
    let t = panel_points(-1.0, 1.0);
    let mut w = [1.0; PANEL_POINTS];
    for j in 0..PANEL_POINTS {
        for k in 0..PANEL_POINTS {
            if k != j {
                w[j] /= t[j] - t[k];
            }
        }
    }
    w
}

fn barycentric(x: f64, nodes: &[f64; PANEL_POINTS], vals: &[f64; PANEL_POINTS], w: &[f64; PANEL_POINTS]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..PANEL_POINTS {
        let d = x - nodes[j];
        if d == 0.0 {
            return vals[j];
        }
        let c = w[j] / d;
        num += c * vals[j];
        den += c;
    }
    num / den
}

impl KernelMarginal {
    pub fn new(mults: &[usize], coeffs: &[f64]) -> Result<Self> {
        let dim = mults.len().saturating_sub(1);
        if dim == 0 || dim > MAX_DIM || coeffs.len() != dim {
            return Err(Error::Dimension(format!(
                "kernel marginal needs 1..={MAX_DIM} coefficients matching the strata, got {} for L = {}",
                coeffs.len(),
                mults.len()
            )));
        }
        let pivot = coeffs
            .iter()
            .position(|&c| c != 0.0)
            .ok_or_else(|| Error::Config("coefficient vector is zero".into()))?;
        let mut c = [0.0; MAX_DIM];
        c[..dim].copy_from_slice(coeffs);
        let setup = MarginalSetup {
            mults,
            coeffs: c,
            pivot,
            dim,
        };
        let free = setup.free();
        let log_marg = |s: f64| setup.log_slice(s, &mut [0.0; MAX_DIM], 0, &free);

        let mut lm = |s: f64| log_marg(s);
        let m = maximize_unimodal(&mut lm, 0.0, 80)
            .ok_or_else(|| Error::ModeSearchFailure("kernel marginal has no mode".into()))?;
        let lo = drop_edge(&log_marg, m.x, m.value, -1.0)
            .ok_or_else(|| Error::QuadratureFailure("marginal range unbounded".into()))?;
        let hi = drop_edge(&log_marg, m.x, m.value, 1.0)
            .ok_or_else(|| Error::QuadratureFailure("marginal range unbounded".into()))?;
        let h = (hi - lo) / OUTER_PANELS as f64;
        let weights = barycentric_weights();
        let mut knots = Vec::with_capacity(OUTER_PANELS + 1);
        let mut cdf = Vec::with_capacity(OUTER_PANELS + 1);
        let mut values = Vec::with_capacity(OUTER_PANELS);
        let mut acc = 0.0;
        knots.push(lo);
        cdf.push(0.0);
        for i in 0..OUTER_PANELS {
            let a = lo + h * i as f64;
            let b = if i + 1 == OUTER_PANELS { hi } else { a + h };
            let nodes = panel_points(a, b);
            let vals = nodes.map(|s| (log_marg(s) - m.value).exp());
            let interp = |x: f64| barycentric(x, &nodes, &vals, &weights);
            acc += gk15_panel(&interp, a, b, 0.0, 0.0, 0.0).integral;
            knots.push(b);
            cdf.push(acc);
            values.push(vals);
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        for v in values.iter_mut() {
            for x in v.iter_mut() {
                *x /= acc;
            }
        }
        Ok(Self {
            knots,
            cdf,
            values,
            weights,
        })
    }

    /// Integral of the degree-16 interpolant on the panel containing `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x <= self.knots[0] {
            return 0.0;
        }
        if x >= self.knots[n - 1] {
            return 1.0;
        }
        let i = self.knots.partition_point(|&k| k <= x) - 1;
        let a = self.knots[i];
        let nodes = panel_points(a, self.knots[i + 1]);
        let interp = |t: f64| barycentric(t, &nodes, &self.values[i], &self.weights);
        let part = gk15_panel(&interp, a, x, 0.0, 0.0, 0.0).integral;
        (self.cdf[i] + part).clamp(0.0, 1.0)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }
}

/// Draws of `c·w` with `w_ℓ = log((V_ℓ/r_ℓ)/(V_L/r_L))`, `V_ℓ ~ χ²(r_ℓ)`.
pub fn mc_linear_samples(mults: &[usize], coeffs: &[f64], n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if mults.len() != coeffs.len() + 1 {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} strata",
            coeffs.len(),
            mults.len()
        )));
    }
    let chis = mults
        .iter()
        .map(|&r| ChiSquared::new(r as f64).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let r_last = *mults.last().unwrap() as f64;
    let last = chis.len() - 1;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let den = (chis[last].sample(rng) / r_last).ln();
        let mut s = 0.0;
        for (l, &c) in coeffs.iter().enumerate() {
            let num = (chis[l].sample(rng) / mults[l] as f64).ln();
            s += c * (num - den);
        }
        out.push(s);
    }
    Ok(out)
}

/// KS test of Monte Carlo draws of `c·w` against the kernel marginal.
pub fn density_ks(mults: &[usize], coeffs: &[f64], draws: usize, seed: u64) -> Result<KsResult> {
    let marginal = KernelMarginal::new(mults, coeffs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = mc_linear_samples(mults, coeffs, draws, &mut rng)?;
    Ok(ks_test(&xs, |x| marginal.cdf(x)))
}

/// Largest change in `pl` under each transformation that must leave it fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub instances: usize,
    pub evaluations: usize,
    pub basis: f64,
    pub rotation: f64,
    pub scale: f64,
}

impl InvarianceReport {
    pub fn max(&self) -> f64 {
        self.basis.max(self.rotation).max(self.scale)
    }
}

/// Haar-ish random orthogonal matrix from the QR of a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random unbalanced design with an intercept and one covariate, a random
/// positive semidefinite `A`, and a Gaussian response.
fn random_instance(rng: &mut ChaCha8Rng) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let groups = rng.random_range(3..=5);
    let sizes: Vec<usize> = (0..groups).map(|_| rng.random_range(1..=5)).collect();
    let n: usize = sizes.iter().sum::<usize>() + 3;
    let mut x = DMatrix::from_element(n, 2, 1.0);
    for i in 0..n {
        x[(i, 1)] = rng.sample::<f64, _>(StandardNormal);
    }
    let mut z = DMatrix::zeros(n, groups);
    let mut row = 0;
    for (g, &m) in sizes.iter().enumerate() {
        for _ in 0..m {
            z[(row, g)] = 1.0;
            row += 1;
        }
    }
    // trailing rows load on random groups so every row has an effect
    for i in row..n {
        z[(i, rng.random_range(0..groups))] = 1.0;
    }
    let b = DMatrix::from_fn(groups, groups, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = &b * b.transpose();
    let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (y, x, z, a)
}

/// Compare `pl` on a small grid under a change of residual basis, an
/// orthogonal rotation of the conditioning rows and a rescaling of `y`.
pub fn invariance_check(instances: usize, seed: u64, opts: &PlOptions) -> Result<InvarianceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rhos = [0.0, 0.15, 0.4, 0.7, 0.95];
    let mut report = InvarianceReport {
        instances,
        evaluations: 0,
        basis: 0.0,
        rotation: 0.0,
        scale: 0.0,
    };
    for _ in 0..instances {
        let (y, x, z, a) = random_instance(&mut rng);
        let k = build_residual_projector(&x)?;
        let q = random_orthogonal(k.ncols(), &mut rng);
        let base = ModelReducer::with_residual_basis(k.clone(), &z, &a, None)?;
        let turned = ModelReducer::with_residual_basis(&k * q, &z, &a, None)?;
        let c = 10f64.powf(rng.random_range(-2.0..2.0));
        let r0 = base.reduce(&y)?;
        let r1 = turned.reduce(&y)?;
        let r2 = base.reduce(&(&y * c))?;
        if r0.lambdas.len() != r1.lambdas.len() {
            return Err(Error::Numerical("eigen clustering changed under a basis change".into()));
        }
        let dim = r0.lambdas.len() - 1;
        let rot = random_orthogonal(dim.saturating_sub(1), &mut rng);
        for &rho in &rhos {
            let pl = |red: &crate::model_reduction::EigenReduction| -> Result<f64> {
                let ctx = AssociationContext::new(rho, &red.lambdas, &red.ratio_x, opts.rho_max)?;
                Ok(pl_from_context(&ctx, red.t_stat, &red.mults, &opts.law)?.pl)
            };
            let p0 = pl(&r0)?;
            report.basis = report.basis.max((pl(&r1)? - p0).abs());
            report.scale = report.scale.max((pl(&r2)? - p0).abs());
            let ctx = AssociationContext::new(rho, &r0.lambdas, &r0.ratio_x, opts.rho_max)?;
            let p_rot = pl_from_context(&ctx.rotated(&rot)?, r0.t_stat, &r0.mults, &opts.law)?.pl;
            report.rotation = report.rotation.max((p_rot - p0).abs());
            report.evaluations += 4;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::Normal;

    #[test]
    fn kolmogorov_tail_reference_points() {
        // classic critical values of the limiting distribution
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-3);
        assert!((kolmogorov_survival(1.2239) - 0.10).abs() < 1e-3);
        // the two series agree where they switch
        let a = kolmogorov_survival(1.1799);
        let b = kolmogorov_survival(1.1801);
        assert!(a > b && a - b < 2e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_accepts_matching_and_rejects_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..4000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = Normal::new(0.0, 1.0).unwrap();
        assert!(ks_test(&xs, |x| norm.cdf(x)).passes(0.01));
        let shifted = Normal::new(0.1, 1.0).unwrap();
        assert!(!ks_test(&xs, |x| shifted.cdf(x)).passes(0.01));
    }

    #[test]
    fn ks_statistic_by_hand() {
        // sorted sample 0.1, 0.5, 0.9 under U(0,1): max of i/n − x and x − (i−1)/n
        let r = ks_uniform(&[0.9, 0.1, 0.5]);
        assert!((r.statistic - (0.5 - 1.0 / 3.0f64).max(0.1).max(1.0 / 3.0 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn one_dimensional_marginal_is_log_f() {
        for (r1, r2) in [(2, 4), (1, 10), (5, 37)] {
            let m = KernelMarginal::new(&[r1, r2], &[1.0]).unwrap();
            let f = FisherSnedecor::new(r1 as f64, r2 as f64).unwrap();
            let (lo, hi) = m.support();
            let mut worst: f64 = 0.0;
            for i in 0..=400 {
                let v = lo + (hi - lo) * i as f64 / 400.0;
                worst = worst.max((m.cdf(v) - f.cdf(v.exp())).abs());
            }
            assert!(worst < 1e-8, "({r1},{r2}) {worst}");
        }
    }

    #[test]
    fn nested_marginal_of_one_coordinate_is_log_f() {
        // with three strata the first ratio alone is F(r₁, r_L)
        let m = KernelMarginal::new(&[1, 1, 10], &[1.0, 0.0]).unwrap();
        let f = FisherSnedecor::new(1.0, 10.0).unwrap();
        for v in [-8.0, -3.0, -1.0, 0.0, 0.7, 2.0, 4.0] {
            assert!(
                (m.cdf(v) - f.cdf(f64::exp(v))).abs() < 1e-8,
                "{v} {} {}",
                m.cdf(v),
                f.cdf(f64::exp(v))
            );
        }
        let m = KernelMarginal::new(&[2, 3, 9], &[0.0, 1.0]).unwrap();
        let f = FisherSnedecor::new(3.0, 9.0).unwrap();
        for v in [-4.0, -1.0, 0.0, 1.5, 3.0] {
            assert!(
                (m.cdf(v) - f.cdf(f64::exp(v))).abs() < 1e-8,
                "{v} {} {}",
                m.cdf(v),
                f.cdf(f64::exp(v))
            );
        }
    }

    #[test]
    fn sampler_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs = mc_linear_samples(&[5, 37], &[1.0], 20_000, &mut rng).unwrap();
        let f = FisherSnedecor::new(5.0, 37.0).unwrap();
        assert!(ks_test(&xs, |v| f.cdf(v.exp())).passes(0.01));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - log_f_mean(5, 37)).abs() < 0.02);
    }

    #[test]
    fn log_f_mean_matches_quadrature() {
        let f = FisherSnedecor::new(2.0, 4.0).unwrap();
        use statrs::distribution::Continuous;
        // ∫ v e^v p(e^v) dv by trapezoid on a wide grid
        let (lo, hi, n) = (-60.0, 40.0, 400_000);
        let h = (hi - lo) / n as f64;
        let s: f64 = (0..=n)
            .map(|i| {
                let v = lo + h * i as f64;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * v * (v + f.ln_pdf(v.exp())).exp()
            })
            .sum();
        assert!((s * h - log_f_mean(2, 4)).abs() < 1e-8);
    }

    #[test]
    fn marginal_rejects_bad_shapes() {
        assert!(KernelMarginal::new(&[1, 1, 1, 1, 10], &[1.0; 4]).is_err());
        assert!(KernelMarginal::new(&[1, 10], &[0.0]).is_err());
        assert!(KernelMarginal::new(&[1, 1, 10], &[1.0]).is_err());
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_orthogonal(5, &mut rng);
        assert!((q.transpose() * &q - DMatrix::identity(5, 5)).amax() < 1e-12);
        assert_eq!(random_orthogonal(0, &mut rng).nrows(), 0);
    }

    #[test]
    fn closed_form_small_case() {
        let r = closed_form_two_strata(2, 4, &LawOptions::default()).unwrap();
        assert!(r.cdf_sup_error < 1e-6, "{r:?}");
        assert!(r.mu_error < 1e-6, "{r:?}");
    }
}
