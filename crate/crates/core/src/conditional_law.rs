//! Conditional distribution of `V = Σ log U_ℓ` given `M log U = h`, where `U`
//! is multivariate-F: `U_ℓ = (V_ℓ/r_ℓ)/(V_L/r_L)` with independent
//! `V_ℓ ~ χ²(r_ℓ)`.
//!
//! Given `(v, h)` the log-coordinates `w = log u` lie on a line
//! `w(v) = w₀ + v·d`, so the conditional density of `V` is the joint density
//! of `W` restricted to that line. It is log-concave with exponential tails,
//! which the mode search, the domain rule and the panel quadrature rely on.
//!
//! The law is tabulated as a cumulative grid (normalizing constant, mean and
//! CDF knots) and evaluated by monotone piecewise-cubic Hermite interpolation
//! whose knot slopes are the exact density values.

use nalgebra::{DMatrix, DVector};

use crate::association::AssociationContext;
use crate::error::{Error, Result};
use crate::quadrature::{gk15_panel, maximize_unimodal};

/// Log-density drop that defines the truncated integration domain.
pub const TAIL_DROP: f64 = 40.0;
/// Minimum number of CDF knots.
pub const MIN_KNOTS: usize = 512;
/// Density-evaluation budget per law.
pub const EVAL_BUDGET: usize = 1_000_000;

const INITIAL_HALF_WIDTH: f64 = 8.0;
const MAX_HALF_WIDTH: f64 = 1e6;
const MAX_SPLIT_DEPTH: u32 = 40;

/// Numerical settings for [`build_law`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawOptions {
    /// Relative tolerance for the normalizing constant and mean, in `(0, 1e-4]`.
    pub quad_tol: f64,
    /// Tolerance for the CDF interpolation error, relative to total mass.
    pub cdf_tol: f64,
}

impl Default for LawOptions {
    fn default() -> Self {
        Self {
            quad_tol: 1e-9,
            cdf_tol: 1e-9,
        }
    }
}

impl LawOptions {
    pub fn with_quad_tol(quad_tol: f64) -> Self {
        Self {
            quad_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quad_tol > 0.0 && self.quad_tol <= 1e-4) {
            return Err(Error::Config(format!(
                "quad_tol = {} must lie in (0, 1e-4]",
                self.quad_tol
            )));
        }
        if !(self.cdf_tol > 0.0 && self.cdf_tol <= 1e-4) {
            return Err(Error::Config(format!(
                "cdf_tol = {} must lie in (0, 1e-4]",
                self.cdf_tol
            )));
        }
        Ok(())
    }
}

/// Unnormalized log-density of the multivariate-F vector `u` (length `L−1`):
/// `Σ (r_ℓ/2 − 1) log u_ℓ − (ν/2) log(1 + Σ (r_ℓ/r_L) u_ℓ)`, `ν = Σ r_ℓ`.
pub fn log_density_u(u: &[f64], mults: &[usize]) -> Result<f64> {
    if mults.len() != u.len() + 1 {
        return Err(Error::Dimension(format!(
            "{} coordinates for {} strata",
            u.len(),
            mults.len()
        )));
    }
    if let Some(x) = u.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("multivariate-F coordinate {x} is not positive")));
    }
    let r_last = *mults.last().unwrap() as f64;
    let nu: f64 = mults.iter().map(|&r| r as f64).sum();
    let mut lin = 0.0;
    let mut acc = 0.0;
    for (&ul, &r) in u.iter().zip(mults) {
        let r = r as f64;
        lin += (0.5 * r - 1.0) * ul.ln();
        acc += r / r_last * ul;
    }
    Ok(lin - 0.5 * nu * acc.ln_1p())
}

/// Solve `1ᵀw = v`, `M w = h` for `w`.
pub fn solve_w(v: f64, h: &DVector<f64>, m: &DMatrix<f64>) -> Result<DVector<f64>> {
    LogLinearMap::new(m)?.solve(v, h)
}

/// LU factorization of the stacked matrix `[1ᵀ; M]`.
#[derive(Debug, Clone)]
pub struct LogLinearMap {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    dim: usize,
}

impl LogLinearMap {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let dim = m.ncols();
        if dim == 0 || m.nrows() + 1 != dim {
            return Err(Error::Dimension(format!(
                "M must be (d-1) x d, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut a = DMatrix::zeros(dim, dim);
        a.row_mut(0).fill(1.0);
        a.rows_mut(1, dim - 1).copy_from(m);
        let scale = a.amax();
        let lu = a.lu();
        let diag_min = lu.u().diagonal().iter().fold(f64::INFINITY, |acc, d| acc.min(d.abs()));
        if !(diag_min > 1e-12 * scale) {
            return Err(Error::SingularTransform(
                "[1; M] is singular; 1 is orthogonal to g".into(),
            ));
        }
        Ok(Self { lu, dim })
    }

    pub fn solve(&self, v: f64, h: &DVector<f64>) -> Result<DVector<f64>> {
        if h.len() + 1 != self.dim {
            return Err(Error::Dimension(format!(
                "h has length {}, expected {}",
                h.len(),
                self.dim - 1
            )));
        }
        let mut rhs = DVector::zeros(self.dim);
        rhs[0] = v;
        rhs.rows_mut(1, self.dim - 1).copy_from(h);
        self.lu
            .solve(&rhs)
            .ok_or_else(|| Error::SingularTransform("linear solve failed".into()))
    }
}

/// Unnormalized conditional log-density of `V` at `v`:
/// `log_density_u(exp w) + Σ w_ℓ` with `w` from [`solve_w`].
pub fn log_q(v: f64, ctx: &AssociationContext, mults: &[usize]) -> Result<f64> {
    let w = solve_w(v, &ctx.h, &ctx.m)?;
    let u: Vec<f64> = w.iter().map(|x| x.exp()).collect();
    Ok(log_density_u(&u, mults)? + w.sum())
}

/// Fast evaluator of `log q(v)` along the conditioning line.
///
/// `log q(v) = a₀ + a₁ v − (ν/2) log(1 + Σ exp(z_ℓ + v d_ℓ))`, with
/// `z_ℓ = w₀_ℓ + log(r_ℓ/r_L)`.
#[derive(Debug, Clone)]
pub struct LineDensity {
    offset: Vec<f64>,
    dir: Vec<f64>,
    lin0: f64,
    lin1: f64,
    half_nu: f64,
}

impl LineDensity {
    pub fn new(ctx: &AssociationContext, mults: &[usize]) -> Result<Self> {
        let dim = ctx.dim();
        if mults.len() != dim + 1 {
            return Err(Error::Dimension(format!(
                "{} multiplicities for {} ratio coordinates",
                mults.len(),
                dim
            )));
        }
        if mults.contains(&0) {
            return Err(Error::Domain("multiplicities must be positive".into()));
        }
        let map = LogLinearMap::new(&ctx.m)?;
        let base = map.solve(0.0, &ctx.h)?;
        let dir = map.solve(1.0, &DVector::zeros(dim - 1))?;
        let r_last = mults[dim] as f64;
        let half_r: Vec<f64> = mults[..dim].iter().map(|&r| 0.5 * r as f64).collect();
        let lin0 = half_r.iter().zip(base.iter()).map(|(a, b)| a * b).sum();
        let lin1 = half_r.iter().zip(dir.iter()).map(|(a, b)| a * b).sum();
        let offset = base
            .iter()
            .zip(&mults[..dim])
            .map(|(w, &r)| w + (r as f64 / r_last).ln())
            .collect();
        Ok(Self {
            offset,
            dir: dir.iter().copied().collect(),
            lin0,
            lin1,
            half_nu: 0.5 * mults.iter().map(|&r| r as f64).sum::<f64>(),
        })
    }

    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        let mut mx: f64 = 0.0;
        for (o, d) in self.offset.iter().zip(&self.dir) {
            mx = mx.max(o + v * d);
        }
        let mut acc = (-mx).exp();
        for (o, d) in self.offset.iter().zip(&self.dir) {
            acc += (o + v * d - mx).exp();
        }
        self.lin0 + self.lin1 * v - self.half_nu * (mx + acc.ln())
    }

    /// Second derivative of `log q` at `v` (always ≤ 0).
    pub fn curvature(&self, v: f64) -> f64 {
        let mut mx: f64 = 0.0;
        for (o, d) in self.offset.iter().zip(&self.dir) {
            mx = mx.max(o + v * d);
        }
        let mut z = (-mx).exp();
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (o, d) in self.offset.iter().zip(&self.dir) {
            let p = (o + v * d - mx).exp();
            z += p;
            s1 += p * d;
            s2 += p * d * d;
        }
        let m1 = s1 / z;
        -self.half_nu * (s2 / z - m1 * m1)
    }
}

/// One interpolation panel `[start, start + width]`, masses normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Panel {
    start: f64,
    width: f64,
    /// CDF at `start`.
    cdf_left: f64,
    /// Survival function at `start + width`.
    sf_right: f64,
    mass: f64,
    /// Density slopes used by the Hermite cubic at each end.
    slope_left: f64,
    slope_right: f64,
}

impl Panel {
    /// `∫_start^{start + t·width}` of the interpolated density.
    fn partial(&self, t: f64) -> f64 {
        let (da, db) = (self.slope_left, self.slope_right);
        let c = 6.0 * (self.mass / self.width - 0.5 * (da + db));
        let t2 = t * t;
        self.width * (da * (t - 0.5 * t2) + db * 0.5 * t2 + c * (0.5 * t2 - t2 * t / 3.0))
    }

    /// `∫_{start + t·width}^{end}` of the interpolated density.
    fn partial_upper(&self, t: f64) -> f64 {
        let (da, db) = (self.slope_left, self.slope_right);
        let c = 6.0 * (self.mass / self.width - 0.5 * (da + db));
        let s = 1.0 - t;
        let t2 = t * t;
        self.width * (da * 0.5 * s * s + db * 0.5 * (1.0 - t2) + c * (1.0 / 6.0 - 0.5 * t2 + t2 * t / 3.0))
    }
}

/// Fritsch–Carlson limiter on end slopes so the cubic stays monotone.
fn limit_slopes(mass: f64, width: f64, fa: f64, fb: f64) -> (f64, f64) {
    let secant = mass / width;
    if !(secant > 0.0) {
        return (0.0, 0.0);
    }
    let (a, b) = (fa / secant, fb / secant);
    let r2 = a * a + b * b;
    if r2 > 9.0 {
        let tau = 3.0 / r2.sqrt();
        (tau * fa, tau * fb)
    } else {
        (fa, fb)
    }
}

/// Tabulated conditional law of `V` given `h` at one `ρ`.
#[derive(Debug, Clone)]
pub struct ConditionalLaw {
    pub rho: f64,
    pub h: Vec<f64>,
    pub mults: Vec<usize>,
    /// `log ∫ q(v) dv` over the truncated domain.
    pub log_norm_const: f64,
    /// Conditional mean `μ_ρ`.
    pub mu: f64,
    pub mode: f64,
    pub quad_tol: f64,
    /// Density evaluations spent building the law.
    pub evaluations: usize,
    /// Truncated domain `[lo, hi]`.
    pub domain: (f64, f64),
    panels: Vec<Panel>,
    line: LineDensity,
    log_peak: f64,
}

/// Build the conditional law for the association at `ctx.rho`.
pub fn build_law(ctx: &AssociationContext, mults: &[usize], opts: &LawOptions) -> Result<ConditionalLaw> {
    opts.validate()?;
    let line = LineDensity::new(ctx, mults)?;
    let mut evaluations = 0usize;

    let mut lq = |v: f64| line.eval(v);
    let peak = maximize_unimodal(&mut lq, 0.0, 60)
        .ok_or_else(|| Error::ModeSearchFailure(format!("no bracket for the mode at rho = {}", ctx.rho)))?;
    evaluations += peak.evaluations;
    let mode = peak.x;
    let log_peak = peak.value;

    let mut half = INITIAL_HALF_WIDTH;
    loop {
        evaluations += 2;
        let lo = line.eval(mode - half);
        let hi = line.eval(mode + half);
        if lo < log_peak - TAIL_DROP && hi < log_peak - TAIL_DROP {
            break;
        }
        half *= 2.0;
        if half > MAX_HALF_WIDTH {
            return Err(Error::ModeSearchFailure(format!(
                "log-density does not decay at rho = {}",
                ctx.rho
            )));
        }
    }
    let (lo, hi) = (mode - half, mode + half);

    let density = |v: f64| (line.eval(v) - log_peak).exp();
    let raw = integrate_panels(&density, lo, hi, mode, opts, &mut evaluations)?;

    let total: f64 = raw.iter().map(|p| p.integral).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::QuadratureFailure(format!(
            "normalizing constant {total} at rho = {}",
            ctx.rho
        )));
    }
    let moment: f64 = raw.iter().map(|p| p.moment).sum();

    let mut panels = Vec::with_capacity(raw.len());
    let mut cum = 0.0;
    for p in &raw {
        let mass = p.integral / total;
        let (sa, sb) = limit_slopes(mass, p.width, p.fa / total, p.fb / total);
        panels.push(Panel {
            start: p.start,
            width: p.width,
            cdf_left: cum,
            sf_right: 0.0,
            mass,
            slope_left: sa,
            slope_right: sb,
        });
        cum += mass;
    }
    let mut tail = 0.0;
    for p in panels.iter_mut().rev() {
        p.sf_right = tail;
        tail += p.mass;
    }

    Ok(ConditionalLaw {
        rho: ctx.rho,
        h: ctx.h.iter().copied().collect(),
        mults: mults.to_vec(),
        log_norm_const: log_peak + total.ln(),
        mu: mode + moment / total,
        mode,
        quad_tol: opts.quad_tol,
        evaluations,
        domain: (lo, hi),
        panels,
        line,
        log_peak,
    })
}

#[derive(Debug, Clone, Copy)]
struct RawPanel {
    start: f64,
    width: f64,
    integral: f64,
    moment: f64,
    fa: f64,
    fb: f64,
}

/// Adaptive composite Gauss–Kronrod over `[lo, hi]`: at least `MIN_KNOTS`
/// uniform panels, each bisected until both its quadrature error and its
/// Hermite-interpolation error are within tolerance.
fn integrate_panels<F: Fn(f64) -> f64>(
    density: &F,
    lo: f64,
    hi: f64,
    shift: f64,
    opts: &LawOptions,
    evaluations: &mut usize,
) -> Result<Vec<RawPanel>> {
    let n0 = MIN_KNOTS;
    let width = (hi - lo) / n0 as f64;
    let f = |v: f64| density(v);
    let knots: Vec<f64> = (0..=n0)
        .map(|i| if i == n0 { hi } else { lo + width * i as f64 })
        .collect();
    let fk: Vec<f64> = knots.iter().map(|&v| f(v)).collect();
    *evaluations += n0 + 1;

    let mut first = Vec::with_capacity(n0);
    for i in 0..n0 {
        let (a, b) = (knots[i], knots[i + 1]);
        first.push((a, b, fk[i], fk[i + 1], gk15_panel(&f, a, b, fk[i], fk[i + 1], shift)));
    }
    *evaluations += 15 * n0;
    let z0: f64 = first.iter().map(|p| p.4.integral).sum();
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(Error::QuadratureFailure(format!("initial mass estimate {z0}")));
    }
    let span = hi - lo;
    let quad_allow = opts.quad_tol * z0 / span;
    let cdf_allow = opts.cdf_tol * z0;

    let mut out = Vec::with_capacity(n0 + n0 / 4);
    // depth-first stack of panels awaiting acceptance, in reverse order
    let mut stack = Vec::new();
    for (a, b, fa, fb, gk) in first {
        stack.push((a, b, fa, fb, gk, 0u32));
        while let Some((a, b, fa, fb, gk, depth)) = stack.pop() {
            let w = b - a;
            let ok = gk.error <= quad_allow * w && gk.quad_dev * w <= cdf_allow;
            if ok || depth >= MAX_SPLIT_DEPTH {
                if !ok {
                    return Err(Error::QuadratureFailure(format!("panel [{a}, {b}] did not converge")));
                }
                out.push(RawPanel {
                    start: a,
                    width: w,
                    integral: gk.integral,
                    moment: gk.first_moment,
                    fa,
                    fb,
                });
                continue;
            }
            let m = 0.5 * (a + b);
            let fm = f(m);
            let left = gk15_panel(&f, a, m, fa, fm, shift);
            let right = gk15_panel(&f, m, b, fm, fb, shift);
            *evaluations += 31;
            if *evaluations > EVAL_BUDGET {
                return Err(Error::QuadratureFailure(format!(
                    "evaluation budget {EVAL_BUDGET} exhausted"
                )));
            }
            stack.push((m, b, fm, fb, right, depth + 1));
            stack.push((a, m, fa, fm, left, depth + 1));
        }
    }
    Ok(out)
}

impl ConditionalLaw {
    fn locate(&self, v: f64) -> Option<(usize, f64)> {
        let (lo, hi) = self.domain;
        if !(v > lo) || !(v < hi) {
            return None;
        }
        let idx = self.panels.partition_point(|p| p.start <= v).saturating_sub(1);
        let p = &self.panels[idx];
        Some((idx, ((v - p.start) / p.width).clamp(0.0, 1.0)))
    }

    /// Conditional CDF of `V`.
    pub fn cdf(&self, v: f64) -> f64 {
        if v.is_nan() {
            return f64::NAN;
        }
        match self.locate(v) {
            Some((i, t)) => {
                let p = &self.panels[i];
                (p.cdf_left + p.partial(t)).clamp(0.0, 1.0)
            }
            None if v <= self.domain.0 => 0.0,
            None => 1.0,
        }
    }

    /// `1 − CDF(v)`, computed from the right-hand cumulative sums.
    pub fn sf(&self, v: f64) -> f64 {
        if v.is_nan() {
            return f64::NAN;
        }
        match self.locate(v) {
            Some((i, t)) => {
                let p = &self.panels[i];
                (p.sf_right + p.partial_upper(t)).clamp(0.0, 1.0)
            }
            None if v <= self.domain.0 => 1.0,
            None => 0.0,
        }
    }

    /// Normalized conditional density.
    pub fn density(&self, v: f64) -> f64 {
        (self.line.eval(v) - self.log_norm_const).exp()
    }

    /// Unnormalized log-density along the conditioning line.
    pub fn log_q(&self, v: f64) -> f64 {
        self.line.eval(v)
    }

    /// Distribution function of `|V − μ|`: `CDF(μ + t) − CDF(μ − t)`.
    pub fn cdf_abs(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        (1.0 - self.abs_survival(t)).clamp(0.0, 1.0)
    }

    /// `P(|V − μ| ≥ t) = CDF(μ − t) + SF(μ + t)`, accurate in the tails.
    pub fn abs_survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (self.cdf(self.mu - t) + self.sf(self.mu + t)).clamp(0.0, 1.0)
    }

    /// Inverse CDF by panel search and bisection within the panel.
    pub fn quantile(&self, q: f64) -> f64 {
        if !(q > 0.0) {
            return self.domain.0;
        }
        if !(q < 1.0) {
            return self.domain.1;
        }
        let idx = self
            .panels
            .partition_point(|p| p.cdf_left + p.mass < q)
            .min(self.panels.len() - 1);
        let p = &self.panels[idx];
        let target = q - p.cdf_left;
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..64 {
            let m = 0.5 * (a + b);
            if p.partial(m) < target {
                a = m;
            } else {
                b = m;
            }
        }
        p.start + 0.5 * (a + b) * p.width
    }

    /// CDF knots `(v_k, C(v_k))`, including both domain ends.
    pub fn knots(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.panels.iter().map(|p| (p.start, p.cdf_left)).collect();
        out.push((self.domain.1, 1.0));
        out
    }

    pub fn num_knots(&self) -> usize {
        self.panels.len() + 1
    }

    /// Log-density at the mode (unnormalized).
    pub fn log_peak(&self) -> f64 {
        self.log_peak
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::{AssociationContext, DEFAULT_RHO_MAX};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};

    fn two_strata(r1: usize, r2: usize) -> (AssociationContext, Vec<usize>) {
        let ctx = AssociationContext::new(0.3, &[2.0, 0.0], &[1.3], DEFAULT_RHO_MAX).unwrap();
        (ctx, vec![r1, r2])
    }

    #[test]
    fn kernel_exponent_vanishes_for_two_df() {
        let a = log_density_u(&[1e-300, 2.0], &[2, 3, 5]).unwrap();
        let b = log_density_u(&[1e-10, 2.0], &[2, 3, 5]).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!(matches!(log_density_u(&[0.0, 1.0], &[2, 3, 5]), Err(Error::Domain(_))));
    }

    #[test]
    fn solve_w_cases() {
        let w = solve_w(1.7, &DVector::zeros(0), &DMatrix::zeros(0, 1)).unwrap();
        assert_eq!(w.as_slice(), &[1.7]);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = DMatrix::from_row_slice(1, 2, &[s, -s]);
        let w = solve_w(0.0, &DVector::from_vec(vec![0.0]), &m).unwrap();
        assert!(w.amax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..3.0)).collect();
        let m = crate::association::complement_rows(&g).unwrap();
        let h = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        let w = solve_w(0.9, &h, &m).unwrap();
        assert!((w.sum() - 0.9).abs() < 1e-10);
        assert!((&m * &w - &h).amax() < 1e-10);
    }

    #[test]
    fn singular_stack_is_reported() {
        // the single row of M is parallel to 1
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(matches!(
            solve_w(0.0, &DVector::zeros(1), &m),
            Err(Error::SingularTransform(_))
        ));
    }

    #[test]
    fn fast_line_matches_reference_log_q() {
        let ctx = AssociationContext::new(0.4, &[4.55, 1.0, 0.0], &[3.0, 0.7], DEFAULT_RHO_MAX).unwrap();
        let mults = [1, 1, 10];
        let line = LineDensity::new(&ctx, &mults).unwrap();
        let shift = line.eval(0.0) - log_q(0.0, &ctx, &mults).unwrap();
        for v in [-20.0, -3.0, -0.1, 0.5, 4.0, 30.0] {
            let slow = log_q(v, &ctx, &mults).unwrap();
            assert!((line.eval(v) - shift - slow).abs() < 1e-10 * slow.abs().max(1.0));
        }
    }

    #[test]
    fn two_strata_log_q_matches_log_f_density() {
        let (ctx, mults) = two_strata(2, 4);
        let f = FisherSnedecor::new(2.0, 4.0).unwrap();
        use statrs::distribution::Continuous;
        // change of variables: density of log F at v is e^v f(e^v)
        let reference = |v: f64| v + f.ln_pdf(v.exp());
        let shift = reference(0.0) - log_q(0.0, &ctx, &mults).unwrap();
        for v in [-5.0, -1.0, 0.3, 2.0, 6.0] {
            let got = log_q(v, &ctx, &mults).unwrap() + shift;
            assert!((got - reference(v)).abs() < 1e-10);
        }
    }

    #[test]
    fn log_q_decays_in_both_tails() {
        let ctx = AssociationContext::new(0.6, &[4.55, 1.0, 0.0], &[2.0, 1.5], DEFAULT_RHO_MAX).unwrap();
        let law = build_law(&ctx, &[1, 1, 10], &LawOptions::default()).unwrap();
        let top = law.log_q(law.mode);
        assert!(law.log_q(law.mode + 50.0) < top - 30.0);
        assert!(law.log_q(law.mode - 100.0) < top - 40.0);
        for v in [-1e4, -100.0, 0.0, 100.0, 1e4] {
            assert!(law.log_q(v).is_finite());
        }
    }

    #[test]
    fn two_strata_mean_matches_independent_trapezoid() {
        let (ctx, mults) = two_strata(2, 4);
        let law = build_law(&ctx, &mults, &LawOptions::default()).unwrap();
        let f = FisherSnedecor::new(2.0, 4.0).unwrap();
        use statrs::distribution::Continuous;
        let dens = |v: f64| (v + f.ln_pdf(v.exp())).exp();
        let (a, b, n) = (-80.0, 40.0, 400_000);
        let h = (b - a) / n as f64;
        let mut z = 0.5 * (dens(a) + dens(b));
        let mut m = 0.5 * (a * dens(a) + b * dens(b));
        for i in 1..n {
            let v = a + h * i as f64;
            z += dens(v);
            m += v * dens(v);
        }
        let mean = m / z;
        assert!((law.mu - mean).abs() < 1e-6, "{} vs {}", law.mu, mean);
    }

    #[test]
    fn two_strata_cdf_matches_f_distribution() {
        let (ctx, mults) = two_strata(2, 4);
        let law = build_law(&ctx, &mults, &LawOptions::default()).unwrap();
        let f = FisherSnedecor::new(2.0, 4.0).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=2000 {
            let v = -15.0 + 25.0 * i as f64 / 2000.0;
            worst = worst.max((law.cdf(v) - f.cdf(v.exp())).abs());
        }
        assert!(worst < 1e-6, "sup error {worst}");
        let t = 1.0;
        let want = f.cdf((law.mu + t).exp()) - f.cdf((law.mu - t).exp());
        assert!((law.cdf_abs(t) - want).abs() < 1e-6);
    }

    #[test]
    fn cdf_quantile_round_trip_and_limits() {
        let ctx = AssociationContext::new(0.2, &[4.55, 1.0, 0.0], &[1.2, 0.4], DEFAULT_RHO_MAX).unwrap();
        let law = build_law(&ctx, &[1, 1, 10], &LawOptions::default()).unwrap();
        assert_eq!(law.cdf(law.domain.0), 0.0);
        assert_eq!(law.cdf(law.domain.1), 1.0);
        for k in 1..10 {
            let q = k as f64 / 10.0;
            assert!((law.cdf(law.quantile(q)) - q).abs() < 1e-6);
        }
        assert_eq!(law.cdf_abs(0.0), 0.0);
        assert!((law.cdf_abs(1e3) - 1.0).abs() < 1e-15);
        assert!(law.num_knots() >= MIN_KNOTS);
        let knots = law.knots();
        assert!(knots.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
    }

    #[test]
    fn cdf_is_monotone_on_fine_grid() {
        let ctx = AssociationContext::new(0.9, &[5.0, 2.5, 1.0, 0.0], &[8.0, 0.3, 2.0], DEFAULT_RHO_MAX).unwrap();
        let law = build_law(&ctx, &[1, 2, 1, 9], &LawOptions::default()).unwrap();
        let (lo, hi) = law.domain;
        let mut prev = 0.0;
        for i in 0..=100_000 {
            let c = law.cdf(lo + (hi - lo) * i as f64 / 100_000.0);
            assert!(c >= prev);
            prev = c;
        }
        let mut prev = 0.0;
        for i in 0..=10_000 {
            let c = law.cdf_abs(i as f64 * 1e-3);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn doubled_domain_keeps_normalizer() {
        let ctx = AssociationContext::new(0.5, &[4.55, 1.0, 0.0], &[2.5, 0.9], DEFAULT_RHO_MAX).unwrap();
        let mults = [1, 1, 10];
        let law = build_law(&ctx, &mults, &LawOptions::default()).unwrap();
        let line = LineDensity::new(&ctx, &mults).unwrap();
        let (lo, hi) = law.domain;
        let half = 0.5 * (hi - lo);
        let dens = |v: f64| (line.eval(v) - law.log_peak()).exp();
        let mut evals = 0;
        let raw = integrate_panels(
            &dens,
            law.mode - 2.0 * half,
            law.mode + 2.0 * half,
            law.mode,
            &LawOptions::default(),
            &mut evals,
        )
        .unwrap();
        let z: f64 = raw.iter().map(|p| p.integral).sum();
        let lnc = law.log_peak() + z.ln();
        assert!((lnc - law.log_norm_const).abs() < 1e-8);
    }

    #[test]
    fn lamb_scale_fixture_builds() {
        let mut lam: Vec<f64> = (0..8).map(|i| 5.09 - (5.09 - 2.0) * i as f64 / 7.0).collect();
        lam.extend((1..=9).map(|k| 2.0 * (1.0 - k as f64 / 10.0)));
        lam.push(0.0);
        let mut mults = vec![1; 18];
        mults[7] = 2;
        mults[17] = 37;
        let x: Vec<f64> = (0..17).map(|i| 0.5 + 0.1 * i as f64).collect();
        let ctx = AssociationContext::new(0.35, &lam, &x, DEFAULT_RHO_MAX).unwrap();
        let law = build_law(&ctx, &mults, &LawOptions::default()).unwrap();
        assert!(law.mu.is_finite());
    }

    #[test]
    fn options_are_validated() {
        let (ctx, mults) = two_strata(2, 4);
        let r = build_law(&ctx, &mults, &LawOptions::with_quad_tol(1e-2));
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
