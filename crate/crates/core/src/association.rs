//! Marginal and conditional association ingredients at a localization point.
//!
//! With `X_ℓ = f_ℓ(ρ) U_ℓ` for `ℓ < L`, the log-linear split
//! `(τ, η_ρ)(u) = ([1ᵀ; M_ρ]) log u` separates a scalar auxiliary variable
//! `V = Σ log U_ℓ` from the conditioning part `η_ρ(U) = M_ρ log U`, where the
//! rows of `M_ρ` span the orthogonal complement of `g(ρ) = ∂ log f / ∂ρ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default upper end of the heritability range.
pub const DEFAULT_RHO_MAX: f64 = 1.0 - 1e-4;

fn check_rho(rho: f64, rho_max: f64) -> Result<()> {
    if !(rho >= 0.0 && rho <= rho_max) {
        return Err(Error::Domain(format!("rho = {rho} outside [0, {rho_max}]")));
    }
    Ok(())
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < 2 {
        return Err(Error::DegenerateModel("need at least two distinct eigenvalues".into()));
    }
    Ok(())
}

fn check_rho_open(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho = {rho} outside [0, 1)")));
    }
    Ok(())
}

/// `f_ℓ(ρ) = (1 + ρ(λ_ℓ − 1)) / (1 + ρ(λ_L − 1))` for `ℓ < L`.
pub fn f_values(rho: f64, lambdas: &[f64]) -> Result<Vec<f64>> {
    check_rho_open(rho)?;
    check_lambdas(lambdas)?;
    let big_l = lambdas.len();
    let denom = 1.0 + rho * (lambdas[big_l - 1] - 1.0);
    Ok(lambdas[..big_l - 1]
        .iter()
        .map(|&l| (1.0 + rho * (l - 1.0)) / denom)
        .collect())
}

/// `φ(ρ) = Σ_{ℓ<L} log f_ℓ(ρ)`.
pub fn phi(rho: f64, lambdas: &[f64]) -> Result<f64> {
    Ok(f_values(rho, lambdas)?.iter().map(|f| f.ln()).sum())
}

/// `g_ℓ(ρ) = ∂/∂ρ log f_ℓ(ρ) = (λ_ℓ − λ_L) / ((1 + ρ(λ_ℓ − 1))(1 + ρ(λ_L − 1)))`.
pub fn g_vector(rho: f64, lambdas: &[f64]) -> Result<Vec<f64>> {
    check_rho_open(rho)?;
    check_lambdas(lambdas)?;
    let big_l = lambdas.len();
    let last = lambdas[big_l - 1];
    let d_last = 1.0 + rho * (last - 1.0);
    Ok(lambdas[..big_l - 1]
        .iter()
        .map(|&l| (l - last) / ((1.0 + rho * (l - 1.0)) * d_last))
        .collect())
}

/// Orthonormal rows spanning the complement of `span{g}` in `R^{L−1}`:
/// rows `2..` of the Householder reflector that maps `g/|g|` onto `∓e_1`.
pub fn complement_rows(g: &[f64]) -> Result<DMatrix<f64>> {
    let d = g.len();
    if d == 0 {
        return Err(Error::Dimension("empty g vector".into()));
    }
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::SingularTransform("g(rho) vanishes".into()));
    }
    let mut v = DVector::from_iterator(d, g.iter().map(|x| x / norm));
    v[0] += if v[0] >= 0.0 { 1.0 } else { -1.0 };
    let vv = v.norm_squared();
    let mut h = DMatrix::<f64>::identity(d, d);
    h.ger(-2.0 / vv, &v, &v, 1.0);
    Ok(h.rows(1, d - 1).clone_owned())
}

/// `M_ρ`, `(L−2) × (L−1)`; empty when `L = 2`.
pub fn conditioning_matrix(rho: f64, lambdas: &[f64]) -> Result<DMatrix<f64>> {
    complement_rows(&g_vector(rho, lambdas)?)
}

/// `h_ρ = M_ρ (log x_ℓ − log f_ℓ(ρ))_{ℓ<L}`.
pub fn conditioning_value(ratio_x: &[f64], f: &[f64], m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if ratio_x.len() != f.len() || m.ncols() != f.len() {
        return Err(Error::Dimension(format!(
            "ratio statistics ({}), f values ({}) and M columns ({}) disagree",
            ratio_x.len(),
            f.len(),
            m.ncols()
        )));
    }
    if let Some(x) = ratio_x.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("ratio statistic {x} is not positive")));
    }
    let resid = DVector::from_iterator(f.len(), ratio_x.iter().zip(f).map(|(x, f)| (x / f).ln()));
    Ok(m * resid)
}

/// Everything the conditional law and the plausibility need at one `ρ`.
#[derive(Debug, Clone)]
pub struct AssociationContext {
    pub rho: f64,
    pub f: Vec<f64>,
    pub phi: f64,
    pub g: Vec<f64>,
    pub m: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl AssociationContext {
    /// Localize at `rho` for observed ratio statistics `ratio_x`.
    pub fn new(rho: f64, lambdas: &[f64], ratio_x: &[f64], rho_max: f64) -> Result<Self> {
        if !(rho_max > 0.0 && rho_max < 1.0) {
            return Err(Error::Config(format!("rho_max = {rho_max} must lie in (0, 1)")));
        }
        check_rho(rho, rho_max)?;
        let f = f_values(rho, lambdas)?;
        let g = g_vector(rho, lambdas)?;
        if g.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::SingularTransform(format!("g({rho}) has a nonpositive entry")));
        }
        let m = complement_rows(&g)?;
        let h = conditioning_value(ratio_x, &f, &m)?;
        let phi = f.iter().map(|v| v.ln()).sum();
        Ok(Self { rho, f, phi, g, m, h })
    }

    /// Number of ratio coordinates, `L − 1`.
    pub fn dim(&self) -> usize {
        self.f.len()
    }

    /// Same conditioning event expressed with rows `Q M` and value `Q h`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Result<Self> {
        if q.nrows() != self.m.nrows() || q.ncols() != self.m.nrows() {
            return Err(Error::Dimension("rotation does not match M".into()));
        }
        Ok(Self {
            m: q * &self.m,
            h: q * &self.h,
            ..self.clone()
        })
    }
}
