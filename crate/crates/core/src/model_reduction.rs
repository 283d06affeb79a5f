//! Reduction of raw mixed-model data `y = Xβ + Zα + ε` to the eigenstructure
//! of `G = KᵀZAZᵀK` and the minimal sufficient statistics `S_1..S_L`.
//!
//! `K` is any orthonormal basis of the residual space of `X`. The quadratic
//! forms `yᵀ K P_ℓ P_ℓᵀ Kᵀ y` only depend on the projector onto each
//! eigenspace, so the statistics do not depend on which basis is used.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for grouping numerically equal eigenvalues.
pub const DEFAULT_CLUSTER_REL_TOL: f64 = 1e-8;

/// Raw model data. `α ~ N(0, σ_α² A)`, `ε ~ N(0, σ_ε² I)`.
#[derive(Debug, Clone)]
pub struct MixedModelSpec {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

impl MixedModelSpec {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, z: DMatrix<f64>, a: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n {
            return Err(Error::Dimension(format!("y has {n} rows but X has {}", x.nrows())));
        }
        if z.nrows() != n {
            return Err(Error::Dimension(format!("y has {n} rows but Z has {}", z.nrows())));
        }
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "A is {}x{}, not square",
                a.nrows(),
                a.ncols()
            )));
        }
        if z.ncols() != a.nrows() {
            return Err(Error::Dimension(format!(
                "Z has {} columns but A is {}x{}",
                z.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        let p = x.ncols();
        if p == 0 {
            return Err(Error::Dimension("X has no columns".into()));
        }
        if p >= n {
            return Err(Error::Dimension(format!("need n > p, got n = {n}, p = {p}")));
        }
        check_psd(&a)?;
        Ok(Self { y, x, z, a })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

fn check_psd(a: &DMatrix<f64>) -> Result<()> {
    let scale = a.amax();
    let tol = 1e-10 * scale;
    if (a - a.transpose()).amax() > tol {
        return Err(Error::Domain("A is not symmetric".into()));
    }
    if a.nrows() == 0 {
        return Ok(());
    }
    let eig = SymmetricEigen::new(a.clone());
    let min = eig.eigenvalues.min();
    if min < -tol {
        return Err(Error::Domain(format!(
            "A is not positive semidefinite (eigenvalue {min:e})"
        )));
    }
    Ok(())
}

/// Distinct eigenvalues `λ_1 > … > λ_L ≥ 0` of `G` with multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenstructure {
    pub lambdas: Vec<f64>,
    pub mults: Vec<usize>,
}

impl Eigenstructure {
    pub fn new(lambdas: Vec<f64>, mults: Vec<usize>) -> Result<Self> {
        let e = Self { lambdas, mults };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.len() != self.mults.len() {
            return Err(Error::Dimension(format!(
                "{} eigenvalues but {} multiplicities",
                self.lambdas.len(),
                self.mults.len()
            )));
        }
        if self.lambdas.len() < 2 {
            return Err(Error::DegenerateModel(
                "fewer than two distinct eigenvalues; the heritability is not identifiable".into(),
            ));
        }
        if self.lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::Order("eigenvalues must be finite".into()));
        }
        if self.lambdas.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Order("eigenvalues must be strictly decreasing".into()));
        }
        if *self.lambdas.last().unwrap() < 0.0 {
            return Err(Error::Order("smallest eigenvalue must be nonnegative".into()));
        }
        if self.mults.contains(&0) {
            return Err(Error::Order("multiplicities must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// `Σ r_ℓ`, which equals `n − p` for a reduced model.
    pub fn total_mult(&self) -> usize {
        self.mults.iter().sum()
    }
}

/// Eigenstructure together with the observed sufficient and ratio statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReduction {
    pub lambdas: Vec<f64>,
    pub mults: Vec<usize>,
    /// `S_ℓ = yᵀ K P_ℓ P_ℓᵀ Kᵀ y`.
    pub s: Vec<f64>,
    /// `X_ℓ = (S_ℓ/r_ℓ)/(S_L/r_L)` for `ℓ < L`.
    pub ratio_x: Vec<f64>,
    /// `T(x) = Σ_{ℓ<L} log X_ℓ`.
    pub t_stat: f64,
}

impl EigenReduction {
    pub fn from_stats(eigen: &Eigenstructure, s: Vec<f64>) -> Result<Self> {
        eigen.validate()?;
        if s.len() != eigen.len() {
            return Err(Error::Dimension(format!(
                "{} sufficient statistics for {} eigenvalues",
                s.len(),
                eigen.len()
            )));
        }
        let (ratio_x, t_stat) = ratio_stats(&s, &eigen.mults)?;
        Ok(Self {
            lambdas: eigen.lambdas.clone(),
            mults: eigen.mults.clone(),
            s,
            ratio_x,
            t_stat,
        })
    }

    pub fn eigenstructure(&self) -> Eigenstructure {
        Eigenstructure {
            lambdas: self.lambdas.clone(),
            mults: self.mults.clone(),
        }
    }

    pub fn num_strata(&self) -> usize {
        self.lambdas.len()
    }
}

/// Numerical rank of `x` from its singular values.
fn numerical_rank(x: &DMatrix<f64>) -> usize {
    let sv = x.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let cutoff = x.nrows().max(x.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Orthonormal basis `K` (n × (n−p)) of the orthogonal complement of the
/// column space of `x`, from a full Householder QR factorization.
pub fn build_residual_projector(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    if p == 0 || p >= n {
        return Err(Error::Dimension(format!("need n > p >= 1, got n = {n}, p = {p}")));
    }
    let rank = numerical_rank(x);
    if rank < p {
        return Err(Error::RankDeficient { rank, p });
    }

    let mut r = x.clone();
    let mut q = DMatrix::<f64>::identity(n, n);
    for j in 0..p {
        let col = r.column(j).rows(j, n - j).clone_owned();
        let norm = col.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = col;
        let alpha = if v[0] >= 0.0 { norm } else { -norm };
        v[0] += alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 == 0.0 {
            continue;
        }
        // R <- H R on rows j.., Q <- Q H on columns j..
        {
            let mut block = r.view_mut((j, j), (n - j, p - j));
            let w = block.tr_mul(&v) * (2.0 / vnorm2);
            block.ger(-1.0, &v, &w, 1.0);
        }
        {
            let mut block = q.view_mut((0, j), (n, n - j));
            let w = &block * &v * (2.0 / vnorm2);
            block.ger(-1.0, &w, &v, 1.0);
        }
    }
    Ok(q.columns(p, n - p).clone_owned())
}

/// Eigenstructure of `G` plus orthonormal eigenvectors for each distinct
/// eigenvalue group.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigen: Eigenstructure,
    /// `P_ℓ`, each `(n−p) × r_ℓ`.
    pub projectors: Vec<DMatrix<f64>>,
}

/// Default absolute clustering tolerance for a matrix whose largest absolute
/// eigenvalue is `lambda_max`.
pub fn default_cluster_tol(lambda_max: f64) -> f64 {
    DEFAULT_CLUSTER_REL_TOL * lambda_max.abs()
}

/// Decompose `G = KᵀZAZᵀK` and group eigenvalues whose gaps are at most
/// `cluster_tol` (absolute; `None` selects `1e-8 × λ_max`).
pub fn eigen_reduce_with_basis(
    k: &DMatrix<f64>,
    z: &DMatrix<f64>,
    a: &DMatrix<f64>,
    cluster_tol: Option<f64>,
) -> Result<EigenDecomposition> {
    if k.nrows() != z.nrows() {
        return Err(Error::Dimension(format!(
            "K has {} rows but Z has {}",
            k.nrows(),
            z.nrows()
        )));
    }
    if z.ncols() != a.nrows() || a.nrows() != a.ncols() {
        return Err(Error::Dimension("Z and A are not conformable".into()));
    }
    let kz = k.tr_mul(z);
    let mut g = &kz * a * kz.transpose();
    g = (&g + g.transpose()) * 0.5;

    let eig = SymmetricEigen::new(g);
    let m = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let lambda_max = eig.eigenvalues.amax();
    let tol = match cluster_tol {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::Config(format!("cluster tolerance must be positive, got {t}"))),
        None => default_cluster_tol(lambda_max),
    };

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &idx in &order {
        match groups.last_mut() {
            Some(g) if eig.eigenvalues[*g.last().unwrap()] - eig.eigenvalues[idx] <= tol => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }

    let mut lambdas = Vec::with_capacity(groups.len());
    let mut mults = Vec::with_capacity(groups.len());
    let mut projectors = Vec::with_capacity(groups.len());
    for g in &groups {
        let mut lam = g.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / g.len() as f64;
        if lam.abs() <= tol {
            lam = 0.0;
        } else if lam < 0.0 {
            return Err(Error::Numerical(format!("G has a negative eigenvalue {lam:e}")));
        }
        lambdas.push(lam);
        mults.push(g.len());
        let cols: Vec<_> = g.iter().map(|&i| eig.eigenvectors.column(i)).collect();
        projectors.push(DMatrix::from_columns(&cols));
    }

    if lambdas.len() < 2 {
        return Err(Error::DegenerateModel(
            "G is proportional to the identity; the heritability is not identifiable".into(),
        ));
    }
    Ok(EigenDecomposition {
        eigen: Eigenstructure { lambdas, mults },
        projectors,
    })
}

/// Eigen-reduce a model using the Householder residual basis.
pub fn eigen_reduce(model: &MixedModelSpec, cluster_tol: Option<f64>) -> Result<EigenDecomposition> {
    let k = build_residual_projector(&model.x)?;
    eigen_reduce_with_basis(&k, &model.z, &model.a, cluster_tol)
}

/// `S_ℓ = yᵀ K P_ℓ P_ℓᵀ Kᵀ y`.
pub fn sufficient_stats(y: &DVector<f64>, k: &DMatrix<f64>, projectors: &[DMatrix<f64>]) -> Result<Vec<f64>> {
    if y.len() != k.nrows() {
        return Err(Error::Dimension(format!(
            "y has {} rows but K has {}",
            y.len(),
            k.nrows()
        )));
    }
    let kty = k.tr_mul(y);
    let s: Vec<f64> = projectors.iter().map(|p| p.tr_mul(&kty).norm_squared()).collect();
    check_stats(&s, kty.norm_squared(), y)?;
    Ok(s)
}

fn check_stats(s: &[f64], residual_ss: f64, y: &DVector<f64>) -> Result<()> {
    let total: f64 = s.iter().sum();
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite sufficient statistic".into()));
    }
    if s.iter().any(|&v| v < -1e-12 * total) {
        return Err(Error::Numerical(
            "negative sufficient statistic (projector defect)".into(),
        ));
    }
    let floor = (f64::EPSILON * y.len() as f64).powi(2) * y.norm_squared();
    if total <= floor {
        return Err(Error::DegenerateData(
            "y lies in the column space of X; all residual sums of squares vanish".into(),
        ));
    }
    if (total - residual_ss).abs() > 1e-8 * residual_ss.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "sufficient statistics sum to {total} but the residual sum of squares is {residual_ss}"
        )));
    }
    Ok(())
}

/// `X_ℓ = (S_ℓ/r_ℓ)/(S_L/r_L)` for `ℓ < L`, and `T = Σ log X_ℓ`.
pub fn ratio_stats(s: &[f64], mults: &[usize]) -> Result<(Vec<f64>, f64)> {
    if s.len() != mults.len() {
        return Err(Error::Dimension(format!(
            "{} statistics for {} multiplicities",
            s.len(),
            mults.len()
        )));
    }
    let big_l = s.len();
    if big_l < 2 {
        return Err(Error::DegenerateModel("need at least two strata".into()));
    }
    let s_last = s[big_l - 1];
    if s_last <= 0.0 {
        return Err(Error::DivisionByZero("last-stratum statistic S_L is zero".into()));
    }
    let denom = s_last / mults[big_l - 1] as f64;
    let mut ratio_x = Vec::with_capacity(big_l - 1);
    for l in 0..big_l - 1 {
        if !(s[l] > 0.0) || !s[l].is_finite() {
            return Err(Error::DegenerateData(format!("S_{} = {} is not positive", l + 1, s[l])));
        }
        ratio_x.push((s[l] / mults[l] as f64) / denom);
    }
    let t_stat = ratio_x.iter().map(|x| x.ln()).sum();
    Ok((ratio_x, t_stat))
}

/// Design-dependent part of the reduction, reusable across response vectors.
#[derive(Debug, Clone)]
pub struct ModelReducer {
    eigen: Eigenstructure,
    /// `K P_ℓ`, each `n × r_ℓ`.
    bases: Vec<DMatrix<f64>>,
    k: DMatrix<f64>,
}

impl ModelReducer {
    pub fn new(x: &DMatrix<f64>, z: &DMatrix<f64>, a: &DMatrix<f64>, cluster_tol: Option<f64>) -> Result<Self> {
        let k = build_residual_projector(x)?;
        Self::with_residual_basis(k, z, a, cluster_tol)
    }

    /// Use a caller-supplied orthonormal residual basis.
    pub fn with_residual_basis(
        k: DMatrix<f64>,
        z: &DMatrix<f64>,
        a: &DMatrix<f64>,
        cluster_tol: Option<f64>,
    ) -> Result<Self> {
        let dec = eigen_reduce_with_basis(&k, z, a, cluster_tol)?;
        let bases = dec.projectors.iter().map(|p| &k * p).collect();
        Ok(Self {
            eigen: dec.eigen,
            bases,
            k,
        })
    }

    pub fn for_model(model: &MixedModelSpec, cluster_tol: Option<f64>) -> Result<Self> {
        Self::new(&model.x, &model.z, &model.a, cluster_tol)
    }

    pub fn eigenstructure(&self) -> &Eigenstructure {
        &self.eigen
    }

    pub fn residual_basis(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn sufficient_stats(&self, y: &DVector<f64>) -> Result<Vec<f64>> {
        if y.len() != self.k.nrows() {
            return Err(Error::Dimension(format!(
                "y has {} rows, expected {}",
                y.len(),
                self.k.nrows()
            )));
        }
        let s: Vec<f64> = self.bases.iter().map(|b| b.tr_mul(y).norm_squared()).collect();
        check_stats(&s, self.k.tr_mul(y).norm_squared(), y)?;
        Ok(s)
    }

    pub fn reduce(&self, y: &DVector<f64>) -> Result<EigenReduction> {
        let s = self.sufficient_stats(y)?;
        EigenReduction::from_stats(&self.eigen, s)
    }
}

/// Full reduction of a model: residual basis, eigenstructure, statistics.
pub fn reduce_model(model: &MixedModelSpec, cluster_tol: Option<f64>) -> Result<EigenReduction> {
    ModelReducer::for_model(model, cluster_tol)?.reduce(&model.y)
}

/// Intercept-only fixed design, group-indicator random design and `A = I`
/// for a one-way layout with the given group sizes.
pub fn oneway_design(sizes: &[usize]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n: usize = sizes.iter().sum();
    let a = sizes.len();
    let x = DMatrix::from_element(n, 1, 1.0);
    let mut z = DMatrix::zeros(n, a);
    let mut row = 0;
    for (g, &m) in sizes.iter().enumerate() {
        for _ in 0..m {
            z[(row, g)] = 1.0;
            row += 1;
        }
    }
    (x, z, DMatrix::identity(a, a))
}
