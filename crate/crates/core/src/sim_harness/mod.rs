//! Synthetic data and coverage studies.
//!
//! Replication `i` of a study draws from `ChaCha8Rng::seed_from_u64(seed ^ i)`,
//! so results do not depend on how replications are spread over threads.

pub mod oracles;

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::DEFAULT_RHO_MAX;
use crate::conditional_law::LawOptions;
use crate::error::{Error, Result};
use crate::model_reduction::{oneway_design, EigenReduction, Eigenstructure, MixedModelSpec, ModelReducer};
use crate::plausibility::{interval, pl_at, rho_to_psi, GridSpec, PlOptions};

/// Grid used for interval scans inside studies. Coarser than the curve
/// default; crossings are refined by bisection anyway.
pub const STUDY_GRID_POINTS: usize = 40;
pub const STUDY_REFINE_TOL: f64 = 1e-4;
/// Largest tolerated fraction of failed replications.
pub const FAILURE_BUDGET: f64 = 0.01;

/// How replications are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// Raw one-way data with these group sizes, reduced through the full
    /// model reduction.
    Oneway { sizes: Vec<usize> },
    /// Sufficient statistics drawn directly from the baseline association.
    Eigen { lambdas: Vec<f64>, mults: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub design: Design,
    pub sigma_a2: f64,
    pub sigma_e2: f64,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub grid: GridSpec,
    pub refine_tol: f64,
    pub quad_tol: f64,
    pub cdf_tol: f64,
    /// Worker count; `None` uses the global pool. Not part of the result.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(design: Design, sigma_a2: f64, sigma_e2: f64, reps: usize) -> Self {
        let law = LawOptions::default();
        Self {
            design,
            sigma_a2,
            sigma_e2,
            reps,
            alpha: 0.05,
            seed: 0,
            grid: GridSpec {
                rho_min: 0.0,
                rho_max: DEFAULT_RHO_MAX,
                points: STUDY_GRID_POINTS,
            },
            refine_tol: STUDY_REFINE_TOL,
            quad_tol: law.quad_tol,
            cdf_tol: law.cdf_tol,
            threads: None,
        }
    }

    pub fn rho_true(&self) -> f64 {
        self.sigma_a2 / (self.sigma_a2 + self.sigma_e2)
    }

    pub fn pl_options(&self) -> PlOptions {
        PlOptions {
            law: LawOptions {
                quad_tol: self.quad_tol,
                cdf_tol: self.cdf_tol,
            },
            rho_max: DEFAULT_RHO_MAX.max(self.grid.rho_max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if !(self.sigma_a2 >= 0.0 && self.sigma_a2.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_a2 = {} must be nonnegative",
                self.sigma_a2
            )));
        }
        if !(self.sigma_e2 > 0.0 && self.sigma_e2.is_finite()) {
            return Err(Error::Config(format!("sigma_e2 = {} must be positive", self.sigma_e2)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::Config("refine_tol must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        self.grid.validate()?;
        self.pl_options().law.validate()?;
        let rho = self.rho_true();
        if rho > self.grid.rho_max {
            return Err(Error::Config(format!(
                "true rho = {rho} lies above the grid maximum {}",
                self.grid.rho_max
            )));
        }
        match &self.design {
            Design::Oneway { sizes } => check_pattern(sizes),
            Design::Eigen { lambdas, mults } => Eigenstructure::new(lambdas.clone(), mults.clone()).map(|_| ()),
        }
    }
}

fn check_pattern(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Config(format!("need at least 2 groups, got {}", sizes.len())));
    }
    if sizes.contains(&0) {
        return Err(Error::Config("group sizes must be at least 1".into()));
    }
    Ok(())
}

fn oneway_response(sizes: &[usize], sigma_a2: f64, sigma_e2: f64, rng: &mut impl Rng) -> DVector<f64> {
    let n: usize = sizes.iter().sum();
    let (sa, se) = (sigma_a2.sqrt(), sigma_e2.sqrt());
    let mut y = Vec::with_capacity(n);
    for &m in sizes {
        let alpha = sa * rng.sample::<f64, _>(StandardNormal);
        for _ in 0..m {
            y.push(alpha + se * rng.sample::<f64, _>(StandardNormal));
        }
    }
    DVector::from_vec(y)
}

/// One-way random effects data `y_ij = α_i + ε_ij` (overall mean zero) with
/// its intercept-only design.
pub fn gen_oneway(sizes: &[usize], sigma_a2: f64, sigma_e2: f64, rng: &mut impl Rng) -> Result<MixedModelSpec> {
    check_pattern(sizes)?;
    if !(sigma_a2 >= 0.0) || !(sigma_e2 > 0.0) {
        return Err(Error::Config(
            "variance components must satisfy sigma_a2 >= 0, sigma_e2 > 0".into(),
        ));
    }
    let (x, z, a) = oneway_design(sizes);
    MixedModelSpec::new(oneway_response(sizes, sigma_a2, sigma_e2, rng), x, z, a)
}

/// `S_ℓ = (λ_ℓ σ_α² + σ_ε²) V_ℓ` with independent `V_ℓ ~ χ²(r_ℓ)`.
pub fn gen_baseline(eigen: &Eigenstructure, sigma_a2: f64, sigma_e2: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    eigen.validate()?;
    eigen
        .lambdas
        .iter()
        .zip(&eigen.mults)
        .map(|(&l, &r)| {
            let chi = ChiSquared::new(r as f64).map_err(|e| Error::Config(e.to_string()))?;
            Ok((l * sigma_a2 + sigma_e2) * chi.sample(rng))
        })
        .collect()
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub length: Option<f64>,
    pub covered: bool,
    pub pl_true: Option<f64>,
    pub empty: bool,
    pub multimodal: bool,
    /// Grid points whose plausibility could not be computed.
    pub grid_failures: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip)]
    pub runtime: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: SimConfig,
    pub rho_true: f64,
    pub psi_true: f64,
    pub eigenstructure: Eigenstructure,
    pub empirical_coverage: f64,
    pub mean_length: f64,
    pub completed: usize,
    pub failed: usize,
    pub records: Vec<RepRecord>,
    pub diagnostics: Vec<String>,
}

impl StudyResult {
    pub fn pl_true_values(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.pl_true).collect()
    }

    pub fn total_runtime(&self) -> Duration {
        self.records.iter().map(|r| r.runtime).sum()
    }
}

enum Source {
    Raw { sizes: Vec<usize>, reducer: ModelReducer },
    Baseline(Eigenstructure),
}

impl Source {
    fn eigen(&self) -> &Eigenstructure {
        match self {
            Source::Raw { reducer, .. } => reducer.eigenstructure(),
            Source::Baseline(e) => e,
        }
    }

    fn draw(&self, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<EigenReduction> {
        match self {
            Source::Raw { sizes, reducer } => reducer.reduce(&oneway_response(sizes, cfg.sigma_a2, cfg.sigma_e2, rng)),
            Source::Baseline(e) => EigenReduction::from_stats(e, gen_baseline(e, cfg.sigma_a2, cfg.sigma_e2, rng)?),
        }
    }
}

fn run_rep(cfg: &SimConfig, source: &Source, rep: usize) -> RepRecord {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ rep as u64);
    let rho = cfg.rho_true();
    let opts = cfg.pl_options();
    let outcome = source.draw(cfg, &mut rng).and_then(|red| {
        let res = interval(&red, cfg.alpha, &cfg.grid, cfg.refine_tol, &opts)?;
        let pl_true = pl_at(&red, rho, &opts)?;
        Ok((res, pl_true))
    });
    let mut rec = RepRecord {
        rep,
        lower: None,
        upper: None,
        length: None,
        covered: false,
        pl_true: None,
        empty: false,
        multimodal: false,
        grid_failures: 0,
        error: None,
        runtime: Duration::ZERO,
    };
    match outcome {
        Ok((res, pl_true)) => {
            rec.pl_true = Some(pl_true);
            rec.empty = res.empty;
            rec.multimodal = res.multimodal;
            rec.grid_failures = res.failures();
            rec.length = Some(0.0);
            if let Some(iv) = res.interval {
                rec.lower = Some(iv.lower);
                rec.upper = Some(iv.upper);
                rec.length = Some(iv.length());
                rec.covered = iv.contains(rho);
            }
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec.runtime = start.elapsed();
    rec
}

/// Run `reps` replications and summarize coverage and mean length over the
/// replications that completed.
pub fn run_study(cfg: &SimConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let source = match &cfg.design {
        Design::Oneway { sizes } => {
            let (x, z, a) = oneway_design(sizes);
            Source::Raw {
                sizes: sizes.clone(),
                reducer: ModelReducer::new(&x, &z, &a, None)?,
            }
        }
        Design::Eigen { lambdas, mults } => Source::Baseline(Eigenstructure::new(lambdas.clone(), mults.clone())?),
    };
    let work = || -> Vec<RepRecord> {
        (0..cfg.reps)
            .into_par_iter()
            .map(|i| run_rep(cfg, &source, i))
            .collect()
    };
    let records = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed as f64 > FAILURE_BUDGET * cfg.reps as f64 {
        let first = records.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::Numerical(format!(
            "{failed} of {} replications failed (first: {first})",
            cfg.reps
        )));
    }
    let done: Vec<&RepRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let completed = done.len();
    let covered = done.iter().filter(|r| r.covered).count();
    let total_len: f64 = done.iter().filter_map(|r| r.length).sum();
    let mut diagnostics: Vec<String> = records
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("rep {}: {e}", r.rep)))
        .collect();
    let grid_failures: usize = records.iter().map(|r| r.grid_failures).sum();
    if grid_failures > 0 {
        diagnostics.push(format!("{grid_failures} grid points failed across all replications"));
    }
    let multimodal = done.iter().filter(|r| r.multimodal).count();
    if multimodal > 0 {
        diagnostics.push(format!(
            "{multimodal} replications had a disconnected plausibility region"
        ));
    }
    let rho = cfg.rho_true();
    Ok(StudyResult {
        config: cfg.clone(),
        rho_true: rho,
        psi_true: rho_to_psi(rho),
        eigenstructure: source.eigen().clone(),
        empirical_coverage: if completed == 0 {
            0.0
        } else {
            covered as f64 / completed as f64
        },
        mean_length: if completed == 0 {
            0.0
        } else {
            total_len / completed as f64
        },
        completed,
        failed,
        records,
        diagnostics,
    })
}
