//! Plausibility function `pl(ρ) = 1 − F_{h_ρ,ρ}(|T(x) − φ(ρ) − μ_ρ|)` with the
//! localization point set to the asserted `ρ`, and its inversion into
//! plausibility intervals `{ρ : pl(ρ) > α}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{AssociationContext, DEFAULT_RHO_MAX};
use crate::conditional_law::{build_law, ConditionalLaw, LawOptions};
use crate::error::{Error, Result};
use crate::model_reduction::EigenReduction;

/// Default number of grid points for curves and interval scans.
pub const DEFAULT_GRID_POINTS: usize = 400;
/// Default bisection tolerance for interval end points.
pub const DEFAULT_REFINE_TOL: f64 = 1e-6;

/// Numerical settings shared by every plausibility evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlOptions {
    pub law: LawOptions,
    /// Upper end of the admissible `ρ` range.
    pub rho_max: f64,
}

impl Default for PlOptions {
    fn default() -> Self {
        Self {
            law: LawOptions::default(),
            rho_max: DEFAULT_RHO_MAX,
        }
    }
}

/// Uniform grid on `[rho_min, rho_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rho_min: f64,
    pub rho_max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rho_min: 0.0,
            rho_max: DEFAULT_RHO_MAX,
            points: DEFAULT_GRID_POINTS,
        }
    }
}

impl GridSpec {
    pub fn new(rho_min: f64, rho_max: f64, points: usize) -> Result<Self> {
        let g = Self {
            rho_min,
            rho_max,
            points,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 points, got {}",
                self.points
            )));
        }
        if !(self.rho_min >= 0.0 && self.rho_min < self.rho_max && self.rho_max <= DEFAULT_RHO_MAX) {
            return Err(Error::Config(format!(
                "grid bounds [{}, {}] must satisfy 0 <= min < max <= {DEFAULT_RHO_MAX}",
                self.rho_min, self.rho_max
            )));
        }
        Ok(())
    }

    /// Parse `min:max:points`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("grid '{s}' is not of the form min:max:points")));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("grid bound '{p}': {e}")))
        };
        let points = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("grid points '{}': {e}", parts[2])))?;
        Self::new(num(parts[0])?, num(parts[1])?, points)
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.rho_max
                } else {
                    self.rho_min + (self.rho_max - self.rho_min) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

/// `ψ = ρ / (1 − ρ)`.
pub fn rho_to_psi(rho: f64) -> f64 {
    rho / (1.0 - rho)
}

/// Everything computed while evaluating `pl` at one `ρ`.
#[derive(Debug, Clone)]
pub struct PlEvaluation {
    pub rho: f64,
    pub pl: f64,
    pub phi: f64,
    pub mu: f64,
    pub law: ConditionalLaw,
}

/// Evaluate `pl(ρ)` and keep the intermediate law.
pub fn evaluate_pl(reduction: &EigenReduction, rho: f64, opts: &PlOptions) -> Result<PlEvaluation> {
    let ctx = AssociationContext::new(rho, &reduction.lambdas, &reduction.ratio_x, opts.rho_max)?;
    pl_from_context(&ctx, reduction.t_stat, &reduction.mults, &opts.law)
}

/// `pl` for an explicitly supplied association context.
pub fn pl_from_context(
    ctx: &AssociationContext,
    t_stat: f64,
    mults: &[usize],
    law_opts: &LawOptions,
) -> Result<PlEvaluation> {
    let law = build_law(ctx, mults, law_opts)?;
    let dev = (t_stat - ctx.phi - law.mu).abs();
    let pl = law.abs_survival(dev);
    Ok(PlEvaluation {
        rho: ctx.rho,
        pl,
        phi: ctx.phi,
        mu: law.mu,
        law,
    })
}

/// Plausibility of the singleton assertion `{ρ}`.
pub fn pl_at(reduction: &EigenReduction, rho: f64, opts: &PlOptions) -> Result<f64> {
    evaluate_pl(reduction, rho, opts).map(|e| e.pl)
}

/// Per-point status of a curve evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostic {
    pub rho: f64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub evaluations: usize,
}

/// Interval end points in both parametrizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlInterval {
    pub lower: f64,
    pub upper: f64,
    pub psi_lower: f64,
    pub psi_upper: f64,
}

impl PlInterval {
    fn new(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            psi_lower: rho_to_psi(lower),
            psi_upper: rho_to_psi(upper),
        }
    }

    pub fn contains(&self, rho: f64) -> bool {
        self.lower <= rho && rho <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityResult {
    pub grid: Vec<f64>,
    /// `None` where the evaluation failed (see `diagnostics`).
    pub pl: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<PlInterval>,
    /// `pl ≤ α` on every valid grid point.
    pub empty: bool,
    /// More than one disjoint run of `pl > α`; `interval` is their hull.
    pub multimodal: bool,
    pub diagnostics: Vec<PointDiagnostic>,
}

impl PlausibilityResult {
    pub fn failures(&self) -> usize {
        self.diagnostics.iter().filter(|d| !d.ok).count()
    }
}

/// Evaluate `pl` on a grid. Failed points are recorded, not fatal.
pub fn pl_curve(reduction: &EigenReduction, grid: &GridSpec, opts: &PlOptions) -> Result<PlausibilityResult> {
    grid.validate()?;
    let opts = PlOptions {
        rho_max: opts.rho_max.max(grid.rho_max),
        ..*opts
    };
    let rhos = grid.values();
    let evals: Vec<(Option<f64>, PointDiagnostic)> = rhos
        .par_iter()
        .map(|&rho| match evaluate_pl(reduction, rho, &opts) {
            Ok(e) => (
                Some(e.pl),
                PointDiagnostic {
                    rho,
                    ok: true,
                    error: None,
                    evaluations: e.law.evaluations,
                },
            ),
            Err(err) => (
                None,
                PointDiagnostic {
                    rho,
                    ok: false,
                    error: Some(err.to_string()),
                    evaluations: 0,
                },
            ),
        })
        .collect();
    let (pl, diagnostics) = evals.into_iter().unzip();
    Ok(PlausibilityResult {
        grid: rhos,
        pl,
        alpha: None,
        interval: None,
        empty: false,
        multimodal: false,
        diagnostics,
    })
}

/// Plausibility interval `{ρ : pl(ρ) > α}` by grid scan and bisection of
/// every bounding crossing. A bound at a grid end is that grid end.
pub fn interval(
    reduction: &EigenReduction,
    alpha: f64,
    grid: &GridSpec,
    refine_tol: f64,
    opts: &PlOptions,
) -> Result<PlausibilityResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(refine_tol > 0.0) {
        return Err(Error::Config(format!("refine_tol = {refine_tol} must be positive")));
    }
    let mut result = pl_curve(reduction, grid, opts)?;
    result.alpha = Some(alpha);
    let opts = PlOptions {
        rho_max: opts.rho_max.max(grid.rho_max),
        ..*opts
    };

    let valid: Vec<(f64, f64)> = result
        .grid
        .iter()
        .zip(&result.pl)
        .filter_map(|(&r, p)| p.map(|p| (r, p)))
        .collect();
    if valid.is_empty() {
        return Err(Error::Numerical("plausibility failed at every grid point".into()));
    }
    let above: Vec<bool> = valid.iter().map(|&(_, p)| p > alpha).collect();
    let (Some(first), Some(last)) = (above.iter().position(|&a| a), above.iter().rposition(|&a| a)) else {
        result.empty = true;
        return Ok(result);
    };
    let runs = above.windows(2).filter(|w| !w[0] && w[1]).count() + usize::from(above[0]);
    result.multimodal = runs > 1;

    let pl_minus_alpha = |rho: f64| pl_at(reduction, rho, &opts).map(|p| p > alpha);
    let lower = if first == 0 {
        valid[0].0
    } else {
        refine_crossing(valid[first].0, valid[first - 1].0, refine_tol, &pl_minus_alpha)?
    };
    let upper = if last + 1 == valid.len() {
        valid[last].0
    } else {
        refine_crossing(valid[last].0, valid[last + 1].0, refine_tol, &pl_minus_alpha)?
    };
    result.interval = Some(PlInterval::new(lower, upper));
    Ok(result)
}

/// Bisect between a point `inside` (pl > α) and `outside` (pl ≤ α) until
/// they are within `tol`; returns the inside end.
pub fn refine_crossing<F>(mut inside: f64, mut outside: f64, tol: f64, is_inside: &F) -> Result<f64>
where
    F: Fn(f64) -> Result<bool>,
{
    while (outside - inside).abs() > tol {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if is_inside(mid)? {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(inside)
}
