//! Smoothing-parameter selection for square-loss fits: the influence matrix
//! `A(λ)`, generalized cross-validation
//!
//! ```text
//! V(λ) = ‖(I − A(λ))y‖² / (trace(I − A(λ)))²,
//! ```
//!
//! brute-force leave-one-out, and the randomized trace estimate of the
//! degrees of freedom for signal `trace A(λ) = Σ ∂ŷᵢ/∂yᵢ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, NullSpaceBasis};
use crate::rng::replicate_rng;
use crate::solvers::{check_lambda, check_system, fit_penalized_ls, SquareLossSystem};

/// Denominators `trace(I − A)` at or below this make `V(λ)` degenerate.
pub const GCV_DENOMINATOR_FLOOR: f64 = 1e-12;

/// `A(λ)`, mapping data to fitted values. Symmetric with eigenvalues in `[0, 1]`.
pub fn influence_matrix(k: &GramMatrix, t: &NullSpaceBasis, lambda: f64) -> Result<DMatrix<f64>> {
    check_lambda(lambda, false)?;
    Ok(SquareLossSystem::new(k, t, lambda)?.influence())
}

/// `trace A`.
pub fn df_signal(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            what: "influence matrix columns",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    Ok(a.trace())
}

/// One evaluation of the GCV criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcvPoint {
    pub lambda: f64,
    /// `V(λ)`, `+∞` when degenerate.
    pub value: f64,
    /// `trace A(λ)`.
    pub df: f64,
    pub rss: f64,
}

fn gcv_point(y: &[f64], k: &GramMatrix, t: &NullSpaceBasis, lambda: f64) -> Result<GcvPoint> {
    let sys = SquareLossSystem::new(k, t, lambda)?;
    let (c, _) = sys.solve(&DVector::from_column_slice(y))?;
    let rss = sys.residuals(&c).norm_squared();
    let denom = sys.residual_trace();
    let n = y.len() as f64;
    let value = if denom > GCV_DENOMINATOR_FLOOR {
        rss / (denom * denom)
    } else {
        log::warn!("GCV denominator trace(I − A) = {denom:.3e} at lambda = {lambda:.3e}; reporting +inf");
        f64::INFINITY
    };
    Ok(GcvPoint {
        lambda,
        value,
        df: n - denom,
        rss,
    })
}

/// `V(λ) = ‖(I − A)y‖² / trace(I − A)²`, or `+∞` (with a logged warning)
/// when `trace(I − A) ≤ 1e−12`.
pub fn gcv(y: &[f64], k: &GramMatrix, t: &NullSpaceBasis, lambda: f64) -> Result<f64> {
    check_system(k, t, y)?;
    check_lambda(lambda, false)?;
    Ok(gcv_point(y, k, t, lambda)?.value)
}

/// Mean squared leave-one-out prediction error, refitting on each `n − 1`
/// subset.
pub fn loo_cv(y: &[f64], k: &GramMatrix, t: &NullSpaceBasis, lambda: f64) -> Result<f64> {
    check_system(k, t, y)?;
    check_lambda(lambda, false)?;
    let n = y.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!("leave-one-out needs n ≥ 3, got {n}")));
    }
    let km = k.matrix();
    let tm = t.matrix();
    let mut total = 0.0;
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let ks = k.select(&keep);
        let ts = t.select(&keep)?;
        let ys: Vec<f64> = keep.iter().map(|&j| y[j]).collect();
        let fit = fit_penalized_ls(&ks, &ts, &ys, lambda)?;
        let mut pred = 0.0;
        for (a, &j) in keep.iter().enumerate() {
            pred += fit.c[a] * km[(i, j)];
        }
        for (nu, dv) in fit.d.iter().enumerate() {
            pred += dv * tm[(i, nu)];
        }
        total += (y[i] - pred) * (y[i] - pred);
    }
    Ok(total / n as f64)
}

/// Mean and standard error of the randomized trace estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedTraceEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(replicates)`; zero for one replicate.
    pub standard_error: f64,
    pub replicates: usize,
    pub delta_scale: f64,
    pub seed: u64,
}

/// Estimates `Σ ∂ŷᵢ/∂yᵢ` for a black-box fitter.
///
/// Replicate `r` draws `δ` with i.i.d. entries `±delta_scale` from stream `r`
/// of `seed` and records `δᵀ(fitter(y + δ) − fitter(y)) / delta_scale²`. For a
/// linear smoother `ŷ = Ay` each replicate is unbiased for `trace A`.
pub fn randomized_trace<F>(
    fitter: F,
    y: &[f64],
    delta_scale: f64,
    replicates: usize,
    seed: u64,
) -> Result<RandomizedTraceEstimate>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if replicates == 0 {
        return Err(Error::InvalidParameter("replicates must be ≥ 1".into()));
    }
    if !(delta_scale > 0.0 && delta_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "delta_scale must be positive, got {delta_scale}"
        )));
    }
    let n = y.len();
    let base = fitter(y)?;
    if base.len() != n {
        return Err(Error::DimensionMismatch {
            what: "fitter output length",
            expected: n,
            got: base.len(),
        });
    }
    let samples: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let delta: Vec<f64> = (0..n)
                .map(|_| if rng.random::<bool>() { delta_scale } else { -delta_scale })
                .collect();
            let perturbed: Vec<f64> = y.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let out = fitter(&perturbed)?;
            if out.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "fitter output length",
                    expected: n,
                    got: out.len(),
                });
            }
            let s: f64 = (0..n).map(|i| delta[i] * (out[i] - base[i])).sum();
            Ok(s / (delta_scale * delta_scale))
        })
        .collect::<Result<_>>()?;

    let r = replicates as f64;
    let mean = samples.iter().sum::<f64>() / r;
    let standard_error = if replicates > 1 {
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (r - 1.0);
        (var / r).sqrt()
    } else {
        0.0
    };
    Ok(RandomizedTraceEstimate {
        mean,
        standard_error,
        replicates,
        delta_scale,
        seed,
    })
}

/// `delta_scale = 1e−3 · sd(y)`, falling back to `1e−3` for constant data.
pub fn default_delta_scale(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 1e-3;
    }
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd > 0.0 {
        1e-3 * sd
    } else {
        1e-3
    }
}

/// `count` points log-spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && count >= 1) {
        return Err(Error::InvalidParameter(format!(
            "bad grid [{lo}, {hi}] with {count} points"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect())
}

/// 40 points log-spaced over `[1e−8, 1e2]`.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-8, 1e2, 40).expect("static grid")
}

/// GCV (and optionally leave-one-out) over a grid of λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub lambda_grid: Vec<f64>,
    pub gcv_values: Vec<f64>,
    pub loo_values: Option<Vec<f64>>,
    pub df_values: Vec<f64>,
    /// First grid point attaining the minimum of `gcv_values`.
    pub selected_lambda: f64,
    pub selected_index: usize,
}

/// Evaluates `V(λ)` on the grid and selects its minimizer, smallest λ on ties.
/// With `with_loo`, leave-one-out scores are reported alongside.
pub fn minimize_gcv(
    y: &[f64],
    k: &GramMatrix,
    t: &NullSpaceBasis,
    lambda_grid: &[f64],
    with_loo: bool,
) -> Result<TuningReport> {
    check_system(k, t, y)?;
    if lambda_grid.is_empty() {
        return Err(Error::EmptyInput("lambda grid"));
    }
    for w in lambda_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter("lambda grid must be strictly increasing".into()));
        }
    }
    for &l in lambda_grid {
        check_lambda(l, false)?;
    }
    let points: Vec<GcvPoint> = lambda_grid
        .par_iter()
        .map(|&l| gcv_point(y, k, t, l))
        .collect::<Result<_>>()?;
    let loo_values = if with_loo {
        Some(
            lambda_grid
                .par_iter()
                .map(|&l| loo_cv(y, k, t, l))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let mut best: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        if p.value.is_finite() && best.is_none_or(|b| p.value < points[b].value) {
            best = Some(i);
        }
    }
    let selected_index =
        best.ok_or_else(|| Error::Degenerate("GCV is degenerate at every grid point".into()))?;
    Ok(TuningReport {
        lambda_grid: lambda_grid.to_vec(),
        gcv_values: points.iter().map(|p| p.value).collect(),
        loo_values,
        df_values: points.iter().map(|p| p.df).collect(),
        selected_lambda: lambda_grid[selected_index],
        selected_index,
    })
}
