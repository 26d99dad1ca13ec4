use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LassoOptions {
    /// Stop when no coefficient moves by more than this in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-9,
            max_sweeps: 1_000_000,
        }
    }
}

/// Coefficients of `f = Σⱼ βⱼBⱼ` under an ℓ₁ penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFit {
    pub beta: Vec<f64>,
    pub lambda: f64,
    /// Indices `j` with `βⱼ ≠ 0`.
    pub support: Vec<usize>,
    pub objective_value: f64,
    pub sweeps: usize,
}

/// `sign(z) · max(|z| − t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// `½‖y − Bβ‖² + λ‖β‖₁`.
pub fn lasso_objective(b: &DMatrix<f64>, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let r = DVector::from_column_slice(y) - b * DVector::from_column_slice(beta);
    0.5 * r.norm_squared() + lambda * beta.iter().map(|v| v.abs()).sum::<f64>()
}

/// `maxⱼ |Bⱼᵀy|`, the smallest `λ` whose solution is `β = 0`.
pub fn lasso_lambda_max(b: &DMatrix<f64>, y: &[f64]) -> f64 {
    (b.transpose() * DVector::from_column_slice(y)).amax()
}

/// Relative slack below [`lasso_lambda_max`] inside which the zero solution is
/// returned directly, so rounding in `Bᵀy` cannot leave stray nonzeros.
pub const LAMBDA_MAX_RTOL: f64 = 1e-12;

/// Cyclic coordinate descent for `½‖y − Bβ‖² + λ Σ|βⱼ|`, starting from zero.
///
/// Each coordinate update is `βⱼ ← S(Bⱼᵀr + ‖Bⱼ‖²βⱼ, λ) / ‖Bⱼ‖²` with the
/// residual `r` maintained incrementally. All-zero columns stay at zero, and
/// `λ ≥ λ_max` returns `β = 0` without iterating.
pub fn fit_lasso(b: &DMatrix<f64>, y: &[f64], lambda: f64, opts: LassoOptions) -> Result<SparseFit> {
    let (n, p) = b.shape();
    if p == 0 {
        return Err(Error::EmptyInput("design columns"));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response length",
            expected: n,
            got: y.len(),
        });
    }
    ensure_finite(b.iter(), "design matrix")?;
    ensure_finite(y, "response")?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
    }

    let mut beta = vec![0.0; p];
    if lambda >= lasso_lambda_max(b, y) * (1.0 - LAMBDA_MAX_RTOL) {
        return Ok(SparseFit {
            objective_value: lasso_objective(b, y, &beta, lambda),
            beta,
            lambda,
            support: Vec::new(),
            sweeps: 0,
        });
    }
    let norms: Vec<f64> = b.column_iter().map(|c| c.norm_squared()).collect();
    let mut resid = DVector::from_column_slice(y);
    let mut sweeps = 0;
    let mut last_change = f64::INFINITY;

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0_f64;
        for j in 0..p {
            if norms[j] == 0.0 {
                continue;
            }
            let col = b.column(j);
            let rho = col.dot(&resid) + norms[j] * beta[j];
            let new = soft_threshold(rho, lambda) / norms[j];
            let delta = new - beta[j];
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        last_change = max_change;
        if max_change < opts.tol {
            let support = (0..p).filter(|&j| beta[j] != 0.0).collect();
            let objective_value = lasso_objective(b, y, &beta, lambda);
            return Ok(SparseFit {
                beta,
                lambda,
                support,
                objective_value,
                sweeps,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "lasso coordinate descent",
        iterations: sweeps,
        residual: last_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-1.0, 1.0), 0.0);
    }

    #[test]
    fn large_lambda_gives_exact_zero() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]);
        let y = [1.0, -2.0, 0.5];
        let bty = b.transpose() * DVector::from_column_slice(&y);
        let lmax = bty.amax();
        let fit = fit_lasso(&b, &y, lmax, LassoOptions::default()).unwrap();
        assert!(fit.beta.iter().all(|&v| v == 0.0));
        assert!(fit.support.is_empty());
    }

    #[test]
    fn unpenalized_square_system_is_solved() {
        let b = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.4, 1.5, -0.2, 0.0, 0.6, 1.8]);
        let y = [1.0, 2.0, 3.0];
        let fit = fit_lasso(&b, &y, 0.0, LassoOptions::default()).unwrap();
        let exact = b.clone().lu().solve(&DVector::from_column_slice(&y)).unwrap();
        for j in 0..3 {
            assert!((fit.beta[j] - exact[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_column_stays_zero() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let fit = fit_lasso(&b, &[3.0, 1.0], 0.5, LassoOptions::default()).unwrap();
        assert_eq!(fit.beta, vec![2.5, 0.0]);
        assert_eq!(fit.support, vec![0]);
    }

    #[test]
    fn non_finite_rejected() {
        let b = DMatrix::from_row_slice(1, 1, &[f64::INFINITY]);
        assert!(matches!(
            fit_lasso(&b, &[1.0], 0.1, LassoOptions::default()),
            Err(Error::NonFinite(_))
        ));
    }
}
