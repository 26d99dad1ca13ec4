//! Representer-theorem solvers.
//!
//! Every solver minimizes an averaged data-fit term plus an RKHS penalty,
//!
//! ```text
//! (1/n) Σᵢ C(yᵢ, f(tᵢ)) + λ cᵀKc,     f = Σᵢ cᵢ K(tᵢ, ·) + Σ_ν d_ν φ_ν,
//! ```
//!
//! so the square-loss normal equations read `(K + nλI)c + Td = y`, `Tᵀc = 0`.
//! Only point-evaluation data are supported.

mod lasso;
mod logistic;
mod msvm;
pub(crate) mod qp;
mod square;
mod svm;

pub use lasso::{fit_lasso, lasso_lambda_max, lasso_objective, soft_threshold, LassoOptions, SparseFit, LAMBDA_MAX_RTOL};
pub use logistic::{fit_penalized_logistic, logistic_objective, NewtonOptions};
pub use msvm::{fit_msvm, label_code, msvm_objective, MultiFit};
pub use square::{fit_penalized_ls, square_objective};
pub(crate) use square::SquareLossSystem;
pub use svm::{fit_svm, hinge_objective, SvmOptions};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{cross_gram, GramMatrix, KernelSpec, NullSpace, NullSpaceBasis};

/// Data-fit term of a [`PenalizedFit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Square,
    Bernoulli,
    Hinge,
}

/// `f = Σᵢ cᵢ K(tᵢ, ·) + Σ_ν d_ν φ_ν`, the minimizer returned by a solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizedFit {
    pub loss: Loss,
    pub lambda: f64,
    /// Representer coefficients, one per training point.
    pub c: Vec<f64>,
    /// Null-space coefficients.
    pub d: Vec<f64>,
    pub null_space: NullSpace,
    pub objective_value: f64,
}

impl PenalizedFit {
    /// `Kc + Td` at the training points.
    pub fn fitted(&self, k: &GramMatrix, t: &NullSpaceBasis) -> DVector<f64> {
        k.matrix() * DVector::from_column_slice(&self.c) + t.matrix() * DVector::from_column_slice(&self.d)
    }
}

/// Predictions `Σᵢ cᵢ K(tᵢ, s) + Σ_ν d_ν φ_ν(s)` at each new point `s`.
pub fn evaluate_fit(
    fit: &PenalizedFit,
    kernel: &KernelSpec,
    train_points: &[Vec<f64>],
    new_points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if train_points.len() != fit.c.len() {
        return Err(Error::DimensionMismatch {
            what: "training points",
            expected: fit.c.len(),
            got: train_points.len(),
        });
    }
    if fit.d.len() != fit.null_space.dimension() {
        return Err(Error::DimensionMismatch {
            what: "null-space coefficients",
            expected: fit.null_space.dimension(),
            got: fit.d.len(),
        });
    }
    if new_points.is_empty() {
        return Ok(Vec::new());
    }
    let cross = cross_gram(kernel, new_points, train_points)?;
    let c = DVector::from_column_slice(&fit.c);
    let kc = cross * c;
    Ok(new_points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let phi = fit.null_space.eval(p);
            kc[i] + phi.iter().zip(&fit.d).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect())
}

pub(crate) fn check_system(k: &GramMatrix, t: &NullSpaceBasis, y: &[f64]) -> Result<()> {
    let n = k.n();
    if n == 0 {
        return Err(Error::EmptyInput("Gram matrix"));
    }
    if t.n() != n {
        return Err(Error::DimensionMismatch {
            what: "null-space basis rows",
            expected: n,
            got: t.n(),
        });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response length",
            expected: n,
            got: y.len(),
        });
    }
    crate::error::ensure_finite(y, "response")
}

pub(crate) fn check_lambda(lambda: f64, allow_zero: bool) -> Result<()> {
    let ok = lambda.is_finite() && (lambda > 0.0 || (allow_zero && lambda == 0.0));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")))
    }
}

/// Checks ±1 labels and that both classes occur. Returns the count of `+1`.
pub(crate) fn check_binary_labels(y: &[f64]) -> Result<usize> {
    let mut pos = 0;
    for &v in y {
        if v == 1.0 {
            pos += 1;
        } else if v != -1.0 {
            return Err(Error::InvalidLabel(format!("{v} (expected -1 or +1)")));
        }
    }
    Ok(pos)
}

/// `cᵀKc`.
pub(crate) fn quad_form(k: &DMatrix<f64>, c: &DVector<f64>) -> f64 {
    c.dot(&(k * c))
}
