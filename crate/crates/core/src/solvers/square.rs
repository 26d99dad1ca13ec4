use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{check_lambda, check_system, quad_form, Loss, PenalizedFit};
use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, NullSpaceBasis};
use crate::linalg::sorted_eigen;

/// Factorization of the square-loss block system for one `(K, T, λ)`.
///
/// With `T = Q₁R` and `Q₂` an orthonormal basis of the complement of
/// `range(T)`, the side condition `Tᵀc = 0` gives `c = Q₂ z` where
/// `Q₂ᵀ(K + nλI)Q₂ z = Q₂ᵀy`, and `Rd = Q₁ᵀ(y − (K + nλI)c)`.
pub(crate) struct SquareLossSystem {
    n: usize,
    nlambda: f64,
    k: DMatrix<f64>,
    q1: DMatrix<f64>,
    r: DMatrix<f64>,
    q2: DMatrix<f64>,
    reduced: Cholesky<f64, Dyn>,
}

impl SquareLossSystem {
    pub(crate) fn new(k: &GramMatrix, t: &NullSpaceBasis, lambda: f64) -> Result<Self> {
        check_lambda(lambda, true)?;
        let n = k.n();
        if t.n() != n {
            return Err(Error::DimensionMismatch {
                what: "null-space basis rows",
                expected: n,
                got: t.n(),
            });
        }
        let m = t.dimension();
        let (q1, r) = if m == 0 {
            (DMatrix::zeros(n, 0), DMatrix::zeros(0, 0))
        } else {
            let qr = t.matrix().clone().qr();
            (qr.q(), qr.r())
        };
        let q2 = if m == 0 {
            DMatrix::identity(n, n)
        } else {
            // The complement projector has eigenvalue 1 with multiplicity n − M.
            let proj = DMatrix::identity(n, n) - &q1 * q1.transpose();
            let eig = sorted_eigen(&proj)?;
            eig.vectors.columns(0, n - m).into_owned()
        };
        let nlambda = n as f64 * lambda;
        let mut shifted = k.matrix().clone();
        for i in 0..n {
            shifted[(i, i)] += nlambda;
        }
        let s = q2.transpose() * &shifted * &q2;
        let s = (&s + s.transpose()) * 0.5;
        let reduced = Cholesky::new(s).ok_or(Error::Singular(
            "Q₂ᵀ(K + nλI)Q₂ is not positive definite; use λ > 0",
        ))?;
        Ok(SquareLossSystem {
            n,
            nlambda,
            k: k.matrix().clone(),
            q1,
            r,
            q2,
            reduced,
        })
    }

    /// Representer and null-space coefficients for data `y`.
    pub(crate) fn solve(&self, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let z = self.reduced.solve(&(self.q2.transpose() * y));
        let c = &self.q2 * z;
        let d = if self.q1.ncols() == 0 {
            DVector::zeros(0)
        } else {
            let rhs = self.q1.transpose() * (y - &self.k * &c - &c * self.nlambda);
            self.r
                .solve_upper_triangular(&rhs)
                .ok_or(Error::Singular("null-space triangular factor"))?
        };
        Ok((c, d))
    }

    /// `I − A(λ) = nλ Q₂ (Q₂ᵀ(K + nλI)Q₂)⁻¹ Q₂ᵀ`, formed without cancellation.
    pub(crate) fn residual_operator(&self) -> DMatrix<f64> {
        let inner = self.reduced.inverse();
        let m = &self.q2 * inner * self.q2.transpose() * self.nlambda;
        (&m + m.transpose()) * 0.5
    }

    /// `trace(I − A(λ)) = nλ ‖L⁻¹‖²_F` from the reduced Cholesky factor `L`.
    pub(crate) fn residual_trace(&self) -> f64 {
        let l = self.reduced.l();
        let dim = l.nrows();
        let inv = l
            .solve_lower_triangular(&DMatrix::identity(dim, dim))
            .unwrap_or_else(|| DMatrix::from_element(dim, dim, f64::NAN));
        inv.norm_squared() * self.nlambda
    }

    /// The influence matrix `A(λ)`.
    pub(crate) fn influence(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n) - self.residual_operator()
    }

    /// Residuals `y − A(λ)y`, which equal `nλc`.
    pub(crate) fn residuals(&self, c: &DVector<f64>) -> DVector<f64> {
        c * self.nlambda
    }
}

/// `(1/n)‖y − f‖² + λcᵀKc` at `f = Kc + Td`.
pub fn square_objective(k: &GramMatrix, t: &NullSpaceBasis, y: &[f64], c: &[f64], d: &[f64], lambda: f64) -> f64 {
    let c = DVector::from_column_slice(c);
    let f = k.matrix() * &c + t.matrix() * DVector::from_column_slice(d);
    let n = y.len() as f64;
    let rss: f64 = y.iter().zip(f.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    rss / n + lambda * quad_form(k.matrix(), &c)
}

/// Penalized least squares: solves `(K + nλI)c + Td = y`, `Tᵀc = 0`.
///
/// `λ = 0` is accepted when `K` is strictly positive definite on the
/// complement of the null space, giving the interpolant.
pub fn fit_penalized_ls(k: &GramMatrix, t: &NullSpaceBasis, y: &[f64], lambda: f64) -> Result<PenalizedFit> {
    check_system(k, t, y)?;
    let sys = SquareLossSystem::new(k, t, lambda)?;
    let yv = DVector::from_column_slice(y);
    let (c, d) = sys.solve(&yv)?;
    let resid = sys.residuals(&c);
    let n = y.len() as f64;
    let objective_value = resid.norm_squared() / n + lambda * quad_form(k.matrix(), &c);
    Ok(PenalizedFit {
        loss: Loss::Square,
        lambda,
        c: c.as_slice().to_vec(),
        d: d.as_slice().to_vec(),
        null_space: t.kind(),
        objective_value,
    })
}
