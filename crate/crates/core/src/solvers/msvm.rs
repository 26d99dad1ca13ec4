use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::check_lambda;
use super::qp::BoxQp;
use crate::error::{Error, Result};
use crate::kernel::{cross_gram, GramMatrix, KernelSpec};

/// Sum-to-zero code of class `class` (1-based) among `k`: `1` in that
/// position and `−1/(k−1)` elsewhere.
pub fn label_code(class: usize, k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 classes, got {k}")));
    }
    if class == 0 || class > k {
        return Err(Error::InvalidLabel(format!("{class} (expected 1..={k})")));
    }
    let off = -1.0 / (k as f64 - 1.0);
    Ok((1..=k).map(|j| if j == class { 1.0 } else { off }).collect())
}

/// A vector of `k` functions `fⱼ = K cⱼ + dⱼ` constrained to sum to zero.
///
/// Only the first `k − 1` coordinates are free; column `k` of `coefficients`
/// and entry `k` of `intercepts` are the negated sums of the others, and
/// [`MultiFit::decision_values`] evaluates the last coordinate the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiFit {
    pub k: usize,
    pub lambda: f64,
    /// `n × k`, row-major: `coefficients[i][j]`.
    pub coefficients: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub objective_value: f64,
    /// Primal objective minus the dual objective at termination.
    pub duality_gap: f64,
}

impl MultiFit {
    /// `f(s)` for each row of a cross-kernel matrix `K(s, tᵢ)`.
    pub fn decision_values_from_cross(&self, cross: &DMatrix<f64>) -> Vec<Vec<f64>> {
        let k = self.k;
        (0..cross.nrows())
            .map(|r| {
                let mut f: Vec<f64> = (0..k - 1)
                    .map(|j| {
                        let mut acc = self.intercepts[j];
                        for (i, row) in self.coefficients.iter().enumerate() {
                            acc += cross[(r, i)] * row[j];
                        }
                        acc
                    })
                    .collect();
                let last = -f.iter().sum::<f64>();
                f.push(last);
                f
            })
            .collect()
    }

    /// Decision vectors at the training points.
    pub fn decision_values(&self, gram: &GramMatrix) -> Vec<Vec<f64>> {
        self.decision_values_from_cross(gram.matrix())
    }

    /// Decision vectors at new points.
    pub fn predict_values(
        &self,
        kernel: &KernelSpec,
        train_points: &[Vec<f64>],
        new_points: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>> {
        if train_points.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                what: "training points",
                expected: self.coefficients.len(),
                got: train_points.len(),
            });
        }
        let cross = cross_gram(kernel, new_points, train_points)?;
        Ok(self.decision_values_from_cross(&cross))
    }

    /// Index (1-based) of the largest component; ties go to the lowest class.
    pub fn classify(values: &[f64]) -> usize {
        let mut best = 0;
        for (j, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = j;
            }
        }
        best + 1
    }
}

/// `(1/n) Σᵢ Σ_{j≠yᵢ} (fⱼ(tᵢ) + 1/(k−1))₊ + λ Σⱼ cⱼᵀKcⱼ`.
pub fn msvm_objective(gram: &GramMatrix, labels: &[usize], fit: &MultiFit) -> f64 {
    let n = labels.len();
    let k = fit.k;
    let off = 1.0 / (k as f64 - 1.0);
    let values = fit.decision_values(gram);
    let mut loss = 0.0;
    for (i, f) in values.iter().enumerate() {
        for (j, fj) in f.iter().enumerate() {
            if j + 1 != labels[i] {
                loss += (fj + off).max(0.0);
            }
        }
    }
    let km = gram.matrix();
    let mut penalty = 0.0;
    for j in 0..k {
        let c = DVector::from_iterator(n, fit.coefficients.iter().map(|row| row[j]));
        penalty += c.dot(&(km * &c));
    }
    loss / n as f64 + fit.lambda * penalty
}

/// Multicategory SVM with sum-to-zero coding and a constant per class.
///
/// The loss is `Σ_{j≠yᵢ} (fⱼ(tᵢ) + 1/(k−1))₊`. The fit solves the dual
///
/// ```text
/// min (1/4λ) Σⱼ (αⱼ − ᾱ)ᵀK(αⱼ − ᾱ) − (1/(k−1)) Σ αᵢⱼ
/// s.t. 0 ≤ αᵢⱼ ≤ 1/n (αᵢ,yᵢ = 0),  Σᵢ (αᵢⱼ − ᾱᵢ) = 0 for each j
/// ```
///
/// with `ᾱᵢ` the mean of row `i` over all `k` classes, by an interior-point
/// method. Then `cᵢⱼ = −(αᵢⱼ − ᾱᵢ)/(2λ)` and the intercepts are the
/// multipliers of the equality constraints.
///
/// `labels` are 1-based. `k = 2` is accepted and reduces to the binary
/// hinge-loss SVM at `2λ`. A class without training points only triggers a
/// warning.
pub fn fit_msvm(gram: &GramMatrix, labels: &[usize], lambda: f64, k: usize) -> Result<MultiFit> {
    let n = gram.n();
    if n == 0 {
        return Err(Error::EmptyInput("Gram matrix"));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            what: "label length",
            expected: n,
            got: labels.len(),
        });
    }
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 classes, got {k}")));
    }
    check_lambda(lambda, false)?;
    for &l in labels {
        if l == 0 || l > k {
            return Err(Error::InvalidLabel(format!("{l} (expected 1..={k})")));
        }
    }
    for class in 1..=k {
        if !labels.contains(&class) {
            log::warn!("class {class} has no training points");
        }
    }

    // Variables x = nα over the pairs (i, j) with j ≠ yᵢ.
    let vars: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..k).filter(move |&j| j + 1 != labels[i]).map(move |j| (i, j)))
        .collect();
    let nv = vars.len();
    let kf = k as f64;
    let nf = n as f64;
    let km = gram.matrix();

    // ½xᵀPx with P = K ⊗ (I − 11ᵀ/k) / (2λn²) restricted to the free pairs.
    let p = DMatrix::from_fn(nv, nv, |a, b| {
        let (i, j) = vars[a];
        let (l, jj) = vars[b];
        let centering = if j == jj { 1.0 - 1.0 / kf } else { -1.0 / kf };
        km[(i, l)] * centering / (2.0 * lambda * nf * nf)
    });
    let q = DVector::from_element(nv, -1.0 / ((kf - 1.0) * nf));
    // Σᵢ (αᵢⱼ − ᾱᵢ) = 0 for j < k; the k-th row is the negated sum of the others.
    let a = DMatrix::from_fn(k - 1, nv, |row, b| {
        let (_, j) = vars[b];
        if j == row {
            1.0 - 1.0 / kf
        } else {
            -1.0 / kf
        }
    });
    let b = DVector::zeros(k - 1);
    let upper = DVector::from_element(nv, 1.0);
    let sol = BoxQp {
        p: &p,
        q: &q,
        a: &a,
        b: &b,
        upper: &upper,
    }
    .solve()?;

    let mut alpha = DMatrix::zeros(n, k);
    for (v, &(i, j)) in vars.iter().enumerate() {
        alpha[(i, j)] = sol.x[v] / nf;
    }
    let mut coefficients = vec![vec![0.0; k]; n];
    for i in 0..n {
        let mean = alpha.row(i).sum() / kf;
        for j in 0..k - 1 {
            coefficients[i][j] = -(alpha[(i, j)] - mean) / (2.0 * lambda);
        }
        coefficients[i][k - 1] = -coefficients[i][..k - 1].iter().sum::<f64>();
    }
    // Multipliers in α units are n·y; the intercepts are their deviations
    // from the mean over all k constraints (the dropped one has multiplier 0).
    let mult: Vec<f64> = (0..k)
        .map(|j| if j < k - 1 { nf * sol.y[j] } else { 0.0 })
        .collect();
    let mbar = mult.iter().sum::<f64>() / kf;
    let mut intercepts: Vec<f64> = mult.iter().map(|m| m - mbar).collect();
    intercepts[k - 1] = -intercepts[..k - 1].iter().sum::<f64>();

    let mut fit = MultiFit {
        k,
        lambda,
        coefficients,
        intercepts,
        objective_value: 0.0,
        duality_gap: 0.0,
    };
    fit.objective_value = msvm_objective(gram, labels, &fit);
    fit.duality_gap = fit.objective_value + sol.objective;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::gram;

    #[test]
    fn label_code_examples() {
        assert_eq!(label_code(2, 3).unwrap(), vec![-0.5, 1.0, -0.5]);
        let c = label_code(1, 5).unwrap();
        assert_eq!(c[0], 1.0);
        assert!(c[1..].iter().all(|&v| v == -0.25));
        assert!(label_code(0, 3).is_err());
        assert!(label_code(4, 3).is_err());
    }

    #[test]
    fn argmax_ties_go_to_lowest_class() {
        assert_eq!(MultiFit::classify(&[0.5, 0.5, -1.0]), 1);
        assert_eq!(MultiFit::classify(&[-0.5, 0.2, 0.3]), 3);
    }

    #[test]
    fn primal_matches_dual_value() {
        let pts: Vec<Vec<f64>> = vec![
            vec![0.0, 0.1],
            vec![0.2, -0.1],
            vec![2.0, 0.1],
            vec![2.1, 0.3],
            vec![1.0, 2.0],
            vec![0.8, 2.2],
            vec![1.1, 0.9],
        ];
        let labels = [1, 1, 2, 2, 3, 3, 2];
        let g = gram(&KernelSpec::Gaussian { sigma: 0.8 }, &pts).unwrap();
        let lambda = 0.01;
        let fit = fit_msvm(&g, &labels, lambda, 3).unwrap();

        assert!(fit.duality_gap.abs() < 1e-8, "gap {}", fit.duality_gap);
        for f in fit.decision_values(&g) {
            assert!(f.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_labels() {
        let g = GramMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(fit_msvm(&g, &[1, 2, 4], 0.1, 3), Err(Error::InvalidLabel(_))));
        assert!(matches!(fit_msvm(&g, &[1, 2, 0], 0.1, 3), Err(Error::InvalidLabel(_))));
    }
}
