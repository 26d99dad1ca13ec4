//! Smoothing-spline ANOVA on product domains.
//!
//! Each coordinate `α` carries a one-dimensional kernel and an averaging
//! measure `μ_α` (by default the empirical distribution of the observed
//! values). `E_α f` integrates `f` over coordinate `α` against `μ_α`, and
//!
//! ```text
//! I = Π_α (E_α + (I − E_α)) = Π E_α + Σ_α (I − E_α) Π_{β≠α} E_β + …
//! ```
//!
//! splits a function into a grand mean, main effects and interactions. The
//! centered kernel `(I − E_α) ⊗ (I − E_α)` applied to `K_α` generates the
//! main-effect subspace; entrywise products of centered Grams generate the
//! two-factor interaction subspaces.
//!
//! At finite data the components depend on the chosen measures.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{ensure_finite, Error, Result};
use crate::kernel::{cross_gram, gram, GramMatrix, KernelSpec, NullSpaceBasis};
use crate::solvers::fit_penalized_ls;

/// Discrete probability weights over the `n` observed points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingMeasure {
    weights: Vec<f64>,
}

impl AveragingMeasure {
    /// Nonnegative weights summing to 1 within `1e−12`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput("averaging weights"));
        }
        ensure_finite(&weights, "averaging weights")?;
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParameter("averaging weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("averaging weights sum to {total}, not 1")));
        }
        Ok(AveragingMeasure { weights })
    }

    /// The empirical distribution: weight `1/n` on each observation.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("averaging weights"));
        }
        Ok(AveragingMeasure {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ wᵢ vᵢ`.
    pub fn average(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.weights)
    }
}

fn check_measure(n: usize, mu: &AveragingMeasure) -> Result<()> {
    if mu.len() != n {
        return Err(Error::DimensionMismatch {
            what: "averaging weights",
            expected: n,
            got: mu.len(),
        });
    }
    Ok(())
}

/// `J G Jᵀ` with `J = I − 1wᵀ`: subtracts weighted row and column averages
/// and adds back the weighted grand average.
pub fn center_kernel(g: &GramMatrix, mu: &AveragingMeasure) -> Result<GramMatrix> {
    check_measure(g.n(), mu)?;
    let m = g.matrix();
    let w = mu.vector();
    let col_avg = m * &w; // (Gw)_i
    let grand = w.dot(&col_avg);
    let n = g.n();
    let centered = DMatrix::from_fn(n, n, |i, j| m[(i, j)] - col_avg[i] - col_avg[j] + grand);
    GramMatrix::from_matrix(centered)
}

/// Centered kernel sections `K̃(s, x_j)` at new points, given the raw cross
/// kernel `K(s, x_j)` (rows are new points) and the raw training Gram.
pub fn cross_center(cross: &DMatrix<f64>, train: &GramMatrix, mu: &AveragingMeasure) -> Result<DMatrix<f64>> {
    let n = train.n();
    check_measure(n, mu)?;
    if cross.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "cross-kernel columns",
            expected: n,
            got: cross.ncols(),
        });
    }
    let w = mu.vector();
    let train_avg = train.matrix() * &w;
    let grand = w.dot(&train_avg);
    let new_avg = cross * &w;
    Ok(DMatrix::from_fn(cross.nrows(), n, |r, j| {
        cross[(r, j)] - train_avg[j] - new_avg[r] + grand
    }))
}

/// The coordinates a component depends on, in increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentLabel(pub Vec<usize>);

impl ComponentLabel {
    pub fn coordinates(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// Joins coordinate names with `:`, e.g. `x1:x2`.
    pub fn display_with(&self, names: &[String]) -> String {
        self.0
            .iter()
            .map(|&a| names.get(a).cloned().unwrap_or_else(|| format!("x{a}")))
            .collect::<Vec<_>>()
            .join(":")
    }
}

impl fmt::Display for ComponentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// A labeled component Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaComponent {
    pub label: ComponentLabel,
    pub gram: GramMatrix,
}

/// Main effects `{α}` for each centered Gram, then (for `max_order = 2`) the
/// interactions `{α, β}`, `α < β`, as entrywise products.
pub fn build_anova_kernels(centered: &[GramMatrix], max_order: usize) -> Result<Vec<AnovaComponent>> {
    if centered.is_empty() {
        return Err(Error::EmptyInput("centered Gram matrices"));
    }
    if !(1..=2).contains(&max_order) {
        return Err(Error::InvalidParameter(format!(
            "max_order must be 1 or 2, got {max_order}"
        )));
    }
    let n = centered[0].n();
    for g in centered {
        if g.n() != n {
            return Err(Error::DimensionMismatch {
                what: "centered Gram size",
                expected: n,
                got: g.n(),
            });
        }
    }
    let mut out: Vec<AnovaComponent> = centered
        .iter()
        .enumerate()
        .map(|(a, g)| AnovaComponent {
            label: ComponentLabel(vec![a]),
            gram: g.clone(),
        })
        .collect();
    if max_order == 2 {
        for a in 0..centered.len() {
            for b in a + 1..centered.len() {
                let prod = centered[a].matrix().component_mul(centered[b].matrix());
                out.push(AnovaComponent {
                    label: ComponentLabel(vec![a, b]),
                    gram: GramMatrix::from_matrix(prod)?,
                });
            }
        }
    }
    Ok(out)
}

/// Per-coordinate Grams on `points`, centered under `measures`, assembled
/// into components up to `max_order`.
pub fn anova_components(
    kernels: &[KernelSpec],
    points: &[Vec<f64>],
    measures: &[AveragingMeasure],
    max_order: usize,
) -> Result<Vec<AnovaComponent>> {
    let centered = centered_grams(kernels, points, measures)?;
    build_anova_kernels(&centered, max_order)
}

fn coordinate_column(points: &[Vec<f64>], a: usize) -> Vec<Vec<f64>> {
    points.iter().map(|p| vec![p[a]]).collect()
}

fn check_coordinates(kernels: &[KernelSpec], points: &[Vec<f64>], measures: &[AveragingMeasure]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyInput("points"));
    }
    if kernels.is_empty() {
        return Err(Error::EmptyInput("kernels"));
    }
    if measures.len() != kernels.len() {
        return Err(Error::DimensionMismatch {
            what: "averaging measures",
            expected: kernels.len(),
            got: measures.len(),
        });
    }
    for p in points {
        if p.len() != kernels.len() {
            return Err(Error::DimensionMismatch {
                what: "point dimension",
                expected: kernels.len(),
                got: p.len(),
            });
        }
    }
    Ok(())
}

fn raw_grams(kernels: &[KernelSpec], points: &[Vec<f64>]) -> Result<Vec<GramMatrix>> {
    kernels
        .par_iter()
        .enumerate()
        .map(|(a, k)| gram(k, &coordinate_column(points, a)))
        .collect()
}

/// Centered one-coordinate Gram for every coordinate.
pub fn centered_grams(
    kernels: &[KernelSpec],
    points: &[Vec<f64>],
    measures: &[AveragingMeasure],
) -> Result<Vec<GramMatrix>> {
    check_coordinates(kernels, points, measures)?;
    raw_grams(kernels, points)?
        .iter()
        .zip(measures)
        .map(|(g, mu)| center_kernel(g, mu))
        .collect()
}

/// One fitted component `θ_k G_k c` evaluated at the data points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTerm {
    pub label: ComponentLabel,
    pub theta: f64,
    /// Coefficient block `θ_k c`.
    pub coefficients: Vec<f64>,
    pub values: Vec<f64>,
}

/// Grand mean, main effects and two-factor interactions of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaDecomposition {
    pub mu: f64,
    pub terms: Vec<AnovaTerm>,
    pub lambda: f64,
    /// `mu + Σ terms` at the data points.
    pub fitted: Vec<f64>,
    pub objective_value: f64,
}

impl AnovaDecomposition {
    pub fn main_effects(&self) -> impl Iterator<Item = &AnovaTerm> {
        self.terms.iter().filter(|t| t.label.order() == 1)
    }

    pub fn interactions(&self) -> impl Iterator<Item = &AnovaTerm> {
        self.terms.iter().filter(|t| t.label.order() == 2)
    }

    pub fn term(&self, label: &ComponentLabel) -> Option<&AnovaTerm> {
        self.terms.iter().find(|t| &t.label == label)
    }
}

/// Square-loss fit with Gram `Σ θ_k G_k` and a constant null space.
///
/// The constant is the grand mean and `θ_k G_k c` the component `k`.
pub fn fit_ssanova(components: &[AnovaComponent], theta: &[f64], y: &[f64], lambda: f64) -> Result<AnovaDecomposition> {
    if components.is_empty() {
        return Err(Error::EmptyInput("ANOVA components"));
    }
    if theta.len() != components.len() {
        return Err(Error::DimensionMismatch {
            what: "theta weights",
            expected: components.len(),
            got: theta.len(),
        });
    }
    ensure_finite(theta, "theta weights")?;
    if theta.iter().any(|&t| t <= 0.0) {
        return Err(Error::InvalidParameter("theta weights must be positive".into()));
    }
    let n = components[0].gram.n();
    for comp in components {
        if comp.gram.n() != n {
            return Err(Error::DimensionMismatch {
                what: "component Gram size",
                expected: n,
                got: comp.gram.n(),
            });
        }
    }
    let mut combined = DMatrix::zeros(n, n);
    for (comp, &th) in components.iter().zip(theta) {
        combined += comp.gram.matrix() * th;
    }
    let k = GramMatrix::from_matrix(combined)?;
    let t = NullSpaceBasis::constant(n);
    let fit = fit_penalized_ls(&k, &t, y, lambda)?;
    let c = DVector::from_column_slice(&fit.c);
    let mu = fit.d[0];

    let terms: Vec<AnovaTerm> = components
        .iter()
        .zip(theta)
        .map(|(comp, &th)| {
            let values = comp.gram.matrix() * &c * th;
            AnovaTerm {
                label: comp.label.clone(),
                theta: th,
                coefficients: fit.c.iter().map(|v| v * th).collect(),
                values: values.as_slice().to_vec(),
            }
        })
        .collect();
    let fitted = (0..n)
        .map(|i| mu + terms.iter().map(|t| t.values[i]).sum::<f64>())
        .collect();
    Ok(AnovaDecomposition {
        mu,
        terms,
        lambda,
        fitted,
        objective_value: fit.objective_value,
    })
}

/// Total and per-term values at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaPrediction {
    pub total: f64,
    /// In the order of [`AnovaDecomposition::terms`].
    pub components: Vec<f64>,
}

/// Evaluates every term at new points through its centered kernel sections.
///
/// `kernels`, `train_points` and `measures` must be those used to build the
/// components of `decomposition`.
pub fn predict_ssanova(
    decomposition: &AnovaDecomposition,
    kernels: &[KernelSpec],
    train_points: &[Vec<f64>],
    measures: &[AveragingMeasure],
    new_points: &[Vec<f64>],
) -> Result<Vec<AnovaPrediction>> {
    check_coordinates(kernels, train_points, measures)?;
    let n = train_points.len();
    for t in &decomposition.terms {
        if t.coefficients.len() != n {
            return Err(Error::DimensionMismatch {
                what: "term coefficients",
                expected: n,
                got: t.coefficients.len(),
            });
        }
        if let Some(&a) = t.label.0.iter().find(|&&a| a >= kernels.len()) {
            return Err(Error::IndexOutOfRange {
                index: a,
                size: kernels.len(),
            });
        }
    }
    for p in new_points {
        if p.len() != kernels.len() {
            return Err(Error::DimensionMismatch {
                what: "point dimension",
                expected: kernels.len(),
                got: p.len(),
            });
        }
        for (a, k) in kernels.iter().enumerate() {
            k.check_point(&[p[a]])?;
        }
    }
    if new_points.is_empty() {
        return Ok(Vec::new());
    }

    let train_grams = raw_grams(kernels, train_points)?;
    let sections: Vec<DMatrix<f64>> = (0..kernels.len())
        .map(|a| {
            let cross = cross_gram(
                &kernels[a],
                &coordinate_column(new_points, a),
                &coordinate_column(train_points, a),
            )?;
            cross_center(&cross, &train_grams[a], &measures[a])
        })
        .collect::<Result<_>>()?;

    Ok((0..new_points.len())
        .map(|r| {
            let components: Vec<f64> = decomposition
                .terms
                .iter()
                .map(|t| {
                    (0..n)
                        .map(|j| {
                            let kv: f64 = t.label.0.iter().map(|&a| sections[a][(r, j)]).product();
                            kv * t.coefficients[j]
                        })
                        .sum()
                })
                .collect();
            AnovaPrediction {
                total: decomposition.mu + components.iter().sum::<f64>(),
                components,
            }
        })
        .collect())
}

/// Splits `f = Σⱼ cⱼ Π_α K_α(·, x_jα)` into its `2^d` projections
/// `Π_{α∈S}(I − E_α) Π_{α∉S} E_α f`, evaluated at the data points.
///
/// Subsets are returned in increasing bitmask order; they sum to `f`.
pub fn project_product_function(
    raw: &[GramMatrix],
    measures: &[AveragingMeasure],
    c: &[f64],
) -> Result<Vec<(ComponentLabel, Vec<f64>)>> {
    if raw.is_empty() {
        return Err(Error::EmptyInput("Gram matrices"));
    }
    if raw.len() > 16 {
        return Err(Error::InvalidParameter(format!("too many coordinates: {}", raw.len())));
    }
    if measures.len() != raw.len() {
        return Err(Error::DimensionMismatch {
            what: "averaging measures",
            expected: raw.len(),
            got: measures.len(),
        });
    }
    let n = c.len();
    for (g, mu) in raw.iter().zip(measures) {
        if g.n() != n {
            return Err(Error::DimensionMismatch {
                what: "Gram size",
                expected: n,
                got: g.n(),
            });
        }
        check_measure(n, mu)?;
    }
    // (E_α K_α(·, x_j)) is the constant Σ_k w_k K_α(x_k, x_j).
    let averaged: Vec<DVector<f64>> = raw
        .iter()
        .zip(measures)
        .map(|(g, mu)| g.matrix().transpose() * mu.vector())
        .collect();
    let d = raw.len();
    Ok((0u32..1 << d)
        .map(|mask| {
            let coords: Vec<usize> = (0..d).filter(|a| mask & (1 << a) != 0).collect();
            let values = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let mut v = c[j];
                            for a in 0..d {
                                v *= if mask & (1 << a) != 0 {
                                    raw[a].matrix()[(i, j)] - averaged[a][j]
                                } else {
                                    averaged[a][j]
                                };
                            }
                            v
                        })
                        .sum()
                })
                .collect();
            (ComponentLabel(coords), values)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_kernel_is_annihilated() {
        let g = GramMatrix::from_matrix(DMatrix::from_element(4, 4, 1.0)).unwrap();
        let c = center_kernel(&g, &AveragingMeasure::uniform(4).unwrap()).unwrap();
        assert!(c.matrix().amax() < 1e-15);
    }

    #[test]
    fn centering_is_idempotent_and_zero_row_sums() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.3, 0.1, 0.3, 1.5]);
        let g = GramMatrix::from_matrix(m).unwrap();
        let mu = AveragingMeasure::new(vec![0.2, 0.5, 0.3]).unwrap();
        let once = center_kernel(&g, &mu).unwrap();
        let twice = center_kernel(&once, &mu).unwrap();
        assert!((once.matrix() - twice.matrix()).amax() < 1e-12);
        let rows = once.matrix() * mu.vector();
        assert!(rows.amax() < 1e-12);
        assert!(once.is_psd().unwrap());
    }

    #[test]
    fn measure_validation() {
        assert!(AveragingMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(AveragingMeasure::new(vec![1.5, -0.5]).is_err());
        assert!(AveragingMeasure::new(vec![]).is_err());
    }

    #[test]
    fn single_coordinate_single_component() {
        let g = GramMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let comps = build_anova_kernels(std::slice::from_ref(&g), 1).unwrap();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].gram, g);
        assert_eq!(comps[0].label, ComponentLabel(vec![0]));
        assert!(build_anova_kernels(&[g], 3).is_err());
    }

    #[test]
    fn constant_response() {
        let pts: Vec<Vec<f64>> = vec![vec![0.1, 0.9], vec![0.4, 0.2], vec![0.7, 0.5], vec![0.9, 0.8]];
        let kernels = vec![KernelSpec::Spline { order: 1 }; 2];
        let measures = vec![AveragingMeasure::uniform(4).unwrap(); 2];
        let comps = anova_components(&kernels, &pts, &measures, 2).unwrap();
        let dec = fit_ssanova(&comps, &[1.0; 3], &[3.5; 4], 0.01).unwrap();
        assert!((dec.mu - 3.5).abs() < 1e-8);
        for t in &dec.terms {
            assert!(t.values.iter().all(|v| v.abs() < 1e-8));
        }
    }

    #[test]
    fn label_display() {
        let l = ComponentLabel(vec![0, 2]);
        assert_eq!(l.to_string(), "{0,2}");
        assert_eq!(l.display_with(&["a".into(), "b".into(), "c".into()]), "a:c");
    }
}
