//! Regularized kernel estimation: a PSD matrix `K` fitted to scattered,
//! noisy dissimilarities by
//!
//! ```text
//! min_{K ⪰ 0}  Σ_{(i,j)} |d_ij − (K_ii + K_jj − 2K_ij)| + λ trace K,
//! ```
//!
//! followed by rank-truncated Euclidean embeddings of `K`.
//!
//! Observed values are compared with squared distances in the fitted
//! geometry. They may be incomplete and need not satisfy the triangle
//! inequality.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::kernel::squared_distance_from_kernel;
use crate::linalg::{psd_project, sorted_eigen};

/// One observed dissimilarity between objects `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dissimilarity {
    pub i: usize,
    pub j: usize,
    pub d: f64,
}

/// Observed dissimilarities among `n` objects, each unordered pair at most once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilaritySet {
    n: usize,
    entries: Vec<Dissimilarity>,
}

impl DissimilaritySet {
    pub fn new(n: usize, entries: Vec<Dissimilarity>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            for idx in [e.i, e.j] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, size: n });
                }
            }
            if e.i == e.j {
                return Err(Error::InvalidParameter(format!("self-dissimilarity at index {}", e.i)));
            }
            if !(e.d.is_finite() && e.d >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "dissimilarity ({}, {}) must be finite and nonnegative, got {}",
                    e.i, e.j, e.d
                )));
            }
            if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
                return Err(Error::InvalidParameter(format!("duplicate pair ({}, {})", e.i, e.j)));
            }
        }
        Ok(DissimilaritySet { n, entries })
    }

    /// Object count inferred as one more than the largest index.
    pub fn from_entries(entries: Vec<Dissimilarity>) -> Result<Self> {
        let n = entries.iter().map(|e| e.i.max(e.j) + 1).max().unwrap_or(0);
        Self::new(n, entries)
    }

    /// Every pair `i < j` of a full matrix.
    pub fn from_matrix(d: &DMatrix<f64>) -> Result<Self> {
        if !d.is_square() {
            return Err(Error::DimensionMismatch {
                what: "dissimilarity matrix columns",
                expected: d.nrows(),
                got: d.ncols(),
            });
        }
        let n = d.nrows();
        let entries = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| Dissimilarity { i, j, d: d[(i, j)] })
            .collect();
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Dissimilarity] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn check_square(k: &DMatrix<f64>, n: usize) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(Error::DimensionMismatch {
            what: "kernel matrix columns",
            expected: k.nrows(),
            got: k.ncols(),
        });
    }
    if k.nrows() < n {
        return Err(Error::IndexOutOfRange {
            index: n - 1,
            size: k.nrows(),
        });
    }
    Ok(())
}

/// `Σ |d_obs − (K_ii + K_jj − 2K_ij)| + λ trace K`.
pub fn rke_objective(k: &DMatrix<f64>, dis: &DissimilaritySet, lambda: f64) -> Result<f64> {
    check_square(k, dis.n())?;
    let mut total = 0.0;
    for e in dis.entries() {
        total += (e.d - raw_distance(k, e.i, e.j)).abs();
    }
    Ok(total + lambda * k.trace())
}

fn raw_distance(k: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)]
}

/// Step-size rule of [`fit_rke`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `η_t = η₀ / √t`.
    InverseSqrt,
    /// `η_t = η₀`.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RkeOptions {
    pub max_iters: usize,
    pub step_schedule: StepSchedule,
    /// Initial step; defaults to `Σ d_obs / (n · entries)`.
    pub eta0: Option<f64>,
    /// Stop once an update moves `K` by at most `tol · (1 + ‖K‖_F)`.
    pub tol: f64,
    /// ADMM iterations run after the subgradient phase, warm-started from its
    /// best iterate (0 to skip).
    pub polish_iters: usize,
}

impl Default for RkeOptions {
    fn default() -> Self {
        RkeOptions {
            max_iters: 2000,
            step_schedule: StepSchedule::InverseSqrt,
            eta0: None,
            tol: 1e-12,
            polish_iters: 1000,
        }
    }
}

/// Fitted PSD matrix and its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RkeFit {
    /// Row-major `n × n`.
    pub k: Vec<Vec<f64>>,
    pub objective: f64,
    pub lambda: f64,
    pub iterations: usize,
    /// Index of the returned iterate; `0` is the initial matrix.
    pub best_iteration: usize,
}

impl RkeFit {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.k.len();
        DMatrix::from_fn(n, n, |i, j| self.k[i][j])
    }
}

/// Classical-scaling start: `psd_project(−½ J D J)` with unobserved pairs set
/// to the mean observed dissimilarity.
pub fn rke_initial(dis: &DissimilaritySet) -> Result<DMatrix<f64>> {
    let n = dis.n();
    if n == 0 || dis.is_empty() {
        return Err(Error::EmptyInput("dissimilarities"));
    }
    let mean = dis.entries().iter().map(|e| e.d).sum::<f64>() / dis.len() as f64;
    let mut d = DMatrix::from_element(n, n, mean);
    d.fill_diagonal(0.0);
    for e in dis.entries() {
        d[(e.i, e.j)] = e.d;
        d[(e.j, e.i)] = e.d;
    }
    psd_project(&(double_center_matrix(&d) * -0.5))
}

/// `J M J` with `J = I − 11ᵀ/n`.
pub fn double_center_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let nf = n as f64;
    let row: Vec<f64> = (0..n).map(|i| m.row(i).sum() / nf).collect();
    let col: Vec<f64> = (0..n).map(|j| m.column(j).sum() / nf).collect();
    let grand = row.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, m.ncols(), |i, j| m[(i, j)] - row[i] - col[j] + grand)
}

/// [`fit_rke_with`] without an observer.
pub fn fit_rke(dis: &DissimilaritySet, lambda: f64, opts: RkeOptions) -> Result<RkeFit> {
    fit_rke_with(dis, lambda, opts, |_, _| {})
}

/// Projected subgradient descent on the objective, starting from
/// [`rke_initial`], with `psd_project` after every step and best-iterate
/// tracking. The zero matrix and the start are candidates too, so the result
/// never scores worse than either. The subgradient of `|·|` at zero is taken
/// as zero. An ADMM stage then refines the best iterate so far; its PSD
/// iterates are candidates as well.
///
/// `observer(t, K_t)` sees every iterate of both stages, including the start
/// at `t = 0`.
pub fn fit_rke_with<F>(dis: &DissimilaritySet, lambda: f64, opts: RkeOptions, mut observer: F) -> Result<RkeFit>
where
    F: FnMut(usize, &DMatrix<f64>),
{
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    fit_inner(dis, lambda, opts, &mut observer)
}

fn fit_inner(
    dis: &DissimilaritySet,
    lambda: f64,
    opts: RkeOptions,
    observer: &mut dyn FnMut(usize, &DMatrix<f64>),
) -> Result<RkeFit> {
    let n = dis.n();
    let mut k = rke_initial(dis)?;
    observer(0, &k);
    let zero = DMatrix::zeros(n, n);
    let zero_obj = rke_objective(&zero, dis, lambda)?;
    let mut best_obj = rke_objective(&k, dis, lambda)?;
    let mut best = k.clone();
    let mut best_iteration = 0;
    if zero_obj < best_obj {
        best_obj = zero_obj;
        best = zero;
    }

    let eta0 = match opts.eta0 {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(Error::InvalidParameter(format!("eta0 must be positive, got {e}"))),
        None => {
            let total: f64 = dis.entries().iter().map(|e| e.d).sum();
            let e = total / (n as f64 * dis.len() as f64);
            if e > 0.0 {
                e
            } else {
                1.0 / n as f64
            }
        }
    };

    let mut iterations = 0;
    for t in 1..=opts.max_iters {
        iterations = t;
        let eta = match opts.step_schedule {
            StepSchedule::InverseSqrt => eta0 / (t as f64).sqrt(),
            StepSchedule::Constant => eta0,
        };
        let mut g = DMatrix::identity(n, n) * lambda;
        for e in dis.entries() {
            let r = e.d - raw_distance(&k, e.i, e.j);
            let s = if r > 0.0 {
                -1.0
            } else if r < 0.0 {
                1.0
            } else {
                0.0
            };
            if s != 0.0 {
                g[(e.i, e.i)] += s;
                g[(e.j, e.j)] += s;
                g[(e.i, e.j)] -= s;
                g[(e.j, e.i)] -= s;
            }
        }
        let step = &k - g * eta;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                solver: "RKE projected subgradient",
                iteration: t,
                step: eta,
            });
        }
        let next = psd_project(&step)?;
        observer(t, &next);
        let moved = (&next - &k).norm();
        let scale = 1.0 + k.norm();
        k = next;
        let obj = rke_objective(&k, dis, lambda)?;
        if obj < best_obj {
            best_obj = obj;
            best = k.clone();
            best_iteration = t;
        }
        if moved <= opts.tol * scale {
            break;
        }
    }

    if opts.polish_iters > 0 && !dis.is_empty() {
        let start = best.clone();
        polish(dis, lambda, &start, opts.polish_iters, &mut |z| {
            iterations += 1;
            observer(iterations, z);
            let obj = rke_objective(z, dis, lambda)?;
            if obj < best_obj {
                best_obj = obj;
                best = z.clone();
                best_iteration = iterations;
            }
            Ok(())
        })?;
    }

    Ok(RkeFit {
        k: (0..n).map(|i| best.row(i).iter().copied().collect()).collect(),
        objective: best_obj,
        lambda,
        iterations,
        best_iteration,
    })
}

fn apply_distances(k: &DMatrix<f64>, dis: &DissimilaritySet) -> Vec<f64> {
    dis.entries().iter().map(|e| raw_distance(k, e.i, e.j)).collect()
}

/// Adjoint of [`apply_distances`].
fn spread_distances(v: &[f64], dis: &DissimilaritySet) -> DMatrix<f64> {
    let n = dis.n();
    let mut m = DMatrix::zeros(n, n);
    for (e, &x) in dis.entries().iter().zip(v) {
        m[(e.i, e.i)] += x;
        m[(e.j, e.j)] += x;
        m[(e.i, e.j)] -= x;
        m[(e.j, e.i)] -= x;
    }
    m
}

/// Conjugate gradients for `(AᵀA + I) X = B` on symmetric matrices.
fn solve_normal(dis: &DissimilaritySet, b: &DMatrix<f64>, x0: &DMatrix<f64>) -> DMatrix<f64> {
    let op = |x: &DMatrix<f64>| spread_distances(&apply_distances(x, dis), dis) + x;
    let mut x = x0.clone();
    let mut r = b - op(&x);
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    let stop = 1e-28 * b.norm_squared().max(1e-300);
    for _ in 0..b.len() {
        if rr <= stop {
            break;
        }
        let q = op(&p);
        let alpha = rr / p.dot(&q);
        x += &p * alpha;
        r -= &q * alpha;
        let next = r.norm_squared();
        p = &r + &p * (next / rr);
        rr = next;
    }
    x
}

/// ADMM on `min ‖r‖₁ + λ trace K` subject to `A(K) + r = d` and `K = Z ⪰ 0`,
/// reporting every PSD iterate `Z`.
fn polish(
    dis: &DissimilaritySet,
    lambda: f64,
    start: &DMatrix<f64>,
    max_iters: usize,
    report: &mut dyn FnMut(&DMatrix<f64>) -> Result<()>,
) -> Result<()> {
    let n = dis.n();
    let d: Vec<f64> = dis.entries().iter().map(|e| e.d).collect();
    let scale = d.iter().sum::<f64>() / d.len() as f64;
    let mut rho = 1.0 / scale.max(1e-12);
    let mut k = start.clone();
    let mut z = start.clone();
    let mut big_u = DMatrix::zeros(n, n);
    let ak = apply_distances(&k, dis);
    let mut r: Vec<f64> = d.iter().zip(&ak).map(|(a, b)| a - b).collect();
    let mut u = vec![0.0; d.len()];
    for it in 1..=max_iters {
        let shift = DMatrix::identity(n, n) * (lambda / rho);
        let target: Vec<f64> = (0..d.len()).map(|e| d[e] - r[e] - u[e]).collect();
        let rhs = spread_distances(&target, dis) + &z - &big_u - &shift;
        k = solve_normal(dis, &rhs, &k);
        let ak = apply_distances(&k, dis);
        for e in 0..d.len() {
            let v = d[e] - ak[e] - u[e];
            r[e] = v.signum() * (v.abs() - 1.0 / rho).max(0.0);
        }
        let z_next = psd_project(&(&k + &big_u))?;
        let mut primal = 0.0;
        for e in 0..d.len() {
            let gap = ak[e] + r[e] - d[e];
            u[e] += gap;
            primal += gap * gap;
        }
        big_u += &k - &z_next;
        primal += (&k - &z_next).norm_squared();
        let dual = rho * (&z_next - &z).norm();
        z = z_next;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                solver: "RKE ADMM polish",
                iteration: it,
                step: rho,
            });
        }
        report(&z)?;
        let primal = primal.sqrt();
        let tol = 1e-12 * (1.0 + z.norm() + scale);
        if primal <= tol && dual <= tol * rho {
            break;
        }
        // Residual balancing; the scaled duals move inversely to ρ.
        let factor = if primal > 10.0 * dual {
            2.0
        } else if dual > 10.0 * primal {
            0.5
        } else {
            1.0
        };
        if factor != 1.0 {
            rho *= factor;
            u.iter_mut().for_each(|v| *v /= factor);
            big_u /= factor;
        }
    }
    Ok(())
}

/// Rank-`d` coordinates of a PSD matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    /// All eigenvalues, descending, negative ones clamped to zero.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    /// `n × rank`, row-major: eigenvectors scaled by `√eigenvalue`.
    pub coordinates: Vec<Vec<f64>>,
    /// Share of the trace carried by the kept eigenvalues (1 for a zero matrix).
    pub trace_fraction: f64,
    pub centered: bool,
}

/// Fitted matrix together with its embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResult {
    pub fit: RkeFit,
    pub embedding: Embedding,
}

fn clamped_spectrum(k: &DMatrix<f64>, center: bool) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let m = if center { double_center_matrix(k) } else { k.clone() };
    let eig = sorted_eigen(&m)?;
    Ok((eig.values.iter().map(|v| v.max(0.0)).collect(), eig.vectors))
}

fn fraction(values: &[f64], d: usize) -> f64 {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        (values[..d].iter().sum::<f64>() / total).min(1.0)
    } else {
        1.0
    }
}

/// Smallest rank whose eigenvalues carry at least `threshold` of the trace.
pub fn rank_for_fraction(k: &DMatrix<f64>, center: bool, threshold: f64) -> Result<usize> {
    let (values, _) = clamped_spectrum(k, center)?;
    if values.is_empty() {
        return Err(Error::EmptyInput("kernel matrix"));
    }
    Ok((1..=values.len())
        .find(|&d| fraction(&values, d) >= threshold)
        .unwrap_or(values.len()))
}

/// Default rank: at least 95% of the trace.
pub fn default_rank(k: &DMatrix<f64>, center: bool) -> Result<usize> {
    rank_for_fraction(k, center, 0.95)
}

/// Top-`d` eigenpairs of `K` (of `JKJ` when `center` is set), scaled into
/// coordinates. Eigenvectors are signed so their largest entry is positive;
/// beyond that the coordinates are defined up to rotation.
pub fn embed(k: &DMatrix<f64>, d: usize, center: bool) -> Result<Embedding> {
    if !k.is_square() {
        return Err(Error::DimensionMismatch {
            what: "kernel matrix columns",
            expected: k.nrows(),
            got: k.ncols(),
        });
    }
    let n = k.nrows();
    if d == 0 || d > n {
        return Err(Error::InvalidParameter(format!("rank must be in 1..={n}, got {d}")));
    }
    let (values, vectors) = clamped_spectrum(k, center)?;
    let coordinates = (0..n)
        .map(|i| (0..d).map(|a| vectors[(i, a)] * values[a].sqrt()).collect())
        .collect();
    Ok(Embedding {
        trace_fraction: fraction(&values, d),
        eigenvalues: values,
        rank: d,
        coordinates,
        centered: center,
    })
}

/// Fits and embeds; `rank = None` picks [`default_rank`].
pub fn fit_and_embed(
    dis: &DissimilaritySet,
    lambda: f64,
    opts: RkeOptions,
    rank: Option<usize>,
    center: bool,
) -> Result<EmbeddingResult> {
    let fit = fit_rke(dis, lambda, opts)?;
    let k = fit.matrix();
    let d = match rank {
        Some(d) => d,
        None => default_rank(&k, center)?,
    };
    let embedding = embed(&k, d, center)?;
    Ok(EmbeddingResult { fit, embedding })
}

/// Squared distances between embedding rows `i` and `j`.
pub fn coordinate_distance(coords: &[Vec<f64>], i: usize, j: usize) -> f64 {
    coords[i].iter().zip(&coords[j]).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `K_ii + K_jj − 2K_ij` for every observed pair.
pub fn fitted_dissimilarities(k: &DMatrix<f64>, dis: &DissimilaritySet) -> Result<Vec<f64>> {
    dis.entries()
        .iter()
        .map(|e| squared_distance_from_kernel(k, e.i, e.j))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_examples() {
        let dis = DissimilaritySet::new(2, vec![Dissimilarity { i: 0, j: 1, d: 2.0 }]).unwrap();
        let eye = DMatrix::identity(2, 2);
        assert_eq!(rke_objective(&eye, &dis, 0.5).unwrap(), 1.0);
        assert_eq!(rke_objective(&DMatrix::zeros(2, 2), &dis, 0.0).unwrap(), 2.0);
        assert!(rke_objective(&DMatrix::zeros(1, 1), &dis, 0.0).is_err());
    }

    #[test]
    fn set_validation() {
        let e = |i, j, d| Dissimilarity { i, j, d };
        assert!(DissimilaritySet::new(3, vec![e(0, 0, 1.0)]).is_err());
        assert!(DissimilaritySet::new(3, vec![e(0, 3, 1.0)]).is_err());
        assert!(DissimilaritySet::new(3, vec![e(0, 1, 1.0), e(1, 0, 2.0)]).is_err());
        assert!(DissimilaritySet::new(3, vec![e(0, 1, -1.0)]).is_err());
        let s = DissimilaritySet::from_entries(vec![e(0, 4, 1.0)]).unwrap();
        assert_eq!(s.n(), 5);
    }

    #[test]
    fn embed_diagonal() {
        let k = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0, 0.0]));
        let e = embed(&k, 1, false).unwrap();
        assert_eq!(e.coordinates.len(), 3);
        assert!((e.coordinates[0][0].abs() - 2.0).abs() < 1e-12);
        assert!(e.coordinates[1][0].abs() < 1e-12 && e.coordinates[2][0].abs() < 1e-12);
        assert!((e.trace_fraction - 0.8).abs() < 1e-12);
        assert!(embed(&k, 0, false).is_err());
        assert!(embed(&k, 4, false).is_err());
        assert_eq!(default_rank(&k, false).unwrap(), 2);
    }

    #[test]
    fn two_point_exact_fit() {
        let dis = DissimilaritySet::new(2, vec![Dissimilarity { i: 0, j: 1, d: 2.0 }]).unwrap();
        let fit = fit_rke(&dis, 1e-9, RkeOptions::default()).unwrap();
        assert!(fit.objective < 1e-6, "{}", fit.objective);
        let k = fit.matrix();
        assert!((squared_distance_from_kernel(&k, 0, 1).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_lambda() {
        let dis = DissimilaritySet::new(2, vec![Dissimilarity { i: 0, j: 1, d: 2.0 }]).unwrap();
        assert!(fit_rke(&dis, -1.0, RkeOptions::default()).is_err());
        let empty = DissimilaritySet::new(2, vec![]).unwrap();
        assert!(fit_rke(&empty, 1.0, RkeOptions::default()).is_err());
    }
}
