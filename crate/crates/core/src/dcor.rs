//! Distance covariance and distance correlation between paired samples of
//! arbitrary dimensions, with a seeded permutation test of independence.
//!
//! Only Euclidean distances are supported; [`linear_transform`] applies a
//! fixed linear map to the coordinates first when another Euclidean metric
//! is wanted.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::rng::replicate_rng;

/// Double-centered pairwise distances `A_ij = a_ij − ā_i· − ā_·j + ā_··`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredDistances {
    a: DMatrix<f64>,
}

impl CenteredDistances {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
}

fn check_points(points: &[Vec<f64>], what: &'static str) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "{what}: need at least 2 observations, got {}",
            points.len()
        )));
    }
    let p = points[0].len();
    if p == 0 {
        return Err(Error::EmptyInput(what));
    }
    for row in points {
        if row.len() != p {
            return Err(Error::DimensionMismatch {
                what,
                expected: p,
                got: row.len(),
            });
        }
        ensure_finite(row, what)?;
    }
    Ok(())
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Euclidean distance matrix of the rows, double-centered.
pub fn double_center(points: &[Vec<f64>]) -> Result<CenteredDistances> {
    check_points(points, "points")?;
    let n = points.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(&points[i], &points[j]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    let nf = n as f64;
    let means: Vec<f64> = (0..n).map(|i| d.row(i).sum() / nf).collect();
    let grand = means.iter().sum::<f64>() / nf;
    let a = DMatrix::from_fn(n, n, |i, j| d[(i, j)] - means[i] - means[j] + grand);
    Ok(CenteredDistances { a })
}

fn check_same_n(a: &CenteredDistances, b: &CenteredDistances) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            what: "sample size",
            expected: a.n(),
            got: b.n(),
        });
    }
    Ok(())
}

fn mean_product(a: &DMatrix<f64>, b: &DMatrix<f64>, perm: Option<&[usize]>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            let bij = match perm {
                Some(p) => b[(p[i], p[j])],
                None => b[(i, j)],
            };
            s += a[(i, j)] * bij;
        }
    }
    s / (n * n) as f64
}

/// `sqrt(max(0, (1/n²) Σ A_ij B_ij))`.
pub fn dcov(a: &CenteredDistances, b: &CenteredDistances) -> Result<f64> {
    check_same_n(a, b)?;
    Ok(mean_product(&a.a, &b.a, None).max(0.0).sqrt())
}

/// Distance statistics of a paired sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcorReport {
    pub n: usize,
    pub dcov: f64,
    pub dvar_x: f64,
    pub dvar_y: f64,
    /// In `[0, 1]`; `0` when either distance variance vanishes.
    pub dcor: f64,
    pub p_value: Option<f64>,
    pub permutations: usize,
    pub seed: Option<u64>,
    /// Set when a distance variance is zero, so no dependence can be measured.
    pub degenerate: bool,
}

fn ratio(dcov: f64, dvar_x: f64, dvar_y: f64) -> f64 {
    let denom = (dvar_x * dvar_y).sqrt();
    if denom > 0.0 {
        (dcov / denom).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn report(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<(DcorReport, CenteredDistances, CenteredDistances)> {
    check_points(x, "X")?;
    check_points(y, "Y")?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "paired sample size",
            expected: x.len(),
            got: y.len(),
        });
    }
    let a = double_center(x)?;
    let b = double_center(y)?;
    let dv = dcov(&a, &b)?;
    let dvar_x = dcov(&a, &a)?;
    let dvar_y = dcov(&b, &b)?;
    let r = DcorReport {
        n: x.len(),
        dcov: dv,
        dvar_x,
        dvar_y,
        dcor: ratio(dv, dvar_x, dvar_y),
        p_value: None,
        permutations: 0,
        seed: None,
        degenerate: dvar_x == 0.0 || dvar_y == 0.0,
    };
    Ok((r, a, b))
}

/// Distance covariance, variances and correlation of `(X, Y)`; rows are
/// paired observations, dimensions may differ.
pub fn dcor(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<DcorReport> {
    Ok(report(x, y)?.0)
}

/// [`dcor`] plus the permutation p-value
/// `(1 + #{r : dcor(X, Y∘π_r) ≥ dcor(X, Y)}) / (n_perm + 1)`.
///
/// Permutation `r` is drawn from stream `r` of `seed`, so the p-value does
/// not depend on the thread count. A zero distance variance gives
/// `p_value = 1` with `degenerate` set.
pub fn permutation_test(x: &[Vec<f64>], y: &[Vec<f64>], n_perm: usize, seed: u64) -> Result<DcorReport> {
    if n_perm == 0 {
        return Err(Error::InvalidParameter("n_perm must be at least 1".into()));
    }
    let (mut r, a, b) = report(x, y)?;
    r.permutations = n_perm;
    r.seed = Some(seed);
    if r.degenerate {
        log::warn!("zero distance variance; reporting p-value 1");
        r.p_value = Some(1.0);
        return Ok(r);
    }
    let n = r.n;
    let observed = r.dcor;
    let exceed: usize = (0..n_perm)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(seed, k as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let v = mean_product(&a.a, &b.a, Some(&perm)).max(0.0).sqrt();
            usize::from(ratio(v, r.dvar_x, r.dvar_y) >= observed)
        })
        .sum();
    r.p_value = Some((1 + exceed) as f64 / (n_perm + 1) as f64);
    Ok(r)
}

/// Rows mapped through `m`: `p ↦ M p`.
pub fn linear_transform(points: &[Vec<f64>], m: &DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
    points
        .iter()
        .map(|p| {
            if p.len() != m.ncols() {
                return Err(Error::DimensionMismatch {
                    what: "point dimension",
                    expected: m.ncols(),
                    got: p.len(),
                });
            }
            Ok((0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * p[c]).sum())
                .collect())
        })
        .collect()
}
