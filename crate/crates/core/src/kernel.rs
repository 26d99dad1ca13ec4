//! Positive-definite kernels, Gram matrices and null-space bases.
//!
//! Points are real vectors (`&[Vec<f64>]`). Spline kernels live on `[0, 1]`
//! and take one-dimensional points. A precomputed kernel is indexed by object:
//! each point is a single non-negative integer stored as `f64`.
//!
//! The order-`m` spline kernel is the reproducing kernel of the penalty
//! subspace `{f : f^(k)(0) = 0, k < m}` under `∫ (f^(m))²`:
//!
//! ```text
//! K(s, t) = ∫₀¹ (s − u)₊^(m−1) (t − u)₊^(m−1) / ((m − 1)!)² du
//! ```
//!
//! so `m = 1` gives `min(s, t)` and `m = 2` gives `s²(3t − s)/6` for `s ≤ t`.
//! Its null space is the polynomials of degree `< m`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{self, numerical_rank};

/// A positive-definite function `K(s, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// Order-`m` spline kernel on `[0, 1]`, `m ∈ {1, 2}`.
    Spline { order: usize },
    /// `exp(−‖s − t‖² / (2σ²))`.
    Gaussian { sigma: f64 },
    /// `⟨s, t⟩`.
    Linear,
    /// A user-supplied Gram matrix over abstract objects `0..n`.
    Precomputed(DMatrix<f64>),
}

impl KernelSpec {
    pub fn spline(order: usize) -> Result<Self> {
        let k = KernelSpec::Spline { order };
        k.validate()?;
        Ok(k)
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        let k = KernelSpec::Gaussian { sigma };
        k.validate()?;
        Ok(k)
    }

    /// Wraps a square matrix as a kernel over objects, symmetrizing it as
    /// `(G + Gᵀ)/2`.
    pub fn precomputed(gram: DMatrix<f64>) -> Result<Self> {
        if !gram.is_square() {
            return Err(Error::DimensionMismatch {
                what: "precomputed Gram columns",
                expected: gram.nrows(),
                got: gram.ncols(),
            });
        }
        if gram.nrows() == 0 {
            return Err(Error::EmptyInput("precomputed Gram"));
        }
        ensure_finite(gram.iter(), "precomputed Gram")?;
        Ok(KernelSpec::Precomputed(linalg::symmetrize(&gram)))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Spline { order } if order == 1 || order == 2 => Ok(()),
            KernelSpec::Spline { order } => Err(Error::InvalidParameter(format!(
                "spline order must be 1 or 2, got {order}"
            ))),
            KernelSpec::Gaussian { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            KernelSpec::Gaussian { sigma } => Err(Error::InvalidParameter(format!(
                "gaussian width must be positive, got {sigma}"
            ))),
            KernelSpec::Linear | KernelSpec::Precomputed(_) => Ok(()),
        }
    }

    /// Checks that a point lies in the kernel's domain.
    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        ensure_finite(p, "point")?;
        match self {
            KernelSpec::Spline { .. } => {
                if p.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        what: "spline kernel point dimension",
                        expected: 1,
                        got: p.len(),
                    });
                }
                if !(0.0..=1.0).contains(&p[0]) {
                    return Err(Error::OutOfDomain {
                        value: p[0],
                        domain: "[0, 1]",
                    });
                }
                Ok(())
            }
            KernelSpec::Precomputed(g) => {
                object_index(p, g.nrows())?;
                Ok(())
            }
            KernelSpec::Gaussian { .. } | KernelSpec::Linear => {
                if p.is_empty() {
                    Err(Error::EmptyInput("point coordinates"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// `K(s, t)` for points already known to be in the domain.
    pub fn eval(&self, s: &[f64], t: &[f64]) -> f64 {
        match self {
            KernelSpec::Spline { order: 1 } => s[0].min(t[0]),
            KernelSpec::Spline { .. } => {
                let (lo, hi) = if s[0] <= t[0] { (s[0], t[0]) } else { (t[0], s[0]) };
                lo * lo * (3.0 * hi - lo) / 6.0
            }
            KernelSpec::Gaussian { sigma } => {
                let d2: f64 = s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Linear => s.iter().zip(t).map(|(a, b)| a * b).sum(),
            KernelSpec::Precomputed(g) => g[(s[0] as usize, t[0] as usize)],
        }
    }

    /// The natural null space accompanying this kernel in a spline fit:
    /// polynomials of degree `< m` for the order-`m` spline, constants
    /// otherwise.
    pub fn default_null_space(&self) -> NullSpace {
        match *self {
            KernelSpec::Spline { order } => NullSpace::Polynomial { order },
            _ => NullSpace::Constant,
        }
    }
}

fn object_index(p: &[f64], n: usize) -> Result<usize> {
    if p.len() != 1 || p[0] < 0.0 || p[0].fract() != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "precomputed kernel points must be single object indices, got {p:?}"
        )));
    }
    let i = p[0] as usize;
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, size: n });
    }
    Ok(i)
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Spline { order } => write!(f, "spline:{order}"),
            KernelSpec::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Precomputed(g) => write!(f, "precomputed[{}x{}]", g.nrows(), g.ncols()),
        }
    }
}

/// Parses `spline:M`, `gaussian:SIGMA` and `linear`. Precomputed kernels
/// carry data and are built with [`KernelSpec::precomputed`].
impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let parse = |p: Option<&str>, what: &str| -> Result<f64> {
            let p = p.ok_or_else(|| Error::InvalidParameter(format!("{what} requires a parameter")))?;
            p.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad {what} parameter `{p}`")))
        };
        match name {
            "spline" => {
                let order = match param {
                    None => 2,
                    Some(p) => p
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidParameter(format!("bad spline order `{p}`")))?,
                };
                KernelSpec::spline(order)
            }
            "gaussian" => KernelSpec::gaussian(parse(param, "gaussian")?),
            "linear" if param.is_none() => Ok(KernelSpec::Linear),
            _ => Err(Error::InvalidParameter(format!("unknown kernel `{s}`"))),
        }
    }
}

/// A symmetric matrix of kernel evaluations `K(tᵢ, tⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Accepts any square finite matrix and stores `(G + Gᵀ)/2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                what: "Gram matrix columns",
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        ensure_finite(m.iter(), "Gram matrix")?;
        Ok(GramMatrix {
            entries: linalg::symmetrize(&m),
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn is_psd(&self) -> Result<bool> {
        linalg::is_psd(&self.entries, linalg::PSD_RTOL)
    }

    /// Rows and columns `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> GramMatrix {
        let m = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.entries[(idx[i], idx[j])]);
        GramMatrix { entries: m }
    }
}

/// Tabulates `K(points[i], points[j])`. The result is exactly symmetric.
pub fn gram(kernel: &KernelSpec, points: &[Vec<f64>]) -> Result<GramMatrix> {
    kernel.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyInput("points"));
    }
    check_points(kernel, points)?;
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&points[i], &points[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(GramMatrix { entries: m })
}

/// The `a.len() × b.len()` matrix of `K(a[i], b[j])`.
pub fn cross_gram(kernel: &KernelSpec, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    kernel.validate()?;
    check_points(kernel, a)?;
    check_points(kernel, b)?;
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| kernel.eval(&a[i], &b[j])))
}

fn check_points(kernel: &KernelSpec, points: &[Vec<f64>]) -> Result<()> {
    let dim = points.first().map(Vec::len).unwrap_or(0);
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "point dimension",
                expected: dim,
                got: p.len(),
            });
        }
        kernel.check_point(p)?;
    }
    Ok(())
}

/// `K(i,i) + K(j,j) − 2K(i,j)`, the squared Euclidean distance between the
/// objects `i` and `j` embedded by `K`. Round-off negatives are clamped to
/// zero; `K` is assumed PSD.
pub fn squared_distance_from_kernel(k: &DMatrix<f64>, i: usize, j: usize) -> Result<f64> {
    let n = k.nrows();
    for idx in [i, j] {
        if idx >= n || idx >= k.ncols() {
            return Err(Error::IndexOutOfRange { index: idx, size: n });
        }
    }
    let d = k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)];
    Ok(d.max(0.0))
}

/// The null space of the penalty seminorm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NullSpace {
    /// No unpenalized part.
    None,
    /// Constant functions.
    Constant,
    /// Polynomials of degree `< order` in a one-dimensional coordinate.
    Polynomial { order: usize },
}

impl NullSpace {
    pub fn dimension(&self) -> usize {
        match *self {
            NullSpace::None => 0,
            NullSpace::Constant => 1,
            NullSpace::Polynomial { order } => order,
        }
    }

    /// Basis functions evaluated at one point.
    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        match *self {
            NullSpace::None => Vec::new(),
            NullSpace::Constant => vec![1.0],
            NullSpace::Polynomial { order } => (0..order).map(|k| p[0].powi(k as i32)).collect(),
        }
    }

    /// Evaluates the basis at `points` and checks full column rank.
    pub fn basis(&self, points: &[Vec<f64>]) -> Result<NullSpaceBasis> {
        if let NullSpace::Polynomial { order } = *self {
            if order == 0 {
                return Err(Error::InvalidParameter("polynomial order must be ≥ 1".into()));
            }
            if let Some(p) = points.iter().find(|p| p.len() != 1) {
                return Err(Error::DimensionMismatch {
                    what: "polynomial null space point dimension",
                    expected: 1,
                    got: p.len(),
                });
            }
        }
        let m = self.dimension();
        let cols = DMatrix::from_fn(points.len(), m, |i, k| self.eval(&points[i])[k]);
        NullSpaceBasis::new(*self, cols)
    }
}

/// The null-space basis functions evaluated at the `n` data points (`n × M`).
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpaceBasis {
    kind: NullSpace,
    columns: DMatrix<f64>,
}

impl NullSpaceBasis {
    /// Rejects rank-deficient column sets.
    pub fn new(kind: NullSpace, columns: DMatrix<f64>) -> Result<Self> {
        ensure_finite(columns.iter(), "null-space basis")?;
        let m = columns.ncols();
        if m > columns.nrows() {
            return Err(Error::RankDeficient {
                rank: columns.nrows(),
                columns: m,
            });
        }
        let rank = numerical_rank(&columns, 1e-10);
        if rank < m {
            return Err(Error::RankDeficient { rank, columns: m });
        }
        Ok(NullSpaceBasis { kind, columns })
    }

    pub fn empty(n: usize) -> Self {
        NullSpaceBasis {
            kind: NullSpace::None,
            columns: DMatrix::zeros(n, 0),
        }
    }

    pub fn constant(n: usize) -> Self {
        NullSpaceBasis {
            kind: NullSpace::Constant,
            columns: DMatrix::from_element(n, 1, 1.0),
        }
    }

    pub fn kind(&self) -> NullSpace {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn n(&self) -> usize {
        self.columns.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.columns.ncols()
    }

    pub fn select(&self, idx: &[usize]) -> Result<NullSpaceBasis> {
        let m = self.columns.ncols();
        let cols = DMatrix::from_fn(idx.len(), m, |i, k| self.columns[(idx[i], k)]);
        NullSpaceBasis::new(self.kind, cols)
    }
}
