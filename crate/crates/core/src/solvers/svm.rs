use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_binary_labels, check_lambda, quad_form, Loss, PenalizedFit};
use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, NullSpace};

#[derive(Debug, Clone, Copy)]
pub struct SvmOptions {
    /// Stop once primal minus dual objective is below this.
    pub gap_tol: f64,
    pub max_sweeps: usize,
    /// Seed for the sweep order.
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions {
            gap_tol: 1e-6,
            max_sweeps: 20_000,
            seed: 0,
        }
    }
}

/// `(1/n) Σ (1 − yᵢfᵢ)₊ + λcᵀKc` with `f = Kc + d`.
pub fn hinge_objective(k: &GramMatrix, y: &[f64], c: &[f64], d: f64, lambda: f64) -> f64 {
    let c = DVector::from_column_slice(c);
    let g = k.matrix() * &c;
    mean_hinge(y, &g, d) + lambda * quad_form(k.matrix(), &c)
}

fn mean_hinge(y: &[f64], g: &DVector<f64>, d: f64) -> f64 {
    y.iter()
        .zip(g.iter())
        .map(|(yi, gi)| (1.0 - yi * (gi + d)).max(0.0))
        .sum::<f64>()
        / y.len() as f64
}

/// Exact minimizer over the intercept of the mean hinge loss for fixed `g = Kc`.
/// The loss is convex piecewise linear with kinks at `yᵢ − gᵢ`; ties resolve
/// to the midpoint of the minimizing interval.
fn best_intercept(y: &[f64], g: &DVector<f64>) -> f64 {
    let kinks: Vec<f64> = y.iter().zip(g.iter()).map(|(yi, gi)| yi - gi).collect();
    let vals: Vec<f64> = kinks.iter().map(|&b| mean_hinge(y, g, b)).collect();
    let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * best.abs().max(1.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (b, v) in kinks.iter().zip(&vals) {
        if *v <= best + slack {
            lo = lo.min(*b);
            hi = hi.max(*b);
        }
    }
    0.5 * (lo + hi)
}

/// Hinge-loss SVM with a constant null space.
///
/// Solves the box-constrained dual
///
/// ```text
/// min ½αᵀQα − 1ᵀα,   0 ≤ α ≤ 1/(2nλ),   yᵀα = 0,   Q = diag(y) K diag(y)
/// ```
///
/// by pairwise coordinate updates: sweeps visit the points in a seeded random
/// order and pair each KKT violator with its most violating partner. The
/// primal coefficients are `cᵢ = αᵢyᵢ`; the intercept minimizes the primal
/// exactly for that `c`. Iteration stops when the duality gap falls below
/// `gap_tol`.
///
/// If every label is the same the minimizer is `f ≡ y₀` with zero objective,
/// which is returned directly.
pub fn fit_svm(k: &GramMatrix, y: &[f64], lambda: f64, opts: SvmOptions) -> Result<PenalizedFit> {
    let n = k.n();
    if n == 0 {
        return Err(Error::EmptyInput("Gram matrix"));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "label length",
            expected: n,
            got: y.len(),
        });
    }
    check_lambda(lambda, false)?;
    let pos = check_binary_labels(y)?;
    if pos == 0 || pos == n {
        return Ok(PenalizedFit {
            loss: Loss::Hinge,
            lambda,
            c: vec![0.0; n],
            d: vec![y[0]],
            null_space: NullSpace::Constant,
            objective_value: 0.0,
        });
    }

    let km = k.matrix();
    let cap = 1.0 / (2.0 * n as f64 * lambda);
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * km[(i, j)]);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut eps = 1e-3;
    let mut gap = f64::INFINITY;

    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < cap) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < cap);

    for _ in 0..opts.max_sweeps {
        order.shuffle(&mut rng);
        let mut updates = 0usize;
        for &i in &order {
            let vi = -y[i] * grad[i];
            if in_up(alpha[i], y[i]) {
                if let Some(j) = extreme(&alpha, &grad, y, |t| in_low(alpha[t], y[t]), false) {
                    if vi - (-y[j] * grad[j]) > eps {
                        pair_update(i, j, &q, y, cap, &mut alpha, &mut grad);
                        updates += 1;
                        continue;
                    }
                }
            }
            if in_low(alpha[i], y[i]) {
                if let Some(j) = extreme(&alpha, &grad, y, |t| in_up(alpha[t], y[t]), true) {
                    if -y[j] * grad[j] - vi > eps {
                        pair_update(j, i, &q, y, cap, &mut alpha, &mut grad);
                        updates += 1;
                    }
                }
            }
        }

        let c = DVector::from_iterator(n, (0..n).map(|i| alpha[i] * y[i]));
        let g = km * &c;
        let d = best_intercept(y, &g);
        let penalty = quad_form(km, &c);
        let primal = mean_hinge(y, &g, d) + lambda * penalty;
        // Dual on the primal scale: 2λ(1ᵀα − ½αᵀQα), and αᵀQα = cᵀKc.
        let dual = 2.0 * lambda * (alpha.iter().sum::<f64>() - 0.5 * penalty);
        gap = primal - dual;
        if gap < opts.gap_tol {
            return Ok(PenalizedFit {
                loss: Loss::Hinge,
                lambda,
                c: c.as_slice().to_vec(),
                d: vec![d],
                null_space: NullSpace::Constant,
                objective_value: primal,
            });
        }
        if updates == 0 {
            if eps < 1e-15 {
                break;
            }
            eps *= 0.1;
        }
    }

    Err(Error::NonConvergence {
        solver: "SVM pairwise coordinate descent",
        iterations: opts.max_sweeps,
        residual: gap,
    })
}

/// Index in the selected set with the smallest (`want_max = false`) or largest
/// value of `−yₜGₜ`.
fn extreme(
    alpha: &[f64],
    grad: &[f64],
    y: &[f64],
    member: impl Fn(usize) -> bool,
    want_max: bool,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for t in 0..alpha.len() {
        if !member(t) {
            continue;
        }
        let v = -y[t] * grad[t];
        let better = match best {
            None => true,
            Some((_, b)) => {
                if want_max {
                    v > b
                } else {
                    v < b
                }
            }
        };
        if better {
            best = Some((t, v));
        }
    }
    best.map(|(t, _)| t)
}

/// Two-variable subproblem for `i` (from the up set) and `j` (from the low
/// set), clipped to the box while keeping `yᵀα` fixed.
fn pair_update(
    i: usize,
    j: usize,
    q: &DMatrix<f64>,
    y: &[f64],
    cap: f64,
    alpha: &mut [f64],
    grad: &mut [f64],
) {
    const TAU: f64 = 1e-12;
    let (old_i, old_j) = (alpha[i], alpha[j]);
    if y[i] != y[j] {
        let mut quad = q[(i, i)] + q[(j, j)] + 2.0 * q[(i, j)];
        if quad <= 0.0 {
            quad = TAU;
        }
        let delta = (-grad[i] - grad[j]) / quad;
        let diff = alpha[i] - alpha[j];
        alpha[i] += delta;
        alpha[j] += delta;
        if diff > 0.0 {
            if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            }
        } else if alpha[i] < 0.0 {
            alpha[i] = 0.0;
            alpha[j] = -diff;
        }
        if diff > 0.0 {
            if alpha[i] > cap {
                alpha[i] = cap;
                alpha[j] = cap - diff;
            }
        } else if alpha[j] > cap {
            alpha[j] = cap;
            alpha[i] = cap + diff;
        }
    } else {
        let mut quad = q[(i, i)] + q[(j, j)] - 2.0 * q[(i, j)];
        if quad <= 0.0 {
            quad = TAU;
        }
        let delta = (grad[i] - grad[j]) / quad;
        let sum = alpha[i] + alpha[j];
        alpha[i] -= delta;
        alpha[j] += delta;
        if sum > cap {
            if alpha[i] > cap {
                alpha[i] = cap;
                alpha[j] = sum - cap;
            }
        } else if alpha[j] < 0.0 {
            alpha[j] = 0.0;
            alpha[i] = sum;
        }
        if sum > cap {
            if alpha[j] > cap {
                alpha[j] = cap;
                alpha[i] = sum - cap;
            }
        } else if alpha[i] < 0.0 {
            alpha[i] = 0.0;
            alpha[j] = sum;
        }
    }
    let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
    for t in 0..grad.len() {
        grad[t] += q[(t, i)] * di + q[(t, j)] * dj;
    }
}
