use nalgebra::{DMatrix, DVector};

use super::{check_binary_labels, check_lambda, check_system, quad_form, Loss, PenalizedFit};
use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, NullSpaceBasis};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iters: usize,
    /// Stop when the gradient norm falls below this.
    pub tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iters: 100,
            tol: 1e-8,
        }
    }
}

/// `log(1 + eᶻ)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `(1/n) Σ log(1 + exp(−yᵢfᵢ)) + λcᵀKc`.
pub fn logistic_objective(k: &GramMatrix, t: &NullSpaceBasis, y: &[f64], c: &[f64], d: &[f64], lambda: f64) -> f64 {
    let c = DVector::from_column_slice(c);
    let f = k.matrix() * &c + t.matrix() * DVector::from_column_slice(d);
    objective(k.matrix(), y, &f, &c, lambda)
}

fn objective(k: &DMatrix<f64>, y: &[f64], f: &DVector<f64>, c: &DVector<f64>, lambda: f64) -> f64 {
    let n = y.len() as f64;
    let loss: f64 = y.iter().zip(f.iter()).map(|(yi, fi)| softplus(-yi * fi)).sum();
    loss / n + lambda * quad_form(k, c)
}

/// Penalized Bernoulli likelihood with ±1 labels, fitted by damped Newton.
///
/// The iterates keep `Tᵀc = 0`; the Newton step solves
///
/// ```text
/// [ WK/n + 2λI   WT/n ] [Δc]   [ −(g/n + 2λc) ]
/// [ Tᵀ           0    ] [Δd] = [ 0            ]
/// ```
///
/// with `g` the loss gradient and `W` its curvature, which is the full
/// Newton system premultiplied by `K⁻¹` on the range of `K`. Convergence is
/// measured on `‖g/n + 2λc‖ + ‖Tᵀg‖/n`.
pub fn fit_penalized_logistic(
    k: &GramMatrix,
    t: &NullSpaceBasis,
    y: &[f64],
    lambda: f64,
    opts: NewtonOptions,
) -> Result<PenalizedFit> {
    check_system(k, t, y)?;
    check_lambda(lambda, false)?;
    let pos = check_binary_labels(y)?;
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    let n = y.len();
    let m = t.dimension();
    let nf = n as f64;
    let km = k.matrix();
    let tm = t.matrix();

    let mut c = DVector::zeros(n);
    let mut d = DVector::zeros(m);
    let mut f = DVector::zeros(n);
    let mut obj = objective(km, y, &f, &c, lambda);
    let mut grad_norm = f64::INFINITY;

    for _ in 0..opts.max_iters {
        // g_i = ∂/∂f_i log(1 + exp(−y_i f_i)), w_i = σ(f_i)(1 − σ(f_i)).
        let g = DVector::from_iterator(n, (0..n).map(|i| -y[i] * sigmoid(-y[i] * f[i])));
        let w = DVector::from_iterator(n, (0..n).map(|i| {
            let p = sigmoid(f[i]);
            p * (1.0 - p)
        }));
        let rc = &g / nf + &c * (2.0 * lambda);
        let rd = tm.transpose() * &g / nf;
        grad_norm = rc.norm() + rd.norm();
        if grad_norm < opts.tol {
            return Ok(finish(c, d, lambda, t, obj));
        }

        let mut sys = DMatrix::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..n {
                sys[(i, j)] = w[i] * km[(i, j)] / nf;
            }
            sys[(i, i)] += 2.0 * lambda;
            for nu in 0..m {
                sys[(i, n + nu)] = w[i] * tm[(i, nu)] / nf;
                sys[(n + nu, i)] = tm[(i, nu)];
            }
        }
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-&rc));
        let step = sys
            .lu()
            .solve(&rhs)
            .ok_or(Error::Singular("logistic Newton system"))?;
        let dc = step.rows(0, n).into_owned();
        let dd = step.rows(n, m).into_owned();
        let df = km * &dc + tm * &dd;

        // Backtracking on the objective. The directional derivative is
        // ∇Jᵀ(Δc, Δd) = (g/n)ᵀΔf + 2λcᵀKΔc.
        let slope = g.dot(&df) / nf + 2.0 * lambda * c.dot(&(km * &dc));
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let c_new = &c + &dc * alpha;
            let f_new = &f + &df * alpha;
            let o = objective(km, y, &f_new, &c_new, lambda);
            if o <= obj + 1e-4 * alpha * slope || (o <= obj && slope.abs() < 1e-14) {
                c = c_new;
                d += &dd * alpha;
                f = f_new;
                obj = o;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    Err(Error::NonConvergence {
        solver: "logistic Newton",
        iterations: opts.max_iters,
        residual: grad_norm,
    })
}

fn finish(c: DVector<f64>, d: DVector<f64>, lambda: f64, t: &NullSpaceBasis, obj: f64) -> PenalizedFit {
    PenalizedFit {
        loss: Loss::Bernoulli,
        lambda,
        c: c.as_slice().to_vec(),
        d: d.as_slice().to_vec(),
        null_space: t.kind(),
        objective_value: obj,
    }
}
