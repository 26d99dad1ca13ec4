//! Dense primal-dual interior-point method for box-constrained convex QPs
//!
//! ```text
//! min ½xᵀPx + qᵀx   s.t.  Ax = b,  0 ≤ x ≤ u
//! ```
//!
//! with Mehrotra predictor-corrector steps. Sized for the multicategory SVM
//! dual, where `P` is PSD and dense.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) struct BoxQp<'a> {
    pub p: &'a DMatrix<f64>,
    pub q: &'a DVector<f64>,
    pub a: &'a DMatrix<f64>,
    pub b: &'a DVector<f64>,
    pub upper: &'a DVector<f64>,
}

pub(crate) struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of `Ax = b`, with stationarity `Px + q − Aᵀy = z − w`.
    pub y: DVector<f64>,
    pub objective: f64,
}

const MAX_ITERS: usize = 200;
const TOL: f64 = 1e-11;

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0_f64, f64::min)
}

impl BoxQp<'_> {
    pub(crate) fn solve(&self) -> Result<QpSolution> {
        let n = self.q.len();
        let m = self.b.len();
        let u = self.upper;
        let mut x = u * 0.5;
        let mut y = DVector::zeros(m);
        let mut z = DVector::from_element(n, 1.0);
        let mut w = DVector::from_element(n, 1.0);
        let scale_b = 1.0 + self.b.amax();
        let scale_q = 1.0 + self.q.amax();
        let mut last = f64::INFINITY;

        for _ in 0..MAX_ITERS {
            let s = u - &x;
            let rd = self.p * &x + self.q - self.a.transpose() * &y - &z + &w;
            let rp = self.a * &x - self.b;
            let mu = (x.dot(&z) + s.dot(&w)) / (2 * n) as f64;
            last = rd.amax() / scale_q + rp.amax() / scale_b + mu;
            if rd.amax() <= TOL * scale_q && rp.amax() <= TOL * scale_b && mu <= TOL {
                let objective = 0.5 * x.dot(&(self.p * &x)) + self.q.dot(&x);
                return Ok(QpSolution { x, y, objective });
            }

            // Reduced system [H  −Aᵀ; A  0], H = P + Z/X + W/S.
            let mut kkt = DMatrix::zeros(n + m, n + m);
            kkt.view_mut((0, 0), (n, n)).copy_from(self.p);
            for i in 0..n {
                kkt[(i, i)] += z[i] / x[i] + w[i] / s[i];
            }
            kkt.view_mut((0, n), (n, m)).copy_from(&(-self.a.transpose()));
            kkt.view_mut((n, 0), (m, n)).copy_from(self.a);
            let lu = kkt.lu();

            let direction = |t1: &DVector<f64>, t2: &DVector<f64>| -> Result<_> {
                let mut rhs = DVector::zeros(n + m);
                for i in 0..n {
                    rhs[i] = -rd[i] + t1[i] / x[i] - t2[i] / s[i];
                }
                for j in 0..m {
                    rhs[n + j] = -rp[j];
                }
                let sol = lu.solve(&rhs).ok_or(Error::Singular("interior-point KKT system"))?;
                let dx = sol.rows(0, n).into_owned();
                let dy = sol.rows(n, m).into_owned();
                let dz = DVector::from_fn(n, |i, _| (t1[i] - z[i] * dx[i]) / x[i]);
                let dw = DVector::from_fn(n, |i, _| (t2[i] + w[i] * dx[i]) / s[i]);
                Ok((dx, dy, dz, dw))
            };

            // Predictor.
            let t1 = -x.component_mul(&z);
            let t2 = -s.component_mul(&w);
            let (dxa, _, dza, dwa) = direction(&t1, &t2)?;
            let ap = max_step(&x, &dxa).min(max_step(&s, &(-&dxa)));
            let ad = max_step(&z, &dza).min(max_step(&w, &dwa));
            let a_aff = ap.min(ad);
            let mu_aff = ((&x + &dxa * a_aff).dot(&(&z + &dza * a_aff))
                + (&s - &dxa * a_aff).dot(&(&w + &dwa * a_aff)))
                / (2 * n) as f64;
            let sigma = (mu_aff / mu).powi(3).min(1.0);

            // Corrector.
            let t1 = DVector::from_fn(n, |i, _| sigma * mu - x[i] * z[i] - dxa[i] * dza[i]);
            let t2 = DVector::from_fn(n, |i, _| sigma * mu - s[i] * w[i] + dxa[i] * dwa[i]);
            let (dx, dy, dz, dw) = direction(&t1, &t2)?;
            let ap = max_step(&x, &dx).min(max_step(&s, &(-&dx)));
            let ad = max_step(&z, &dz).min(max_step(&w, &dw));
            let alpha = (0.995 * ap.min(ad)).min(1.0);
            x += &dx * alpha;
            y += &dy * alpha;
            z += &dz * alpha;
            w += &dw * alpha;
            if x.iter().chain(z.iter()).chain(w.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("interior-point iterate"));
            }
        }
        Err(Error::NonConvergence {
            solver: "interior-point QP",
            iterations: MAX_ITERS,
            residual: last,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_box_qp_with_equality() {
        // min ½(x₀² + x₁²) − x₀ − 3x₁, x₀ + x₁ = 1, 0 ≤ x ≤ 0.8
        // Unconstrained along the line: x₁ − x₀ = 2 → clipped at x₁ = 0.8, x₀ = 0.2.
        let p = DMatrix::identity(2, 2);
        let q = DVector::from_vec(vec![-1.0, -3.0]);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0]);
        let u = DVector::from_vec(vec![0.8, 0.8]);
        let sol = BoxQp { p: &p, q: &q, a: &a, b: &b, upper: &u }.solve().unwrap();
        assert!((sol.x[0] - 0.2).abs() < 1e-8);
        assert!((sol.x[1] - 0.8).abs() < 1e-8);
        // Stationarity for the free x₀: x₀ − 1 − y = 0.
        assert!((sol.y[0] - (0.2 - 1.0)).abs() < 1e-7);
    }
}
