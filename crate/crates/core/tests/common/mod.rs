#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller.
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

/// A random orthogonal matrix from the QR factors of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    normal_matrix(rng, d, d).qr().q()
}

/// Solves `[K + nλI, T; Tᵀ, 0] [c; d] = [y; 0]` by dense LU.
pub fn block_solve(k: &DMatrix<f64>, t: &DMatrix<f64>, y: &[f64], lambda: f64) -> (DVector<f64>, DVector<f64>) {
    let n = k.nrows();
    let m = t.ncols();
    let mut a = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = k[(i, j)];
        }
        a[(i, i)] += n as f64 * lambda;
        for nu in 0..m {
            a[(i, n + nu)] = t[(i, nu)];
            a[(n + nu, i)] = t[(i, nu)];
        }
    }
    let mut rhs = DVector::zeros(n + m);
    for i in 0..n {
        rhs[i] = y[i];
    }
    let sol = a.lu().solve(&rhs).expect("nonsingular block system");
    (sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned())
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-300)
}
