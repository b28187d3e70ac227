//! Independent reference computations used only by tests. Nothing here calls
//! into the library's SVD or orthonormalization.

#![allow(dead_code)]

use super::ComplexMatrix;
use num_complex::Complex64;
use rand::Rng;

/// i.i.d. CN(0, 1) entries via Box-Muller on uniform draws.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random::<f64>();
        let r = (-u1.ln()).sqrt(); // radius for variance 1/2 per component
        let t = std::f64::consts::TAU * u2;
        Complex64::new(r * t.cos(), r * t.sin())
    })
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Classical Gram-Schmidt (with one re-orthogonalization pass).
pub fn gram_schmidt(g: &ComplexMatrix) -> ComplexMatrix {
    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    for j in 0..g.cols() {
        let mut v = g.column(j);
        for _ in 0..2 {
            let coeffs: Vec<Complex64> = cols.iter().map(|q| inner(q, &v)).collect();
            for (q, c) in cols.iter().zip(coeffs) {
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let n = norm(&v);
        cols.push(v.into_iter().map(|z| z / n).collect());
    }
    let mut out = ComplexMatrix::zeros(g.rows(), g.cols());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

fn matvec(a: &ComplexMatrix, x: &[Complex64]) -> Vec<Complex64> {
    (0..a.rows())
        .map(|i| (0..a.cols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

/// Eigenvalues (descending) of a Hermitian positive semidefinite matrix by
/// power iteration with Hotelling deflation.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Vec<f64> {
    let n = a.rows();
    let mut work = a.clone();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        // Deterministic, generic start vector.
        let mut x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0 + 0.37 * i as f64, 0.11 * (i + k) as f64))
            .collect();
        let nx = norm(&x);
        x.iter_mut().for_each(|z| *z /= nx);
        let mut lambda = 0.0;
        for it in 0..400_000 {
            let y = matvec(&work, &x);
            let new_lambda = inner(&x, &y).re;
            let ny = norm(&y);
            if ny == 0.0 {
                lambda = 0.0;
                break;
            }
            x = y.into_iter().map(|z| z / ny).collect();
            let done = (new_lambda - lambda).abs() <= 1e-15 * new_lambda.abs().max(1e-300);
            lambda = new_lambda;
            if done && it > 10 {
                break;
            }
        }
        out.push(lambda.max(0.0));
        // work -= lambda x x†
        for i in 0..n {
            for j in 0..n {
                work[(i, j)] -= lambda * x[i] * x[j].conj();
            }
        }
    }
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Eigenvalues (descending) of a 2×2 Hermitian matrix in closed form.
pub fn hermitian_eigenvalues_2x2(a: &ComplexMatrix) -> [f64; 2] {
    let p = a[(0, 0)].re;
    let d = a[(1, 1)].re;
    let b = a[(0, 1)].norm();
    let mid = 0.5 * (p + d);
    let rad = (0.25 * (p - d) * (p - d) + b * b).sqrt();
    [mid + rad, (mid - rad).max(0.0)]
}
