//! Small dense complex matrices and the decompositions the precoder design
//! needs: a one-sided Jacobi SVD with a fixed phase convention, and a
//! Householder-based orthonormalization.
//!
//! Everything here is sized for the handful-of-antennas regime (≤ 8×8). No
//! blocking, no pivoted variants.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;
use thiserror::Error;

/// Maximum number of Jacobi sweeps before the SVD gives up.
pub const SVD_MAX_SWEEPS: usize = 60;

/// Relative off-diagonal threshold `|a_p† a_q| <= tol · ‖a_p‖ ‖a_q‖`.
pub const SVD_TOLERANCE: f64 = 1e-12;

/// Magnitude below which an entry is treated as zero when fixing phases.
const PHASE_ZERO: f64 = 1e-12;

/// Relative threshold under which a Householder pivot marks rank deficiency.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("SVD did not converge after {sweeps} sweeps (residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is empty ({rows}x{cols})")]
    Empty { rows: usize, cols: usize },
    #[error("columns are linearly dependent (pivot {pivot:e} at column {column})")]
    RankDeficient { column: usize, pivot: f64 },
    #[error("orthonormalization needs rows >= cols, got {rows}x{cols}")]
    TooWide { rows: usize, cols: usize },
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "expected {rows}x{cols} = {} entries, got {}",
            rows * cols,
            data.len()
        );
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Real diagonal matrix of the given shape.
    pub fn from_diagonal(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (k, &d) in diag.iter().enumerate().take(rows.min(cols)) {
            m[(k, k)] = Complex64::new(d, 0.0);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Hermitian (conjugate) transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Copies the listed columns, in order, into a new matrix.
    pub fn select_columns(&self, cols: impl IntoIterator<Item = usize>) -> Self {
        let cols: Vec<usize> = cols.into_iter().collect();
        Self::from_fn(self.rows, cols.len(), |i, k| self[(i, cols[k])])
    }

    pub fn set_column(&mut self, j: usize, values: &[Complex64]) {
        assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self[(i, j)] = *v;
        }
    }

    /// Multiplies every entry of column `j` by `factor`.
    pub fn scale_column(&mut self, j: usize, factor: Complex64) {
        for i in 0..self.rows {
            self[(i, j)] *= factor;
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Matrix product. Panics on a dimension mismatch.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }

    /// `self† · rhs` without materializing the adjoint.
    pub fn adjoint_mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "dimension mismatch in adjoint product");
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(k, i)].conj();
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }

    /// `Q Q†`: the orthogonal projector onto the column space when the columns
    /// are orthonormal.
    pub fn projector(&self) -> Self {
        self.matmul(&self.adjoint())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Sum of squared magnitudes of all entries.
pub fn frobenius_norm_sq(a: &ComplexMatrix) -> f64 {
    a.data.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius_norm(a: &ComplexMatrix) -> f64 {
    frobenius_norm_sq(a).sqrt()
}

fn column_norm_sq(a: &ComplexMatrix, j: usize) -> f64 {
    (0..a.rows).map(|i| a[(i, j)].norm_sqr()).sum()
}

/// `a_p† a_q` for two columns of the same matrix.
fn column_inner(a: &ComplexMatrix, p: usize, q: usize) -> Complex64 {
    (0..a.rows).map(|i| a[(i, p)].conj() * a[(i, q)]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    pub max_sweeps: usize,
    pub tolerance: f64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            max_sweeps: SVD_MAX_SWEEPS,
            tolerance: SVD_TOLERANCE,
        }
    }
}

/// Full singular value decomposition `a = left · diag(singular_values) · right†`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// rows × rows unitary.
    pub left: ComplexMatrix,
    /// Descending, length `min(rows, cols)`.
    pub singular_values: Vec<f64>,
    /// cols × cols unitary.
    pub right: ComplexMatrix,
}

impl SvdResult {
    /// Squared singular values, i.e. the eigenvalues of `a · a†` (descending).
    pub fn squared_singular_values(&self) -> Vec<f64> {
        self.singular_values.iter().map(|s| s * s).collect()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let sigma =
            ComplexMatrix::from_diagonal(self.left.rows(), self.right.rows(), &self.singular_values);
        self.left.matmul(&sigma).matmul(&self.right.adjoint())
    }
}

/// SVD with the default sweep cap and tolerance.
pub fn svd(a: &ComplexMatrix) -> Result<SvdResult, NumericsError> {
    svd_with(a, SvdOptions::default())
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns are rotated pairwise in a fixed cyclic order until every pair is
/// orthogonal to `opts.tolerance` relative to the product of their norms. The
/// output is sorted descending (stable with respect to column order on ties)
/// and the first non-negligible entry of every left singular vector is made
/// real and non-negative, with the matching right vector rotated to keep the
/// factorization exact.
pub fn svd_with(a: &ComplexMatrix, opts: SvdOptions) -> Result<SvdResult, NumericsError> {
    if a.rows == 0 || a.cols == 0 {
        return Err(NumericsError::Empty {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if !a.is_finite() {
        return Err(NumericsError::NonFinite);
    }

    // Work on a tall matrix; a wide input is handled through its adjoint.
    let (mut result, swapped) = if a.rows >= a.cols {
        (tall_svd(a, opts)?, false)
    } else {
        (tall_svd(&a.adjoint(), opts)?, true)
    };
    if swapped {
        std::mem::swap(&mut result.left, &mut result.right);
    }
    fix_phases(&mut result);
    Ok(result)
}

fn tall_svd(a: &ComplexMatrix, opts: SvdOptions) -> Result<SvdResult, NumericsError> {
    let m = a.rows;
    let n = a.cols;
    let mut work = a.clone();
    let mut v = ComplexMatrix::identity(n);

    // Columns this small relative to the whole matrix are numerical zeros.
    let negligible = frobenius_norm_sq(a) * f64::EPSILON * f64::EPSILON;
    let mut converged = n < 2;
    let mut residual = 0.0;
    let mut sweeps = 0;
    while !converged && sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        residual = 0.0;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = column_norm_sq(&work, p);
                let beta = column_norm_sq(&work, q);
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = column_inner(&work, p, q);
                let g = gamma.norm();
                let scale = (alpha * beta).sqrt();
                residual = f64::max(residual, g / scale);
                if g <= opts.tolerance * scale {
                    continue;
                }
                rotated = true;

                // Phase-align column q with p, then a real Jacobi rotation.
                let w_conj = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut work, p, q, c, s, w_conj);
                rotate_columns(&mut v, p, q, c, s, w_conj);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(NumericsError::NoConvergence { sweeps, residual });
    }

    let norms: Vec<f64> = (0..n).map(|j| column_norm_sq(&work, j).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable: equal values keep sweep order.
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let singular_values: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let right = v.select_columns(order.iter().copied());

    let sigma_max = singular_values[0];
    let cutoff = sigma_max * f64::EPSILON * (m.max(n) as f64);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    for (k, &j) in order.iter().enumerate() {
        let sigma = singular_values[k];
        if sigma > cutoff && sigma > 0.0 {
            let inv = 1.0 / sigma;
            basis.push((0..m).map(|i| work[(i, j)] * inv).collect());
        } else {
            break;
        }
    }
    complete_basis(&mut basis, m);
    let mut left = ComplexMatrix::zeros(m, m);
    for (j, col) in basis.iter().enumerate() {
        left.set_column(j, col);
    }

    Ok(SvdResult {
        left,
        singular_values,
        right,
    })
}

/// Applies `[a_p a_q] ← [a_p a_q] · [[c, s], [-s·w̄, c·w̄]]`.
fn rotate_columns(a: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, w_conj: Complex64) {
    for i in 0..a.rows {
        let x = a[(i, p)];
        let y = a[(i, q)] * w_conj;
        a[(i, p)] = x * c - y * s;
        a[(i, q)] = x * s + y * c;
    }
}

/// Extends an orthonormal set to a basis of `C^dim` using canonical vectors,
/// choosing at each step the one with the largest residual after projection.
fn complete_basis(basis: &mut Vec<Vec<Complex64>>, dim: usize) {
    while basis.len() < dim {
        let mut best: Option<(f64, Vec<Complex64>)> = None;
        for k in 0..dim {
            let mut e = vec![Complex64::new(0.0, 0.0); dim];
            e[k] = Complex64::new(1.0, 0.0);
            // Two passes of Gram-Schmidt against the existing vectors.
            for _ in 0..2 {
                for b in basis.iter() {
                    let proj: Complex64 = b.iter().zip(&e).map(|(bi, ei)| bi.conj() * ei).sum();
                    for (ei, bi) in e.iter_mut().zip(b) {
                        *ei -= proj * bi;
                    }
                }
            }
            let norm = e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(n, _)| norm > *n) {
                best = Some((norm, e));
            }
        }
        let (norm, mut e) = best.expect("dimension is positive");
        for z in e.iter_mut() {
            *z /= norm;
        }
        basis.push(e);
    }
}

fn fix_phases(result: &mut SvdResult) {
    let paired = result.singular_values.len();
    for j in 0..result.left.cols() {
        let col = result.left.column(j);
        let Some(first) = col.iter().find(|z| z.norm() > PHASE_ZERO) else {
            continue;
        };
        let phase = first / first.norm();
        let correction = phase.conj();
        result.left.scale_column(j, correction);
        if j < paired {
            result.right.scale_column(j, correction);
        }
    }
}

/// Orthonormal basis for the column space of `g` (Householder QR, thin Q).
///
/// Fails if the columns are numerically dependent; callers resample.
pub fn orthonormal_columns(g: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    let m = g.rows;
    let n = g.cols;
    if m == 0 || n == 0 {
        return Err(NumericsError::Empty { rows: m, cols: n });
    }
    if m < n {
        return Err(NumericsError::TooWide { rows: m, cols: n });
    }
    if !g.is_finite() {
        return Err(NumericsError::NonFinite);
    }

    let scale = (0..n).map(|j| column_norm_sq(g, j).sqrt()).fold(0.0, f64::max);
    let mut r = g.clone();
    let mut reflectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for k in 0..n {
        let x: Vec<Complex64> = (k..m).map(|i| r[(i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm <= RANK_TOLERANCE * scale || xnorm == 0.0 {
            return Err(NumericsError::RankDeficient {
                column: k,
                pivot: xnorm,
            });
        }
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        // v = x + phase·‖x‖·e1, normalized.
        let mut v = x;
        v[0] += phase * xnorm;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        for j in k..n {
            let dot: Complex64 = (k..m).map(|i| v[i - k].conj() * r[(i, j)]).sum();
            for i in k..m {
                r[(i, j)] -= 2.0 * v[i - k] * dot;
            }
        }
        reflectors.push(v);
    }

    // Q = H_0 H_1 ... H_{n-1} applied to the first n canonical columns.
    let mut q = ComplexMatrix::from_fn(m, n, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    for (k, v) in reflectors.iter().enumerate().rev() {
        for j in 0..n {
            let dot: Complex64 = (k..m).map(|i| v[i - k].conj() * q[(i, j)]).sum();
            for i in k..m {
                q[(i, j)] -= 2.0 * v[i - k] * dot;
            }
        }
    }
    Ok(q)
}

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
mod oracles;
