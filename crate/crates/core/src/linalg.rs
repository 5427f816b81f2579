//! Small dense kernels shared by the modules.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative singular-value threshold used for every numerical rank decision.
pub const RANK_TOL: f64 = 1e-9;

/// Numerical rank: singular values above `RANK_TOL * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

/// Upper-triangular Cholesky factor `F` with `F' F = K`.
///
/// A pivot that is not clearly positive relative to the largest diagonal entry
/// is reported with its index.
pub fn cholesky_upper(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "cholesky input columns",
            expected: n,
            found: k.ncols(),
        });
    }
    let max_diag = (0..n).map(|i| k[(i, i)].abs()).fold(0.0, f64::max);
    let floor = 64.0 * (n.max(1) as f64) * f64::EPSILON * max_diag;
    let mut f = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = k[(j, j)];
        for p in 0..j {
            pivot -= f[(p, j)] * f[(p, j)];
        }
        if !(pivot > floor) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let djj = libm::sqrt(pivot);
        f[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut v = k[(j, i)];
            for p in 0..j {
                v -= f[(p, j)] * f[(p, i)];
            }
            f[(j, i)] = v / djj;
        }
    }
    Ok(f)
}

/// Solves `U x = b` for upper-triangular `U`.
pub fn solve_upper(u: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    u.solve_upper_triangular(b)
        .ok_or(Error::SingularMatrix("upper-triangular solve"))
}

/// Solves `U' x = b` for upper-triangular `U`.
pub fn solve_upper_transpose(u: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    u.tr_solve_upper_triangular(b)
        .ok_or(Error::SingularMatrix("transposed upper-triangular solve"))
}

/// Dense inverse through LU with partial pivoting.
pub fn inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    m.clone().try_inverse().ok_or(Error::SingularMatrix(what))
}

/// Moore-Penrose pseudo-inverse with the crate-wide rank threshold.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.pseudo_inverse(RANK_TOL * max.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(m.ncols(), m.nrows()))
}

/// Maximum absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Coefficients `a` of `sum_j a_j x^j` with value `b_i` at `x_i`
/// (Bjorck-Pereyra). Far more accurate than a general solve on the
/// Vandermonde matrix when the nodes are positive and increasing.
pub fn vandermonde_solve(x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            what: "Vandermonde right-hand side",
            expected: n,
            found: b.len(),
        });
    }
    let mut a = b.to_vec();
    // Newton divided differences
    for k in 0..n.saturating_sub(1) {
        for i in (k + 1..n).rev() {
            let gap = x[i] - x[i - k - 1];
            if gap == 0.0 {
                return Err(Error::SingularMatrix("repeated Vandermonde node"));
            }
            a[i] = (a[i] - a[i - 1]) / gap;
        }
    }
    // Newton to monomial form
    for k in (0..n.saturating_sub(1)).rev() {
        for i in k..n - 1 {
            a[i] -= x[k] * a[i + 1];
        }
    }
    Ok(a)
}
