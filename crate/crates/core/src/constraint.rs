//! Sampled nonpositivity conditions for polynomial constraints.
//!
//! A degree-`N` polynomial `P` on `[0, T]` is required to satisfy
//! `P(0) <= 0` and `P(p T / N) - Delta(N) P(0) <= 0` for `p = 1..N`, which turns
//! each pointwise-in-time constraint into `N + 1` affine rows in `alpha`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::basis::{horner, AffinePoly, AffinePolyVector};
use crate::linalg;
use crate::lti::LinearConstraintSpec;
use crate::{Error, Result, MAX_DEGREE};

const DELTA_GRID: usize = 10_000;

/// `q_ij = (i / N)^j` for `i, j = 1..N`.
pub fn sample_matrix(degree: usize) -> DMatrix<f64> {
    let n = degree as f64;
    DMatrix::from_fn(degree, degree, |i, j| libm::pow((i + 1) as f64 / n, (j + 1) as f64))
}

/// Coefficients of `eps(s) = -1 + s' Q^{-1} 1` in powers of `s`.
///
/// `Q = diag(x) V` with `V` the Vandermonde matrix on `x_i = i / N`, so
/// `Q^{-1} 1` interpolates `1 / x_i`. A general solve on the rounded `Q`
/// loses about six digits at `N = 15`; the structured solve keeps ~13.
fn worst_case_coefficients(degree: usize) -> Result<Vec<f64>> {
    let nodes: Vec<f64> = (1..=degree).map(|i| i as f64 / degree as f64).collect();
    let rhs: Vec<f64> = (1..=degree).map(|i| degree as f64 / i as f64).collect();
    let w = linalg::vandermonde_solve(&nodes, &rhs)?;
    let mut c = Vec::with_capacity(degree + 1);
    c.push(-1.0);
    c.extend(w);
    Ok(c)
}

/// `Delta(N) = sup_{s in [0,1]} eps(s)`, clamped at zero.
///
/// A dense grid brackets every sign change of `eps'`; each bracket is then
/// refined by bisection.
pub fn compute_delta(degree: usize) -> Result<f64> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::DegreeOutOfRange {
            degree,
            max: MAX_DEGREE,
        });
    }
    let eps = worst_case_coefficients(degree)?;
    let slope: Vec<f64> = eps
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, &c)| j as f64 * c)
        .collect();

    let mut best = horner(&eps, 0.0).max(horner(&eps, 1.0));
    let step = 1.0 / DELTA_GRID as f64;
    let mut prev_s = 0.0;
    let mut prev_d = horner(&slope, 0.0);
    for i in 1..=DELTA_GRID {
        let s = i as f64 * step;
        best = best.max(horner(&eps, s));
        let d = horner(&slope, s);
        if prev_d > 0.0 && d <= 0.0 {
            let (mut lo, mut hi) = (prev_s, s);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if horner(&slope, mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = best.max(horner(&eps, 0.5 * (lo + hi)));
        }
        prev_s = s;
        prev_d = d;
    }
    Ok(best.max(0.0))
}

/// `Delta(N)` for `N = 1..=MAX_DEGREE`, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    values: Vec<f64>,
}

impl DeltaTable {
    pub fn new() -> Self {
        let values = (1..=MAX_DEGREE)
            .map(|n| compute_delta(n).expect("degree within range"))
            .collect();
        Self { values }
    }

    pub fn get(&self, degree: usize) -> Result<f64> {
        if degree == 0 || degree > self.values.len() {
            return Err(Error::DegreeOutOfRange {
                degree,
                max: MAX_DEGREE,
            });
        }
        Ok(self.values[degree - 1])
    }

    /// `(N, Delta(N))` pairs in increasing `N`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &d)| (i + 1, d))
    }
}

impl Default for DeltaTable {
    fn default() -> Self {
        Self::new()
    }
}

/// Origin of an affine row: constraint `k`, sample `p` (`p = 0` is `t = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowTag {
    pub constraint: usize,
    pub sample: usize,
}

/// `G alpha <= h`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraintSet {
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub provenance: Vec<RowTag>,
}

impl AffineConstraintSet {
    pub fn empty(n_params: usize) -> Self {
        Self {
            g: DMatrix::zeros(0, n_params),
            h: DVector::zeros(0),
            provenance: Vec::new(),
        }
    }

    /// Rows without provenance (tagged as one constraint per row).
    pub fn from_rows(g: DMatrix<f64>, h: DVector<f64>) -> Self {
        let provenance = (0..h.len())
            .map(|k| RowTag {
                constraint: k,
                sample: 0,
            })
            .collect();
        Self { g, h, provenance }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Largest `G alpha - h`; nonpositive when every row holds.
    pub fn max_violation(&self, alpha: &DVector<f64>) -> f64 {
        (&self.g * alpha - &self.h)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `P_k(t) = (G_x Gamma_x + G_u Gamma_u + g0)_k` for every constraint row.
pub fn constraint_polynomials(
    gamma_x: &AffinePolyVector,
    gamma_u: &AffinePolyVector,
    spec: &LinearConstraintSpec,
) -> Result<Vec<AffinePoly>> {
    if spec.g_x.ncols() != gamma_x.len() {
        return Err(Error::DimensionMismatch {
            what: "state constraint columns",
            expected: gamma_x.len(),
            found: spec.g_x.ncols(),
        });
    }
    if spec.g_u.ncols() != gamma_u.len() {
        return Err(Error::DimensionMismatch {
            what: "input constraint columns",
            expected: gamma_u.len(),
            found: spec.g_u.ncols(),
        });
    }
    let (deg, n_free, horizon) = (gamma_x.degree(), gamma_x.n_params(), gamma_x.horizon());
    let mut polys = Vec::with_capacity(spec.len());
    for k in 0..spec.len() {
        let mut p = AffinePoly::zero(deg, n_free, horizon);
        for (a, x) in gamma_x.components.iter().enumerate() {
            p.add_scaled(spec.g_x[(k, a)], x)?;
        }
        for (b, u) in gamma_u.components.iter().enumerate() {
            p.add_scaled(spec.g_u[(k, b)], u)?;
        }
        p.add_constant(spec.g0[k]);
        polys.push(p);
    }
    Ok(polys)
}

/// Emits `P_k(0) <= 0` and `P_k(p T / N) - Delta P_k(0) <= 0`, `p = 1..N`, as
/// `N_c (N + 1)` affine rows.
pub fn condition_constraints(
    gamma_x: &AffinePolyVector,
    gamma_u: &AffinePolyVector,
    spec: &LinearConstraintSpec,
    delta: f64,
) -> Result<AffineConstraintSet> {
    let polys = constraint_polynomials(gamma_x, gamma_u, spec)?;
    let degree = gamma_x.degree();
    let n_free = gamma_x.n_params();
    let horizon = gamma_x.horizon();
    let rows = polys.len() * (degree + 1);
    let mut g = DMatrix::zeros(rows, n_free);
    let mut h = DVector::zeros(rows);
    let mut provenance = Vec::with_capacity(rows);
    let mut r = 0;
    for (k, p) in polys.iter().enumerate() {
        let (v0, g0) = p.affine_at(0.0);
        g.row_mut(r).copy_from(&g0.transpose());
        h[r] = -v0;
        provenance.push(RowTag {
            constraint: k,
            sample: 0,
        });
        r += 1;
        for sample in 1..=degree {
            let t = sample as f64 * horizon / degree as f64;
            let (v, gp) = p.affine_at(t);
            g.row_mut(r).copy_from(&(gp - &g0 * delta).transpose());
            h[r] = -(v - delta * v0);
            provenance.push(RowTag {
                constraint: k,
                sample,
            });
            r += 1;
        }
    }
    Ok(AffineConstraintSet { g, h, provenance })
}

/// Largest value of `P` over `grid_size` uniform points of `[0, T]`.
pub fn verify_nonpositivity(p: &AffinePoly, alpha: &DVector<f64>, grid_size: usize) -> Result<f64> {
    let c = p.coefficients(alpha)?;
    let last = grid_size.max(2) - 1;
    Ok((0..=last)
        .map(|i| horner(c.as_slice(), i as f64 / last as f64))
        .fold(f64::NEG_INFINITY, f64::max))
}
