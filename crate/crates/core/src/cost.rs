//! Conditioning of the quadratic cost functional into
//! `J(alpha) = alpha' K alpha + k' alpha + k0`, convexity certification and the
//! least-distance change of variables `f = F (alpha - alpha0)`.

use nalgebra::{DMatrix, DVector};

use crate::basis::AffinePolyVector;
use crate::constraint::AffineConstraintSet;
use crate::linalg::{self, cholesky_upper};
use crate::lti::QuadraticCostSpec;
use crate::{Error, Result};

/// `W_ij = int_0^T t^i t^j dt = T^(i+j+1) / (i+j+1)`.
pub fn gram_weights(degree: usize, horizon: f64) -> DMatrix<f64> {
    DMatrix::from_fn(degree + 1, degree + 1, |i, j| {
        let p = (i + j + 1) as f64;
        libm::pow(horizon, p) / p
    })
}

/// Gram matrix of the normalized monomials `(t / T)^i` over `[0, T]`.
pub fn normalized_gram_weights(degree: usize, horizon: f64) -> DMatrix<f64> {
    DMatrix::from_fn(degree + 1, degree + 1, |i, j| horizon / (i + j + 1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterizedCost {
    pub k_mat: DMatrix<f64>,
    pub k_vec: DVector<f64>,
    pub k0: f64,
}

impl ParameterizedCost {
    /// Symmetrizes `K`.
    pub fn new(k_mat: DMatrix<f64>, k_vec: DVector<f64>, k0: f64) -> Result<Self> {
        let n = k_vec.len();
        if k_mat.nrows() != n || k_mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "cost Hessian",
                expected: n,
                found: k_mat.nrows(),
            });
        }
        let k_mat = (&k_mat + k_mat.transpose()) * 0.5;
        Ok(Self { k_mat, k_vec, k0 })
    }

    pub fn n_params(&self) -> usize {
        self.k_vec.len()
    }

    pub fn value(&self, alpha: &DVector<f64>) -> f64 {
        alpha.dot(&(&self.k_mat * alpha)) + self.k_vec.dot(alpha) + self.k0
    }

    pub fn gradient(&self, alpha: &DVector<f64>) -> DVector<f64> {
        &self.k_mat * alpha * 2.0 + &self.k_vec
    }
}

/// Stacks the normalized coefficient blocks of a polynomial vector:
/// offsets `(len * (N+1))` and sensitivities `(len * (N+1)) x N'`.
fn stack(polys: &AffinePolyVector) -> (DVector<f64>, DMatrix<f64>) {
    let len = polys.degree() + 1;
    let rows = polys.len() * len;
    let mut offset = DVector::zeros(rows);
    let mut linear = DMatrix::zeros(rows, polys.n_params());
    for (a, p) in polys.components.iter().enumerate() {
        offset.rows_mut(a * len, len).copy_from(p.offset());
        linear.view_mut((a * len, 0), (len, p.n_params())).copy_from(p.linear());
    }
    (offset, linear)
}

/// Value at the end of the horizon, `x(T) = e0 + E alpha`.
fn terminal(polys: &AffinePolyVector) -> (DVector<f64>, DMatrix<f64>) {
    let mut e0 = DVector::zeros(polys.len());
    let mut e = DMatrix::zeros(polys.len(), polys.n_params());
    for (a, p) in polys.components.iter().enumerate() {
        let (v, g) = p.affine_at(p.horizon());
        e0[a] = v;
        e.row_mut(a).copy_from(&g.transpose());
    }
    (e0, e)
}

/// Adds `int_0^T (p - ref)' W (p - ref) dt` for a stacked polynomial vector.
fn accumulate_stage(
    k_mat: &mut DMatrix<f64>,
    k_vec: &mut DVector<f64>,
    k0: &mut f64,
    polys: &AffinePolyVector,
    weight: &DMatrix<f64>,
    reference: Option<&DVector<f64>>,
    gram: &DMatrix<f64>,
) {
    if polys.is_empty() {
        return;
    }
    let (mut offset, linear) = stack(polys);
    let len = polys.degree() + 1;
    if let Some(r) = reference {
        for a in 0..polys.len() {
            offset[a * len] -= r[a];
        }
    }
    let omega = weight.kronecker(gram);
    let omega_lin = &omega * &linear;
    *k_mat += linear.transpose() * &omega_lin;
    *k_vec += omega_lin.transpose() * &offset * 2.0;
    *k0 += offset.dot(&(&omega * &offset));
}

/// Exact expansion of
/// `int_0^T [(x - x_ref)' Q (x - x_ref) + u' R u + c] dt + (x(T) - x*)' P (x(T) - x*)`.
pub fn condition_cost(
    gamma_x: &AffinePolyVector,
    gamma_u: &AffinePolyVector,
    cost: &QuadraticCostSpec,
) -> Result<ParameterizedCost> {
    if gamma_x.len() != cost.n() {
        return Err(Error::DimensionMismatch {
            what: "state weight",
            expected: gamma_x.len(),
            found: cost.n(),
        });
    }
    if gamma_u.len() != cost.m() {
        return Err(Error::DimensionMismatch {
            what: "input weight",
            expected: gamma_u.len(),
            found: cost.m(),
        });
    }
    if gamma_u.degree() != gamma_x.degree() || gamma_u.n_params() != gamma_x.n_params() {
        return Err(Error::DimensionMismatch {
            what: "state/input polynomial shape",
            expected: gamma_x.degree(),
            found: gamma_u.degree(),
        });
    }
    let horizon = gamma_x.horizon();
    if (horizon - cost.horizon).abs() > 1e-12 * horizon {
        return Err(Error::InvalidParameter("cost horizon differs from basis horizon"));
    }
    let n_free = gamma_x.n_params();
    let gram = normalized_gram_weights(gamma_x.degree(), horizon);

    let mut k_mat = DMatrix::zeros(n_free, n_free);
    let mut k_vec = DVector::zeros(n_free);
    let mut k0 = cost.stage_constant * horizon;

    accumulate_stage(
        &mut k_mat,
        &mut k_vec,
        &mut k0,
        gamma_x,
        &cost.q,
        Some(cost.stage_reference()),
        &gram,
    );
    accumulate_stage(&mut k_mat, &mut k_vec, &mut k0, gamma_u, &cost.r, None, &gram);

    let (mut e0, e) = terminal(gamma_x);
    e0 -= &cost.x_star;
    let pe = &cost.p * &e;
    k_mat += e.transpose() * &pe;
    k_vec += pe.transpose() * &e0 * 2.0;
    k0 += e0.dot(&(&cost.p * &e0));

    ParameterizedCost::new(k_mat, k_vec, k0)
}

/// Upper-triangular `F` with `F' F = K`; its existence certifies `K > 0`.
pub fn assert_convexity(pc: &ParameterizedCost) -> Result<DMatrix<f64>> {
    cholesky_upper(&pc.k_mat)
}

/// `alpha0 = -K^{-1} k / 2` through the Cholesky factor.
pub fn unconstrained_optimum(pc: &ParameterizedCost) -> Result<DVector<f64>> {
    let f = assert_convexity(pc)?;
    optimum_from_factor(&f, &pc.k_vec)
}

fn optimum_from_factor(f: &DMatrix<f64>, k_vec: &DVector<f64>) -> Result<DVector<f64>> {
    let y = linalg::solve_upper_transpose(f, &(k_vec * -0.5))?;
    linalg::solve_upper(f, &y)
}

/// `min f' f + c` subject to `E f <= b`, with `alpha = alpha0 + F^{-1} f`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastDistanceProblem {
    pub factor: DMatrix<f64>,
    pub alpha0: DVector<f64>,
    /// `J(alpha0)`.
    pub offset: f64,
    pub rows: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl LeastDistanceProblem {
    pub fn n_params(&self) -> usize {
        self.alpha0.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn alpha_from_f(&self, f: &DVector<f64>) -> DVector<f64> {
        let step = linalg::solve_upper(&self.factor, f)
            .expect("least-distance factor is nonsingular by construction");
        &self.alpha0 + step
    }

    pub fn f_from_alpha(&self, alpha: &DVector<f64>) -> DVector<f64> {
        &self.factor * (alpha - &self.alpha0)
    }

    /// `J = f' f + c`.
    pub fn cost(&self, f: &DVector<f64>) -> f64 {
        f.dot(f) + self.offset
    }
}

/// Rewrites `G alpha <= h` as `G F^{-1} f <= h - G alpha0`.
pub fn least_distance_transform(
    pc: &ParameterizedCost,
    constraints: &AffineConstraintSet,
) -> Result<LeastDistanceProblem> {
    let factor = assert_convexity(pc)?;
    let n = pc.n_params();
    if constraints.g.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "constraint parameter count",
            expected: n,
            found: constraints.g.ncols(),
        });
    }
    if (0..n).any(|i| factor[(i, i)] == 0.0) {
        return Err(Error::SingularMatrix("least-distance factor"));
    }
    let alpha0 = optimum_from_factor(&factor, &pc.k_vec)?;
    // (G F^{-1})' = F^{-T} G'
    let rows = factor
        .tr_solve_upper_triangular(&constraints.g.transpose())
        .ok_or(Error::SingularMatrix("least-distance factor"))?
        .transpose();
    let rhs = &constraints.h - &constraints.g * &alpha0;
    let offset = pc.value(&alpha0);
    Ok(LeastDistanceProblem {
        factor,
        alpha0,
        offset,
        rows,
        rhs,
    })
}
