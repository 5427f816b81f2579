//! LTI problem data and the flatness (controller canonical form)
//! parameterization of states and inputs.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, numerical_rank};
use crate::{Error, Result};

/// `x' = A x + B u + d` with a constant drift `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    d: DVector<f64>,
}

impl LtiSystem {
    /// Drift-free system. Controllability is not required here; it is checked
    /// by the operations that need it.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::with_drift(a, b, DVector::zeros(n))
    }

    pub fn with_drift(a: DMatrix<f64>, b: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter("state dimension must be positive"));
        }
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "A columns",
                expected: n,
                found: a.ncols(),
            });
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                what: "B rows",
                expected: n,
                found: b.nrows(),
            });
        }
        let m = b.ncols();
        if m == 0 || m > n {
            return Err(Error::InvalidParameter("input dimension must satisfy 1 <= m <= n"));
        }
        if d.len() != n {
            return Err(Error::DimensionMismatch {
                what: "drift length",
                expected: n,
                found: d.len(),
            });
        }
        if a.iter().chain(b.iter()).chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("system matrices"));
        }
        Ok(Self { a, b, d })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn drift(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn is_controllable(&self) -> bool {
        controllability_matrix(self).1 == self.n()
    }

    /// Right-hand side `A x + B u + d`.
    pub fn rate(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.d
    }
}

/// `[B, AB, ..., A^{n-1} B]` and its numerical rank.
pub fn controllability_matrix(sys: &LtiSystem) -> (DMatrix<f64>, usize) {
    let (n, m) = (sys.n(), sys.m());
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut block = sys.b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = &sys.a * block;
    }
    let rank = numerical_rank(&ctrb);
    (ctrb, rank)
}

/// Controllability (Brunovsky) indices by greedy selection over
/// `b_1, ..., b_m, A b_1, ..., A b_m, ...`.
pub fn brunovsky_indices(sys: &LtiSystem) -> Result<Vec<usize>> {
    let (_, rank) = controllability_matrix(sys);
    let n = sys.n();
    if rank < n {
        return Err(Error::UncontrollableSystem { rank, n });
    }
    let m = sys.m();
    let mut indices = alloc::vec![0usize; m];
    let mut open = alloc::vec![true; m];
    let mut selected: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut powers = sys.b.clone();
    'outer: for _ in 0..n {
        for i in 0..m {
            if selected.len() == n {
                break 'outer;
            }
            if !open[i] {
                continue;
            }
            let col = powers.column(i).into_owned();
            let norm = col.norm();
            if norm == 0.0 {
                open[i] = false;
                continue;
            }
            let mut candidate = selected.clone();
            candidate.push(col / norm);
            if numerical_rank(&DMatrix::from_columns(&candidate)) == candidate.len() {
                selected = candidate;
                indices[i] += 1;
            } else {
                open[i] = false;
            }
        }
        powers = &sys.a * powers;
    }
    if selected.len() < n {
        return Err(Error::UncontrollableSystem {
            rank: selected.len(),
            n,
        });
    }
    Ok(indices)
}

/// Controller-canonical parameterization of a controllable system.
///
/// With `z = T_z (x - x_off)` ordered as
/// `(y_1, y_1', .., y_1^(r_1-1), y_2, .., y_m^(r_m-1))` the system variables are
///
/// ```text
/// x = Xi_x z + x_off
/// u = Xi_uz z + Xi_ut (y_1^(r_1), .., y_m^(r_m)) + u_off
/// ```
///
/// where `(x_off, u_off)` is an equilibrium of the drift, `A x_off + B u_off + d = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatMap {
    /// Flat outputs `y = C_f (x - x_off)`, one unit-norm row per input.
    pub c_f: DMatrix<f64>,
    pub relative_degrees: Vec<usize>,
    pub t_z: DMatrix<f64>,
    pub xi_x: DMatrix<f64>,
    pub xi_u_z: DMatrix<f64>,
    pub xi_u_top: DMatrix<f64>,
    pub x_off: DVector<f64>,
    pub u_off: DVector<f64>,
}

impl FlatMap {
    pub fn n(&self) -> usize {
        self.t_z.nrows()
    }

    pub fn m(&self) -> usize {
        self.relative_degrees.len()
    }

    pub fn max_relative_degree(&self) -> usize {
        self.relative_degrees.iter().copied().max().unwrap_or(0)
    }

    /// Offset of output `i`'s chain inside `z`.
    pub fn chain_start(&self, i: usize) -> usize {
        self.relative_degrees[..i].iter().sum()
    }

    /// Canonical state of a physical state.
    pub fn canonical_state(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.t_z * (x - &self.x_off)
    }

    pub fn state(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.xi_x * z + &self.x_off
    }

    pub fn input(&self, z: &DVector<f64>, top: &DVector<f64>) -> DVector<f64> {
        &self.xi_u_z * z + &self.xi_u_top * top + &self.u_off
    }
}

/// Builds the flat outputs and the maps `Xi_x`, `Xi_u` (Luenberger construction).
pub fn flat_transform(sys: &LtiSystem) -> Result<FlatMap> {
    let r = brunovsky_indices(sys)?;
    let (n, m) = (sys.n(), sys.m());
    let a = &sys.a;

    // [b_1, A b_1, .., A^{r_1-1} b_1, b_2, ..]
    let mut cols = Vec::with_capacity(n);
    for (i, &ri) in r.iter().enumerate() {
        let mut v = sys.b.column(i).into_owned();
        for _ in 0..ri {
            cols.push(v.clone());
            v = a * v;
        }
    }
    let cbar = DMatrix::from_columns(&cols);
    let cbar_inv = linalg::inverse(&cbar, "ordered controllability matrix")?;

    let mut c_f = DMatrix::zeros(m, n);
    let mut t_z = DMatrix::zeros(n, n);
    let mut top_state = DMatrix::zeros(m, n);
    let mut top_input = DMatrix::zeros(m, m);
    let mut end = 0;
    for (i, &ri) in r.iter().enumerate() {
        end += ri;
        let q = cbar_inv.row(end - 1).into_owned();
        let q = &q / q.norm();
        c_f.row_mut(i).copy_from(&q);
        let mut row = q;
        for k in 0..ri {
            t_z.row_mut(end - ri + k).copy_from(&row);
            if k + 1 == ri {
                top_input.row_mut(i).copy_from(&(&row * &sys.b));
            }
            row = &row * a;
        }
        top_state.row_mut(i).copy_from(&row);
    }
    let xi_x = linalg::inverse(&t_z, "canonical state transform")?;
    let top_input_inv = linalg::inverse(&top_input, "canonical input coupling")?;

    let (x_off, u_off) = drift_equilibrium(sys);

    let xi_u_z = -(&top_input_inv * &top_state * &xi_x);
    Ok(FlatMap {
        c_f,
        relative_degrees: r,
        t_z,
        xi_x,
        xi_u_z,
        xi_u_top: top_input_inv,
        x_off,
        u_off,
    })
}

/// `(x_e, u_e)` with `A x_e + B u_e + d = 0`, preferring `x_e = 0` when `d` lies
/// in the range of `B`. Exists for every controllable pair since `[A B]` has full
/// row rank.
fn drift_equilibrium(sys: &LtiSystem) -> (DVector<f64>, DVector<f64>) {
    let (n, m) = (sys.n(), sys.m());
    if sys.d.iter().all(|&v| v == 0.0) {
        return (DVector::zeros(n), DVector::zeros(m));
    }
    let u = -(linalg::pseudo_inverse(&sys.b) * &sys.d);
    let residual = (&sys.b * &u + &sys.d).norm();
    if residual <= 1e-12 * sys.d.norm().max(1.0) {
        return (DVector::zeros(n), u);
    }
    let mut ab = DMatrix::zeros(n, n + m);
    ab.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    ab.view_mut((0, n), (n, m)).copy_from(&sys.b);
    let sol = -(linalg::pseudo_inverse(&ab) * &sys.d);
    (sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned())
}

/// Stage and terminal weights of
/// `int_0^T (x - x_ref)' Q (x - x_ref) + u' R u + c dt + (x(T) - x*)' P (x(T) - x*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCostSpec {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub x_star: DVector<f64>,
    /// Stage reference; `x_star` when absent.
    pub x_ref: Option<DVector<f64>>,
    /// Constant added to the stage integrand (keeps reported costs exact for
    /// integrands completed into square form).
    pub stage_constant: f64,
    pub horizon: f64,
}

impl QuadraticCostSpec {
    pub fn new(
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        p: DMatrix<f64>,
        x_star: DVector<f64>,
        horizon: f64,
    ) -> Result<Self> {
        let spec = Self {
            q,
            r,
            p,
            x_star,
            x_ref: None,
            stage_constant: 0.0,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_stage_reference(mut self, x_ref: DVector<f64>) -> Result<Self> {
        self.x_ref = Some(x_ref);
        self.validate()?;
        Ok(self)
    }

    pub fn with_stage_constant(mut self, c: f64) -> Self {
        self.stage_constant = c;
        self
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }

    pub fn stage_reference(&self) -> &DVector<f64> {
        self.x_ref.as_ref().unwrap_or(&self.x_star)
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter("horizon must be positive"));
        }
        let n = self.q.nrows();
        for (what, mat, dim) in [("Q", &self.q, n), ("P", &self.p, n), ("R", &self.r, self.r.nrows())] {
            if mat.nrows() != dim || mat.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: dim,
                    found: mat.ncols(),
                });
            }
            if !is_symmetric(mat) {
                return Err(Error::InvalidParameter("weight matrices must be symmetric"));
            }
        }
        if self.x_star.len() != n {
            return Err(Error::DimensionMismatch {
                what: "x_star",
                expected: n,
                found: self.x_star.len(),
            });
        }
        if let Some(x_ref) = &self.x_ref {
            if x_ref.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "x_ref",
                    expected: n,
                    found: x_ref.len(),
                });
            }
        }
        Ok(())
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = linalg::max_abs(m).max(1.0);
    (m - m.transpose()).iter().all(|v| v.abs() <= 1e-12 * scale)
}

/// `G_x x(t) + G_u u(t) + g0 <= 0` for all `t` in the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraintSpec {
    pub g_x: DMatrix<f64>,
    pub g_u: DMatrix<f64>,
    pub g0: DVector<f64>,
    dropped: usize,
}

impl LinearConstraintSpec {
    /// Rows without any state or input dependence and `g0 <= 0` hold trivially
    /// and are removed; see [`Self::dropped_rows`].
    pub fn new(g_x: DMatrix<f64>, g_u: DMatrix<f64>, g0: DVector<f64>) -> Result<Self> {
        let rows = g0.len();
        if g_x.nrows() != rows || g_u.nrows() != rows {
            return Err(Error::DimensionMismatch {
                what: "constraint row count",
                expected: rows,
                found: if g_x.nrows() != rows { g_x.nrows() } else { g_u.nrows() },
            });
        }
        let keep: Vec<usize> = (0..rows)
            .filter(|&k| {
                let vacuous = g_x.row(k).iter().chain(g_u.row(k).iter()).all(|&v| v == 0.0)
                    && g0[k] <= 0.0;
                !vacuous
            })
            .collect();
        let dropped = rows - keep.len();
        Ok(Self {
            g_x: g_x.select_rows(keep.iter()),
            g_u: g_u.select_rows(keep.iter()),
            g0: g0.select_rows(keep.iter()),
            dropped,
        })
    }

    /// No constraints for an `n`-state, `m`-input system.
    pub fn none(n: usize, m: usize) -> Self {
        Self {
            g_x: DMatrix::zeros(0, n),
            g_u: DMatrix::zeros(0, m),
            g0: DVector::zeros(0),
            dropped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.g0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g0.is_empty()
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped
    }
}
