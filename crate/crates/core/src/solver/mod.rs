//! Exact (active-set QP) and approximate (L1 simplex LP) solution of the
//! least-distance problem.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::cost::{self, LeastDistanceProblem, ParameterizedCost};
use crate::Result;

mod lp;
mod qp;

pub use lp::solve_lp;
pub use qp::{solve_qp, solve_qp_warm};

/// Absolute feasibility tolerance on rows scaled to unit gradient norm.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Qp,
    Lp,
    Unconstrained,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Qp => "qp",
            SolverKind::Lp => "lp",
            SolverKind::Unconstrained => "unconstrained",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    Unbounded,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::Unbounded => "unbounded",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub alpha: DVector<f64>,
    /// Least-distance coordinates, `alpha = alpha0 + F^{-1} f`.
    pub f: DVector<f64>,
    /// `J(alpha)`.
    pub quadratic_cost: f64,
    pub iterations: usize,
    pub solver: SolverKind,
    /// Rows of the least-distance problem holding with equality.
    pub active_rows: Vec<usize>,
    pub status: SolveStatus,
    /// KKT multipliers for `f' f` per row (QP only).
    pub multipliers: Option<DVector<f64>>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    fn from_f(
        ldp: &LeastDistanceProblem,
        f: DVector<f64>,
        solver: SolverKind,
        status: SolveStatus,
        iterations: usize,
    ) -> Self {
        let alpha = ldp.alpha_from_f(&f);
        let quadratic_cost = ldp.cost(&f);
        let active_rows = if status == SolveStatus::Optimal {
            active_rows(ldp, &f)
        } else {
            Vec::new()
        };
        Self {
            alpha,
            f,
            quadratic_cost,
            iterations,
            solver,
            active_rows,
            status,
            multipliers: None,
        }
    }
}

/// Rows scaled to unit norm; rows without parameter dependence are checked
/// directly and left out.
pub(crate) struct ScaledRows {
    /// Unit-norm rows, one per kept constraint.
    pub rows: Vec<DVector<f64>>,
    pub rhs: Vec<f64>,
    pub scale: Vec<f64>,
    /// Original row index of each kept row.
    pub origin: Vec<usize>,
}

impl ScaledRows {
    /// `None` when a parameter-free row is violated.
    pub fn new(ldp: &LeastDistanceProblem) -> Option<Self> {
        let mut out = ScaledRows {
            rows: Vec::new(),
            rhs: Vec::new(),
            scale: Vec::new(),
            origin: Vec::new(),
        };
        let max_norm = (0..ldp.n_rows())
            .map(|i| ldp.rows.row(i).norm())
            .fold(0.0, f64::max);
        for i in 0..ldp.n_rows() {
            let row = ldp.rows.row(i).transpose();
            let norm = row.norm();
            if norm <= 1e-13 * max_norm.max(1.0) {
                if ldp.rhs[i] < -FEASIBILITY_TOL {
                    return None;
                }
                continue;
            }
            out.rows.push(row / norm);
            out.rhs.push(ldp.rhs[i] / norm);
            out.scale.push(norm);
            out.origin.push(i);
        }
        Some(out)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// `b_i - n_i' f`; nonnegative when the row holds.
    pub fn slack(&self, i: usize, f: &DVector<f64>) -> f64 {
        self.rhs[i] - self.rows[i].dot(f)
    }
}

fn active_rows(ldp: &LeastDistanceProblem, f: &DVector<f64>) -> Vec<usize> {
    let residual = &ldp.rows * f - &ldp.rhs;
    (0..ldp.n_rows())
        .filter(|&i| {
            let norm = ldp.rows.row(i).norm();
            norm > 0.0 && residual[i] / norm >= -FEASIBILITY_TOL
        })
        .collect()
}

/// `alpha0` with no constraints at all.
pub fn solve_unconstrained(pc: &ParameterizedCost) -> Result<SolveResult> {
    let alpha = cost::unconstrained_optimum(pc)?;
    let quadratic_cost = pc.value(&alpha);
    Ok(SolveResult {
        f: DVector::zeros(alpha.len()),
        alpha,
        quadratic_cost,
        iterations: 0,
        solver: SolverKind::Unconstrained,
        active_rows: Vec::new(),
        status: SolveStatus::Optimal,
        multipliers: None,
    })
}

/// LP-versus-QP cost comparison against the worst-case `J0 + N' J_C` bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuboptimalityReport {
    /// `J` at the LP solution.
    pub j_lp: f64,
    /// Unconstrained cost.
    pub j0: f64,
    /// Extra cost the constraints impose on the exact solution.
    pub jc: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn suboptimality_report(
    qp: &SolveResult,
    lp: &SolveResult,
    pc: &ParameterizedCost,
) -> Result<SuboptimalityReport> {
    let alpha0 = cost::unconstrained_optimum(pc)?;
    let j0 = pc.value(&alpha0);
    let jc = pc.value(&qp.alpha) - j0;
    let j_lp = pc.value(&lp.alpha);
    let bound = j0 + pc.n_params() as f64 * jc;
    let holds = j_lp <= bound + 1e-8 * bound.abs().max(1.0);
    Ok(SuboptimalityReport {
        j_lp,
        j0,
        jc,
        bound,
        holds,
    })
}
