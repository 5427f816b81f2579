//! L1 relaxation of the least-distance problem, solved with a dense two-phase
//! primal simplex under Bland's rule.
//!
//! Each coordinate is split as `f_i = f_ip - f_in` with both parts
//! nonnegative and `sum (f_ip + f_in)` is minimized.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use super::{ScaledRows, SolveResult, SolveStatus, SolverKind};
use crate::cost::LeastDistanceProblem;

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-10;
const PHASE_ONE_TOL: f64 = 1e-9;

struct Tableau {
    /// Constraint rows, each `width + 1` long (last entry is the right-hand side).
    rows: Vec<Vec<f64>>,
    /// Reduced costs, same layout; last entry is minus the objective value.
    objective: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = row[c];
            if factor != 0.0 {
                for j in 0..=w {
                    row[j] -= factor * pivot_row[j];
                }
                row[c] = 0.0;
            }
        }
        let factor = self.objective[c];
        if factor != 0.0 {
            for j in 0..=w {
                self.objective[j] -= factor * pivot_row[j];
            }
            self.objective[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Recomputes reduced costs for `cost` against the current basis.
    fn price(&mut self, cost: &[f64]) {
        let w = self.width;
        let mut obj = vec![0.0; w + 1];
        obj[..w].copy_from_slice(cost);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for j in 0..=w {
                    obj[j] -= cb * self.rows[r][j];
                }
            }
        }
        self.objective = obj;
    }

    /// Primal simplex over columns `< allowed`, Bland's rule for entering and
    /// leaving variables.
    fn run(&mut self, allowed: usize, max_pivots: usize) -> Outcome {
        let w = self.width;
        loop {
            let Some(entering) = (0..allowed).find(|&j| self.objective[j] < -COST_TOL) else {
                return Outcome::Optimal;
            };
            let mut leaving: Option<(usize, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let a = row[entering];
                if a > PIVOT_TOL {
                    let ratio = row[w] / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((best, best_ratio)) => {
                            let tie = (ratio - best_ratio).abs() <= 1e-12 * best_ratio.abs().max(1.0);
                            if ratio < best_ratio && !tie || tie && self.basis[r] < self.basis[best] {
                                Some((r, ratio))
                            } else {
                                Some((best, best_ratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leaving else {
                return Outcome::Unbounded;
            };
            if self.pivots >= max_pivots {
                return Outcome::IterationLimit;
            }
            self.pivot(r, entering);
        }
    }
}

/// `min sum |f_i|` subject to the rows of `ldp`.
pub fn solve_lp(ldp: &LeastDistanceProblem, max_iter: Option<usize>) -> SolveResult {
    let n = ldp.n_params();
    let Some(scaled) = ScaledRows::new(ldp) else {
        return SolveResult::from_f(ldp, DVector::zeros(n), SolverKind::Lp, SolveStatus::Infeasible, 0);
    };
    let max_pivots = max_iter.unwrap_or(10 * ldp.n_rows().max(1));
    let m = scaled.len();
    let artificial_rows: Vec<usize> = (0..m).filter(|&i| scaled.rhs[i] < 0.0).collect();
    let n_art = artificial_rows.len();
    // columns: f_p | f_n | slack | artificial
    let slack0 = 2 * n;
    let art0 = slack0 + m;
    let width = art0 + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_art = art0;
    for i in 0..m {
        let mut row = vec![0.0; width + 1];
        let sign = if scaled.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = sign * scaled.rows[i][j];
            row[n + j] = -sign * scaled.rows[i][j];
        }
        row[slack0 + i] = sign;
        row[width] = sign * scaled.rhs[i];
        if sign < 0.0 {
            row[next_art] = 1.0;
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(slack0 + i);
        }
        rows.push(row);
    }
    let mut tab = Tableau {
        rows,
        objective: Vec::new(),
        basis,
        width,
        pivots: 0,
    };

    if n_art > 0 {
        let mut phase_one = vec![0.0; width];
        for c in phase_one[art0..].iter_mut() {
            *c = 1.0;
        }
        tab.price(&phase_one);
        match tab.run(width, max_pivots) {
            Outcome::IterationLimit => {
                return SolveResult::from_f(ldp, DVector::zeros(n), SolverKind::Lp, SolveStatus::IterationLimit, tab.pivots)
            }
            Outcome::Unbounded | Outcome::Optimal => {}
        }
        if -tab.objective[width] > PHASE_ONE_TOL {
            return SolveResult::from_f(ldp, DVector::zeros(n), SolverKind::Lp, SolveStatus::Infeasible, tab.pivots);
        }
        // drive remaining (zero-level) artificials out of the basis
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= art0 {
                if let Some(c) = (0..art0).find(|&j| tab.rows[r][j].abs() > PIVOT_TOL) {
                    tab.pivot(r, c);
                } else {
                    // redundant row
                    tab.rows.remove(r);
                    tab.basis.remove(r);
                    continue;
                }
            }
            r += 1;
        }
    }

    let mut phase_two = vec![0.0; width];
    for c in phase_two[..2 * n].iter_mut() {
        *c = 1.0;
    }
    tab.price(&phase_two);
    let status = match tab.run(art0, max_pivots) {
        Outcome::Optimal => SolveStatus::Optimal,
        Outcome::Unbounded => SolveStatus::Unbounded,
        Outcome::IterationLimit => SolveStatus::IterationLimit,
    };

    let mut f = DVector::zeros(n);
    for (r, &b) in tab.basis.iter().enumerate() {
        let v = tab.rows[r][width];
        if b < n {
            f[b] += v;
        } else if b < 2 * n {
            f[b - n] -= v;
        }
    }
    SolveResult::from_f(ldp, f, SolverKind::Lp, status, tab.pivots)
}
