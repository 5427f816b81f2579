//! Dual active-set method (Goldfarb-Idnani) specialized to the identity
//! Hessian of the least-distance problem.
//!
//! Constraints are handled in the form `a_j' f >= c_j` with `a_j = -n_j`,
//! `c_j = -b_j`. The iterate always minimizes `f' f / 2` over the current
//! working set; the most violated row enters next (lowest index on ties).

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{ScaledRows, SolveResult, SolveStatus, SolverKind, FEASIBILITY_TOL};
use crate::cost::LeastDistanceProblem;

const DEPENDENCE_TOL: f64 = 1e-12;
const RATIO_TOL: f64 = 1e-12;

/// `min f' f` subject to the rows of `ldp`, starting from `f = 0`.
pub fn solve_qp(ldp: &LeastDistanceProblem, max_iter: Option<usize>) -> SolveResult {
    solve_qp_warm(ldp, max_iter, &[])
}

/// As [`solve_qp`], seeding the working set with `seed` (row indices of a
/// previous solve). Seed rows that are dependent or carry negative multipliers
/// are discarded before iterating.
pub fn solve_qp_warm(ldp: &LeastDistanceProblem, max_iter: Option<usize>, seed: &[usize]) -> SolveResult {
    let n = ldp.n_params();
    let Some(rows) = ScaledRows::new(ldp) else {
        return SolveResult::from_f(ldp, DVector::zeros(n), SolverKind::Qp, SolveStatus::Infeasible, 0);
    };
    let max_iter = max_iter.unwrap_or(10 * ldp.n_rows().max(1));
    let mut state = WorkingSet::new(&rows, n);
    let mut iterations = state.seed(seed);

    let status = 'outer: loop {
        // most violated inactive row
        let mut entering = None;
        let mut worst = -FEASIBILITY_TOL;
        for i in 0..rows.len() {
            if state.active.contains(&i) {
                continue;
            }
            let s = rows.slack(i, &state.f);
            if s < worst {
                worst = s;
                entering = Some(i);
            }
        }
        let Some(p) = entering else {
            break SolveStatus::Optimal;
        };
        let normal = -&rows.rows[p];
        let mut u_p = 0.0;
        loop {
            if iterations >= max_iter {
                break 'outer SolveStatus::IterationLimit;
            }
            iterations += 1;
            let (z, r) = state.directions(&normal);

            // dual step bound from the working set
            let mut t1 = f64::INFINITY;
            let mut leaving = None;
            for (j, &rj) in r.iter().enumerate() {
                if rj > RATIO_TOL {
                    let ratio = state.u[j] / rj;
                    let better = match leaving {
                        None => true,
                        Some(k) => {
                            ratio < t1 - RATIO_TOL
                                || (ratio <= t1 + RATIO_TOL && state.active[j] < state.active[k])
                        }
                    };
                    if better {
                        t1 = ratio;
                        leaving = Some(j);
                    }
                }
            }
            let zz = z.dot(&normal);
            let t2 = if zz > DEPENDENCE_TOL {
                // slack is negative, so the full step is positive
                -rows.slack(p, &state.f) / zz
            } else {
                f64::INFINITY
            };
            if t1.is_infinite() && t2.is_infinite() {
                break 'outer SolveStatus::Infeasible;
            }
            let t = t1.min(t2);
            if t2.is_finite() {
                state.f.axpy(t, &z, 1.0);
            }
            for (uj, rj) in state.u.iter_mut().zip(r.iter()) {
                *uj -= t * rj;
            }
            u_p += t;
            if t2 <= t1 {
                state.active.push(p);
                state.u.push(u_p);
                break;
            }
            let k = leaving.expect("finite partial step has a blocking row");
            state.active.remove(k);
            state.u.remove(k);
        }
    };

    let f = state.f.clone();
    let mut result = SolveResult::from_f(ldp, f, SolverKind::Qp, status, iterations);
    if status == SolveStatus::Optimal {
        // multipliers for f' f on the unscaled rows: lambda = 2 u / scale
        let mut lambda = DVector::zeros(ldp.n_rows());
        for (j, &i) in state.active.iter().enumerate() {
            lambda[rows.origin[i]] = 2.0 * state.u[j] / rows.scale[i];
        }
        result.multipliers = Some(lambda);
    }
    result
}

struct WorkingSet<'a> {
    rows: &'a ScaledRows,
    f: DVector<f64>,
    /// Indices into `rows`.
    active: Vec<usize>,
    u: Vec<f64>,
}

impl<'a> WorkingSet<'a> {
    fn new(rows: &'a ScaledRows, n: usize) -> Self {
        Self {
            rows,
            f: DVector::zeros(n),
            active: Vec::new(),
            u: Vec::new(),
        }
    }

    fn normals(&self) -> DMatrix<f64> {
        let n = self.f.len();
        let mut m = DMatrix::zeros(n, self.active.len());
        for (j, &i) in self.active.iter().enumerate() {
            m.set_column(j, &(-&self.rows.rows[i]));
        }
        m
    }

    /// Primal direction `z` (component of `normal` orthogonal to the working
    /// normals) and dual direction `r` (its coordinates in the working normals).
    fn directions(&self, normal: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        if self.active.is_empty() {
            return (normal.clone(), DVector::zeros(0));
        }
        let qr = self.normals().qr();
        let q = qr.q();
        let r_mat = qr.r();
        let proj = q.transpose() * normal;
        let z = normal - &q * &proj;
        let r = r_mat
            .solve_upper_triangular(&proj)
            .unwrap_or_else(|| DVector::zeros(self.active.len()));
        (z, r)
    }

    /// Installs a dual-feasible starting working set; returns the number of
    /// rows dropped on the way.
    fn seed(&mut self, seed: &[usize]) -> usize {
        let mut candidates: Vec<usize> = seed
            .iter()
            .filter_map(|&orig| self.rows.origin.iter().position(|&o| o == orig))
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        for i in candidates {
            if self.active.len() == self.f.len() {
                break;
            }
            let normal = -&self.rows.rows[i];
            let (z, _) = self.directions(&normal);
            if z.norm() > 1e-8 {
                self.active.push(i);
            }
        }
        let mut dropped = 0;
        loop {
            if self.active.is_empty() {
                self.f.fill(0.0);
                self.u.clear();
                return dropped;
            }
            // min f'f/2 s.t. N' f = c  =>  f = N u,  (N'N) u = c
            let normals = self.normals();
            let c = DVector::from_iterator(self.active.len(), self.active.iter().map(|&i| -self.rows.rhs[i]));
            let gram = normals.transpose() * &normals;
            let Some(u) = gram.cholesky().map(|ch| ch.solve(&c)) else {
                self.active.clear();
                continue;
            };
            let (k, min) = u
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
            if min < 0.0 {
                self.active.remove(k);
                dropped += 1;
                continue;
            }
            self.f = &normals * &u;
            self.u = u.iter().copied().collect();
            return dropped;
        }
    }
}
