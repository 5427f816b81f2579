//! End-to-end conditioning: system, cost, constraints and initial state to a
//! least-distance problem ready for either solver.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::basis::{self, AffinePolyVector, BasisSpec};
use crate::constraint::{self, AffineConstraintSet, DeltaTable};
use crate::cost::{self, LeastDistanceProblem, ParameterizedCost};
use crate::lti::{self, FlatMap, LinearConstraintSpec, LtiSystem, QuadraticCostSpec};
use crate::solver::{self, SolveResult, SolverKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryProblem {
    pub system: LtiSystem,
    pub cost: QuadraticCostSpec,
    pub constraints: LinearConstraintSpec,
    pub x0: DVector<f64>,
    pub degree: usize,
}

impl TrajectoryProblem {
    pub fn condition(&self, deltas: &DeltaTable) -> Result<ConditionedProblem> {
        let (n, m) = (self.system.n(), self.system.m());
        if self.cost.n() != n {
            return Err(Error::DimensionMismatch {
                what: "cost state dimension",
                expected: n,
                found: self.cost.n(),
            });
        }
        if self.cost.m() != m {
            return Err(Error::DimensionMismatch {
                what: "cost input dimension",
                expected: m,
                found: self.cost.m(),
            });
        }
        let flat = lti::flat_transform(&self.system)?;
        let basis = basis::apply_initial_conditions(&flat, &self.x0, self.degree, self.cost.horizon)?;
        let (gamma_x, gamma_u) = basis::parameterize_states_inputs(&flat, &basis)?;
        let cost = cost::condition_cost(&gamma_x, &gamma_u, &self.cost)?;
        let delta = deltas.get(self.degree)?;
        let constraints = constraint::condition_constraints(&gamma_x, &gamma_u, &self.constraints, delta)?;
        let ldp = cost::least_distance_transform(&cost, &constraints)?;
        Ok(ConditionedProblem {
            flat,
            basis,
            gamma_x,
            gamma_u,
            cost,
            constraints,
            ldp,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedProblem {
    pub flat: FlatMap,
    pub basis: BasisSpec,
    pub gamma_x: AffinePolyVector,
    pub gamma_u: AffinePolyVector,
    pub cost: ParameterizedCost,
    pub constraints: AffineConstraintSet,
    pub ldp: LeastDistanceProblem,
}

impl ConditionedProblem {
    /// `Unconstrained` ignores every constraint row.
    pub fn solve(&self, kind: SolverKind) -> Result<SolveResult> {
        Ok(match kind {
            SolverKind::Qp => solver::solve_qp(&self.ldp, None),
            SolverKind::Lp => solver::solve_lp(&self.ldp, None),
            SolverKind::Unconstrained => solver::solve_unconstrained(&self.cost)?,
        })
    }

    pub fn solve_qp_warm(&self, seed: &[usize]) -> SolveResult {
        solver::solve_qp_warm(&self.ldp, None, seed)
    }

    /// Removes `t = 0` rows that do not depend on `alpha` and that the initial
    /// state already violates, then rebuilds the least-distance form. Returns
    /// the number of rows removed.
    pub fn drop_violated_initial_rows(&mut self) -> Result<usize> {
        let set = &self.constraints;
        let keep: Vec<usize> = (0..set.len())
            .filter(|&r| {
                let fixed = set.g.row(r).iter().all(|&v| v == 0.0);
                !(set.provenance[r].sample == 0 && fixed && set.h[r] < 0.0)
            })
            .collect();
        let removed = set.len() - keep.len();
        if removed > 0 {
            self.constraints = AffineConstraintSet {
                g: set.g.select_rows(keep.iter()),
                h: set.h.select_rows(keep.iter()),
                provenance: keep.iter().map(|&r| set.provenance[r]).collect(),
            };
            self.ldp = cost::least_distance_transform(&self.cost, &self.constraints)?;
        }
        Ok(removed)
    }

    pub fn horizon(&self) -> f64 {
        self.basis.horizon
    }

    pub fn state(&self, alpha: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        Ok(self.gamma_x.evaluate(alpha, t)?.value)
    }

    pub fn input(&self, alpha: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        Ok(self.gamma_u.evaluate(alpha, t)?.value)
    }
}
