//! Continuous-time, constraint-satisfying, quadratically optimal trajectory
//! generation for controllable LTI systems.
//!
//! The flat outputs of the system are parameterized by degree-`N` power
//! series in `t / T`. States and inputs then become polynomials whose
//! coefficients are affine in a free parameter vector `alpha`, the quadratic
//! cost becomes `alpha' K alpha + k' alpha + k0`, and pointwise-in-time linear
//! constraints become a finite set of affine inequalities through a sampled
//! nonpositivity condition. The finite problem is solved either exactly
//! ([`solver::solve_qp`]) or approximately through an L1 relaxation
//! ([`solver::solve_lp`]).
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod basis;
pub mod constraint;
pub mod cost;
mod error;
pub mod linalg;
pub mod lti;
pub mod pmsm;
pub mod problem;
pub mod solver;

pub use basis::{AffinePoly, AffinePolyVector, BasisSpec, Evaluation, OutputDerivatives, PolyRole};
pub use constraint::{AffineConstraintSet, DeltaTable, RowTag};
pub use cost::{LeastDistanceProblem, ParameterizedCost};
pub use error::Error;
pub use lti::{FlatMap, LinearConstraintSpec, LtiSystem, QuadraticCostSpec};
pub use problem::{ConditionedProblem, TrajectoryProblem};
pub use solver::{SolveResult, SolveStatus, SolverKind, SuboptimalityReport};

/// Highest supported polynomial degree; power series lose conditioning beyond it.
pub const MAX_DEGREE: usize = 15;

pub type Result<T> = core::result::Result<T, Error>;
