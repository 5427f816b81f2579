#![allow(dead_code)]


use flatpoly_core::LtiSystem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = uniform_matrix(rng, n, n);
    &m.transpose() * &m + DMatrix::identity(n, n) * 0.1
}

/// Random controllable system with `n <= max_n`, `m <= min(max_m, n)`, and a
/// random drift.
pub fn controllable(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> LtiSystem {
    loop {
        let n = rng.gen_range(1..=max_n);
        let m = rng.gen_range(1..=max_m.min(n));
        let a = uniform_matrix(rng, n, n);
        let b = uniform_matrix(rng, n, m);
        let d = uniform_vector(rng, n);
        let sys = LtiSystem::with_drift(a, b, d).unwrap();
        if sys.is_controllable() {
            return sys;
        }
    }
}

pub fn double_integrator() -> LtiSystem {
    LtiSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
    )
    .unwrap()
}

use flatpoly_core::{LinearConstraintSpec, QuadraticCostSpec, TrajectoryProblem};

/// Random conditioned-problem input: `n <= max_n`, `m <= 2`, degree between
/// the largest relative degree and `max_degree`, `nc` random constraint rows
/// strictly satisfied by the initial state.
pub fn random_problem(rng: &mut ChaCha8Rng, max_n: usize, max_degree: usize, nc: usize) -> TrajectoryProblem {
    loop {
        let system = controllable(rng, max_n, 2);
        let (n, m) = (system.n(), system.m());
        let r_max = flatpoly_core::lti::brunovsky_indices(&system).unwrap().into_iter().max().unwrap();
        if r_max > max_degree {
            continue;
        }
        let degree = rng.gen_range(r_max.max(1)..=max_degree);
        let horizon = rng.gen_range(0.5..2.0);
        let x0 = uniform_vector(rng, n);
        let cost = QuadraticCostSpec::new(spd(rng, n), spd(rng, m), spd(rng, n), uniform_vector(rng, n), horizon)
            .unwrap()
            .with_stage_reference(uniform_vector(rng, n))
            .unwrap()
            .with_stage_constant(rng.gen_range(0.0..1.0));
        let g_x = uniform_matrix(rng, nc, n);
        let g_u = uniform_matrix(rng, nc, m) * 0.1;
        let gx0 = &g_x * &x0;
        let g0 = DVector::from_fn(nc, |k, _| -gx0[k].abs() - rng.gen_range(0.2..2.0));
        let constraints = LinearConstraintSpec::new(g_x, g_u, g0).unwrap();
        return TrajectoryProblem {
            system,
            cost,
            constraints,
            x0,
            degree,
        };
    }
}

use flatpoly_core::ConditionedProblem;
use gauss_quad::GaussLegendre;
use std::num::NonZeroUsize;

/// `J(alpha)` by Gauss-Legendre quadrature of the stage integrand plus the
/// terminal term, evaluated through the state and input polynomials.
pub fn quadrature_cost(problem: &TrajectoryProblem, cp: &ConditionedProblem, alpha: &DVector<f64>) -> f64 {
    let cost = &problem.cost;
    let nodes = problem.degree + 2;
    let rule = GaussLegendre::new(NonZeroUsize::new(nodes).unwrap());
    let x_ref = cost.stage_reference().clone();
    let stage = rule.integrate(0.0, cost.horizon, |t| {
        let x = cp.state(alpha, t).unwrap();
        let u = cp.input(alpha, t).unwrap();
        let e = &x - &x_ref;
        e.dot(&(&cost.q * &e)) + u.dot(&(&cost.r * &u)) + cost.stage_constant
    });
    let e = cp.state(alpha, cost.horizon).unwrap() - &cost.x_star;
    stage + e.dot(&(&cost.p * &e))
}

use flatpoly_core::cost::least_distance_transform;
use flatpoly_core::{AffineConstraintSet, LeastDistanceProblem, ParameterizedCost};

pub struct RandomLdp {
    pub cost: ParameterizedCost,
    pub rows: AffineConstraintSet,
    pub ldp: LeastDistanceProblem,
    /// A strictly feasible point.
    pub interior: DVector<f64>,
}

/// Random strictly feasible instance with `n_params` parameters and `m` rows.
pub fn random_ldp(rng: &mut ChaCha8Rng, n_params: usize, m: usize) -> RandomLdp {
    let k = spd(rng, n_params);
    let kv = uniform_vector(rng, n_params) * 4.0;
    let cost = ParameterizedCost::new(k, kv, rng.gen_range(0.0..2.0)).unwrap();
    let interior = uniform_vector(rng, n_params);
    let g = uniform_matrix(rng, m, n_params);
    let slack = DVector::from_fn(m, |_, _| rng.gen_range(0.05..1.0));
    let h = &g * &interior + slack;
    let rows = AffineConstraintSet::from_rows(g, h);
    let ldp = least_distance_transform(&cost, &rows).unwrap();
    RandomLdp {
        cost,
        rows,
        ldp,
        interior,
    }
}

/// `min f'f` over `A f <= b` by accelerated projected gradient on the dual
/// `max_{l >= 0} -l' A A' l / 4 - l' b`, with `f = -A' l / 2`.
pub fn dual_projected_gradient(a: &DMatrix<f64>, b: &DVector<f64>, iterations: usize) -> DVector<f64> {
    let gram = a * a.transpose() * 0.5;
    let lipschitz = gram.symmetric_eigenvalues().amax().max(1e-12);
    let step = 1.0 / lipschitz;
    let m = b.len();
    let mut l = DVector::zeros(m);
    let mut y = l.clone();
    let mut t = 1.0f64;
    for k in 0..iterations {
        if k % 500 == 0 {
            // stop once the primal point is feasible and the duality gap closed
            let f = -(a.transpose() * &l) * 0.5;
            let infeasible = (a * &f - b).max();
            let gap = f.dot(&f) - (-l.dot(&(&gram * &l)) * 0.5 - l.dot(b));
            if infeasible <= 1e-11 && gap.abs() <= 1e-11 * (1.0 + f.dot(&f)) {
                return f;
            }
        }
        // gradient of the (concave) dual at y
        let grad = -(&gram * &y) - b;
        let next = (&y + grad * step).map(|v| v.max(0.0));
        let mut t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // gradient restart keeps the momentum from oscillating
        if (&next - &l).dot(&(&y - &next)) > 0.0 {
            t_next = 1.0;
        }
        y = &next + (&next - &l) * ((t - 1.0) / t_next);
        l = next;
        t = t_next;
    }
    -(a.transpose() * l) * 0.5
}
