//! Predictive torque control of a non-salient PMSM.
//!
//! The electrical subsystem is linearized at the measured speed each sample,
//! a torque-tracking plus loss cost is conditioned over the horizon, and the
//! first input of the optimized trajectory drives a nonlinear RK4 plant.
//! A PI loop on speed produces the torque reference.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::constraint::DeltaTable;
use crate::lti::{LinearConstraintSpec, LtiSystem, QuadraticCostSpec};
use crate::problem::TrajectoryProblem;
use crate::solver::{SolveStatus, SolverKind};
use crate::{Error, Result};

/// Machine parameters; peak-value dq quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmsmParams {
    /// Stator resistance, ohm.
    pub resistance: f64,
    /// Inductance, henry.
    pub inductance: f64,
    pub pole_pairs: f64,
    /// Permanent-magnet flux constant, V s.
    pub flux: f64,
    /// Iron-loss resistance, ohm.
    pub iron_resistance: f64,
    /// Current magnitude limit, A.
    pub current_max: f64,
    /// Voltage magnitude limit, V.
    pub voltage_max: f64,
    /// rad/s
    pub rated_speed: f64,
    /// N m
    pub rated_torque: f64,
}

impl Default for PmsmParams {
    fn default() -> Self {
        Self {
            resistance: 0.86,
            inductance: 6e-3,
            pole_pairs: 3.0,
            flux: 0.236,
            iron_resistance: 1800.0,
            current_max: 10.0,
            voltage_max: 330.0,
            rated_speed: 314.0,
            rated_torque: 10.0,
        }
    }
}

impl PmsmParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.resistance,
            self.inductance,
            self.pole_pairs,
            self.flux,
            self.iron_resistance,
            self.current_max,
            self.voltage_max,
            self.rated_speed,
            self.rated_torque,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("machine parameters must be positive"))
        }
    }

    /// `tau = (3/2) n_p K i_q`.
    pub fn torque_constant(&self) -> f64 {
        1.5 * self.pole_pairs * self.flux
    }

    pub fn torque(&self, i_q: f64) -> f64 {
        self.torque_constant() * i_q
    }

    /// Whether `(i_d, i_q, v_d, v_q)` lies in the linearized constraint polytope.
    pub fn in_polytope(&self, i_d: f64, i_q: f64, v_d: f64, v_q: f64, tol: f64) -> bool {
        let half_root3 = 0.5 * libm::sqrt(3.0);
        i_d <= tol
            && -i_d - 0.5 * self.current_max <= tol
            && i_q.abs() - half_root3 * self.current_max <= tol
            && v_d.abs() - 0.5 * self.voltage_max <= tol
            && v_q.abs() - half_root3 * self.voltage_max <= tol
    }
}

/// Electrical dynamics at a frozen mechanical speed `omega` (rad/s):
/// `x = (i_d, i_q)`, `u = (v_d, v_q)`.
pub fn pmsm_linearize(p: &PmsmParams, omega: f64) -> LtiSystem {
    let rl = p.resistance / p.inductance;
    let we = p.pole_pairs * omega;
    let a = DMatrix::from_row_slice(2, 2, &[-rl, we, -we, -rl]);
    let b = DMatrix::identity(2, 2) / p.inductance;
    let d = DVector::from_vec(alloc::vec![0.0, -we * p.flux / p.inductance]);
    LtiSystem::with_drift(a, b, d).expect("PMSM model is well-formed")
}

/// Stage integrand `q (tau - tau*)^2 + R |i|^2 + (|omega| / R_m) ((L i_d + K)^2 + i_q^2)`
/// completed into `(x - x_ref)' Q (x - x_ref) + const`, with terminal weight
/// `q T (tau(T) - tau*)^2`. No input weight.
pub fn pmsm_cost(p: &PmsmParams, q: f64, omega: f64, torque_ref: f64, horizon: f64) -> Result<QuadraticCostSpec> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter("torque weight must be positive"));
    }
    let c = p.torque_constant();
    let w = omega.abs() / p.iron_resistance;
    let (l, k) = (p.inductance, p.flux);
    let q_d = p.resistance + w * l * l;
    let q_q = q * c * c + p.resistance + w;
    // linear coefficients of the expanded integrand
    let lin_d = 2.0 * w * l * k;
    let lin_q = -2.0 * q * c * torque_ref;
    let constant = q * torque_ref * torque_ref + w * k * k;
    let x_ref = DVector::from_vec(alloc::vec![-lin_d / (2.0 * q_d), -lin_q / (2.0 * q_q)]);
    let completed = constant - q_d * x_ref[0] * x_ref[0] - q_q * x_ref[1] * x_ref[1];

    let weights = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![q_d, q_q]));
    let terminal = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![0.0, q * horizon * c * c]));
    let x_star = DVector::from_vec(alloc::vec![0.0, torque_ref / c]);
    Ok(QuadraticCostSpec::new(weights, DMatrix::zeros(2, 2), terminal, x_star, horizon)?
        .with_stage_reference(x_ref)?
        .with_stage_constant(completed))
}

/// Inscribed rectangles of the current and voltage circles:
/// `-I/2 <= i_d <= 0`, `|i_q| <= (sqrt 3 / 2) I`, `|v_d| <= V/2`, `|v_q| <= (sqrt 3 / 2) V`.
pub fn pmsm_constraints(p: &PmsmParams) -> LinearConstraintSpec {
    let half_root3 = 0.5 * libm::sqrt(3.0);
    let (imax, vmax) = (p.current_max, p.voltage_max);
    #[rustfmt::skip]
    let g_x = DMatrix::from_row_slice(8, 2, &[
        1.0, 0.0,
        -1.0, 0.0,
        0.0, 1.0,
        0.0, -1.0,
        0.0, 0.0,
        0.0, 0.0,
        0.0, 0.0,
        0.0, 0.0,
    ]);
    #[rustfmt::skip]
    let g_u = DMatrix::from_row_slice(8, 2, &[
        0.0, 0.0,
        0.0, 0.0,
        0.0, 0.0,
        0.0, 0.0,
        1.0, 0.0,
        -1.0, 0.0,
        0.0, 1.0,
        0.0, -1.0,
    ]);
    let g0 = DVector::from_vec(alloc::vec![
        0.0,
        -0.5 * imax,
        -half_root3 * imax,
        -half_root3 * imax,
        -0.5 * vmax,
        -0.5 * vmax,
        -half_root3 * vmax,
        -half_root3 * vmax,
    ]);
    LinearConstraintSpec::new(g_x, g_u, g0).expect("row counts agree")
}

/// `(i_d, i_q, omega)` of the plant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub i_d: f64,
    pub i_q: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mechanics {
    /// kg m^2
    pub inertia: f64,
    /// Viscous friction, N m s.
    pub friction: f64,
}

fn plant_rate(p: &PmsmParams, mech: &Mechanics, s: &PlantState, v: (f64, f64), load: f64) -> PlantState {
    let rl = p.resistance / p.inductance;
    let we = p.pole_pairs * s.omega;
    PlantState {
        i_d: -rl * s.i_d + we * s.i_q + v.0 / p.inductance,
        i_q: -rl * s.i_q - we * s.i_d - we * p.flux / p.inductance + v.1 / p.inductance,
        omega: (p.torque(s.i_q) - load - mech.friction * s.omega) / mech.inertia,
    }
}

/// One RK4 step of the nonlinear electrical and mechanical equations with
/// constant voltages and load torque.
pub fn step_plant(
    p: &PmsmParams,
    mech: &Mechanics,
    state: PlantState,
    v: (f64, f64),
    load: f64,
    dt: f64,
) -> Result<PlantState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("step size must be positive"));
    }
    let add = |s: &PlantState, k: &PlantState, h: f64| PlantState {
        i_d: s.i_d + h * k.i_d,
        i_q: s.i_q + h * k.i_q,
        omega: s.omega + h * k.omega,
    };
    let k1 = plant_rate(p, mech, &state, v, load);
    let k2 = plant_rate(p, mech, &add(&state, &k1, 0.5 * dt), v, load);
    let k3 = plant_rate(p, mech, &add(&state, &k2, 0.5 * dt), v, load);
    let k4 = plant_rate(p, mech, &add(&state, &k3, dt), v, load);
    let next = PlantState {
        i_d: state.i_d + dt / 6.0 * (k1.i_d + 2.0 * k2.i_d + 2.0 * k3.i_d + k4.i_d),
        i_q: state.i_q + dt / 6.0 * (k1.i_q + 2.0 * k2.i_q + 2.0 * k3.i_q + k4.i_q),
        omega: state.omega + dt / 6.0 * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega),
    };
    if next.i_d.is_finite() && next.i_q.is_finite() && next.omega.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite("plant integration"))
    }
}

/// PI speed controller with a clamped output; the integrator holds while clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiSpeedController {
    pub kp: f64,
    pub ki: f64,
    pub limit: f64,
    integral: f64,
}

impl PiSpeedController {
    pub fn new(kp: f64, ki: f64, limit: f64) -> Self {
        Self {
            kp,
            ki,
            limit,
            integral: 0.0,
        }
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// Torque reference for the speed error after a step of `dt`.
    pub fn update(&mut self, omega_ref: f64, omega: f64, dt: f64) -> f64 {
        let e = omega_ref - omega;
        let integral = self.integral + e * dt;
        let raw = self.kp * e + self.ki * integral;
        if raw.abs() > self.limit {
            raw.signum() * self.limit
        } else {
            self.integral = integral;
            raw
        }
    }
}

/// Piecewise-constant signal given as `(start time, value)` breakpoints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule(pub Vec<(f64, f64)>);

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Self(alloc::vec![(0.0, value)])
    }

    /// Value of the last breakpoint at or before `t`; zero before the first.
    pub fn at(&self, t: f64) -> f64 {
        self.0
            .iter()
            .rfind(|(start, _)| *start <= t + 1e-12)
            .map_or(0.0, |&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub horizon: f64,
    pub dt: f64,
    pub duration: f64,
    pub speed_setpoint: Schedule,
    pub load_torque: Schedule,
    pub torque_weight: f64,
    pub degree: usize,
    pub mechanics: Mechanics,
    pub kp: f64,
    pub ki: f64,
    pub torque_limit: f64,
    /// Seed each QP with the previous sample's active rows.
    pub warm_start: bool,
}

impl Default for Scenario {
    /// Speed step 0 -> 420 rad/s at 10 ms, 8 N m load step at 70 ms, 120 ms total.
    fn default() -> Self {
        Self {
            horizon: 2e-3,
            dt: 1e-4,
            duration: 0.12,
            speed_setpoint: Schedule(alloc::vec![(0.0, 0.0), (0.01, 420.0)]),
            load_torque: Schedule(alloc::vec![(0.0, 0.0), (0.07, 8.0)]),
            torque_weight: 20.0,
            degree: 5,
            mechanics: Mechanics {
                inertia: DEFAULT_INERTIA,
                friction: 1e-4,
            },
            kp: DEFAULT_KP,
            ki: DEFAULT_KI,
            torque_limit: 10.0,
            warm_start: true,
        }
    }
}

const DEFAULT_INERTIA: f64 = 5e-4;
const DEFAULT_KP: f64 = 0.1;
const DEFAULT_KI: f64 = 2.0;

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.horizon > 0.0) || self.dt > self.horizon {
            return Err(Error::InvalidParameter("need 0 < dt <= horizon"));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidParameter("duration must be nonnegative"));
        }
        if !(self.torque_weight > 0.0) {
            return Err(Error::InvalidParameter("torque weight must be positive"));
        }
        if !(self.mechanics.inertia > 0.0) || self.mechanics.friction < 0.0 {
            return Err(Error::InvalidParameter("inertia must be positive and friction nonnegative"));
        }
        if !(self.torque_limit > 0.0) {
            return Err(Error::InvalidParameter("torque limit must be positive"));
        }
        if self.degree == 0 || self.degree > crate::MAX_DEGREE {
            return Err(Error::DegreeOutOfRange {
                degree: self.degree,
                max: crate::MAX_DEGREE,
            });
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        libm::floor(self.duration / self.dt + 1e-9) as usize
    }
}

/// Per-sample result of the predictive controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Solved(SolveStatus),
    /// Building the finite problem failed (e.g. cost not positive definite).
    ConditioningFailed,
}

impl StepOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            StepOutcome::Solved(s) => s.as_str(),
            StepOutcome::ConditioningFailed => "conditioning_failed",
        }
    }

    /// Whether the applied input came from a fresh optimal solution.
    pub fn is_optimal(self) -> bool {
        self == StepOutcome::Solved(SolveStatus::Optimal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub v_d: f64,
    pub v_q: f64,
    pub omega: f64,
    pub torque: f64,
    pub torque_ref: f64,
    /// Optimized cost of the sample's trajectory (NaN on fallback).
    pub cost: f64,
    pub iterations: usize,
    pub solver: SolverKind,
    pub outcome: StepOutcome,
}

/// Receding-horizon simulation. Non-optimal solves keep the previous input and
/// are flagged in the trace.
///
/// The plant is nonlinear, so a measured current can sit marginally outside the
/// rectangle the linear model keeps it in. The `t = 0` rows such a measurement
/// violates cannot be influenced by `alpha` and are dropped for that sample;
/// the sampled rows still pull the trajectory back inside.
pub fn run_closed_loop(params: &PmsmParams, scenario: &Scenario, kind: SolverKind) -> Result<Vec<TraceRow>> {
    params.validate()?;
    scenario.validate()?;
    let deltas = DeltaTable::new();
    let constraints = pmsm_constraints(params);
    let mut pi = PiSpeedController::new(scenario.kp, scenario.ki, scenario.torque_limit);
    let mut state = PlantState::default();
    let mut v = (0.0, 0.0);
    let mut seed: Vec<usize> = Vec::new();
    let steps = scenario.steps();
    let mut trace = Vec::with_capacity(steps);

    for k in 0..steps {
        let t = k as f64 * scenario.dt;
        let torque_ref = pi.update(scenario.speed_setpoint.at(t), state.omega, scenario.dt);
        let problem = TrajectoryProblem {
            system: pmsm_linearize(params, state.omega),
            cost: pmsm_cost(params, scenario.torque_weight, state.omega, torque_ref, scenario.horizon)?,
            constraints: constraints.clone(),
            x0: DVector::from_vec(alloc::vec![state.i_d, state.i_q]),
            degree: scenario.degree,
        };
        let conditioned = problem.condition(&deltas).and_then(|mut cp| {
            cp.drop_violated_initial_rows()?;
            Ok(cp)
        });
        let (outcome, cost, iterations) = match conditioned {
            Ok(cp) => {
                let result = match kind {
                    SolverKind::Qp if scenario.warm_start => cp.solve_qp_warm(&seed),
                    _ => cp.solve(kind)?,
                };
                if result.is_optimal() {
                    let u0 = cp.input(&result.alpha, 0.0)?;
                    v = (u0[0], u0[1]);
                    seed = result.active_rows.clone();
                    (StepOutcome::Solved(result.status), result.quadratic_cost, result.iterations)
                } else {
                    seed.clear();
                    (StepOutcome::Solved(result.status), f64::NAN, result.iterations)
                }
            }
            Err(_) => (StepOutcome::ConditioningFailed, f64::NAN, 0),
        };
        trace.push(TraceRow {
            t,
            i_d: state.i_d,
            i_q: state.i_q,
            v_d: v.0,
            v_q: v.1,
            omega: state.omega,
            torque: params.torque(state.i_q),
            torque_ref,
            cost,
            iterations,
            solver: kind,
            outcome,
        });
        let load = scenario.load_torque.at(t);
        state = step_plant(params, &scenario.mechanics, state, v, load, scenario.dt)?;
    }
    Ok(trace)
}
