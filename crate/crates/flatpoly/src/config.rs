//! JSON model and scenario files.
//!
//! Matrices are arrays of rows. Optional fields take the defaults noted on
//! each field; a config serialized by this module parses back to an equal
//! value.

use flatpoly_core::pmsm::{Mechanics, PmsmParams, Scenario, Schedule};
use flatpoly_core::{LinearConstraintSpec, LtiSystem, QuadraticCostSpec, TrajectoryProblem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub cost: CostConfig,
    /// No constraints when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintConfig>,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(alias = "initial_state")]
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    /// Drift; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// Identity when absent.
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Rows>,
    /// Identity when absent.
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Rows>,
    /// Zero when absent.
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Rows>,
    /// Origin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<f64>>,
    /// `x_star` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_ref: Option<Vec<f64>>,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub stage_constant: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            q: None,
            r: None,
            p: None,
            x_star: None,
            x_ref: None,
            horizon: default_horizon(),
            stage_constant: 0.0,
        }
    }
}

fn default_horizon() -> f64 {
    1.0
}

/// `G_x x + G_u u + g0 <= 0`; a missing matrix is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    #[serde(rename = "G_x", default, skip_serializing_if = "Option::is_none")]
    pub g_x: Option<Rows>,
    #[serde(rename = "G_u", default, skip_serializing_if = "Option::is_none")]
    pub g_u: Option<Rows>,
    pub g0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(rename = "N")]
    pub degree: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { degree: 5 }
    }
}

fn matrix(name: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        let found: Vec<usize> = rows.iter().map(Vec::len).collect();
        return Err(CliError::Config(format!(
            "{name} must be {nrows}x{ncols}, found {} rows of lengths {found:?}",
            rows.len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn vector(name: &str, v: &[f64], len: usize) -> Result<DVector<f64>, CliError> {
    if v.len() != len {
        return Err(CliError::Config(format!("{name} must have length {len}, found {}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model configs always serialize") + "\n"
    }

    pub fn state_dim(&self) -> usize {
        self.system.a.len()
    }

    pub fn input_dim(&self) -> usize {
        self.system.b.first().map_or(0, Vec::len)
    }

    /// Builds the core problem, cross-checking every shape against `A` and `B`.
    pub fn to_problem(&self) -> Result<TrajectoryProblem, CliError> {
        let (n, m) = (self.state_dim(), self.input_dim());
        if n == 0 || m == 0 {
            return Err(CliError::Config("A and B must be nonempty".into()));
        }
        let a = matrix("A", &self.system.a, n, n)?;
        let b = matrix("B", &self.system.b, n, m)?;
        let d = match &self.system.d {
            Some(d) => vector("d", d, n)?,
            None => DVector::zeros(n),
        };
        let system = LtiSystem::with_drift(a, b, d)?;

        let c = &self.cost;
        let q = c.q.as_ref().map_or(Ok(DMatrix::identity(n, n)), |q| matrix("Q", q, n, n))?;
        let r = c.r.as_ref().map_or(Ok(DMatrix::identity(m, m)), |r| matrix("R", r, m, m))?;
        let p = c.p.as_ref().map_or(Ok(DMatrix::zeros(n, n)), |p| matrix("P", p, n, n))?;
        let x_star = c.x_star.as_ref().map_or(Ok(DVector::zeros(n)), |x| vector("x_star", x, n))?;
        let mut cost = QuadraticCostSpec::new(q, r, p, x_star, c.horizon)?.with_stage_constant(c.stage_constant);
        if let Some(x_ref) = &c.x_ref {
            cost = cost.with_stage_reference(vector("x_ref", x_ref, n)?)?;
        }

        let constraints = match &self.constraints {
            Some(g) => {
                let rows = g.g0.len();
                let g_x = g.g_x.as_ref().map_or(Ok(DMatrix::zeros(rows, n)), |v| matrix("G_x", v, rows, n))?;
                let g_u = g.g_u.as_ref().map_or(Ok(DMatrix::zeros(rows, m)), |v| matrix("G_u", v, rows, m))?;
                LinearConstraintSpec::new(g_x, g_u, DVector::from_column_slice(&g.g0))?
            }
            None => LinearConstraintSpec::none(n, m),
        };

        Ok(TrajectoryProblem {
            system,
            cost,
            constraints,
            x0: vector("x0", &self.x0, n)?,
            degree: self.basis.degree,
        })
    }

    /// Double integrator steered to rest under input and velocity bounds.
    pub fn example() -> Self {
        Self {
            system: SystemConfig {
                a: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
                b: vec![vec![0.0], vec![1.0]],
                d: None,
            },
            cost: CostConfig {
                q: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
                r: Some(vec![vec![0.1]]),
                p: Some(vec![vec![10.0, 0.0], vec![0.0, 10.0]]),
                x_star: Some(vec![0.0, 0.0]),
                x_ref: None,
                horizon: 2.0,
                stage_constant: 0.0,
            },
            constraints: Some(ConstraintConfig {
                g_x: Some(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, -1.0]]),
                g_u: Some(vec![vec![1.0], vec![-1.0], vec![0.0]]),
                g0: vec![-2.0, -2.0, -1.0],
            }),
            basis: BasisConfig { degree: 7 },
            x0: vec![1.0, 0.0],
        }
    }
}

/// Closed-loop PMSM run; every field defaults to the reference scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Prediction horizon in seconds.
    pub horizon: f64,
    /// Sample time in seconds.
    pub dt: f64,
    pub duration: f64,
    /// `[start time, rad/s]` breakpoints.
    pub speed_setpoint: Vec<(f64, f64)>,
    /// `[start time, N m]` breakpoints.
    pub load_torque: Vec<(f64, f64)>,
    pub torque_weight: f64,
    #[serde(rename = "N")]
    pub degree: usize,
    pub inertia: f64,
    pub friction: f64,
    pub kp: f64,
    pub ki: f64,
    pub torque_limit: f64,
    pub warm_start: bool,
    pub machine: MachineConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::from_core(&Scenario::default(), &PmsmParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineConfig {
    pub resistance: f64,
    pub inductance: f64,
    pub pole_pairs: f64,
    pub flux: f64,
    pub iron_resistance: f64,
    pub current_max: f64,
    pub voltage_max: f64,
    pub rated_speed: f64,
    pub rated_torque: f64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        let p = PmsmParams::default();
        Self {
            resistance: p.resistance,
            inductance: p.inductance,
            pole_pairs: p.pole_pairs,
            flux: p.flux,
            iron_resistance: p.iron_resistance,
            current_max: p.current_max,
            voltage_max: p.voltage_max,
            rated_speed: p.rated_speed,
            rated_torque: p.rated_torque,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario configs always serialize") + "\n"
    }

    fn from_core(s: &Scenario, p: &PmsmParams) -> Self {
        Self {
            horizon: s.horizon,
            dt: s.dt,
            duration: s.duration,
            speed_setpoint: s.speed_setpoint.0.clone(),
            load_torque: s.load_torque.0.clone(),
            torque_weight: s.torque_weight,
            degree: s.degree,
            inertia: s.mechanics.inertia,
            friction: s.mechanics.friction,
            kp: s.kp,
            ki: s.ki,
            torque_limit: s.torque_limit,
            warm_start: s.warm_start,
            machine: MachineConfig {
                resistance: p.resistance,
                inductance: p.inductance,
                pole_pairs: p.pole_pairs,
                flux: p.flux,
                iron_resistance: p.iron_resistance,
                current_max: p.current_max,
                voltage_max: p.voltage_max,
                rated_speed: p.rated_speed,
                rated_torque: p.rated_torque,
            },
        }
    }

    pub fn to_core(&self) -> Result<(PmsmParams, Scenario), CliError> {
        let m = &self.machine;
        let params = PmsmParams {
            resistance: m.resistance,
            inductance: m.inductance,
            pole_pairs: m.pole_pairs,
            flux: m.flux,
            iron_resistance: m.iron_resistance,
            current_max: m.current_max,
            voltage_max: m.voltage_max,
            rated_speed: m.rated_speed,
            rated_torque: m.rated_torque,
        };
        let scenario = Scenario {
            horizon: self.horizon,
            dt: self.dt,
            duration: self.duration,
            speed_setpoint: Schedule(self.speed_setpoint.clone()),
            load_torque: Schedule(self.load_torque.clone()),
            torque_weight: self.torque_weight,
            degree: self.degree,
            mechanics: Mechanics {
                inertia: self.inertia,
                friction: self.friction,
            },
            kp: self.kp,
            ki: self.ki,
            torque_limit: self.torque_limit,
            warm_start: self.warm_start,
        };
        params.validate()?;
        scenario.validate()?;
        Ok((params, scenario))
    }
}
