//! Subcommand bodies. Each returns its outputs as bytes so the binary only
//! does file and stream IO.

use flatpoly_core::pmsm::{run_closed_loop, PmsmParams, Scenario, TraceRow};
use flatpoly_core::solver::suboptimality_report;
use flatpoly_core::{DeltaTable, SolveResult, SolverKind, MAX_DEGREE};
use log::{debug, info};
use serde::Serialize;

use crate::output::{trace_csv, trajectory_csv};
use crate::{CliError, ModelConfig};

/// Absolute tolerance when counting trace samples outside the PMSM polytope.
pub const POLYTOPE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SolverChoice {
    Qp,
    Lp,
    Both,
}

impl SolverChoice {
    pub fn kinds(self) -> &'static [SolverKind] {
        match self {
            SolverChoice::Qp => &[SolverKind::Qp],
            SolverChoice::Lp => &[SolverKind::Lp],
            SolverChoice::Both => &[SolverKind::Qp, SolverKind::Lp],
        }
    }
}

/// `N, Delta(N)` lines for `N = 1..=max_n`.
pub fn delta_table(max_n: usize) -> Result<String, CliError> {
    if !(1..=MAX_DEGREE).contains(&max_n) {
        return Err(CliError::Config(format!("--max-n must be in 1..={MAX_DEGREE}")));
    }
    let table = DeltaTable::new();
    let mut out = String::new();
    for (n, delta) in table.iter().take(max_n) {
        out.push_str(&format!("{n}, {delta:.4}\n"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport {
    pub solver: &'static str,
    pub status: &'static str,
    pub alpha: Vec<f64>,
    pub quadratic_cost: f64,
    pub iterations: usize,
    pub constraint_rows: usize,
    /// Largest conditioned row value `G alpha - h`; absent without rows.
    pub max_row_value: Option<f64>,
}

/// LP cost against the worst-case `J0 + N' (J_QP - J0)` bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub j_lp: f64,
    pub j0: f64,
    pub jc: f64,
    pub n_params: usize,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct BothReport<'a> {
    qp: &'a SolutionReport,
    lp: &'a SolutionReport,
    bound: &'a Option<BoundReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub reports: Vec<SolutionReport>,
    pub bound: Option<BoundReport>,
    /// Trajectory CSV per optimal solve.
    pub trajectories: Vec<(SolverKind, Vec<u8>)>,
}

impl SolveOutcome {
    /// The report itself for one solver; `{qp, lp, bound}` for both.
    pub fn json(&self) -> String {
        let text = match self.reports.as_slice() {
            [one] => serde_json::to_string_pretty(one),
            [qp, lp] => serde_json::to_string_pretty(&BothReport {
                qp,
                lp,
                bound: &self.bound,
            }),
            _ => unreachable!("one or two solvers per run"),
        };
        text.expect("reports always serialize") + "\n"
    }

    /// The first non-optimal solve, if any.
    pub fn failure(&self) -> Option<CliError> {
        self.reports.iter().find(|r| r.status != "optimal").map(|r| CliError::NotOptimal {
            solver: r.solver,
            status: r.status,
        })
    }
}

pub fn solve(model: &ModelConfig, choice: SolverChoice) -> Result<SolveOutcome, CliError> {
    let problem = model.to_problem()?;
    let cp = problem.condition(&DeltaTable::new())?;
    info!(
        "conditioned: {} parameters, {} constraint rows",
        cp.cost.n_params(),
        cp.constraints.len()
    );
    let mut results: Vec<SolveResult> = Vec::new();
    for &kind in choice.kinds() {
        let r = cp.solve(kind)?;
        info!("{}: {} after {} iterations", kind.as_str(), r.status.as_str(), r.iterations);
        results.push(r);
    }
    let bound = match results.as_slice() {
        [qp, lp] if qp.is_optimal() && lp.is_optimal() => {
            let s = suboptimality_report(qp, lp, &cp.cost)?;
            Some(BoundReport {
                j_lp: s.j_lp,
                j0: s.j0,
                jc: s.jc,
                n_params: cp.cost.n_params(),
                bound: s.bound,
                holds: s.holds,
            })
        }
        _ => None,
    };
    let mut trajectories = Vec::new();
    for r in results.iter().filter(|r| r.is_optimal()) {
        trajectories.push((r.solver, trajectory_csv(&cp, &r.alpha)?));
    }
    let reports = results
        .iter()
        .map(|r| SolutionReport {
            solver: r.solver.as_str(),
            status: r.status.as_str(),
            alpha: r.alpha.iter().copied().collect(),
            quadratic_cost: r.quadratic_cost,
            iterations: r.iterations,
            constraint_rows: cp.constraints.len(),
            max_row_value: (!cp.constraints.is_empty()).then(|| cp.constraints.max_violation(&r.alpha)),
        })
        .collect();
    Ok(SolveOutcome {
        reports,
        bound,
        trajectories,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub solver: SolverKind,
    pub steps: usize,
    pub worst_iterations: usize,
    /// Samples outside the polytope by more than [`POLYTOPE_TOL`].
    pub violations: usize,
    pub peak_abs_id: f64,
    /// Samples that kept the previous input.
    pub fallbacks: usize,
}

impl TraceSummary {
    pub fn new(params: &PmsmParams, solver: SolverKind, trace: &[TraceRow]) -> Self {
        Self {
            solver,
            steps: trace.len(),
            worst_iterations: trace.iter().map(|r| r.iterations).max().unwrap_or(0),
            violations: trace
                .iter()
                .filter(|r| !params.in_polytope(r.i_d, r.i_q, r.v_d, r.v_q, POLYTOPE_TOL))
                .count(),
            peak_abs_id: trace.iter().map(|r| r.i_d.abs()).fold(0.0, f64::max),
            fallbacks: trace.iter().filter(|r| !r.outcome.is_optimal()).count(),
        }
    }

    pub const HEADER: &'static str = "solver,steps,worst_iters,violations,peak_abs_id,fallbacks";

    pub fn line(&self) -> String {
        format!(
            "{},{},{},{},{:.4},{}",
            self.solver.as_str(),
            self.steps,
            self.worst_iterations,
            self.violations,
            self.peak_abs_id,
            self.fallbacks
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub solver: SolverKind,
    pub trace: Vec<TraceRow>,
    pub summary: TraceSummary,
}

impl SimulationRun {
    pub fn csv(&self) -> Result<Vec<u8>, CliError> {
        trace_csv(&self.trace)
    }
}

/// Runs the scenario once per solver; `both` runs the two loops on separate
/// threads from identical inputs.
pub fn simulate(params: &PmsmParams, scenario: &Scenario, choice: SolverChoice) -> Result<Vec<SimulationRun>, CliError> {
    let run = |kind: SolverKind| -> Result<SimulationRun, CliError> {
        let trace = run_closed_loop(params, scenario, kind)?;
        let summary = TraceSummary::new(params, kind, &trace);
        debug!("{}: {:?}", kind.as_str(), summary);
        Ok(SimulationRun {
            solver: kind,
            trace,
            summary,
        })
    };
    let kinds = choice.kinds();
    if kinds.len() == 1 {
        return Ok(vec![run(kinds[0])?]);
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = kinds.iter().map(|&k| s.spawn(move || run(k))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}
