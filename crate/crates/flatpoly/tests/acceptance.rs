//! Acceptance suite: one test per criterion, each printing a single
//! `PASS`/`FAIL` line. Run with
//! `cargo test -p flatpoly --test acceptance -- --nocapture --test-threads=1`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use flatpoly_core::constraint::{compute_delta, constraint_polynomials, verify_nonpositivity};
use flatpoly_core::cost::least_distance_transform;
use flatpoly_core::pmsm::{run_closed_loop, PmsmParams, Scenario, TraceRow};
use flatpoly_core::solver::{solve_lp, solve_qp, suboptimality_report, FEASIBILITY_TOL};
use flatpoly_core::{AffineConstraintSet, DeltaTable, ParameterizedCost, SolveStatus, SolverKind};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn verdict(id: &str, pass: bool, detail: String) {
    println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id}: {detail}");
}

/// Largest value of `-prod_k (1 - N s / k)` on a uniform grid of `[0, 1]`.
fn product_form_sup(n: usize, points: usize) -> f64 {
    (0..=points)
        .map(|i| {
            let s = i as f64 / points as f64;
            -(1..=n).map(|k| 1.0 - n as f64 * s / k as f64).product::<f64>()
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_1_delta_table() {
    let start = Instant::now();
    let mut misses = Vec::new();
    for (n, expected) in [(2, 0.125), (3, 0.064), (4, 0.041), (10, 0.012)] {
        let delta = compute_delta(n).unwrap();
        if (delta - expected).abs() > 5e-4 {
            misses.push(format!("N={n}: {delta:.6} vs {expected}"));
        }
    }
    // beyond the supported degree range, so checked on the defining supremum
    let d20 = product_form_sup(20, 2_000_000);
    if (d20 - 0.005).abs() > 5e-4 {
        misses.push(format!("N=20: {d20:.6} vs 0.005"));
    }
    let d6 = compute_delta(6).unwrap();
    if (d6 - 0.037).abs() > 1e-3 {
        misses.push(format!("N=6: {d6:.6} vs 0.037"));
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        misses.push(format!("runtime {elapsed:?}"));
    }
    let detail = if misses.is_empty() {
        format!("all table entries within tolerance in {elapsed:?}")
    } else {
        format!("mismatches: {}", misses.join("; "))
    };
    verdict("1 (delta table)", misses.is_empty(), detail);
}

#[test]
fn criterion_2_constraint_soundness() {
    let start = Instant::now();
    let mut rng = common::rng(2002);
    let deltas = DeltaTable::new();
    let (mut checked, mut unsound, mut worst) = (0, 0, f64::NEG_INFINITY);
    let mut instances = 0;
    while instances < 500 {
        let problem = common::random_problem(&mut rng, 4, 10, 3);
        let Ok(cp) = problem.condition(&deltas) else { continue };
        instances += 1;
        let polys = constraint_polynomials(&cp.gamma_x, &cp.gamma_u, &problem.constraints).unwrap();
        for kind in [SolverKind::Qp, SolverKind::Lp] {
            let r = cp.solve(kind).unwrap();
            if !r.is_optimal() {
                continue;
            }
            checked += 1;
            let mut bad = false;
            for p in &polys {
                let scale = p.coefficients(&r.alpha).unwrap().amax().max(1.0);
                let peak = verify_nonpositivity(p, &r.alpha, 100_000).unwrap() / scale;
                worst = worst.max(peak);
                bad |= peak > 1e-9;
            }
            unsound += bad as usize;
        }
    }
    let elapsed = start.elapsed();
    let pass = unsound == 0 && elapsed < Duration::from_secs(30);
    verdict(
        "2 (constraint soundness)",
        pass,
        format!(
            "{unsound} of {checked} feasible solutions exceed a constraint between samples \
             (worst scaled value {worst:.3e}) in {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_3_delta_tightness() {
    let mut worst: f64 = 0.0;
    for n in 2..=10 {
        // P(0) = -1 and P(p/N) = 0 for p = 1..N, solved for the monomial coefficients
        let v = DMatrix::from_fn(n, n, |p, j| ((p + 1) as f64 / n as f64).powi(j as i32 + 1));
        let rhs = DVector::from_element(n, 1.0);
        let tail = v.lu().solve(&rhs).unwrap();
        let attained = (0..=100_000)
            .map(|i| {
                let s = i as f64 / 100_000.0;
                -1.0 + tail.iter().rev().fold(0.0, |acc, c| (acc + c) * s)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let delta = compute_delta(n).unwrap();
        worst = worst.max((attained - delta).abs() / delta);
    }
    verdict(
        "3 (delta tightness)",
        worst <= 1e-3,
        format!("worst relative gap {worst:.3e} over N = 2..10"),
    );
}

#[test]
fn criterion_4_cost_oracle() {
    let mut rng = common::rng(4004);
    let deltas = DeltaTable::new();
    let (mut worst, mut cases) = (0.0f64, 0);
    while cases < 100 {
        let problem = common::random_problem(&mut rng, 4, 8, 0);
        let Ok(cp) = problem.condition(&deltas) else { continue };
        cases += 1;
        let alpha = common::uniform_vector(&mut rng, cp.cost.n_params());
        let exact = cp.cost.value(&alpha);
        let quad = common::quadrature_cost(&problem, &cp, &alpha);
        worst = worst.max((exact - quad).abs() / quad.abs());
    }
    verdict(
        "4 (cost conditioning)",
        worst <= 1e-9,
        format!("worst relative error {worst:.3e} over 100 instances"),
    );
}

#[test]
fn criterion_5_optimizers() {
    let mut rng = common::rng(5005);
    let mut failures = Vec::new();
    for case in 0..100 {
        let n = rng.gen_range(1..=12);
        let m = rng.gen_range(1..=60);
        let inst = common::random_ldp(&mut rng, n, m);
        let qp = solve_qp(&inst.ldp, None);
        let lp = solve_lp(&inst.ldp, None);
        if qp.status != SolveStatus::Optimal || lp.status != SolveStatus::Optimal {
            failures.push(format!("case {case}: not optimal"));
            continue;
        }

        let lambda = qp.multipliers.clone().unwrap();
        let stationarity = (&qp.f * 2.0 + inst.ldp.rows.transpose() * &lambda).amax();
        let slack = &inst.ldp.rows * &qp.f - &inst.ldp.rhs;
        let complementarity = (0..m).map(|i| (lambda[i] * slack[i]).abs()).fold(0.0, f64::max);
        let primal = slack.max();
        if stationarity > 1e-7 || complementarity > 1e-7 || primal > 1e-7 || lambda.min() < 0.0 {
            failures.push(format!(
                "case {case}: KKT residuals {stationarity:.1e} / {complementarity:.1e} / {primal:.1e}"
            ));
        }

        let j = inst.cost.value(&qp.alpha);
        let mut accepted = 0;
        while accepted < 10_000 {
            let candidate = &inst.interior + common::uniform_vector(&mut rng, n) * rng.gen_range(0.0..2.0);
            if inst.rows.max_violation(&candidate) <= 0.0 {
                if inst.cost.value(&candidate) < j - 1e-9 * j.abs().max(1.0) {
                    failures.push(format!("case {case}: random feasible point beats the QP"));
                    break;
                }
                accepted += 1;
            }
        }

        let lp_violation = (0..inst.ldp.n_rows())
            .map(|i| {
                let row = inst.ldp.rows.row(i);
                (row.transpose().dot(&lp.f) - inst.ldp.rhs[i]) / row.norm()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if lp_violation > FEASIBILITY_TOL {
            failures.push(format!("case {case}: LP violation {lp_violation:.1e}"));
        }
        let report = suboptimality_report(&qp, &lp, &inst.cost).unwrap();
        if report.j_lp > report.bound + 1e-8 {
            failures.push(format!("case {case}: LP cost {} above bound {}", report.j_lp, report.bound));
        }
    }

    // min |a|^2 subject to a1 + a2 >= 1
    let cost = ParameterizedCost::new(DMatrix::identity(2, 2), DVector::zeros(2), 0.0).unwrap();
    let rows = AffineConstraintSet::from_rows(DMatrix::from_row_slice(1, 2, &[-1.0, -1.0]), DVector::from_element(1, -1.0));
    let ldp = least_distance_transform(&cost, &rows).unwrap();
    let report = suboptimality_report(&solve_qp(&ldp, None), &solve_lp(&ldp, None), &cost).unwrap();
    if (report.j_lp - 1.0).abs() > 1e-12 || (report.bound - 1.0).abs() > 1e-12 {
        failures.push(format!("halfspace: J_LP {} bound {}", report.j_lp, report.bound));
    }

    let detail = if failures.is_empty() {
        "KKT, sampling, LP feasibility and bound hold on 100 instances; halfspace example is tight".to_string()
    } else {
        failures.join("; ")
    };
    verdict("5 (optimizers)", failures.is_empty(), detail);
}

struct PmsmRuns {
    qp: Vec<TraceRow>,
    lp: Vec<TraceRow>,
    elapsed: Duration,
}

fn pmsm_runs() -> &'static PmsmRuns {
    static RUNS: OnceLock<PmsmRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let (p, s) = (PmsmParams::default(), Scenario::default());
        let start = Instant::now();
        let qp = run_closed_loop(&p, &s, SolverKind::Qp).unwrap();
        let lp = run_closed_loop(&p, &s, SolverKind::Lp).unwrap();
        PmsmRuns {
            qp,
            lp,
            elapsed: start.elapsed(),
        }
    })
}

fn window(trace: &[TraceRow], from: f64, to: f64) -> impl Iterator<Item = &TraceRow> {
    trace.iter().filter(move |r| r.t >= from - 1e-9 && r.t < to - 1e-9)
}

#[test]
fn criterion_6a_pmsm_constraints() {
    let runs = pmsm_runs();
    let p = PmsmParams::default();
    let count = |trace: &[TraceRow]| {
        trace
            .iter()
            .filter(|r| !p.in_polytope(r.i_d, r.i_q, r.v_d, r.v_q, 1e-6))
            .count()
    };
    let (qp, lp) = (count(&runs.qp), count(&runs.lp));
    let pass = qp == 0 && lp == 0 && runs.elapsed < Duration::from_secs(60);
    verdict(
        "6a (PMSM constraint violations)",
        pass,
        format!("violating samples QP {qp}, LP {lp}; both runs took {:?}", runs.elapsed),
    );
}

#[test]
fn criterion_6b_pmsm_id_transient() {
    let runs = pmsm_runs();
    let step = 0.07;
    let at_step = runs.qp.iter().find(|r| r.t >= step - 1e-9).unwrap().i_d;
    let settled: Vec<f64> = window(&runs.qp, 0.11, 0.12).map(|r| r.i_d).collect();
    let settled = settled.iter().sum::<f64>() / settled.len() as f64;
    let qp_min = window(&runs.qp, step, 0.12).map(|r| r.i_d).fold(f64::INFINITY, f64::min);
    let qp_peak = window(&runs.qp, step, 0.12).map(|r| r.i_d.abs()).fold(0.0, f64::max);
    let lp_peak = window(&runs.lp, step, 0.12).map(|r| r.i_d.abs()).fold(0.0, f64::max);
    let dip = qp_min < at_step - 0.1 && qp_min < settled - 0.1;
    let pass = dip && lp_peak <= qp_peak + 0.1;
    verdict(
        "6b (negative i_d peak after load step)",
        pass,
        format!(
            "QP i_d {at_step:.3} A at the step, min {qp_min:.3} A, settled {settled:.3} A; \
             peak |i_d| QP {qp_peak:.3} A, LP {lp_peak:.3} A"
        ),
    );
}

#[test]
fn criterion_6c_pmsm_speed_settles() {
    let runs = pmsm_runs();
    let band = |trace: &[TraceRow]| {
        window(trace, 0.06, 0.07)
            .map(|r| (r.omega - 420.0).abs() / 420.0)
            .fold(0.0, f64::max)
    };
    let (qp, lp) = (band(&runs.qp), band(&runs.lp));
    verdict(
        "6c (speed settles before load step)",
        qp <= 0.02 && lp <= 0.02,
        format!("largest relative speed error over [0.06, 0.07) s: QP {qp:.4}, LP {lp:.4}"),
    );
}

#[test]
fn criterion_7_iteration_band() {
    let runs = pmsm_runs();
    let s = Scenario::default();
    let n_params = 2 * (s.degree + 1) - 2;
    let limit = 3 * (2 * n_params + 1);
    let worst = |trace: &[TraceRow]| trace.iter().map(|r| r.iterations).max().unwrap_or(0);
    let (qp, lp) = (worst(&runs.qp), worst(&runs.lp));
    let pass = (1..=limit).contains(&qp) && (1..=limit).contains(&lp);
    verdict(
        "7 (iteration band)",
        pass,
        format!("worst-case iterations QP {qp}, LP {lp}, band [1, {limit}]"),
    );
}

fn run_all_commands(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let bin = env!("CARGO_BIN_EXE_flatpoly");
    let model = dir.join("model.json");
    let invocations: Vec<Vec<String>> = vec![
        vec!["delta".into(), "--max-n".into(), "15".into()],
        vec!["template".into(), "model".into()],
        vec!["template".into(), "scenario".into()],
        vec![
            "solve".into(),
            "--model".into(),
            model.display().to_string(),
            "--solver".into(),
            "both".into(),
            "--out".into(),
            dir.join("solution.json").display().to_string(),
        ],
        vec![
            "simulate-pmsm".into(),
            "--solver".into(),
            "both".into(),
            "--out".into(),
            dir.join("trace").display().to_string(),
        ],
    ];
    let mut outputs = Vec::new();
    for args in invocations {
        let out = Command::new(bin).args(&args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        if args[..2] == ["template", "model"] {
            std::fs::write(&model, &out.stdout).unwrap();
        }
        outputs.push((args.join(" "), out.stdout));
    }
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for f in files {
        outputs.push((f.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&f).unwrap()));
    }
    outputs
}

#[test]
fn criterion_8_determinism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_all_commands(a.path());
    let second = run_all_commands(b.path());
    let mut differing = Vec::new();
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        if x != y {
            differing.push(name.clone());
        }
    }
    let pass = first.len() == second.len() && differing.is_empty();
    verdict(
        "8 (determinism)",
        pass,
        format!("{} outputs compared, differing: {differing:?}", first.len()),
    );
}
