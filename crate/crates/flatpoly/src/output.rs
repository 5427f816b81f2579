//! CSV writers. Numbers use Rust's shortest round-trip formatting, so the
//! output does not depend on the locale; records end in `\n`.

use std::io::Write;

use flatpoly_core::pmsm::TraceRow;
use flatpoly_core::ConditionedProblem;
use nalgebra::DVector;

use crate::CliError;

pub const TRACE_HEADER: [&str; 11] = ["t", "id", "iq", "vd", "vq", "omega", "tau", "tau_ref", "J", "iters", "status"];

/// Points in a trajectory CSV, spread evenly over `[0, T]` including both ends.
pub const TRAJECTORY_POINTS: usize = 200;

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::Config(format!("csv: {}", e.error())))
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Config(format!("csv: {e}"))
}

/// `t, x1..xn, u1..um` at [`TRAJECTORY_POINTS`] times.
pub fn trajectory_csv(cp: &ConditionedProblem, alpha: &DVector<f64>) -> Result<Vec<u8>, CliError> {
    let n = cp.gamma_x.len();
    let m = cp.gamma_u.len();
    let mut w = writer(Vec::new());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .chain((1..=m).map(|i| format!("u{i}")))
        .collect();
    w.write_record(&header).map_err(csv_error)?;
    let horizon = cp.horizon();
    for i in 0..TRAJECTORY_POINTS {
        let t = horizon * i as f64 / (TRAJECTORY_POINTS - 1) as f64;
        let x = cp.state(alpha, t)?;
        let u = cp.input(alpha, t)?;
        let record: Vec<String> = std::iter::once(t)
            .chain(x.iter().copied())
            .chain(u.iter().copied())
            .map(|v| v.to_string())
            .collect();
        w.write_record(&record).map_err(csv_error)?;
    }
    finish(w)
}

pub fn trace_csv(rows: &[TraceRow]) -> Result<Vec<u8>, CliError> {
    let mut w = writer(Vec::new());
    w.write_record(TRACE_HEADER).map_err(csv_error)?;
    for r in rows {
        let numbers = [r.t, r.i_d, r.i_q, r.v_d, r.v_q, r.omega, r.torque, r.torque_ref, r.cost];
        let record: Vec<String> = numbers
            .iter()
            .map(f64::to_string)
            .chain([r.iterations.to_string(), r.outcome.as_str().to_string()])
            .collect();
        w.write_record(&record).map_err(csv_error)?;
    }
    finish(w)
}
