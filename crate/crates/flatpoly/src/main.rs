use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use flatpoly::commands::{self, TraceSummary};
use flatpoly::{CliError, ModelConfig, ScenarioConfig, SolverChoice};
use flatpoly_core::MAX_DEGREE;
use log::info;

/// Flatness-based polynomial trajectory optimization.
///
/// Diagnostics go to stderr at the level set by FLATPOLY_LOG (off, info or
/// debug). Exit codes: 1 non-optimal solve, 2 bad input, 3 cost not positive
/// definite.
#[derive(Debug, Parser)]
#[command(name = "flatpoly", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the constraint shift Delta(N) for N = 1..=max-n.
    Delta {
        #[arg(long, default_value_t = MAX_DEGREE as u64, value_parser = clap::value_parser!(u64).range(1..=MAX_DEGREE as u64))]
        max_n: u64,
    },
    /// Solve one model; writes the JSON report and a trajectory CSV per solver.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverChoice::Qp)]
        solver: SolverChoice,
        /// JSON report path; trajectories go to `<stem>-<solver>.csv` beside
        /// it. Without it the report is printed and no CSV is written.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop PMSM speed control; writes `<prefix>-<solver>.csv`.
    SimulatePmsm {
        /// Scenario JSON; the reference scenario when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SolverChoice::Both)]
        solver: SolverChoice,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print an example config.
    Template { kind: TemplateKind },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TemplateKind {
    Model,
    Scenario,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    info!("writing {}", path.display());
    fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// `dir/stem-suffix.csv` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}-{suffix}.csv"))
}

/// `prefix-suffix.csv`, keeping any dots in the prefix.
fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!("-{suffix}.csv"));
    PathBuf::from(s)
}

fn print(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Write {
            path: "<stdout>".into(),
            source,
        })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Delta { max_n } => print(&commands::delta_table(max_n as usize)?),
        Command::Solve { model, solver, out } => {
            let config = ModelConfig::from_json(&read(&model)?)?;
            let outcome = commands::solve(&config, solver)?;
            match &out {
                Some(path) => {
                    write(path, outcome.json().as_bytes())?;
                    for (kind, csv) in &outcome.trajectories {
                        write(&sibling(path, kind.as_str()), csv)?;
                    }
                }
                None => print(&outcome.json())?,
            }
            outcome.failure().map_or(Ok(()), Err)
        }
        Command::SimulatePmsm { scenario, solver, out } => {
            let config = match &scenario {
                Some(path) => ScenarioConfig::from_json(&read(path)?)?,
                None => ScenarioConfig::default(),
            };
            let (params, scenario) = config.to_core()?;
            let runs = commands::simulate(&params, &scenario, solver)?;
            let mut summary = format!("{}\n", TraceSummary::HEADER);
            for r in &runs {
                write(&prefixed(&out, r.solver.as_str()), &r.csv()?)?;
                summary.push_str(&r.summary.line());
                summary.push('\n');
            }
            print(&summary)
        }
        Command::Template { kind } => print(&match kind {
            TemplateKind::Model => ModelConfig::example().to_json(),
            TemplateKind::Scenario => ScenarioConfig::default().to_json(),
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FLATPOLY_LOG", "off"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flatpoly: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
