//! Command-line front end.
//!
//! Every command writes its report to `<out>.json` (and, where there is a
//! path or table, `<out>.csv`) when `--out` is given, otherwise prints the
//! JSON to standard output. Exit codes: 0 success, 2 invalid input,
//! 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bifurcation::{self, BranchProvider, PinnedBranch, ShootingBranch};
use crate::criteria;
use crate::error::{Error, Result};
use crate::expr::{Expr, Scope};
use crate::mde::{residual_sie, solve_ivp, uniform_grid, ProblemDef, SolveSettings};
use crate::periodic;
use crate::problem::ProblemFile;
use crate::regulated::{JumpRecord, RegulatedPath};
use crate::registry;
use crate::report::to_json;
use crate::variational;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mdebif", version, about = "Periodic problems for measure differential equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Built-in problem name or path to a JSON problem file.
    #[arg(long)]
    problem: String,
    /// Overrides the problem's integration tolerance.
    #[arg(long)]
    rk_tol: Option<f64>,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output file stem; `.json` and `.csv` are appended.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the initial value problem on [0, T].
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lambda: f64,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        /// Number of points of the defect grid.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Find a T-periodic solution by shooting.
    Periodic {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lambda: f64,
        /// Starting guess; defaults to the problem's branch state.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Multi-start from this many interior points per axis of omega.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monodromy matrix along the trajectory from a state.
    Monodromy {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lambda: f64,
        /// Reference initial state; defaults to the problem's branch state.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Scan det(I - M) along the branch for sign changes.
    Scan {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, allow_hyphen_values = true)]
        lambda_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        lambda_max: f64,
        #[arg(long, default_value_t = 21)]
        steps: usize,
        /// Overrides the problem's bisection tolerance.
        #[arg(long)]
        bisect_tol: Option<f64>,
        /// Follow the branch by shooting from this guess instead of using
        /// the pinned branch state.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        shoot_from: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fredholm alternative for the linearisation at one parameter value.
    Classify {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lambda: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Lomtatidze test for y'' + q(t) y = 0 on [0, T].
    Criterion {
        /// q as an expression in t.
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long = "T", alias = "period")]
        period: f64,
        #[arg(long, default_value_t = criteria::DEFAULT_GUARD)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
}

struct Loaded {
    file: ProblemFile,
    def: ProblemDef,
    settings: SolveSettings,
}

fn load(args: &ProblemArgs) -> Result<Loaded> {
    let file = if registry::NAMES.contains(&args.problem.as_str()) {
        registry::get(&args.problem)?
    } else if Path::new(&args.problem).is_file() {
        ProblemFile::load(Path::new(&args.problem))?
    } else {
        return Err(Error::Validation(format!(
            "`{}` is neither a built-in problem ({}) nor a file",
            args.problem,
            registry::NAMES.join(", ")
        )));
    };
    let def = file.to_def()?;
    let mut settings = file.solve_settings();
    if let Some(tol) = args.rk_tol {
        if !(tol > 0.0) {
            return Err(Error::Validation("--rk-tol must be positive".into()));
        }
        settings.rk_tol = tol;
    }
    Ok(Loaded { file, def, settings })
}

fn branch_state(file: &ProblemFile, given: Option<Vec<f64>>) -> Result<Vec<f64>> {
    given
        .or_else(|| file.branch.as_ref().map(|b| b.x0.clone()))
        .ok_or_else(|| Error::Validation("no --x0 given and the problem has no branch state".into()))
}

fn write_json<T: Serialize>(out: &OutArgs, value: &T) -> Result<()> {
    let text = to_json(value)?;
    match &out.out {
        Some(stem) => std::fs::write(with_ext(stem, "json"), text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Human summary: standard output when the report goes to files, standard
/// error when the report itself is on standard output.
fn summary(out: &OutArgs, msg: String) {
    if out.out.is_some() {
        println!("{msg}");
    } else {
        eprintln!("{msg}");
    }
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn csv_writer(out: &OutArgs) -> Result<Option<BufWriter<File>>> {
    Ok(match &out.out {
        Some(stem) => Some(BufWriter::new(File::create(with_ext(stem, "csv"))?)),
        None => None,
    })
}

fn write_path(out: &OutArgs, path: &RegulatedPath) -> Result<()> {
    if let Some(w) = csv_writer(out)? {
        path.write_csv(w)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    lambda: f64,
    x0: &'a [f64],
    residual_sie: f64,
    jumps: &'a [JumpRecord],
    wall_time: f64,
}

#[derive(Serialize)]
struct MultiStartReport {
    lambda: f64,
    starts: Vec<StartOutcome>,
    distinct: Vec<periodic::ShootSummary>,
}

#[derive(Serialize)]
struct StartOutcome {
    guess: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x0_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct CriterionReport<'a> {
    q: &'a str,
    #[serde(rename = "T")]
    period: f64,
    #[serde(flatten)]
    verdict: &'a criteria::CriterionVerdict,
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Solve { problem, lambda, x0, grid, out } => {
            let l = load(&problem)?;
            let start = Instant::now();
            let path = solve_ivp(&l.def, lambda, &x0, &l.settings)?;
            let wall_time = start.elapsed().as_secs_f64();
            let residual = residual_sie(&l.def, lambda, &path, &uniform_grid(l.def.period(), grid))?;
            write_path(&out, &path)?;
            write_json(&out, &SolveSummary { lambda, x0: &x0, residual_sie: residual, jumps: path.jumps(), wall_time })?;
            summary(&out, format!("solved on [0, {}] with {} jumps, defect {residual:.3e}", l.def.period(), path.jumps().len()));
        }
        Command::Periodic { problem, lambda, x0, grid, tol, max_iter, out } => {
            let l = load(&problem)?;
            match grid {
                Some(k) => {
                    let guesses = periodic::grid_guesses(&l.def, k);
                    let results = periodic::multi_start(&l.def, lambda, &guesses, tol, max_iter, &l.settings);
                    let distinct: Vec<_> =
                        periodic::distinct_orbits(&results, 1e3 * tol.max(1e-9)).iter().map(|r| r.summary()).collect();
                    let starts = guesses
                        .into_iter()
                        .zip(&results)
                        .map(|(guess, r)| match r {
                            Ok(r) => StartOutcome { guess, x0_star: Some(r.x0_star.clone()), error: None },
                            Err(e) => StartOutcome { guess, x0_star: None, error: Some(e.to_string()) },
                        })
                        .collect();
                    summary(&out, format!("{} distinct periodic solutions", distinct.len()));
                    write_json(&out, &MultiStartReport { lambda, starts, distinct })?;
                }
                None => {
                    let guess = branch_state(&l.file, x0)?;
                    let r = periodic::shoot(&l.def, lambda, &guess, tol, max_iter, &l.settings)?;
                    write_path(&out, &r.path)?;
                    write_json(&out, &r.summary())?;
                    summary(&out, format!("converged in {} iterations to {:?}", r.iterations, r.x0_star));
                }
            }
        }
        Command::Monodromy { problem, lambda, x0, out } => {
            let l = load(&problem)?;
            let x0 = branch_state(&l.file, x0)?;
            let path = solve_ivp(&l.def, lambda, &x0, &l.settings)?;
            let rep = variational::monodromy(&l.def, lambda, &path, &l.settings)?;
            write_json(&out, &rep.to_json())?;
            summary(&out, format!("det(I - M) = {:e}{}", rep.det_i_minus_m, if rep.is_degenerate() { " (degenerate)" } else { "" }));
        }
        Command::Scan { problem, lambda_min, lambda_max, steps, bisect_tol, shoot_from, out } => {
            let l = load(&problem)?;
            if !(lambda_min <= lambda_max) || steps == 0 {
                return Err(Error::Validation("need lambda_min <= lambda_max and at least one step".into()));
            }
            let branch: Box<dyn BranchProvider> = match shoot_from {
                Some(guess) => Box::new(ShootingBranch { guess, tol: 1e-10, max_iter: 50 }),
                None => Box::new(PinnedBranch::new(branch_state(&l.file, None)?)),
            };
            let grid = bifurcation::lambda_grid(lambda_min, lambda_max, steps);
            let tol = bisect_tol.unwrap_or(l.file.settings.bisect_tol);
            let report = bifurcation::scan(&l.def, branch.as_ref(), &grid, tol, &l.settings)?;
            if let Some(w) = csv_writer(&out)? {
                report.write_csv(w)?;
            }
            write_json(&out, &report)?;
            summary(&out, format!(
                "{} sign changes, {} candidates{}",
                report.sign_change_intervals.len(),
                report.candidates.len(),
                if report.all_degenerate { ", index identically zero" } else { "" }
            ));
        }
        Command::Classify { problem, lambda, out } => {
            let l = load(&problem)?;
            let branch = PinnedBranch::new(branch_state(&l.file, None)?);
            let c = bifurcation::fredholm_classify(&l.def, lambda, &branch, &l.settings)?;
            if matches!(c.result, bifurcation::Fredholm::Degenerate { .. }) {
                write_path(&out, &c.kernel_path(&l.def, 0, &l.settings)?)?;
            }
            write_json(&out, &c.result)?;
        }
        Command::Criterion { q, period, tol, out } => {
            let expr = Expr::parse_scoped(&q, &Scope::time()).map_err(|e| Error::parse("q", e))?;
            let v = criteria::lomtatidze_check(&expr, period, tol)?;
            write_json(&out, &CriterionReport { q: &q, period, verdict: &v })?;
            summary(&out, format!("verdict: {:?}", v.verdict));
        }
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_NUMERIC
            }
        }
    }
}
