//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 solver failure (including
//! campaigns in which some variant failed), 3 failed oracle check.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::check::{run_support_checks, support_checks_csv};
use super::config::{resolve_workers, ExperimentConfig};
use super::runner::{run_scatter, run_sweep, InstanceRecord};
use crate::error::{Error, Result};
use crate::evaluation::{distortion, epsilon_star, serialize_extended, Mechanism};
use crate::problems::{solve_problem, ClarabelSolver, DistortionSpec, ProblemSpec, SolveStatus, Variant, PRIMAL_TOL};
use crate::simplex::JointDistribution;
use crate::uncertainty::UncertaintySet;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rldp", version, about = "Release mechanisms under robust local differential privacy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem for an empirical distribution.
    Solve(SolveArgs),
    /// K instances at one sample size; one CSV row per instance and variant.
    Scatter(CampaignArgs),
    /// K instances per sweep value; one summary CSV row per value and variant.
    Sweep(CampaignArgs),
    /// Oracle checks.
    Check {
        #[command(subcommand)]
        what: CheckCommand,
    },
    /// Evaluate a mechanism under a distribution.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    variant: Variant,
    /// Empirical distribution (JSON).
    #[arg(long)]
    phat: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Sample size behind the empirical distribution.
    #[arg(long, required_unless_present = "radius")]
    n: Option<u64>,
    /// Explicit radius, overriding the one derived from `n` and `alpha`.
    #[arg(long)]
    radius: Option<f64>,
    /// Distortion (JSON `"squared"` or `{"matrix": [[...]]}`); squared by default.
    #[arg(long)]
    distortion: Option<PathBuf>,
    /// Mechanism output (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Report output; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = PRIMAL_TOL)]
    tol: f64,
}

#[derive(Debug, Args)]
struct CampaignArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Per-instance records as JSON lines.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum CheckCommand {
    /// Closed-form support values against sampling oracles.
    Support {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 4)]
        dims: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    mechanism: PathBuf,
    /// Distribution under which the mechanism is evaluated (JSON).
    #[arg(long)]
    dist: PathBuf,
    #[arg(long)]
    distortion: Option<PathBuf>,
    /// Empirical distribution; with `--n` or `--radius`, reports membership of `--dist`.
    #[arg(long)]
    phat: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SolveReport {
    variant: Variant,
    status: SolveStatus,
    objective: f64,
    radius: f64,
    /// Distortion under the empirical distribution.
    d_hat: f64,
    #[serde(serialize_with = "serialize_extended")]
    eps_hat: f64,
    max_residual: f64,
    semantic_max: Option<f64>,
    repair: f64,
    /// Whether the privacy constraints provably hold for the released mechanism.
    strict: bool,
    violations: Vec<String>,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    d_star: f64,
    #[serde(serialize_with = "serialize_extended")]
    eps_star: f64,
    eps_star_infinite: bool,
    #[serde(rename = "pstar_in_F", skip_serializing_if = "Option::is_none")]
    pstar_in_f: Option<bool>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_distortion(path: Option<&Path>) -> Result<DistortionSpec> {
    path.map_or(Ok(DistortionSpec::Squared), read_json)
}

fn uncertainty_set(phat: JointDistribution, n: Option<u64>, alpha: f64, radius: Option<f64>) -> Result<UncertaintySet> {
    match (radius, n) {
        (Some(r), _) => UncertaintySet::with_radius(phat, r),
        (None, Some(n)) => UncertaintySet::from_samples(phat, n, alpha),
        (None, None) => Err(Error::Config("either --n or --radius is required".into())),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SolverFailure(_)
        | Error::InfeasibleReported
        | Error::ConvergenceFailure { .. }
        | Error::ExcessiveRepair { .. } => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let phat: JointDistribution = read_json(&a.phat)?;
    let set = uncertainty_set(phat.clone(), a.n, a.alpha, a.radius)?;
    let radius = set.radius();
    let spec = ProblemSpec::new(a.variant, set, a.epsilon, load_distortion(a.distortion.as_deref())?)?;
    let solved = solve_problem(&spec, &ClarabelSolver::default(), a.tol)?;
    fs::write(&a.out, serde_json::to_string_pretty(&solved.mechanism)? + "\n")?;
    let report = SolveReport {
        variant: a.variant,
        status: solved.solution.status,
        objective: solved.solution.objective,
        radius,
        d_hat: distortion(&phat, &solved.mechanism, &solved.built.distortion)?,
        eps_hat: epsilon_star(&phat, &solved.mechanism)?,
        max_residual: solved.verification.max_residual(),
        semantic_max: solved.verification.semantic_max(),
        repair: solved.repair,
        strict: solved.strict,
        violations: solved.verification.violations.clone(),
    };
    write_text(a.report.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(EXIT_OK)
}

fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let mech: Mechanism = read_json(&a.mechanism)?;
    let p: JointDistribution = read_json(&a.dist)?;
    let d = load_distortion(a.distortion.as_deref())?.matrix(p.alphabet())?;
    let pstar_in_f = match &a.phat {
        Some(path) => Some(uncertainty_set(read_json(path)?, a.n, a.alpha, a.radius)?.contains(&p)),
        None => None,
    };
    let eps_star = epsilon_star(&p, &mech)?;
    let report = EvalReport { d_star: distortion(&p, &mech, &d)?, eps_star, eps_star_infinite: eps_star.is_infinite(), pstar_in_f };
    write_text(None, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(EXIT_OK)
}

fn write_records<'a>(path: Option<&Path>, records: impl Iterator<Item = &'a InstanceRecord>) -> Result<()> {
    if let Some(p) = path {
        let mut text = String::new();
        for r in records {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        fs::write(p, text)?;
    }
    Ok(())
}

fn report_failures<'a>(records: impl Iterator<Item = &'a InstanceRecord>) -> i32 {
    let mut code = EXIT_OK;
    for r in records {
        for f in r.failures() {
            eprintln!("instance {} {}: {}", r.instance, f.variant, f.error.as_deref().unwrap_or(""));
            code = EXIT_SOLVER;
        }
    }
    code
}

fn cmd_campaign(a: &CampaignArgs, sweep: bool) -> Result<i32> {
    let config = ExperimentConfig::from_json(&fs::read_to_string(&a.config)?)?;
    let workers = resolve_workers(a.workers, config.workers)?;
    if sweep {
        let out = run_sweep(&config, workers)?;
        fs::write(&a.out, &out.csv)?;
        write_records(a.records.as_deref(), out.records.iter().flatten())?;
        Ok(report_failures(out.records.iter().flatten()))
    } else {
        let out = run_scatter(&config, workers)?;
        fs::write(&a.out, &out.csv)?;
        write_records(a.records.as_deref(), out.records.iter())?;
        Ok(report_failures(out.records.iter()))
    }
}

fn cmd_check(what: &CheckCommand) -> Result<i32> {
    let CheckCommand::Support { trials, dims, seed, out } = what;
    let checks = run_support_checks(*trials, *dims, *seed)?;
    write_text(out.as_deref(), &support_checks_csv(&checks)?)?;
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).collect();
    for c in &failed {
        eprintln!("query {} ({:?}): closed form {} vs oracle {}", c.query, c.kind, c.closed_form, c.oracle);
    }
    Ok(if failed.is_empty() { EXIT_OK } else { EXIT_CHECK })
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Scatter(a) => cmd_campaign(a, false),
        Command::Sweep(a) => cmd_campaign(a, true),
        Command::Check { what } => cmd_check(what),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
