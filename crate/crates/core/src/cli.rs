//! Command-line front end. Every subcommand writes a JSON or CSV document to
//! standard output (or `--out`), errors go to standard error.
//!
//! Exit codes: 0 on success, 1 on domain errors and failed verification,
//! 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulation::{self, SocMode};
use crate::json;
use crate::opf::{self, OpfMode, OpfOptions};
use crate::polyapprox::{self, Family, CERTIFICATION_GRID};
use crate::quadcc::{self, GridSpec, QuadCCInstance};
use crate::seps::{self, CutKind, Point2, RiskLevel};
use crate::solver::{self, KelleyOptions, Status};
use crate::verify::{self, VerifyOptions};

/// Environment variable overriding the default cutting-plane tolerance.
pub const TOL_ENV: &str = "TWOSIDED_TOL";

#[derive(Debug, Parser)]
#[command(name = "twosided", version, about = "Two-sided Gaussian chance constraints")]
pub struct Cli {
    /// Seed for every randomized path.
    #[arg(long, global = true, default_value_t = 0x5EED)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Membership, separation, projection and support for S(eps).
    Seps(SepsArgs),
    /// Polyhedral outer families and their approximation certificates.
    Approx(ApproxArgs),
    /// Problem JSON to SOC formulation JSON.
    Formulate(FormulateArgs),
    /// Quadratic chance constraints on the two-variable example family.
    Quadcc(QuadccArgs),
    /// Problem JSON to solve report JSON.
    Solve(SolveArgs),
    /// Chance-constrained DC optimal power flow.
    Opf(OpfArgs),
    /// Runs the acceptance suite and prints a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SepsOp {
    Contains,
    Separate,
    Project,
    Support,
}

#[derive(Debug, Args)]
pub struct SepsArgs {
    pub op: SepsOp,
    #[arg(long)]
    pub eps: f64,
    /// Point `x,y` for contains, separate and project.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub point: Option<(f64, f64)>,
    /// Direction `a1,a2` for support.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub dir: Option<(f64, f64)>,
    #[arg(long, value_enum, default_value_t = CutArg::Tangent)]
    pub cut: CutArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CutArg {
    Tangent,
    Gradient,
}

impl From<CutArg> for CutKind {
    fn from(c: CutArg) -> Self {
        match c {
            CutArg::Tangent => CutKind::Tangent,
            CutArg::Gradient => CutKind::Gradient,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    A,
    B,
    Tangent,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    /// Single risk level; overrides --eps-grid.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Comma-separated risk levels.
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    /// Families to certify (default: all three).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub family: Option<Vec<FamilyArg>>,
    /// Number of cuts of the tangent family.
    #[arg(long, default_value_t = 16)]
    pub cuts: usize,
    /// Report the tail inequalities on the risk levels instead.
    #[arg(long)]
    pub tail_inequalities: bool,
    #[arg(long, short)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SocModeArg {
    Outer,
    Conservative,
}

impl From<SocModeArg> for SocMode {
    fn from(m: SocModeArg) -> Self {
        match m {
            SocModeArg::Outer => SocMode::Outer,
            SocModeArg::Conservative => SocMode::Conservative,
        }
    }
}

#[derive(Debug, Args)]
pub struct FormulateArgs {
    /// Problem JSON file.
    pub problem: String,
    #[arg(long, value_enum, default_value_t = SocModeArg::Outer)]
    pub mode: SocModeArg,
    #[arg(long, short)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QuadccOp {
    TrueProb,
    Witness,
    CompareGrid,
}

#[derive(Debug, Args)]
pub struct QuadccArgs {
    pub op: QuadccOp,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Cells per axis for compare-grid.
    #[arg(long, default_value_t = 61)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.2)]
    pub hi: f64,
    #[arg(long, default_value_t = 0.8)]
    pub x: f64,
    #[arg(long, default_value_t = 0.8)]
    pub y: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Also emit this many points along the witness segment (CSV).
    #[arg(long)]
    pub trace: Option<usize>,
    #[arg(long, short)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Kelley,
    Soc,
}

#[derive(Debug, Args)]
pub struct KelleyArgs {
    /// Cut violation tolerance.
    #[arg(long, env = TOL_ENV, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = CutArg::Tangent)]
    pub cut: CutArg,
}

impl KelleyArgs {
    fn options(&self) -> Result<KelleyOptions> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Domain(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(KelleyOptions { cut_kind: self.cut.into(), tol: self.tol, max_iter: self.max_iter, ..Default::default() })
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem JSON file.
    pub problem: String,
    #[arg(long, value_enum, default_value_t = Method::Kelley)]
    pub method: Method,
    /// Formulation used by the soc method.
    #[arg(long, value_enum, default_value_t = SocModeArg::Outer)]
    pub mode: SocModeArg,
    #[command(flatten)]
    pub kelley: KelleyArgs,
    /// Write the per-iteration log as CSV to this file.
    #[arg(long)]
    pub log: Option<String>,
    #[arg(long, short)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OpfModeArg {
    Exact,
    Soc,
    Split,
}

impl From<OpfModeArg> for OpfMode {
    fn from(m: OpfModeArg) -> Self {
        match m {
            OpfModeArg::Exact => OpfMode::TwoSidedExact,
            OpfModeArg::Soc => OpfMode::TwoSidedSoc,
            OpfModeArg::Split => OpfMode::SplitOneSided,
        }
    }
}

#[derive(Debug, Args)]
pub struct OpfArgs {
    /// Network JSON file, or a bundled fixture name (two_bus, three_bus,
    /// five_bus).
    pub network: String,
    #[arg(long, value_enum, default_value_t = OpfModeArg::Exact)]
    pub mode: OpfModeArg,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub slack: usize,
    /// Allow negative participation factors.
    #[arg(long)]
    pub free_alpha: bool,
    /// Drop the generator limit chance constraints.
    #[arg(long)]
    pub no_gen_ccs: bool,
    /// Monte Carlo samples for an empirical check of the line flows.
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub kelley: KelleyArgs,
    #[arg(long, short)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run a single criterion.
    #[arg(long)]
    pub only: Option<u8>,
    /// Emit JSON instead of the table.
    #[arg(long)]
    pub json: bool,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got `{s}`"));
    }
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((num(parts[0])?, num(parts[1])?))
}

fn read(path: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))
}

fn emit(text: &str, out: &Option<String>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{path}: {e}"))),
        None => stdout.write_all(text.as_bytes()).map_err(Error::from),
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Seps(a) => seps_cmd(a, stdout),
        Command::Approx(a) => approx_cmd(a, stdout),
        Command::Formulate(a) => {
            let p = formulation::parse_problem(&read(&a.problem)?)?;
            let f = formulation::build_soc(&p, a.mode.into())?;
            emit(&formulation::emit_json(&f)?, &a.out, stdout)?;
            Ok(0)
        }
        Command::Quadcc(a) => quadcc_cmd(a, stdout),
        Command::Solve(a) => solve_cmd(a, stdout),
        Command::Opf(a) => opf_cmd(a, cli.seed, stdout),
        Command::Verify(a) => verify_cmd(a, cli.seed, stdout),
    }
}

#[derive(Serialize)]
struct SepsOut {
    op: &'static str,
    eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    point: Option<Point2>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contains: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cut: Option<seps::Halfplane2>,
    #[serde(skip_serializing_if = "Option::is_none")]
    projection: Option<Point2>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    direction: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    support: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    maximizer: Option<Point2>,
}

fn seps_cmd(a: &SepsArgs, stdout: &mut dyn Write) -> Result<i32> {
    let eps = RiskLevel::new(a.eps)?;
    let point = || {
        a.point
            .map(|(x, y)| Point2::new(x, y))
            .ok_or_else(|| Error::Domain("this operation needs --point x,y".into()))
    };
    let mut out = SepsOut {
        op: "",
        eps: a.eps,
        point: None,
        contains: None,
        mass: None,
        cut: None,
        projection: None,
        lambda: None,
        direction: None,
        support: None,
        maximizer: None,
    };
    match a.op {
        SepsOp::Contains => {
            let p = point()?;
            out = SepsOut { op: "contains", point: Some(p), contains: Some(seps::contains(p, eps)), mass: Some(seps::mass(p)), ..out };
        }
        SepsOp::Separate => {
            let p = point()?;
            let cut = match CutKind::from(a.cut) {
                CutKind::Tangent => seps::separate_tangent(p, eps)?,
                CutKind::Gradient => seps::separate_gradient(p, eps)?,
            };
            out = SepsOut { op: "separate", point: Some(p), cut: Some(cut), ..out };
        }
        SepsOp::Project => {
            let p = point()?;
            let pr = seps::project(p, eps)?;
            out = SepsOut { op: "project", point: Some(p), projection: Some(pr.point), lambda: Some(pr.lambda.get()), ..out };
        }
        SepsOp::Support => {
            let (a1, a2) = a.dir.ok_or_else(|| Error::Domain("support needs --dir a1,a2".into()))?;
            let s = seps::support(a1, a2, eps)?;
            out = SepsOut { op: "support", direction: Some((a1, a2)), support: Some(s.value), maximizer: s.maximizer, lambda: s.lambda, ..out };
        }
    }
    emit(&json::to_string(&out)?, &None, stdout)?;
    Ok(0)
}

fn approx_cmd(a: &ApproxArgs, stdout: &mut dyn Write) -> Result<i32> {
    let grid = match (a.eps, &a.eps_grid) {
        (Some(e), _) => vec![e],
        (None, Some(g)) => g.clone(),
        (None, None) => CERTIFICATION_GRID.to_vec(),
    };
    if a.tail_inequalities {
        let r = polyapprox::verify_tail_inequalities(&grid)?;
        emit(&json::to_string(&r)?, &a.out, stdout)?;
        return Ok(0);
    }
    let families: Vec<Family> = a
        .family
        .clone()
        .unwrap_or_else(|| vec![FamilyArg::A, FamilyArg::B, FamilyArg::Tangent])
        .into_iter()
        .map(|f| match f {
            FamilyArg::A => Family::A,
            FamilyArg::B => Family::B,
            FamilyArg::Tangent => Family::Tangent(a.cuts),
        })
        .collect();
    let rows = polyapprox::certificate_report(&families, &grid)?;
    emit(&json::to_string(&rows)?, &a.out, stdout)?;
    Ok(0)
}

#[derive(Serialize)]
struct TrueProbOut {
    x: f64,
    y: f64,
    k: f64,
    eps: f64,
    true_prob: f64,
    exact: bool,
    two_sided: quadcc::TwoSidedResult,
    robust: quadcc::LmiResult,
    cvar: quadcc::CvarResult,
}

fn quadcc_cmd(a: &QuadccArgs, stdout: &mut dyn Write) -> Result<i32> {
    let eps = RiskLevel::relaxed(a.eps)?;
    match a.op {
        QuadccOp::TrueProb => {
            let inst = QuadCCInstance::example(a.x, a.y, eps).with_k(a.k);
            let p = quadcc::true_prob(&inst, quadcc::TRUE_PROB_TOL)?;
            let out = TrueProbOut {
                x: a.x,
                y: a.y,
                k: a.k,
                eps: a.eps,
                true_prob: p,
                exact: p >= 1.0 - a.eps,
                two_sided: quadcc::two_sided_feasible(&inst, 0.5)?,
                robust: quadcc::robust_feasible(&inst)?,
                cvar: quadcc::cvar_feasible(&inst)?,
            };
            emit(&json::to_string(&out)?, &a.out, stdout)?;
        }
        QuadccOp::Witness => match a.trace {
            Some(n) => emit(&quadcc::to_csv(&quadcc::witness_trace(n)?)?, &a.out, stdout)?,
            None => emit(&json::to_string(&quadcc::nonconvexity_witness()?)?, &a.out, stdout)?,
        },
        QuadccOp::CompareGrid => {
            let rows = quadcc::compare_grid(eps, GridSpec { n: a.grid, lo: a.lo, hi: a.hi })?;
            emit(&quadcc::to_csv(&rows)?, &a.out, stdout)?;
        }
    }
    Ok(0)
}

fn solve_cmd(a: &SolveArgs, stdout: &mut dyn Write) -> Result<i32> {
    let p = formulation::parse_problem(&read(&a.problem)?)?;
    let opts = a.kelley.options()?;
    let report = match a.method {
        Method::Kelley => solver::kelley_solve(&p, &opts)?,
        Method::Soc => solver::solve_via_soc(&p, a.mode.into(), &opts)?,
    };
    if let Some(path) = &a.log {
        std::fs::write(path, report.log_csv()?).map_err(|e| Error::Io(format!("{path}: {e}")))?;
    }
    emit(&json::to_string(&report)?, &a.out, stdout)?;
    Ok(status_code(report.status))
}

fn status_code(s: Status) -> i32 {
    match s {
        Status::Optimal => 0,
        _ => 1,
    }
}

#[derive(Serialize)]
struct OpfOut {
    #[serde(flatten)]
    report: opf::OpfReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<MonteCarloOut>,
}

#[derive(Serialize)]
struct MonteCarloOut {
    samples: usize,
    seed: u64,
    /// Per line `(mean, variance)` of the sampled flow.
    flows: Vec<(f64, f64)>,
}

fn opf_cmd(a: &OpfArgs, seed: u64, stdout: &mut dyn Write) -> Result<i32> {
    let net = if opf::FIXTURES.iter().any(|(n, _)| *n == a.network) {
        opf::fixture(&a.network)?
    } else {
        opf::load_network(&read(&a.network)?)?
    };
    let opts = OpfOptions { slack: a.slack, nonneg_alpha: !a.free_alpha, gen_ccs: !a.no_gen_ccs, kelley: a.kelley.options()? };
    let report = opf::solve_opf(&net, RiskLevel::new(a.eps)?, a.mode.into(), &opts)?;
    let monte_carlo = match (a.samples, report.status) {
        (Some(n), Status::Optimal) => Some(MonteCarloOut {
            samples: n,
            seed,
            flows: opf::monte_carlo_flows(&net, &report.p, &report.alpha, a.slack, n, seed)?,
        }),
        _ => None,
    };
    let code = status_code(report.status);
    emit(&json::to_string(&OpfOut { report, monte_carlo })?, &a.out, stdout)?;
    Ok(code)
}

fn verify_cmd(a: &VerifyArgs, seed: u64, stdout: &mut dyn Write) -> Result<i32> {
    let opts = VerifyOptions { seed };
    let results = match a.only {
        Some(id) => vec![verify::run_check(id, &opts).ok_or_else(|| Error::Domain(format!("no criterion {id}")))?],
        None => verify::run_all(&opts),
    };
    let text = if a.json { json::to_string(&results)? } else { verify::render_table(&results) };
    emit(&text, &None, stdout)?;
    Ok(if results.iter().all(|r| r.passed) { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let argv = std::iter::once("twosided").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&[]).0, 2);
        assert_eq!(call(&["seps", "support", "--eps", "0.05", "--bogus"]).0, 2);
        assert_eq!(call(&["nope"]).0, 2);
        let (code, out, _) = call(&["quadcc", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("compare-grid"));
    }

    #[test]
    fn domain_errors_exit_one() {
        let (code, _, err) = call(&["seps", "support", "--eps", "0.7", "--dir", "1,-1"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error:"));
        assert_eq!(call(&["seps", "contains", "--eps", "0.1"]).0, 1);
        assert_eq!(call(&["solve", "/nonexistent/problem.json"]).0, 1);
    }

    #[test]
    fn support_example() {
        let (code, out, _) = call(&["seps", "support", "--eps", "0.05", "--dir", "1,-1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let want = 2.0 * crate::gauss::quantile(0.025).unwrap();
        assert!((v["support"].as_f64().unwrap() - want).abs() <= 1e-12);
    }

    #[test]
    fn approx_example() {
        let (code, out, _) = call(&["approx", "--eps", "0.05", "--family", "b"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v[0]["certificate"]["alpha"].as_f64().unwrap() <= 1.25);
    }

    #[test]
    fn witness_example_and_determinism() {
        let (code, out, _) = call(&["quadcc", "witness"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["mid"].as_f64().unwrap() - 0.542).abs() < 5e-4);
        assert!(v["left"].as_f64().unwrap() >= 0.545);
        assert_eq!(call(&["quadcc", "witness"]).1, out);
    }

    #[test]
    fn opf_fixture_by_name() {
        let (code, out, _) = call(&["--seed", "3", "opf", "two_bus", "--mode", "split", "--samples", "1000"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["mode"], "split_one_sided");
        assert_eq!(v["monte_carlo"]["seed"], 3);
        assert_eq!(call(&["--seed", "3", "opf", "two_bus", "--mode", "split", "--samples", "1000"]).1, out);
    }
}
