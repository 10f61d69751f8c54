//! Chance-constrained DC optimal power flow.
//!
//! Generators follow the proportional response `p_i - alpha_i Omega` where
//! `Omega` is the total wind deviation, so with `sum alpha = 1` every
//! realization is balanced and line flows are affine in the deviations.
//! Flows come from a PTDF matrix of the DC network model.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::formulation::{AffineExpr, ChanceProblem, GaussianVector, LinearConstraint, Sense, SocMode, TwoSidedCC};
use crate::gauss::{cdf, sf};
use crate::json;
use crate::seps::RiskLevel;
use crate::solver::{self, DenseLP, KelleyOptions, SolveReport, Status};

/// Relative eigenvalue cutoff when factoring the wind covariance.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub d: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub m: usize,
    pub n: usize,
    pub beta: f64,
    pub fmax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub bus: usize,
    pub c: f64,
    pub pmin: f64,
    pub pmax: f64,
}

/// Network document; bus indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub gens: Vec<Generator>,
    pub wind_cov: Vec<Vec<f64>>,
}

/// Validated network with a factored wind covariance `F F^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub gens: Vec<Generator>,
    pub wind_cov: DMatrix<f64>,
    /// `n_bus x r` factor of the wind covariance.
    pub wind_factor: DMatrix<f64>,
}

impl Network {
    pub fn new(doc: NetworkDoc) -> Result<Self> {
        let nb = doc.buses.len();
        let mut errs = Vec::new();
        if nb == 0 {
            errs.push("network has no buses".to_string());
        }
        if doc.gens.is_empty() {
            errs.push("network has no generators".to_string());
        }
        for (i, b) in doc.buses.iter().enumerate() {
            if !(b.d.is_finite() && b.w.is_finite()) {
                errs.push(format!("buses[{i}]: non-finite load or forecast"));
            }
        }
        for (i, l) in doc.lines.iter().enumerate() {
            if l.m >= nb || l.n >= nb {
                errs.push(format!("lines[{i}]: endpoint out of range (buses 0..{nb})"));
            }
            if l.m == l.n {
                errs.push(format!("lines[{i}]: both ends at bus {}", l.m));
            }
            if !(l.beta > 0.0 && l.beta.is_finite()) {
                errs.push(format!("lines[{i}]: susceptance must be positive, got {}", l.beta));
            }
            if !(l.fmax >= 0.0) {
                errs.push(format!("lines[{i}]: negative capacity {}", l.fmax));
            }
        }
        for (i, g) in doc.gens.iter().enumerate() {
            if g.bus >= nb {
                errs.push(format!("gens[{i}]: bus {} out of range", g.bus));
            }
            if !(g.pmin <= g.pmax) || !g.pmin.is_finite() || !g.pmax.is_finite() || !g.c.is_finite() {
                errs.push(format!("gens[{i}]: need finite c and pmin <= pmax"));
            }
        }
        let load: f64 = doc.buses.iter().map(|b| b.d).sum();
        let supply: f64 = doc.gens.iter().map(|g| g.pmax).sum::<f64>() + doc.buses.iter().map(|b| b.w).sum::<f64>();
        if load > supply {
            errs.push(format!("total load {load} exceeds capacity plus forecast {supply}"));
        }
        let shape_ok = doc.wind_cov.len() == nb && doc.wind_cov.iter().all(|r| r.len() == nb);
        let mut cov = DMatrix::zeros(nb, nb);
        if !shape_ok {
            errs.push(format!("wind_cov must be {nb}x{nb}"));
        } else {
            cov = DMatrix::from_fn(nb, nb, |i, j| doc.wind_cov[i][j]);
            if cov.iter().any(|v| !v.is_finite()) {
                errs.push("wind_cov has non-finite entries".to_string());
            } else if (0..nb).any(|i| (0..i).any(|j| (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * (1.0 + cov[(i, j)].abs()))) {
                errs.push("wind_cov is not symmetric".to_string());
            }
        }
        if errs.is_empty() && nb > 0 && !connected(nb, &doc.lines) {
            errs.push("network is disconnected".to_string());
        }
        let factor = if errs.is_empty() {
            match psd_factor(&cov) {
                Ok(f) => Some(f),
                Err(e) => {
                    errs.push(format!("wind_cov: {e}"));
                    None
                }
            }
        } else {
            None
        };
        if !errs.is_empty() {
            return Err(Error::Network(errs));
        }
        Ok(Network {
            buses: doc.buses,
            lines: doc.lines,
            gens: doc.gens,
            wind_cov: cov,
            wind_factor: factor.expect("checked above"),
        })
    }

    pub fn doc(&self) -> NetworkDoc {
        let nb = self.buses.len();
        NetworkDoc {
            buses: self.buses.clone(),
            lines: self.lines.clone(),
            gens: self.gens.clone(),
            wind_cov: (0..nb).map(|i| (0..nb).map(|j| self.wind_cov[(i, j)]).collect()).collect(),
        }
    }

    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    /// Number of independent wind deviation factors.
    pub fn rank(&self) -> usize {
        self.wind_factor.ncols()
    }

    /// `sum_b (w_b - d_b)`.
    pub fn net_forecast(&self) -> f64 {
        self.buses.iter().map(|b| b.w - b.d).sum()
    }

    pub fn with_wind_cov(&self, cov: DMatrix<f64>) -> Result<Network> {
        let mut doc = self.doc();
        let nb = self.n_bus();
        doc.wind_cov = (0..nb).map(|i| (0..nb).map(|j| cov[(i, j)]).collect()).collect();
        Network::new(doc)
    }
}

fn connected(nb: usize, lines: &[Line]) -> bool {
    let mut adj = vec![Vec::new(); nb];
    for l in lines {
        adj[l.m].push(l.n);
        adj[l.n].push(l.m);
    }
    let mut seen = vec![false; nb];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(b) = queue.pop_front() {
        for &n in &adj[b] {
            if !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// `F` with `F F^T = cov`, dropping eigenvalues below `RANK_TOL` times the
/// largest.
fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    let eig = SymmetricEigen::new(cov.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if let Some(v) = eig.eigenvalues.iter().find(|v| **v < -RANK_TOL * top.max(f64::MIN_POSITIVE)) {
        return Err(Error::Domain(format!("not positive semidefinite (eigenvalue {v:e})")));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > RANK_TOL * top).collect();
    Ok(DMatrix::from_fn(n, keep.len(), |i, j| {
        let k = keep[j];
        eig.eigenvectors[(i, k)] * eig.eigenvalues[k].sqrt()
    }))
}

pub fn load_network(text: &str) -> Result<Network> {
    Network::new(json::from_str(text)?)
}

/// Bundled test networks: a 2-bus line, a 3-bus triangle and a 5-bus path.
pub const FIXTURES: [(&str, &str); 3] = [
    ("two_bus", include_str!("../fixtures/two_bus.json")),
    ("three_bus", include_str!("../fixtures/three_bus.json")),
    ("five_bus", include_str!("../fixtures/five_bus.json")),
];

pub fn fixture(name: &str) -> Result<Network> {
    match FIXTURES.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => load_network(text),
        None => domain(format!("unknown fixture `{name}` (expected two_bus, three_bus or five_bus)")),
    }
}

/// Line-by-bus power transfer distribution factors with bus `slack`
/// absorbing the imbalance.
pub fn ptdf(net: &Network, slack: usize) -> Result<DMatrix<f64>> {
    let nb = net.n_bus();
    if slack >= nb {
        return domain(format!("slack bus {slack} out of range"));
    }
    let mut lap = DMatrix::<f64>::zeros(nb, nb);
    for l in &net.lines {
        lap[(l.m, l.m)] += l.beta;
        lap[(l.n, l.n)] += l.beta;
        lap[(l.m, l.n)] -= l.beta;
        lap[(l.n, l.m)] -= l.beta;
    }
    let keep: Vec<usize> = (0..nb).filter(|&b| b != slack).collect();
    let red = DMatrix::from_fn(nb - 1, nb - 1, |i, j| lap[(keep[i], keep[j])]);
    let inv = red.lu().try_inverse().ok_or_else(|| Error::Domain("singular reduced Laplacian".into()))?;
    let mut x = DMatrix::<f64>::zeros(nb, nb);
    for (i, &bi) in keep.iter().enumerate() {
        for (j, &bj) in keep.iter().enumerate() {
            x[(bi, bj)] = inv[(i, j)];
        }
    }
    Ok(DMatrix::from_fn(net.lines.len(), nb, |k, b| {
        let l = net.lines[k];
        l.beta * (x[(l.m, b)] - x[(l.n, b)])
    }))
}

/// Chance-constraint treatment of the line limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OpfMode {
    /// Two-sided constraint solved with the exact conic-hull oracle.
    #[default]
    TwoSidedExact,
    /// Two-sided constraint replaced by its SOC outer approximation.
    TwoSidedSoc,
    /// Two one-sided constraints at level `eps / 2` each.
    SplitOneSided,
}

impl OpfMode {
    pub const ALL: [OpfMode; 3] = [OpfMode::TwoSidedExact, OpfMode::TwoSidedSoc, OpfMode::SplitOneSided];
}

impl fmt::Display for OpfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpfMode::TwoSidedExact => "two_sided_exact",
            OpfMode::TwoSidedSoc => "two_sided_soc",
            OpfMode::SplitOneSided => "split_one_sided",
        })
    }
}

impl FromStr for OpfMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_sided_exact" | "exact" => Ok(OpfMode::TwoSidedExact),
            "two_sided_soc" | "soc" => Ok(OpfMode::TwoSidedSoc),
            "split_one_sided" | "split" => Ok(OpfMode::SplitOneSided),
            other => domain(format!("unknown OPF mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpfOptions {
    pub slack: usize,
    /// Impose `alpha >= 0`.
    pub nonneg_alpha: bool,
    /// One-sided chance constraints on each generator limit.
    pub gen_ccs: bool,
    pub kelley: KelleyOptions,
}

impl Default for OpfOptions {
    fn default() -> Self {
        OpfOptions { slack: 0, nonneg_alpha: true, gen_ccs: true, kelley: KelleyOptions::default() }
    }
}

/// Capacity slack for deterministic limits, absorbing LP rounding.
pub const DETERMINISTIC_TOL: f64 = 1e-9;

/// Range of `alpha` when it may go negative.
const FREE_ALPHA_BOUND: f64 = 10.0;

pub fn p_name(i: usize) -> String {
    format!("p{i}")
}

pub fn alpha_name(i: usize) -> String {
    format!("alpha{i}")
}

/// Affine flow model: `flow_l = base_l(p) + sum_j coef_lj(alpha) eta_j` with
/// independent standard `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFlowModel {
    pub base: Vec<AffineExpr>,
    pub sensitivity: Vec<Vec<AffineExpr>>,
}

pub fn flow_model(net: &Network, slack: usize) -> Result<AffineFlowModel> {
    let h = ptdf(net, slack)?;
    let f = &net.wind_factor;
    let col_sums: Vec<f64> = (0..f.ncols()).map(|j| f.column(j).sum()).collect();
    let mut base = Vec::new();
    let mut sensitivity = Vec::new();
    for l in 0..net.lines.len() {
        let mut e = AffineExpr::constant(net.buses.iter().enumerate().map(|(b, bus)| h[(l, b)] * (bus.w - bus.d)).sum());
        for (i, g) in net.gens.iter().enumerate() {
            e = e.with_term(&p_name(i), h[(l, g.bus)]);
        }
        base.push(e);
        let row = (0..f.ncols())
            .map(|j| {
                let mut e = AffineExpr::constant((0..net.n_bus()).map(|b| h[(l, b)] * f[(b, j)]).sum());
                for (i, g) in net.gens.iter().enumerate() {
                    e = e.with_term(&alpha_name(i), -h[(l, g.bus)] * col_sums[j]);
                }
                e
            })
            .collect();
        sensitivity.push(row);
    }
    Ok(AffineFlowModel { base, sensitivity })
}

/// Chance-constrained DC-OPF as a [`ChanceProblem`]. With a zero wind
/// covariance the line and generator limits become deterministic rows.
pub fn build_cc_opf(net: &Network, eps: RiskLevel, mode: OpfMode, opts: &OpfOptions) -> Result<ChanceProblem> {
    if !eps.is_standard() {
        return domain("OPF chance constraints need eps <= 1/2");
    }
    let pmin: f64 = net.gens.iter().map(|g| g.pmin).sum();
    let pmax: f64 = net.gens.iter().map(|g| g.pmax).sum();
    let need = -net.net_forecast();
    if need < pmin - 1e-12 || need > pmax + 1e-12 {
        return domain(format!("no dispatch balances the forecast: need {need}, generation range [{pmin}, {pmax}]"));
    }
    let ng = net.gens.len();
    let mut names: Vec<String> = (0..ng).map(p_name).collect();
    names.extend((0..ng).map(alpha_name));
    let names_ref: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut obj = AffineExpr::default();
    let mut balance = AffineExpr::default();
    let mut share = AffineExpr::default();
    for (i, g) in net.gens.iter().enumerate() {
        obj = obj.with_term(&p_name(i), g.c);
        balance = balance.with_term(&p_name(i), 1.0);
        share = share.with_term(&alpha_name(i), 1.0);
    }
    let mut p = ChanceProblem::new(&names_ref)
        .minimize(obj)
        .subject_to(LinearConstraint::new(balance, Sense::Eq, need))
        .subject_to(LinearConstraint::new(share, Sense::Eq, 1.0));
    for (i, g) in net.gens.iter().enumerate() {
        p = p.bound(&p_name(i), Some(g.pmin), Some(g.pmax));
        let (lo, hi) = if opts.nonneg_alpha { (0.0, 1.0) } else { (-FREE_ALPHA_BOUND, FREE_ALPHA_BOUND) };
        p = p.bound(&alpha_name(i), Some(lo), Some(hi));
    }
    let model = flow_model(net, opts.slack)?;
    let r = net.rank();
    if r == 0 {
        for (k, l) in net.lines.iter().enumerate() {
            p = p
                .subject_to(LinearConstraint::new(model.base[k].clone(), Sense::Le, l.fmax))
                .subject_to(LinearConstraint::new(model.base[k].clone(), Sense::Ge, -l.fmax));
        }
        return Ok(p);
    }
    let dist = GaussianVector::standard(r);
    for (k, l) in net.lines.iter().enumerate() {
        let lower = model.base[k].scaled(-1.0).with_constant(-l.fmax);
        let upper = model.base[k].scaled(-1.0).with_constant(l.fmax);
        let coeffs = model.sensitivity[k].clone();
        match mode {
            OpfMode::TwoSidedExact | OpfMode::TwoSidedSoc => {
                p = p.with_cc(TwoSidedCC::new(Some(lower), Some(upper), coeffs, dist.clone(), eps)?);
            }
            OpfMode::SplitOneSided => {
                let half = eps.scaled(2.0)?;
                p = p.with_cc(TwoSidedCC::new(None, Some(upper), coeffs.clone(), dist.clone(), half)?);
                p = p.with_cc(TwoSidedCC::new(Some(lower), None, coeffs, dist.clone(), half)?);
            }
        }
    }
    if opts.gen_ccs {
        let col_sums: Vec<f64> = (0..r).map(|j| net.wind_factor.column(j).sum()).collect();
        for (i, g) in net.gens.iter().enumerate() {
            // realized output p_i - alpha_i Omega
            let coeffs: Vec<AffineExpr> = col_sums.iter().map(|s| AffineExpr::term(&alpha_name(i), -s)).collect();
            let up = AffineExpr::constant(g.pmax).with_term(&p_name(i), -1.0);
            let down = AffineExpr::constant(g.pmin).with_term(&p_name(i), -1.0);
            p = p.with_cc(TwoSidedCC::new(None, Some(up), coeffs.clone(), dist.clone(), eps)?);
            p = p.with_cc(TwoSidedCC::new(Some(down), None, coeffs, dist.clone(), eps)?);
        }
    }
    Ok(p)
}

/// Exact risk of a dispatch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchEval {
    pub cost: f64,
    /// `P(|flow_l| > fmax_l)` per line.
    pub line_violation: Vec<f64>,
    /// `P(p_i - alpha_i Omega > pmax_i)` per generator.
    pub gen_over: Vec<f64>,
    /// `P(p_i - alpha_i Omega < pmin_i)` per generator.
    pub gen_under: Vec<f64>,
    pub flow_mean: Vec<f64>,
    pub flow_sd: Vec<f64>,
    pub balance_residual: f64,
    pub alpha_sum: f64,
}

impl DispatchEval {
    pub fn max_line_violation(&self) -> f64 {
        self.line_violation.iter().copied().fold(0.0, f64::max)
    }
}

fn tail_outside(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if sd <= DETERMINISTIC_TOL * (1.0 + mean.abs()) {
        let slack = DETERMINISTIC_TOL * (1.0 + mean.abs());
        return if mean < lo - slack || mean > hi + slack { 1.0 } else { 0.0 };
    }
    cdf((lo - mean) / sd) + sf((hi - mean) / sd)
}

pub fn evaluate_dispatch(net: &Network, p: &[f64], alpha: &[f64], slack: usize) -> Result<DispatchEval> {
    let ng = net.gens.len();
    if p.len() != ng || alpha.len() != ng {
        return Err(Error::Dimension(format!("{ng} generators, got {} outputs and {} shares", p.len(), alpha.len())));
    }
    let model = flow_model(net, slack)?;
    let mut values = std::collections::BTreeMap::new();
    for i in 0..ng {
        values.insert(p_name(i), p[i]);
        values.insert(alpha_name(i), alpha[i]);
    }
    let mut flow_mean = Vec::new();
    let mut flow_sd = Vec::new();
    let mut line_violation = Vec::new();
    for (k, l) in net.lines.iter().enumerate() {
        let m = model.base[k].eval(&values)?;
        let g = model.sensitivity[k].iter().map(|e| e.eval(&values)).collect::<Result<Vec<_>>>()?;
        let sd = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        line_violation.push(tail_outside(m, sd, -l.fmax, l.fmax));
        flow_mean.push(m);
        flow_sd.push(sd);
    }
    let omega_sd = (0..net.rank()).map(|j| net.wind_factor.column(j).sum().powi(2)).sum::<f64>().sqrt();
    let mut gen_over = Vec::new();
    let mut gen_under = Vec::new();
    for (i, g) in net.gens.iter().enumerate() {
        let sd = alpha[i].abs() * omega_sd;
        gen_over.push(tail_outside(p[i], sd, f64::NEG_INFINITY, g.pmax));
        gen_under.push(tail_outside(p[i], sd, g.pmin, f64::INFINITY));
    }
    Ok(DispatchEval {
        cost: net.gens.iter().zip(p).map(|(g, v)| g.c * v).sum(),
        line_violation,
        gen_over,
        gen_under,
        flow_mean,
        flow_sd,
        balance_residual: p.iter().sum::<f64>() + net.net_forecast(),
        alpha_sum: alpha.iter().sum(),
    })
}

/// Per-line sample mean and variance of the flow over `samples` draws of
/// the wind deviations, computed from realized injections.
pub fn monte_carlo_flows(net: &Network, p: &[f64], alpha: &[f64], slack: usize, samples: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let h = ptdf(net, slack)?;
    let nb = net.n_bus();
    let r = net.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nl = net.lines.len();
    let (mut sum, mut sq) = (vec![0.0; nl], vec![0.0; nl]);
    for _ in 0..samples {
        let eta = DVector::from_fn(r, |_, _| StandardNormal.sample(&mut rng));
        let omega = &net.wind_factor * eta;
        let total: f64 = omega.sum();
        let mut inj = DVector::from_fn(nb, |b, _| net.buses[b].w + omega[b] - net.buses[b].d);
        for (i, g) in net.gens.iter().enumerate() {
            inj[g.bus] += p[i] - alpha[i] * total;
        }
        let f = &h * inj;
        for k in 0..nl {
            sum[k] += f[k];
            sq[k] += f[k] * f[k];
        }
    }
    let n = samples as f64;
    Ok((0..nl)
        .map(|k| {
            let m = sum[k] / n;
            (m, (sq[k] / n - m * m) * n / (n - 1.0))
        })
        .collect())
}

/// Deterministic DC-OPF at the forecast, solved as an LP.
pub fn solve_dcopf(net: &Network, slack: usize) -> Result<SolveReport> {
    let ng = net.gens.len();
    let model = flow_model(net, slack)?;
    let index = crate::formulation::VarIndex::new(&(0..ng).map(p_name).collect::<Vec<_>>())?;
    let mut lp = DenseLP::new(net.gens.iter().map(|g| g.c).collect());
    lp.lo = net.gens.iter().map(|g| g.pmin).collect();
    lp.hi = net.gens.iter().map(|g| g.pmax).collect();
    lp.push_row(vec![1.0; ng], Sense::Eq, -net.net_forecast());
    for (k, l) in net.lines.iter().enumerate() {
        let e = model.base[k].dense(&index)?;
        lp.push_row(e.coeffs.clone(), Sense::Le, l.fmax - e.constant);
        lp.push_row(e.coeffs, Sense::Ge, -l.fmax - e.constant);
    }
    let mut r = solver::simplex_solve(&lp)?;
    r.variables = index.names().to_vec();
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpfReport {
    pub mode: OpfMode,
    pub eps: f64,
    pub status: Status,
    pub cost: f64,
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    pub iterations: usize,
    pub cuts_added: usize,
    pub evaluation: Option<DispatchEval>,
}

pub fn solve_opf(net: &Network, eps: RiskLevel, mode: OpfMode, opts: &OpfOptions) -> Result<OpfReport> {
    let problem = build_cc_opf(net, eps, mode, opts)?;
    let report = match mode {
        OpfMode::TwoSidedSoc => solver::solve_via_soc(&problem, SocMode::Outer, &opts.kelley)?,
        _ => solver::kelley_solve(&problem, &opts.kelley)?,
    };
    let ng = net.gens.len();
    let get = |name: String| report.value(&name).unwrap_or(f64::NAN);
    let p: Vec<f64> = (0..ng).map(|i| get(p_name(i))).collect();
    let alpha: Vec<f64> = (0..ng).map(|i| get(alpha_name(i))).collect();
    let evaluation = if report.status == Status::Optimal { Some(evaluate_dispatch(net, &p, &alpha, opts.slack)?) } else { None };
    Ok(OpfReport {
        mode,
        eps: eps.eps(),
        status: report.status,
        cost: report.objective,
        p,
        alpha,
        iterations: report.iterations,
        cuts_added: report.cuts_added,
        evaluation,
    })
}
