//! Dense simplex and a Kelley cutting-plane loop for chance-constrained
//! problems.
//!
//! The master problem is an LP over the decision variables plus one scale
//! variable `t_k` per chance constraint. Each round the LP optimum is handed
//! to the oracles: a norm cut enforces `t_k >= ||L^T x||`, and a conic-hull
//! cut from [`seps::cone_separate`] (or [`distrobust::robust_separate`])
//! enforces `(a', b', t_k)` in the conic hull of S(eps).

use std::collections::BTreeMap;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::distrobust;
use crate::error::{domain, Error, Result};
use crate::formulation::{
    self, aux_name, build_soc, norm, standardize, ChanceProblem, DenseAffine, SocFormulation, SocMode, Sense, VarIndex,
};
use crate::gauss;
use crate::seps::{self, ConePoint3, CutKind};

/// Dense LP `min c . x` subject to `rows[i] . x (senses[i]) rhs[i]` and
/// `lo <= x <= hi`; infinite bounds are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLP {
    pub c: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DenseLP {
    /// Nonnegative variables, no rows.
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        DenseLP { c, rows: vec![], senses: vec![], rhs: vec![], lo: vec![0.0; n], hi: vec![f64::INFINITY; n] }
    }

    pub fn row(mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Self {
        self.push_row(coeffs, sense, rhs);
        self
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) {
        self.rows.push(coeffs);
        self.senses.push(sense);
        self.rhs.push(rhs);
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.n();
        if self.lo.len() != n || self.hi.len() != n {
            return Err(Error::Dimension(format!("{n} costs but {} / {} bounds", self.lo.len(), self.hi.len())));
        }
        if self.senses.len() != self.rows.len() || self.rhs.len() != self.rows.len() {
            return Err(Error::Dimension("rows, senses and rhs differ in length".into()));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != n) {
            return Err(Error::Dimension(format!("row {i} has {} entries, expected {n}", self.rows[i].len())));
        }
        let finite = self.c.iter().chain(self.rhs.iter()).chain(self.rows.iter().flatten()).all(|v| v.is_finite());
        if !finite || self.lo.iter().chain(&self.hi).any(|v| v.is_nan()) {
            return domain("LP data must be finite");
        }
        if let Some(j) = (0..n).find(|&j| self.lo[j] > self.hi[j]) {
            return domain(format!("variable {j} has lo > hi"));
        }
        Ok(())
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for ((r, s), b) in self.rows.iter().zip(&self.senses).zip(&self.rhs) {
            let v: f64 = r.iter().zip(x).map(|(a, b)| a * b).sum();
            worst = worst.max(match s {
                Sense::Le => v - b,
                Sense::Ge => b - v,
                Sense::Eq => (v - b).abs(),
            });
        }
        for j in 0..x.len() {
            worst = worst.max(self.lo[j] - x[j]).max(x[j] - self.hi[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// One round of the cutting-plane loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub obj: f64,
    pub max_violation: f64,
    pub cuts: usize,
}

/// Linear cut `coeffs . w <= rhs` on the master variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cut {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    /// Chance constraint (or cone row) the cut belongs to.
    pub source: usize,
}

impl Cut {
    pub fn violation(&self, w: &[f64]) -> f64 {
        let v: f64 = self.coeffs.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - self.rhs;
        v / norm(&self.coeffs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: Status,
    pub objective: f64,
    pub variables: Vec<String>,
    pub point: Vec<f64>,
    pub cuts_added: usize,
    pub iterations: usize,
    /// Probability of each chance constraint at `point` (worst case over the
    /// uncertainty set for robust constraints).
    pub cc_probabilities: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub log: Vec<IterRecord>,
    #[serde(skip)]
    pub cuts: Vec<Cut>,
}

impl SolveReport {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.variables.iter().position(|v| v == name).map(|i| self.point[i])
    }

    pub fn values(&self) -> BTreeMap<String, f64> {
        self.variables.iter().cloned().zip(self.point.iter().copied()).collect()
    }

    /// Iteration log as CSV with header `iter,obj,max_violation,cuts`.
    pub fn log_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.log {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        if self.log.is_empty() {
            w.write_record(["iter", "obj", "max_violation", "cuts"]).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const DEGENERATE_STREAK: usize = 50;

/// How a structural variable maps to its nonnegative column(s).
#[derive(Debug, Clone, Copy)]
enum ColMap {
    /// `x = lo + x'`
    Shift(f64),
    /// `x = hi - x'`
    Flip(f64),
    /// `x = x+ - x-`, columns `k` and `k + 1`
    Split,
}

struct Tableau {
    m: usize,
    w: usize,
    t: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    allowed: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.w + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.w + self.w - 1]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.w;
        let p = self.t[r * w + c];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (row_r, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(row_r.iter()) {
                    *x -= f * y;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (x, y) in self.obj.iter_mut().zip(row_r.iter()) {
                *x -= f * y;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let w = self.w;
        self.obj = cost.to_vec();
        self.obj.push(0.0);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    self.obj[j] -= cb * self.t[i * w + j];
                }
            }
        }
    }

    /// Runs primal simplex on the current cost row. `Ok(true)` when optimal,
    /// `Ok(false)` when unbounded.
    fn run(&mut self, limit: usize) -> Option<bool> {
        let mut streak = 0usize;
        loop {
            if self.pivots >= limit {
                return None;
            }
            let bland = streak >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..self.w - 1 {
                if !self.allowed[j] {
                    continue;
                }
                let r = self.obj[j];
                if r < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = r;
                }
            }
            let Some(c) = enter else { return Some(true) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - 1e-12 * (1.0 + best.abs())
                                || (ratio <= best + 1e-12 * (1.0 + best.abs()) && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else { return Some(false) };
            streak = if ratio <= 1e-12 { streak + 1 } else { 0 };
            self.pivot(r, c);
        }
    }
}

/// Two-phase dense tableau simplex with Dantzig pricing, switching to
/// Bland's rule after a run of degenerate pivots. The final basic solution
/// is recomputed from the original data by an LU solve.
pub fn simplex_solve(lp: &DenseLP) -> Result<SolveReport> {
    lp.check()?;
    let n = lp.n();
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lo[j], lp.hi[j]);
        if lo.is_finite() {
            maps.push((ColMap::Shift(lo), ncols));
            if hi.is_finite() {
                bound_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push((ColMap::Flip(hi), ncols));
            ncols += 1;
        } else {
            maps.push((ColMap::Split, ncols));
            ncols += 2;
        }
    }
    // rows in the transformed columns
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for ((r, &s), &b) in lp.rows.iter().zip(&lp.senses).zip(&lp.rhs) {
        let mut a = vec![0.0; ncols];
        let mut rhs = b;
        for j in 0..n {
            let (map, k) = maps[j];
            match map {
                ColMap::Shift(lo) => {
                    a[k] += r[j];
                    rhs -= r[j] * lo;
                }
                ColMap::Flip(hi) => {
                    a[k] -= r[j];
                    rhs -= r[j] * hi;
                }
                ColMap::Split => {
                    a[k] += r[j];
                    a[k + 1] -= r[j];
                }
            }
        }
        rows.push((a, s, rhs));
    }
    for &(k, ub) in &bound_rows {
        let mut a = vec![0.0; ncols];
        a[k] = 1.0;
        rows.push((a, Sense::Le, ub));
    }
    for (a, s, b) in rows.iter_mut() {
        if *b < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
            *b = -*b;
            *s = match s {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let total = ncols + n_slack + n_art;
    let w = total + 1;
    let mut t = vec![0.0; m * w];
    let mut basis = vec![0usize; m];
    let mut art_cols = Vec::new();
    let (mut s_next, mut a_next) = (ncols, ncols + n_slack);
    for (i, (a, s, b)) in rows.iter().enumerate() {
        t[i * w..i * w + ncols].copy_from_slice(a);
        t[i * w + total] = *b;
        match s {
            Sense::Le => {
                t[i * w + s_next] = 1.0;
                basis[i] = s_next;
                s_next += 1;
            }
            Sense::Ge => {
                t[i * w + s_next] = -1.0;
                s_next += 1;
                t[i * w + a_next] = 1.0;
                basis[i] = a_next;
                art_cols.push(a_next);
                a_next += 1;
            }
            Sense::Eq => {
                t[i * w + a_next] = 1.0;
                basis[i] = a_next;
                art_cols.push(a_next);
                a_next += 1;
            }
        }
    }
    let original = t.clone();
    let limit = 200 * (m + total) + 1000;
    let mut tab = Tableau { m, w, t, obj: vec![], basis, allowed: vec![true; total], pivots: 0 };

    let report = |status: Status, x: Vec<f64>, pivots: usize| {
        let objective = if status == Status::Optimal {
            lp.c.iter().zip(&x).map(|(a, b)| a * b).sum()
        } else {
            f64::NAN
        };
        SolveReport {
            status,
            objective,
            variables: (0..n).map(|j| format!("x{j}")).collect(),
            point: x,
            cuts_added: 0,
            iterations: pivots,
            cc_probabilities: vec![],
            log: vec![],
            cuts: vec![],
        }
    };

    if !art_cols.is_empty() {
        let mut cost = vec![0.0; total];
        for &a in &art_cols {
            cost[a] = 1.0;
        }
        tab.set_costs(&cost);
        if tab.run(limit).is_none() {
            return Ok(report(Status::IterationLimit, vec![f64::NAN; n], tab.pivots));
        }
        let infeas: f64 = (0..m).filter(|&i| art_cols.contains(&tab.basis[i])).map(|i| tab.rhs(i)).sum();
        let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        if infeas > 1e-9 * scale {
            return Ok(report(Status::Infeasible, vec![f64::NAN; n], tab.pivots));
        }
        let is_art = |j: usize| j >= ncols + n_slack;
        for j in ncols + n_slack..total {
            tab.allowed[j] = false;
        }
        let mut i = 0;
        while i < tab.m {
            if is_art(tab.basis[i]) {
                let c = (0..ncols + n_slack)
                    .filter(|&j| tab.at(i, j).abs() > PIVOT_TOL)
                    .max_by(|&p, &q| tab.at(i, p).abs().total_cmp(&tab.at(i, q).abs()));
                match c {
                    Some(c) => tab.pivot(i, c),
                    None => {
                        // redundant row
                        tab.t.drain(i * w..(i + 1) * w);
                        tab.basis.remove(i);
                        tab.m -= 1;
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut cost = vec![0.0; total];
    for j in 0..n {
        let (map, k) = maps[j];
        match map {
            ColMap::Shift(_) => cost[k] += lp.c[j],
            ColMap::Flip(_) => cost[k] -= lp.c[j],
            ColMap::Split => {
                cost[k] += lp.c[j];
                cost[k + 1] -= lp.c[j];
            }
        }
    }
    tab.set_costs(&cost);
    match tab.run(limit) {
        None => return Ok(report(Status::IterationLimit, vec![f64::NAN; n], tab.pivots)),
        Some(false) => return Ok(report(Status::Unbounded, vec![f64::NAN; n], tab.pivots)),
        Some(true) => {}
    }

    // basic values from the original rows
    let mut col_val = vec![0.0; total];
    for i in 0..tab.m {
        col_val[tab.basis[i]] = tab.rhs(i);
    }
    if let Some(refined) = refine_basic(&original, w, m, &tab.basis) {
        col_val = vec![0.0; total];
        for (k, &j) in tab.basis.iter().enumerate() {
            col_val[j] = refined[k];
        }
    }
    let x: Vec<f64> = (0..n)
        .map(|j| {
            let (map, k) = maps[j];
            let v = col_val[k].max(0.0);
            match map {
                ColMap::Shift(lo) => lo + v,
                ColMap::Flip(hi) => hi - v,
                ColMap::Split => v - col_val[k + 1].max(0.0),
            }
        })
        .collect();
    Ok(report(Status::Optimal, x, tab.pivots))
}

// Solves B x_B = b against the original rows, using a least-squares fit
// when rows were dropped as redundant.
fn refine_basic(original: &[f64], w: usize, m: usize, basis: &[usize]) -> Option<Vec<f64>> {
    let k = basis.len();
    let b = DMatrix::from_fn(m, k, |i, j| original[i * w + basis[j]]);
    let rhs = DVector::from_fn(m, |i, _| original[i * w + w - 1]);
    let sol = if k == m {
        b.lu().solve(&rhs)?
    } else {
        let bt = b.transpose();
        (&bt * &b).lu().solve(&(bt * rhs))?
    };
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
}

/// Cutting-plane options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KelleyOptions {
    pub cut_kind: CutKind,
    /// Termination threshold on the unit-normalized cut violation.
    pub tol: f64,
    pub max_iter: usize,
    /// Box used for variables without explicit bounds.
    pub default_bound: f64,
    /// Start from the lifted three-cut rows instead of an empty cut pool.
    pub seed_cuts: bool,
}

impl Default for KelleyOptions {
    fn default() -> Self {
        KelleyOptions { cut_kind: CutKind::Tangent, tol: 1e-7, max_iter: 500, default_bound: 1e4, seed_cuts: true }
    }
}

struct Master {
    names: Vec<String>,
    c: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rows: Vec<(Vec<f64>, Sense, f64)>,
}

impl Master {
    fn lp(&self, cuts: &[Cut]) -> DenseLP {
        let mut lp = DenseLP {
            c: self.c.clone(),
            rows: vec![],
            senses: vec![],
            rhs: vec![],
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        };
        for (r, s, b) in &self.rows {
            lp.push_row(r.clone(), *s, *b);
        }
        for c in cuts {
            lp.push_row(c.coeffs.clone(), Sense::Le, c.rhs);
        }
        lp
    }
}

fn bounds_for(
    index: &VarIndex,
    bounds: &BTreeMap<String, formulation::VarBound>,
    default_bound: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![-default_bound; index.len()];
    let mut hi = vec![default_bound; index.len()];
    let mut defaulted = Vec::new();
    for (j, name) in index.names().iter().enumerate() {
        let b = bounds.get(name).copied().unwrap_or_default();
        match b.lo {
            Some(v) => lo[j] = v,
            None => defaulted.push(name.clone()),
        }
        match b.hi {
            Some(v) => hi[j] = v,
            None => defaulted.push(name.clone()),
        }
    }
    if !defaulted.is_empty() {
        defaulted.dedup();
        warn!("no explicit bound for {}; using the box +-{default_bound:e}", defaulted.join(", "));
    }
    (lo, hi)
}

/// Upper bound of `|e|` over the box.
fn abs_bound(e: &DenseAffine, lo: &[f64], hi: &[f64]) -> f64 {
    e.constant.abs() + e.coeffs.iter().enumerate().map(|(j, c)| c.abs() * lo[j].abs().max(hi[j].abs())).sum::<f64>()
}

fn extend(coeffs: &[f64], total: usize) -> Vec<f64> {
    let mut v = coeffs.to_vec();
    v.resize(total, 0.0);
    v
}

enum CcModel {
    Nominal { lower: Option<DenseAffine>, upper: Option<DenseAffine>, y: Vec<DenseAffine> },
    Robust { lower: DenseAffine, upper: DenseAffine, x: Vec<DenseAffine>, set: distrobust::RobustSet },
}

/// Kelley's cutting-plane method on the exact lifted chance constraints.
pub fn kelley_solve(p: &ChanceProblem, opts: &KelleyOptions) -> Result<SolveReport> {
    p.validate()?;
    let index = p.index()?;
    let n = index.len();
    let m = p.ccs.len();
    let (mut lo, mut hi) = bounds_for(&index, &p.bounds, opts.default_bound);
    let mut names = index.names().to_vec();
    let mut models = Vec::with_capacity(m);
    for (k, cc) in p.ccs.iter().enumerate() {
        if !cc.eps.is_standard() {
            return domain(format!("chance constraint {k} has eps > 1/2"));
        }
        names.push(aux_name(&names, k));
        match &cc.robust {
            None => {
                let s = standardize(cc)?;
                let y = s.y.iter().map(|e| e.dense(&index)).collect::<Result<Vec<_>>>()?;
                let tmax = norm(&y.iter().map(|e| abs_bound(e, &lo, &hi)).collect::<Vec<_>>());
                lo.push(0.0);
                hi.push(tmax * (1.0 + 1e-9) + 1e-9);
                models.push(CcModel::Nominal {
                    lower: s.lower.as_ref().map(|e| e.dense(&index)).transpose()?,
                    upper: s.upper.as_ref().map(|e| e.dense(&index)).transpose()?,
                    y,
                });
            }
            Some(set) => {
                let (Some(a), Some(b)) = (&cc.lower, &cc.upper) else {
                    return domain(format!("robust chance constraint {k} must be two-sided"));
                };
                let x = cc.xi_coeffs.iter().map(|e| e.dense(&index)).collect::<Result<Vec<_>>>()?;
                let xmax: Vec<f64> = x.iter().map(|e| abs_bound(e, &lo, &hi)).collect();
                let lam = set
                    .cov
                    .members()
                    .iter()
                    .map(|s| nalgebra::SymmetricEigen::new(s.clone()).eigenvalues.max())
                    .fold(0.0f64, f64::max);
                lo.push(0.0);
                hi.push(lam.max(0.0).sqrt() * norm(&xmax) * (1.0 + 1e-9) + 1e-9);
                models.push(CcModel::Robust { lower: a.dense(&index)?, upper: b.dense(&index)?, x, set: set.clone() });
            }
        }
    }
    let total = n + m;
    let obj = p.objective.dense(&index)?;
    let mut rows = Vec::new();
    for row in &p.linear {
        let e = row.expr().dense(&index)?;
        rows.push((extend(&e.coeffs, total), row.sense, row.rhs - e.constant));
    }
    let mut master = Master { names, c: extend(&obj.coeffs, total), lo, hi, rows };

    if opts.seed_cuts {
        for (k, (cc, model)) in p.ccs.iter().zip(&models).enumerate() {
            let e = cc.eps.eps();
            let q = gauss::quantile(e)?;
            let tcol = n + k;
            // a' <= q t, b' >= -q t, a' - b' <= 2 h t, valid whenever the cone constraint holds
            let (lower, upper) = match model {
                CcModel::Nominal { lower, upper, .. } => (lower.clone(), upper.clone()),
                CcModel::Robust { .. } => (None, None),
            };
            if let Some(a) = &lower {
                let mut r = extend(&a.coeffs, total);
                r[tcol] -= q;
                master.rows.push((r, Sense::Le, -a.constant));
            }
            if let Some(b) = &upper {
                let mut r = extend(&b.coeffs, total).iter().map(|v| -v).collect::<Vec<_>>();
                r[tcol] -= q;
                master.rows.push((r, Sense::Le, b.constant));
            }
            if let (Some(a), Some(b)) = (&lower, &upper) {
                let h = gauss::quantile(e / 2.0)?;
                let mut r: Vec<f64> = extend(&a.coeffs, total).iter().zip(extend(&b.coeffs, total)).map(|(x, y)| x - y).collect();
                r[tcol] -= 2.0 * h;
                master.rows.push((r, Sense::Le, b.constant - a.constant));
            }
        }
    }

    let separate = |w: &[f64], k: usize| -> Result<Vec<Cut>> {
        let tcol = n + k;
        let t = w[tcol];
        let mut cuts = Vec::new();
        match &models[k] {
            CcModel::Nominal { lower, upper, y } => {
                let yv: Vec<f64> = y.iter().map(|e| e.eval(w)).collect();
                let z = norm(&yv);
                if z > t {
                    // t >= (y0 / |y0|) . y(v)
                    let mut coeffs = vec![0.0; total];
                    let mut rhs = 0.0;
                    for (yj, e) in yv.iter().zip(y) {
                        let g = yj / z;
                        for (c, a) in coeffs.iter_mut().zip(&e.coeffs) {
                            *c += g * a;
                        }
                        rhs -= g * e.constant;
                    }
                    coeffs[tcol] = -1.0;
                    cuts.push(Cut { coeffs, rhs, source: k });
                }
                if let (Some(a), Some(b)) = (lower, upper) {
                    let q = ConePoint3::new(a.eval(w), b.eval(w), t);
                    if !seps::cone_contains(q, p.ccs[k].eps) {
                        let h = seps::cone_separate(q, p.ccs[k].eps, opts.cut_kind)?;
                        let mut coeffs = vec![0.0; total];
                        for j in 0..n {
                            coeffs[j] = h.a[0] * a.coeffs[j] + h.a[1] * b.coeffs[j];
                        }
                        coeffs[tcol] = h.a[2];
                        let rhs = -(h.a[0] * a.constant + h.a[1] * b.constant);
                        cuts.push(Cut { coeffs, rhs, source: k });
                    }
                }
            }
            CcModel::Robust { lower, upper, x, set } => {
                let xv: Vec<f64> = x.iter().map(|e| e.eval(w)).collect();
                let sd = distrobust::worst_sigma(&xv, &set.cov)?.0.sqrt();
                // a variance gap below the tolerance must not mask the shift check
                let t = if sd - t <= opts.tol { t.max(sd) } else { t };
                match distrobust::robust_separate(lower.eval(w), upper.eval(w), &xv, Some(t), p.ccs[k].eps, set, opts.cut_kind) {
                    Err(Error::AlreadyMember) => {}
                    Err(e) => return Err(e),
                    Ok(c) => {
                        let mut coeffs = vec![0.0; total];
                        let mut rhs = 0.0;
                        for j in 0..n {
                            coeffs[j] = c.ca * lower.coeffs[j] + c.cb * upper.coeffs[j];
                        }
                        rhs -= c.ca * lower.constant + c.cb * upper.constant;
                        for (ci, e) in c.cx.iter().zip(x) {
                            for j in 0..n {
                                coeffs[j] += ci * e.coeffs[j];
                            }
                            rhs -= ci * e.constant;
                        }
                        coeffs[tcol] = c.ct;
                        cuts.push(Cut { coeffs, rhs, source: k });
                    }
                }
            }
        }
        Ok(cuts)
    };

    let mut report = cutting_plane(&master, opts, |w| {
        let mut all = Vec::new();
        for k in 0..m {
            all.extend(separate(w, k)?);
        }
        Ok(all)
    })?;
    report.cc_probabilities = cc_probabilities(p, &report.values())?;
    Ok(report)
}

/// Probability of each chance constraint at `values`; worst case over the
/// uncertainty set for robust constraints.
pub fn cc_probabilities(p: &ChanceProblem, values: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
    p.ccs
        .iter()
        .map(|cc| match &cc.robust {
            None => cc.probability(values),
            Some(set) => {
                let a = cc.lower.as_ref().map(|e| e.eval(values)).transpose()?.unwrap_or(f64::NEG_INFINITY);
                let b = cc.upper.as_ref().map(|e| e.eval(values)).transpose()?.unwrap_or(f64::INFINITY);
                let x = cc.xi_coeffs.iter().map(|e| e.eval(values)).collect::<Result<Vec<_>>>()?;
                let (lo, hi) = distrobust::worst_mean(&x, &set.mean_box)?;
                let sd = distrobust::worst_sigma(&x, &set.cov)?.0.sqrt();
                Ok([lo, hi]
                    .iter()
                    .map(|m| formulation::standardized_probability(Some(a - m), Some(b - m), sd))
                    .fold(1.0, f64::min))
            }
        })
        .collect()
}

fn cutting_plane<F>(master: &Master, opts: &KelleyOptions, mut oracle: F) -> Result<SolveReport>
where
    F: FnMut(&[f64]) -> Result<Vec<Cut>>,
{
    let mut cuts: Vec<Cut> = Vec::new();
    let mut log = Vec::new();
    let mut last: Option<SolveReport> = None;
    for iter in 1..=opts.max_iter {
        let lp = master.lp(&cuts);
        let sol = simplex_solve(&lp)?;
        if sol.status != Status::Optimal {
            let mut r = sol;
            r.variables = master.names.clone();
            r.iterations = iter;
            r.cuts_added = cuts.len();
            r.log = log;
            r.cuts = cuts;
            return Ok(r);
        }
        let w = sol.point.clone();
        let mut new_cuts = oracle(&w)?;
        let mut max_violation = 0.0f64;
        for c in &new_cuts {
            max_violation = max_violation.max(c.violation(&w));
        }
        new_cuts.retain(|c| c.violation(&w) > opts.tol);
        log.push(IterRecord { iter, obj: sol.objective, max_violation, cuts: cuts.len() + new_cuts.len() });
        let done = new_cuts.is_empty();
        last = Some(SolveReport {
            status: if done { Status::Optimal } else { Status::IterationLimit },
            objective: sol.objective,
            variables: master.names.clone(),
            point: w,
            cuts_added: 0,
            iterations: iter,
            cc_probabilities: vec![],
            log: vec![],
            cuts: vec![],
        });
        cuts.extend(new_cuts);
        if done {
            break;
        }
    }
    let mut r = last.ok_or_else(|| Error::Domain("iteration cap must be positive".into()))?;
    r.cuts_added = cuts.len();
    r.log = log;
    r.cuts = cuts;
    Ok(r)
}

/// Kelley on an SOC formulation: the linear rows are used as they are and
/// each cone row `||v|| <= s` is enforced by gradient cuts of the norm.
pub fn solve_formulation(f: &SocFormulation, opts: &KelleyOptions) -> Result<SolveReport> {
    let index = VarIndex::new(&f.variables)?;
    let n = index.len();
    let (mut lo, mut hi) = bounds_for(&index, &f.bounds, opts.default_bound);
    // scale variables are the right-hand sides of the cone rows
    for row in &f.soc {
        if row.rhs.coeffs.len() == 1 && row.rhs.constant == 0.0 {
            let (name, c) = row.rhs.coeffs.iter().next().expect("one coefficient");
            if *c > 0.0 && !f.bounds.contains_key(name) {
                let j = index.get(name)?;
                let v = row.vec.iter().map(|e| e.dense(&index)).collect::<Result<Vec<_>>>()?;
                let (l, h) = (lo.clone(), hi.clone());
                lo[j] = 0.0;
                hi[j] = norm(&v.iter().map(|e| abs_bound(e, &l, &h)).collect::<Vec<_>>()) / c * (1.0 + 1e-9) + 1e-9;
            }
        }
    }
    let obj = f.objective.dense(&index)?;
    let mut rows = Vec::new();
    for row in &f.linear {
        let e = row.expr().dense(&index)?;
        rows.push((e.coeffs, row.sense, row.rhs - e.constant));
    }
    let master = Master { names: index.names().to_vec(), c: obj.coeffs.clone(), lo, hi, rows };
    let cones = f
        .soc
        .iter()
        .map(|row| {
            let v = row.vec.iter().map(|e| e.dense(&index)).collect::<Result<Vec<_>>>()?;
            Ok((v, row.rhs.dense(&index)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = cutting_plane(&master, opts, |w| {
        let mut cuts = Vec::new();
        for (k, (v, s)) in cones.iter().enumerate() {
            let vv: Vec<f64> = v.iter().map(|e| e.eval(w)).collect();
            let z = norm(&vv);
            if z > s.eval(w) {
                let mut coeffs = vec![0.0; n];
                let mut rhs = s.constant;
                for (vj, e) in vv.iter().zip(v) {
                    let g = vj / z;
                    for (c, a) in coeffs.iter_mut().zip(&e.coeffs) {
                        *c += g * a;
                    }
                    rhs -= g * e.constant;
                }
                for (c, a) in coeffs.iter_mut().zip(&s.coeffs) {
                    *c -= a;
                }
                cuts.push(Cut { coeffs, rhs, source: k });
            }
        }
        Ok(cuts)
    })?;
    report.objective = obj.eval(&report.point);
    Ok(report)
}

/// Builds the SOC formulation in `mode` and solves it; the reported
/// probabilities are the true ones of the original constraints.
pub fn solve_via_soc(p: &ChanceProblem, mode: SocMode, opts: &KelleyOptions) -> Result<SolveReport> {
    let f = build_soc(p, mode)?;
    let mut report = solve_formulation(&f, opts)?;
    if report.status == Status::Optimal {
        report.cc_probabilities = cc_probabilities(p, &report.values())?;
    }
    Ok(report)
}
