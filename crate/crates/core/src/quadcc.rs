//! Quadratic chance constraints
//! `P((a.xi + b)^2 + (c.xi + d)^2 <= k) >= 1 - eps` with Gaussian `xi`.
//!
//! The exact probability is computed on the two-dimensional image
//! `(U, V) = (a.xi + b, c.xi + d)`. Three conservative convex approximations
//! are available: a union-bound split into two absolute-value constraints,
//! a robust LMI over the ball of radius `F_chi_n^{-1}(1 - eps)`, and the
//! CVaR bound.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::formulation::GaussianVector;
use crate::gauss::{self, cdf, interval_mass, pdf, sf, QuadratureSpec};
use crate::seps::{self, ConePoint3, Point2, RiskLevel};

/// Default absolute error for [`true_prob`].
pub const TRUE_PROB_TOL: f64 = 1e-7;
/// Absolute error of the CVaR expectation.
pub const CVAR_QUAD_TOL: f64 = 1e-10;
/// CVaR feasibility threshold on `min_alpha h(alpha)`.
pub const CVAR_FEAS_TOL: f64 = 1e-9;
/// Bracket width in `log alpha` at which the CVaR search stops.
pub const CVAR_LOG_ALPHA_TOL: f64 = 1e-6;
/// LMI feasibility threshold on the largest attainable minimum eigenvalue.
pub const LMI_FEAS_TOL: f64 = 1e-10;
/// Probability level used by the nonconvexity witness.
pub const WITNESS_LEVEL: f64 = 0.545;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadCCInstance {
    pub a: Vec<f64>,
    pub b: f64,
    pub c: Vec<f64>,
    pub d: f64,
    pub k: f64,
    pub dist: GaussianVector,
    pub eps: RiskLevel,
}

impl QuadCCInstance {
    pub fn new(a: Vec<f64>, b: f64, c: Vec<f64>, d: f64, k: f64, dist: GaussianVector, eps: RiskLevel) -> Result<Self> {
        let n = dist.dim();
        if a.len() != n || c.len() != n {
            return Err(Error::Dimension(format!("a has {}, c has {}, xi has {n} entries", a.len(), c.len())));
        }
        if !a.iter().chain(&c).chain([&b, &d, &k]).all(|v| v.is_finite()) {
            return domain("instance data must be finite");
        }
        Ok(QuadCCInstance { a, b, c, d, k, dist, eps })
    }

    /// `P((x xi1)^2 + (y xi2)^2 <= 1)` with independent standard `xi`.
    pub fn example(x: f64, y: f64, eps: RiskLevel) -> Self {
        QuadCCInstance {
            a: vec![x, 0.0],
            b: 0.0,
            c: vec![0.0, y],
            d: 0.0,
            k: 1.0,
            dist: GaussianVector::standard(2),
            eps,
        }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    /// Same constraint in terms of independent standard `eta` with
    /// `xi = mu + L eta`.
    pub fn standardized(&self) -> QuadCCInstance {
        let l = self.dist.chol();
        let mu = self.dist.mean();
        let a = DVector::from_column_slice(&self.a);
        let c = DVector::from_column_slice(&self.c);
        QuadCCInstance {
            a: (l.transpose() * &a).iter().copied().collect(),
            b: a.dot(mu) + self.b,
            c: (l.transpose() * &c).iter().copied().collect(),
            d: c.dot(mu) + self.d,
            k: self.k,
            dist: GaussianVector::standard(self.dist.dim()),
            eps: self.eps,
        }
    }
}

/// Joint law of `(a.xi + b, c.xi + d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gaussian2Reduced {
    pub mean2: [f64; 2],
    pub cov2: [[f64; 2]; 2],
}

impl Gaussian2Reduced {
    fn swapped(self) -> Self {
        Gaussian2Reduced {
            mean2: [self.mean2[1], self.mean2[0]],
            cov2: [[self.cov2[1][1], self.cov2[1][0]], [self.cov2[0][1], self.cov2[0][0]]],
        }
    }

    /// Orders the coordinates so the first has the larger variance.
    fn ordered(self) -> Self {
        if self.cov2[1][1] > self.cov2[0][0] {
            self.swapped()
        } else {
            self
        }
    }

    /// Conditional law of the second coordinate given the first:
    /// `(slope, conditional sd)` with `V | U = u ~ N(mv + slope (u - mu), tau^2)`.
    fn conditional(&self) -> (f64, f64) {
        let [[cuu, cuv], [_, cvv]] = self.cov2;
        let slope = cuv / cuu;
        let tau2 = (cvv - cuv * cuv / cuu).max(0.0);
        let tau = if tau2 <= 1e-16 * cvv { 0.0 } else { tau2.sqrt() };
        (slope, tau)
    }
}

pub fn reduce_to_2d(inst: &QuadCCInstance) -> Gaussian2Reduced {
    let a = DVector::from_column_slice(&inst.a);
    let c = DVector::from_column_slice(&inst.c);
    let mu = inst.dist.mean();
    let s = inst.dist.cov();
    let sa = s * &a;
    let sc = s * &c;
    let cac = a.dot(&sc);
    Gaussian2Reduced {
        mean2: [a.dot(mu) + inst.b, c.dot(mu) + inst.d],
        cov2: [[a.dot(&sa), cac], [cac, c.dot(&sc)]],
    }
}

/// `P(U^2 + V^2 <= k)` to absolute error `tol`.
pub fn true_prob(inst: &QuadCCInstance, tol: f64) -> Result<f64> {
    disk_prob(&reduce_to_2d(inst), inst.k, tol)
}

/// Probability that a planar Gaussian lies in the disk of radius `sqrt(k)`.
pub fn disk_prob(g: &Gaussian2Reduced, k: f64, tol: f64) -> Result<f64> {
    if !(k >= 0.0) {
        return domain("disk probability needs k >= 0");
    }
    if !(tol > 0.0) {
        return domain("tolerance must be positive");
    }
    let g = g.ordered();
    let [mu, mv] = g.mean2;
    let cuu = g.cov2[0][0];
    if !(cuu > 0.0) {
        return Ok(if mu * mu + mv * mv <= k { 1.0 } else { 0.0 });
    }
    if k == 0.0 {
        return Ok(0.0);
    }
    let su = cuu.sqrt();
    let (slope, tau) = g.conditional();
    let rk = k.sqrt();
    if tau == 0.0 {
        // V is affine in U: the disk cuts an interval of U
        let c0 = mv - slope * mu;
        let qa = 1.0 + slope * slope;
        let qb = 2.0 * slope * c0;
        let qc = c0 * c0 - k;
        return Ok(match quadratic_roots(qa, qb, qc) {
            Some((u1, u2)) => interval_mass((u1 - mu) / su, (u2 - mu) / su),
            None => 0.0,
        });
    }
    let lo = (mu - gauss::GAUSS_TRUNCATION * su).max(-rk);
    let hi = (mu + gauss::GAUSS_TRUNCATION * su).min(rk);
    if lo >= hi {
        return Ok(0.0);
    }
    let th_lo = (lo / rk).clamp(-1.0, 1.0).asin();
    let th_hi = (hi / rk).clamp(-1.0, 1.0).asin();
    let f = |th: f64| {
        let (s, c) = th.sin_cos();
        let u = rk * s;
        let r = rk * c;
        let nu = mv + slope * (u - mu);
        pdf((u - mu) / su) / su * interval_mass((-r - nu) / tau, (r - nu) / tau) * rk * c
    };
    let p = gauss::integrate(f, th_lo, th_hi, &QuadratureSpec::with_tol(0.25 * tol))?;
    Ok(p.clamp(0.0, 1.0))
}

/// Real roots `r1 <= r2` of `qa u^2 + qb u + qc` with `qa > 0`; `None` when
/// the discriminant is not positive.
fn quadratic_roots(qa: f64, qb: f64, qc: f64) -> Option<(f64, f64)> {
    let disc = qb * qb - 4.0 * qa * qc;
    if !(disc > 0.0) {
        return None;
    }
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    let (r1, r2) = if q == 0.0 {
        let h = (disc.sqrt()) / (2.0 * qa);
        (-h, h)
    } else {
        (q / qa, qc / q)
    };
    Some((r1.min(r2), r1.max(r2)))
}

/// Points and probabilities of the nonconvexity counterexample on the
/// example family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessReport {
    pub left: f64,
    pub right: f64,
    pub mid: f64,
    pub level: f64,
    pub endpoints_ok: bool,
    pub midpoint_below: bool,
}

impl WitnessReport {
    pub fn proves_nonconvexity(&self) -> bool {
        self.endpoints_ok && self.midpoint_below
    }
}

pub fn nonconvexity_witness() -> Result<WitnessReport> {
    let eps = RiskLevel::relaxed(1.0 - WITNESS_LEVEL)?;
    let p = |x, y| true_prob(&QuadCCInstance::example(x, y, eps), TRUE_PROB_TOL);
    let left = p(0.6, 1.0)?;
    let right = p(1.0, 0.6)?;
    let mid = p(0.8, 0.8)?;
    Ok(WitnessReport {
        left,
        right,
        mid,
        level: WITNESS_LEVEL,
        endpoints_ok: left >= WITNESS_LEVEL && right >= WITNESS_LEVEL,
        midpoint_below: mid < WITNESS_LEVEL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub x: f64,
    pub y: f64,
    pub prob: f64,
}

/// Probability along `y = 1.6 - x` for `x` in `[0.5, 1.1]`.
pub fn witness_trace(points: usize) -> Result<Vec<TracePoint>> {
    let eps = RiskLevel::relaxed(1.0 - WITNESS_LEVEL)?;
    let n = points.max(2);
    (0..n)
        .map(|i| {
            let x = 0.5 + 0.6 * i as f64 / (n - 1) as f64;
            let y = 1.6 - x;
            Ok(TracePoint { x, y, prob: true_prob(&QuadCCInstance::example(x, y, eps), TRUE_PROB_TOL)? })
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Smallest `f >= 0` with `P(|N(mean, sd^2)| <= f) >= 1 - delta`; infinite
/// when `delta` underflows.
pub fn min_abs_radius(mean: f64, sd: f64, delta: f64) -> f64 {
    let m = mean.abs();
    if sd == 0.0 || delta >= 1.0 {
        return if delta >= 1.0 { 0.0 } else { m };
    }
    let (Ok(q1), Ok(q2)) = (gauss::quantile_upper(delta), gauss::quantile_upper(0.5 * delta)) else {
        return f64::INFINITY;
    };
    let tail = |f: f64| sf((f - m) / sd) + cdf((-f - m) / sd);
    let mut lo = (m + sd * q1).max(0.0);
    let mut hi = m + sd * q2;
    if tail(lo) <= delta {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tail(mid) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSidedResult {
    pub feasible: bool,
    pub f1: f64,
    pub f2: f64,
    pub beta: f64,
}

/// Union-bound split: `P(|U| <= f1) >= 1 - beta eps`,
/// `P(|V| <= f2) >= 1 - (1 - beta) eps`, `f1^2 + f2^2 <= k`, with the
/// smallest admissible `f1`, `f2`.
pub fn two_sided_feasible(inst: &QuadCCInstance, beta: f64) -> Result<TwoSidedResult> {
    if !(beta > 0.0 && beta < 1.0) {
        return domain("beta must lie in (0, 1)");
    }
    if !inst.eps.is_standard() {
        return domain("the two-sided split needs eps <= 1/2");
    }
    let g = reduce_to_2d(inst);
    let e = inst.eps.eps();
    let f1 = min_abs_radius(g.mean2[0], g.cov2[0][0].max(0.0).sqrt(), beta * e);
    let f2 = min_abs_radius(g.mean2[1], g.cov2[1][1].max(0.0).sqrt(), (1.0 - beta) * e);
    Ok(TwoSidedResult { feasible: f1 * f1 + f2 * f2 <= inst.k, f1, f2, beta })
}

/// [`two_sided_feasible`] with `beta` chosen by golden section to minimize
/// `f1^2 + f2^2`.
pub fn two_sided_tuned(inst: &QuadCCInstance) -> Result<TwoSidedResult> {
    two_sided_feasible(inst, 0.5)?;
    let cost = |b: f64| two_sided_feasible(inst, b).map(|r| r.f1 * r.f1 + r.f2 * r.f2).unwrap_or(f64::INFINITY);
    let m = gauss::minimize(cost, 1e-9, 1.0 - 1e-9, 1e-10);
    let tuned = two_sided_feasible(inst, m.argmin)?;
    let half = two_sided_feasible(inst, 0.5)?;
    Ok(if tuned.f1 * tuned.f1 + tuned.f2 * tuned.f2 <= half.f1 * half.f1 + half.f2 * half.f2 { tuned } else { half })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LmiResult {
    pub feasible: bool,
    pub lambda: Option<f64>,
    /// Largest minimum eigenvalue found over the admissible `lambda`.
    pub min_eig: f64,
    pub gamma: f64,
}

/// `F_chi_n^{-1}(1 - eps)`.
pub fn robust_radius(n: usize, eps: RiskLevel) -> Result<f64> {
    gauss::chi_inv(n as u32, 1.0 - eps.eps())
}

/// Block matrix of the robust LMI for a standardized instance.
pub fn lmi_matrix(std: &QuadCCInstance, gamma: f64, lambda: f64) -> DMatrix<f64> {
    let n = std.a.len();
    let mut m = DMatrix::zeros(n + 3, n + 3);
    for i in 0..n {
        m[(i, i)] = lambda;
        m[(i, n + 1)] = std.a[i];
        m[(n + 1, i)] = std.a[i];
        m[(i, n + 2)] = std.c[i];
        m[(n + 2, i)] = std.c[i];
    }
    m[(n, n)] = std.k - lambda * gamma * gamma;
    m[(n, n + 1)] = std.b;
    m[(n + 1, n)] = std.b;
    m[(n, n + 2)] = std.d;
    m[(n + 2, n)] = std.d;
    m[(n + 1, n + 1)] = 1.0;
    m[(n + 2, n + 2)] = 1.0;
    m
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Minimum eigenvalue of the LMI at `lambda` for the original instance.
pub fn lmi_min_eig(inst: &QuadCCInstance, lambda: f64) -> Result<f64> {
    let std = inst.standardized();
    let gamma = robust_radius(std.a.len(), inst.eps)?;
    Ok(min_eigenvalue(&lmi_matrix(&std, gamma, lambda)))
}

/// Robust approximation over the ball `||eta|| <= F_chi_n^{-1}(1 - eps)`,
/// decided by maximizing the concave minimum eigenvalue of the LMI over
/// `lambda in [0, k / Gamma^2]`.
pub fn robust_feasible(inst: &QuadCCInstance) -> Result<LmiResult> {
    let std = inst.standardized();
    let gamma = robust_radius(std.a.len(), inst.eps)?;
    if inst.k < 0.0 {
        return Ok(LmiResult { feasible: false, lambda: None, min_eig: f64::NEG_INFINITY, gamma });
    }
    let hi = inst.k / (gamma * gamma);
    let eig = |l: f64| min_eigenvalue(&lmi_matrix(&std, gamma, l));
    let m = gauss::minimize(|l| -eig(l), 0.0, hi, 1e-13 * hi.max(1e-300));
    let (lambda, best) = [(m.argmin, -m.value), (0.0, eig(0.0)), (hi, eig(hi))]
        .into_iter()
        .max_by(|p, q| p.1.total_cmp(&q.1))
        .expect("three candidates");
    let feasible = best >= -LMI_FEAS_TOL;
    Ok(LmiResult { feasible, lambda: feasible.then_some(lambda), min_eig: best, gamma })
}

/// `E[V^2 - r2]^+` for `V ~ N(nu, tau^2)`.
fn excess_square(nu: f64, tau: f64, r2: f64) -> f64 {
    if r2 <= 0.0 {
        return nu * nu + tau * tau - r2;
    }
    if tau == 0.0 {
        return (nu * nu - r2).max(0.0);
    }
    let r = r2.sqrt();
    let al = (r - nu) / tau;
    let be = (-r - nu) / tau;
    let (pa, pb) = (pdf(al), pdf(be));
    let (sa, cb) = (sf(al), cdf(be));
    let upper = nu * nu * sa + 2.0 * nu * tau * pa + tau * tau * (al * pa + sa);
    let lower = nu * nu * cb - 2.0 * nu * tau * pb + tau * tau * (cb - be * pb);
    (upper + lower - r2 * (sa + cb)).max(0.0)
}

/// `E[(U^2 + V^2 - s)^+]` under the reduced law.
pub fn expected_excess(g: &Gaussian2Reduced, s: f64, tol: f64) -> Result<f64> {
    let g = g.ordered();
    let [mu, mv] = g.mean2;
    let cuu = g.cov2[0][0];
    let mean_q = mu * mu + mv * mv + g.cov2[0][0] + g.cov2[1][1];
    if s <= 0.0 {
        return Ok(mean_q - s);
    }
    if !(cuu > 0.0) {
        return Ok((mu * mu + mv * mv - s).max(0.0));
    }
    let su = cuu.sqrt();
    let (slope, tau) = g.conditional();
    let inner = |z: f64| {
        let u = mu + su * z;
        pdf(z) * excess_square(mv + slope * (u - mu), tau, s - u * u)
    };
    // kinks where r2 changes sign, and where the degenerate case crosses zero
    let mut breaks = vec![-gauss::GAUSS_TRUNCATION, gauss::GAUSS_TRUNCATION];
    let rs = s.sqrt();
    breaks.extend([(-rs - mu) / su, (rs - mu) / su]);
    if tau == 0.0 {
        let c0 = mv - slope * mu;
        if let Some((u1, u2)) = quadratic_roots(1.0 + slope * slope, 2.0 * slope * c0, c0 * c0 - s) {
            breaks.extend([(u1 - mu) / su, (u2 - mu) / su]);
        }
    }
    breaks.retain(|z| z.abs() <= gauss::GAUSS_TRUNCATION);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let spec = QuadratureSpec::with_tol(tol / breaks.len() as f64);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += gauss::integrate(inner, w[0], w[1], &spec)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvarResult {
    pub feasible: bool,
    pub alpha: Option<f64>,
    /// `min_alpha E[(q - k + alpha)^+] - alpha eps`.
    pub value: f64,
}

/// CVaR approximation: `E[(q - k + alpha)^+] <= alpha eps` for some
/// `alpha > 0`, searched over `log alpha in [-12, min(12, log k)]`.
pub fn cvar_feasible(inst: &QuadCCInstance) -> Result<CvarResult> {
    let g = reduce_to_2d(inst);
    let e = inst.eps.eps();
    // h is convex in alpha with h'(alpha) = P(q > k - alpha) - eps
    if 1.0 - disk_prob(&g, inst.k, TRUE_PROB_TOL)? >= e {
        let value = expected_excess(&g, inst.k, CVAR_QUAD_TOL)?;
        let feasible = value <= CVAR_FEAS_TOL;
        return Ok(CvarResult { feasible, alpha: feasible.then_some((-12.0f64).exp()), value });
    }
    let hi = if inst.k > 0.0 { inst.k.ln().clamp(-12.0, 12.0) } else { -12.0 };
    let h = |la: f64| -> Result<f64> {
        let alpha = la.exp();
        Ok(expected_excess(&g, inst.k - alpha, CVAR_QUAD_TOL)? - alpha * e)
    };
    let err = std::cell::Cell::new(None);
    let m = gauss::minimize_brent(
        |la| match h(la) {
            Ok(v) => v,
            Err(e) => {
                err.set(Some(e));
                f64::INFINITY
            }
        },
        -12.0,
        hi,
        CVAR_LOG_ALPHA_TOL,
        CVAR_FEAS_TOL,
    );
    if let Some(e) = err.take() {
        return Err(e);
    }
    let feasible = m.value <= CVAR_FEAS_TOL;
    Ok(CvarResult { feasible, alpha: feasible.then(|| m.argmin.exp()), value: m.value })
}

/// Grid over `[lo, hi]^2` with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 61, lo: 0.0, hi: 1.2 }
    }
}

impl GridSpec {
    pub fn coord(&self, i: usize) -> f64 {
        if self.n <= 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub x: f64,
    pub y: f64,
    pub true_prob: f64,
    pub exact: bool,
    pub two_sided: bool,
    pub robust: bool,
    pub cvar: bool,
}

/// Exact membership and the three approximations on the example family,
/// one row per cell with `x` varying slowest.
pub fn compare_grid(eps: RiskLevel, grid: GridSpec) -> Result<Vec<GridRow>> {
    if grid.n == 0 || !(grid.lo <= grid.hi) {
        return domain("grid needs n >= 1 and lo <= hi");
    }
    (0..grid.n * grid.n)
        .into_par_iter()
        .map(|idx| {
            let (x, y) = (grid.coord(idx / grid.n), grid.coord(idx % grid.n));
            let inst = QuadCCInstance::example(x, y, eps);
            let p = true_prob(&inst, TRUE_PROB_TOL)?;
            Ok(GridRow {
                x,
                y,
                true_prob: p,
                exact: p >= 1.0 - eps.eps(),
                two_sided: two_sided_feasible(&inst, 0.5)?.feasible,
                robust: robust_feasible(&inst)?.feasible,
                cvar: cvar_feasible(&inst)?.feasible,
            })
        })
        .collect()
}

/// Counts over a comparison grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSummary {
    pub cells: usize,
    pub exact: usize,
    pub two_sided: usize,
    pub robust: usize,
    pub cvar: usize,
    /// Cells whose probability lies within the quadrature tolerance of the
    /// threshold, where exact membership is not resolved.
    pub band: usize,
}

pub fn summarize(rows: &[GridRow], eps: RiskLevel) -> GridSummary {
    let count = |f: fn(&GridRow) -> bool| rows.iter().filter(|r| f(r)).count();
    GridSummary {
        cells: rows.len(),
        exact: count(|r| r.exact),
        two_sided: count(|r| r.two_sided),
        robust: count(|r| r.robust),
        cvar: count(|r| r.cvar),
        band: rows.iter().filter(|r| (r.true_prob - (1.0 - eps.eps())).abs() <= TRUE_PROB_TOL).count(),
    }
}

/// Whether every cell accepted by `inner` is accepted by `outer`.
pub fn grid_subset(rows: &[GridRow], inner: fn(&GridRow) -> bool, outer: fn(&GridRow) -> bool) -> bool {
    rows.iter().all(|r| !inner(r) || outer(r))
}

/// Boundary of the exact set on rays from the origin through the first
/// quadrant, found by bisection on the radius.
pub fn exact_contour(eps: RiskLevel, rays: usize, r_max: f64) -> Result<Vec<TracePoint>> {
    let n = rays.max(2);
    let level = 1.0 - eps.eps();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let th = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
            let (s, c) = th.sin_cos();
            let p = |r: f64| true_prob(&QuadCCInstance::example(r * c, r * s, eps), TRUE_PROB_TOL);
            let (mut lo, mut hi) = (0.0, r_max);
            if p(hi)? >= level {
                return Ok(TracePoint { x: hi * c, y: hi * s, prob: p(hi)? });
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if p(mid)? >= level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(TracePoint { x: lo * c, y: lo * s, prob: p(lo)? })
        })
        .collect()
}

/// Interval `[l, u]` with `(xi + b)^2 + (xi + d)^2 <= k` iff `l <= xi <= u`.
pub fn univariate_quad_interval(b: f64, d: f64, k: f64) -> Option<(f64, f64)> {
    let disc = 2.0 * k - (d - b) * (d - b);
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let sum = b + d;
    if disc == 0.0 {
        return Some((-0.5 * sum, -0.5 * sum));
    }
    // roots of xi^2 + (b + d) xi + (b^2 + d^2 - k) / 2
    let q = -0.5 * (sum + if sum >= 0.0 { s } else { -s });
    let cst = 0.5 * (b * b + d * d - k);
    let (r1, r2) = if q == 0.0 { (-0.5 * s, 0.5 * s) } else { (q, cst / q) };
    Some((r1.min(r2), r1.max(r2)))
}

/// `P((xi + b)^2 + (xi + d)^2 <= k) >= 1 - eps` for standard Gaussian `xi`.
pub fn univariate_quad_feasible(b: f64, d: f64, k: f64, eps: RiskLevel) -> bool {
    univariate_quad_interval(b, d, k).is_some_and(|(l, u)| seps::contains(Point2::new(l, u), eps))
}

/// `P((x.xi + b)^2 + z^2 <= k) >= 1 - eps`, decided as the two-sided
/// constraint `|x.xi + b| <= sqrt(k - z^2)`.
pub fn deterministic_mixed_feasible(x: &[f64], b: f64, z: f64, k: f64, dist: &GaussianVector, eps: RiskLevel) -> Result<bool> {
    if x.len() != dist.dim() {
        return Err(Error::Dimension(format!("x has {} entries, xi has {}", x.len(), dist.dim())));
    }
    if k < z * z {
        return Ok(false);
    }
    let r = (k - z * z).sqrt();
    let xv = DVector::from_column_slice(x);
    let m = xv.dot(dist.mean()) + b;
    let s = (dist.chol().transpose() * &xv).norm();
    if s == 0.0 {
        return Ok(m.abs() <= r);
    }
    Ok(seps::cone_contains(ConePoint3::new(-r - m, r - m, s), eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eps(e: f64) -> RiskLevel {
        RiskLevel::relaxed(e).unwrap()
    }

    fn chi2_cdf(r: f64) -> f64 {
        1.0 - (-0.5 * r * r).exp()
    }

    /// Tensor midpoint rule in standard coordinates.
    fn brute_disk(g: &Gaussian2Reduced, k: f64, n: usize) -> f64 {
        let m = DMatrix::from_row_slice(2, 2, &[g.cov2[0][0], g.cov2[0][1], g.cov2[1][0], g.cov2[1][1]]);
        let l = m.cholesky().unwrap().l();
        let h = 16.0 / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let e1 = -8.0 + h * (i as f64 + 0.5);
            for j in 0..n {
                let e2 = -8.0 + h * (j as f64 + 0.5);
                let u = g.mean2[0] + l[(0, 0)] * e1;
                let v = g.mean2[1] + l[(1, 0)] * e1 + l[(1, 1)] * e2;
                if u * u + v * v <= k {
                    total += pdf(e1) * pdf(e2) * h * h;
                }
            }
        }
        total
    }

    #[test]
    fn reduction_examples() {
        let inst = QuadCCInstance::new(vec![1.0, 0.0], 0.3, vec![0.0, 1.0], -0.7, 1.0, GaussianVector::standard(2), eps(0.1)).unwrap();
        let g = reduce_to_2d(&inst);
        assert_eq!(g.mean2, [0.3, -0.7]);
        assert_eq!(g.cov2, [[1.0, 0.0], [0.0, 1.0]]);
        let inst = QuadCCInstance::new(vec![1.0, 2.0], 0.0, vec![1.0, 2.0], 0.0, 1.0, GaussianVector::standard(2), eps(0.1)).unwrap();
        let g = reduce_to_2d(&inst);
        let det = g.cov2[0][0] * g.cov2[1][1] - g.cov2[0][1] * g.cov2[1][0];
        assert_abs_diff_eq!(det, 0.0, epsilon = 1e-12);
        assert!(QuadCCInstance::new(vec![1.0], 0.0, vec![0.0, 1.0], 0.0, 1.0, GaussianVector::standard(2), eps(0.1)).is_err());
    }

    #[test]
    fn random_reductions_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(1..=5);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let cov = &a * a.transpose();
            let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cov[(i, j)]).collect()).collect();
            let dist = GaussianVector::from_rows(&vec![0.0; n], &rows).unwrap();
            let v = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>();
            let inst = QuadCCInstance::new(v(&mut rng), 0.0, v(&mut rng), 0.0, 1.0, dist, eps(0.1)).unwrap();
            let g = reduce_to_2d(&inst);
            let m = DMatrix::from_row_slice(2, 2, &[g.cov2[0][0], g.cov2[0][1], g.cov2[1][0], g.cov2[1][1]]);
            assert!(min_eigenvalue(&m) >= -1e-12);
        }
    }

    #[test]
    fn diagonal_case_matches_chi_two() {
        for (x, k) in [(0.8, 1.0), (0.5, 2.0), (1.3, 0.7)] {
            let inst = QuadCCInstance::example(x, x, eps(0.1)).with_k(k);
            let p = true_prob(&inst, 1e-9).unwrap();
            assert_abs_diff_eq!(p, chi2_cdf(k.sqrt() / x), epsilon = 1e-9);
        }
        let p = true_prob(&QuadCCInstance::example(0.8, 0.8, eps(0.1)), TRUE_PROB_TOL).unwrap();
        assert_abs_diff_eq!(p, 0.542, epsilon = 5e-4);
    }

    #[test]
    fn zero_radius_and_degenerate_laws() {
        let inst = QuadCCInstance::new(vec![1.0, 0.0], 0.5, vec![0.0, 1.0], 0.0, 0.0, GaussianVector::standard(2), eps(0.1)).unwrap();
        assert_eq!(true_prob(&inst, TRUE_PROB_TOL).unwrap(), 0.0);
        assert!(true_prob(&inst.clone().with_k(-1.0), TRUE_PROB_TOL).is_err());
        // point mass
        let inst = QuadCCInstance::example(0.0, 0.0, eps(0.1));
        assert_eq!(true_prob(&inst, TRUE_PROB_TOL).unwrap(), 1.0);
        // one coordinate: P(x^2 xi^2 <= 1) = P(|xi| <= 1/x)
        let inst = QuadCCInstance::example(0.5, 0.0, eps(0.1));
        assert_abs_diff_eq!(true_prob(&inst, TRUE_PROB_TOL).unwrap(), interval_mass(-2.0, 2.0), epsilon = 1e-14);
        // perfectly correlated: U = V = xi1, disk U^2 + V^2 <= 1 means |xi1| <= 1/sqrt 2
        let inst = QuadCCInstance::new(vec![1.0, 0.0], 0.0, vec![1.0, 0.0], 0.0, 1.0, GaussianVector::standard(2), eps(0.1)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(true_prob(&inst, TRUE_PROB_TOL).unwrap(), interval_mass(-h, h), epsilon = 1e-14);
    }

    #[test]
    fn correlated_case_matches_brute_force_and_reference() {
        let g = Gaussian2Reduced { mean2: [0.4, -0.3], cov2: [[0.8, 0.3], [0.3, 0.5]] };
        let p = disk_prob(&g, 1.2, 1e-9).unwrap();
        assert_abs_diff_eq!(p, brute_disk(&g, 1.2, 2000), epsilon = 1e-4);
        // two-dimensional quadrature reference
        assert_abs_diff_eq!(p, 0.5436205494083571, epsilon = 1e-7);
    }

    #[test]
    fn witness_reproduces_counterexample() {
        let w = nonconvexity_witness().unwrap();
        assert!(w.proves_nonconvexity());
        assert_abs_diff_eq!(w.mid, 0.542, epsilon = 5e-4);
        assert_abs_diff_eq!(w.left, w.right, epsilon = 1e-7);
        assert!(w.left >= 0.545);
        let trace = witness_trace(13).unwrap();
        assert_eq!(trace.len(), 13);
        assert_abs_diff_eq!(trace[0].x, 0.5);
        assert_abs_diff_eq!(trace[12].x, 1.1, epsilon = 1e-12);
        // symmetric about x = 0.8 and dipping in the middle
        assert_abs_diff_eq!(trace[2].prob, trace[10].prob, epsilon = 1e-7);
        assert!(trace[6].prob < trace[2].prob);
        assert!(to_csv(&trace).unwrap().starts_with("x,y,prob\n"));
    }

    #[test]
    fn two_sided_is_the_ball_on_the_example_family() {
        let e = 0.5;
        let r = 1.0 / gauss::quantile_upper(e / 4.0).unwrap();
        assert_abs_diff_eq!(r, 0.8693, epsilon = 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..400 {
            let (x, y): (f64, f64) = (rng.random_range(0.0..1.2), rng.random_range(0.0..1.2));
            let ball = x * x + y * y - r * r;
            if ball.abs() < 1e-9 {
                continue;
            }
            let t = two_sided_feasible(&QuadCCInstance::example(x, y, eps(e)), 0.5).unwrap();
            assert_eq!(t.feasible, ball < 0.0, "({x}, {y})");
        }
    }

    #[test]
    fn two_sided_radii_and_beta_limits() {
        assert_eq!(min_abs_radius(-0.7, 0.0, 0.1), 0.7);
        let f = min_abs_radius(0.0, 2.0, 0.05);
        assert_abs_diff_eq!(f, 2.0 * gauss::quantile_upper(0.025).unwrap(), epsilon = 1e-12);
        let f = min_abs_radius(1.0, 1.0, 0.05);
        assert_abs_diff_eq!(interval_mass(-f - 1.0, f - 1.0), 0.95, epsilon = 1e-12);
        let inst = QuadCCInstance::example(0.5, 0.5, eps(0.1));
        let mut prev = 0.0;
        for beta in [0.5, 1e-3, 1e-10, 1e-100, 1e-300] {
            let f1 = two_sided_feasible(&inst, beta).unwrap().f1;
            assert!(f1 > prev);
            prev = f1;
        }
        assert!(two_sided_feasible(&inst, 0.0).is_err());
        assert!(two_sided_feasible(&inst, 1.0).is_err());
        assert!(two_sided_feasible(&QuadCCInstance::example(0.5, 0.5, eps(0.6)), 0.5).is_err());
    }

    #[test]
    fn tuned_beta_is_no_worse() {
        let inst = QuadCCInstance::example(0.9, 0.2, eps(0.1));
        let half = two_sided_feasible(&inst, 0.5).unwrap();
        let tuned = two_sided_tuned(&inst).unwrap();
        assert!(tuned.f1.powi(2) + tuned.f2.powi(2) <= half.f1.powi(2) + half.f2.powi(2));
        assert!(tuned.beta > 0.5);
    }

    #[test]
    fn robust_is_the_box_on_the_example_family() {
        let e = 0.5;
        let gamma = robust_radius(2, eps(e)).unwrap();
        assert_abs_diff_eq!(1.0 / gamma, 1.0 / (2.0 * std::f64::consts::LN_2).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(1.0 / gamma, 0.8493, epsilon = 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let (x, y): (f64, f64) = (rng.random_range(0.0..1.2), rng.random_range(0.0..1.2));
            let d = (x.max(y) - 1.0 / gamma).abs();
            if d < 1e-9 {
                continue;
            }
            let r = robust_feasible(&QuadCCInstance::example(x, y, eps(e))).unwrap();
            assert_eq!(r.feasible, x.max(y) < 1.0 / gamma, "({x}, {y})");
        }
        let corner = QuadCCInstance::example(1.0 / gamma, 1.0 / gamma, eps(e));
        assert!(robust_feasible(&corner).unwrap().feasible);
        assert_abs_diff_eq!(true_prob(&corner, 1e-9).unwrap(), 1.0 - e, epsilon = 1e-8);
    }

    #[test]
    fn robust_lambda_set_is_an_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = 3;
            let v = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.random_range(-0.4..0.4)).collect::<Vec<_>>();
            let inst = QuadCCInstance::new(v(&mut rng), rng.random_range(-0.3..0.3), v(&mut rng), 0.0, 2.0, GaussianVector::standard(n), eps(0.2)).unwrap();
            let gamma = robust_radius(n, inst.eps).unwrap();
            let hi = inst.k / (gamma * gamma);
            let signs: Vec<bool> = (0..=200).map(|i| lmi_min_eig(&inst, hi * i as f64 / 200.0).unwrap() >= -1e-12).collect();
            let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
            assert!(changes <= 2);
            if signs.iter().any(|s| *s) {
                assert!(robust_feasible(&inst).unwrap().feasible);
            }
        }
    }

    #[test]
    fn cvar_trivial_and_conservative() {
        let zero = QuadCCInstance::new(vec![0.0; 2], 0.0, vec![0.0; 2], 0.0, 1.0, GaussianVector::standard(2), eps(0.1)).unwrap();
        assert!(cvar_feasible(&zero).unwrap().feasible);
        for (x, y) in [(0.3, 0.2), (0.45, 0.1), (0.2, 0.5)] {
            let inst = QuadCCInstance::example(x, y, eps(0.05));
            if cvar_feasible(&inst).unwrap().feasible {
                assert!(true_prob(&inst, TRUE_PROB_TOL).unwrap() >= 0.95 - 1e-6);
            }
        }
        assert!(cvar_feasible(&QuadCCInstance::example(0.3, 0.2, eps(0.05))).unwrap().feasible);
        assert!(!cvar_feasible(&QuadCCInstance::example(1.0, 1.0, eps(0.05))).unwrap().feasible);
    }

    #[test]
    fn excess_matches_brute_force() {
        let g = Gaussian2Reduced { mean2: [0.2, -0.5], cov2: [[0.7, -0.2], [-0.2, 0.4]] };
        for s in [-0.5, 0.3, 1.5] {
            let got = expected_excess(&g, s, 1e-11).unwrap();
            let m = DMatrix::from_row_slice(2, 2, &[0.7, -0.2, -0.2, 0.4]);
            let l = m.cholesky().unwrap().l();
            let n = 1200;
            let h = 16.0 / n as f64;
            let mut want = 0.0;
            for i in 0..n {
                let e1 = -8.0 + h * (i as f64 + 0.5);
                for j in 0..n {
                    let e2 = -8.0 + h * (j as f64 + 0.5);
                    let u = 0.2 + l[(0, 0)] * e1;
                    let v = -0.5 + l[(1, 0)] * e1 + l[(1, 1)] * e2;
                    want += pdf(e1) * pdf(e2) * h * h * (u * u + v * v - s).max(0.0);
                }
            }
            assert_abs_diff_eq!(got, want, epsilon = 1e-6);
        }
        // rank one: U = V = xi, E[(2 xi^2 - 1)^+]
        let g = Gaussian2Reduced { mean2: [0.0, 0.0], cov2: [[1.0, 1.0], [1.0, 1.0]] };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = 2.0 * (2.0 * (h * pdf(h) + sf(h)) - sf(h));
        assert_abs_diff_eq!(expected_excess(&g, 1.0, 1e-11).unwrap(), want, epsilon = 1e-9);
    }

    #[test]
    fn comparison_grid_at_half() {
        let e = eps(0.5);
        let rows = compare_grid(e, GridSpec { n: 13, lo: 0.0, hi: 1.2 }).unwrap();
        assert_eq!(rows.len(), 169);
        assert_eq!(rows[1].x, 0.0);
        assert_abs_diff_eq!(rows[1].y, 0.1, epsilon = 1e-15);
        assert!(grid_subset(&rows, |r| r.cvar, |r| r.robust));
        assert!(grid_subset(&rows, |r| r.cvar, |r| r.two_sided));
        for r in &rows {
            if r.two_sided || r.robust || r.cvar {
                assert!(r.true_prob >= 0.5 - 1e-6);
            }
        }
        let csv = to_csv(&rows).unwrap();
        assert!(csv.starts_with("x,y,true_prob,exact,two_sided,robust,cvar\n"));
        let s = summarize(&rows, e);
        assert!(s.exact >= s.robust && s.exact >= s.two_sided && s.exact >= s.cvar);
    }

    #[test]
    fn univariate_interval_examples() {
        assert_eq!(univariate_quad_interval(0.0, 0.0, 2.0), Some((-1.0, 1.0)));
        assert_eq!(univariate_quad_interval(1.0, 3.0, 2.0), Some((-2.0, -2.0)));
        assert_eq!(univariate_quad_interval(1.0, 3.0, 1.9), None);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let (b, d, k) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(0.0..30.0));
            if let Some((l, u)) = univariate_quad_interval(b, d, k) {
                for r in [l, u] {
                    assert_abs_diff_eq!((r + b).powi(2) + (r + d).powi(2), k, epsilon = 1e-10 * (1.0 + k));
                }
            }
        }
        assert!(univariate_quad_feasible(0.0, 0.0, 2.0 * 2.0f64.powi(2), eps(0.05)));
        assert!(!univariate_quad_feasible(0.0, 0.0, 2.0, eps(0.05)));
    }

    #[test]
    fn deterministic_mixed_examples() {
        let dist = GaussianVector::standard(2);
        let e = eps(0.05);
        let q = gauss::quantile_upper(0.025).unwrap();
        assert!(deterministic_mixed_feasible(&[1.0, 0.0], 0.0, 0.0, q * q * 1.0001, &dist, e).unwrap());
        assert!(!deterministic_mixed_feasible(&[1.0, 0.0], 0.0, 0.0, q * q * 0.9999, &dist, e).unwrap());
        assert!(deterministic_mixed_feasible(&[0.0, 0.0], 0.0, 0.5, 0.25, &dist, e).unwrap());
        assert!(!deterministic_mixed_feasible(&[0.1, 0.0], 0.0, 0.5, 0.25, &dist, e).unwrap());
        assert!(!deterministic_mixed_feasible(&[0.0, 0.0], 0.0, 0.5, 0.2, &dist, e).unwrap());
    }

    #[test]
    fn deterministic_mixed_agrees_with_true_prob() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dist = GaussianVector::from_rows(&[0.2, -0.1], &[vec![1.0, 0.2], vec![0.2, 0.6]]).unwrap();
        let e = eps(0.1);
        for _ in 0..200 {
            let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let (b, z, k) = (rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0), rng.random_range(0.5..6.0));
            let inst = QuadCCInstance::new(x.clone(), b, vec![0.0, 0.0], z, k, dist.clone(), e).unwrap();
            let p = true_prob(&inst, 1e-10).unwrap();
            if (p - 0.9).abs() < 1e-6 {
                continue;
            }
            assert_eq!(deterministic_mixed_feasible(&x, b, z, k, &dist, e).unwrap(), p >= 0.9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rotation_invariance(a1 in -1.0..1.0f64, a2 in -1.0..1.0f64, c1 in -1.0..1.0f64, c2 in -1.0..1.0f64,
                               b in -0.5..0.5f64, d in -0.5..0.5f64, k in 0.1..3.0f64, th in 0.0..std::f64::consts::TAU) {
            let inst = QuadCCInstance::new(vec![a1, a2], b, vec![c1, c2], d, k, GaussianVector::standard(2), eps(0.1)).unwrap();
            let (s, c) = th.sin_cos();
            let rot = |v: &[f64]| vec![c * v[0] - s * v[1], s * v[0] + c * v[1]];
            let r = QuadCCInstance::new(rot(&inst.a), b, rot(&inst.c), d, k, GaussianVector::standard(2), eps(0.1)).unwrap();
            let p = true_prob(&inst, TRUE_PROB_TOL).unwrap();
            let q = true_prob(&r, TRUE_PROB_TOL).unwrap();
            prop_assert!((p - q).abs() <= 2.0 * TRUE_PROB_TOL);
        }

        #[test]
        fn monotone_in_k(x in 0.0..1.2f64, y in 0.0..1.2f64, k in 0.05..2.0f64, dk in 0.0..1.0f64) {
            let e = eps(0.2);
            let lo = QuadCCInstance::example(x, y, e).with_k(k);
            let hi = QuadCCInstance::example(x, y, e).with_k(k + dk);
            prop_assert!(true_prob(&hi, TRUE_PROB_TOL).unwrap() >= true_prob(&lo, TRUE_PROB_TOL).unwrap() - 2.0 * TRUE_PROB_TOL);
            prop_assert!(!two_sided_feasible(&lo, 0.5).unwrap().feasible || two_sided_feasible(&hi, 0.5).unwrap().feasible);
            prop_assert!(!robust_feasible(&lo).unwrap().feasible || robust_feasible(&hi).unwrap().feasible);
        }

        #[test]
        fn approximations_are_conservative(a1 in -0.6..0.6f64, a2 in -0.6..0.6f64, c1 in -0.6..0.6f64, c2 in -0.6..0.6f64,
                                           b in -0.3..0.3f64, d in -0.3..0.3f64, k in 0.2..2.0f64) {
            let e = eps(0.1);
            let inst = QuadCCInstance::new(vec![a1, a2], b, vec![c1, c2], d, k, GaussianVector::standard(2), e).unwrap();
            let p = true_prob(&inst, TRUE_PROB_TOL).unwrap();
            if two_sided_feasible(&inst, 0.5).unwrap().feasible || robust_feasible(&inst).unwrap().feasible {
                prop_assert!(p >= 0.9 - 1e-6);
            }
        }
    }
}
