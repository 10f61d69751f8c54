//! Chance-constrained problem containers and their second-order cone and
//! smooth reformulations.
//!
//! A [`TwoSidedCC`] reads `P(lower <= xi . x <= upper) >= 1 - eps` with
//! `xi ~ N(mu, Sigma)` and every piece affine in the decision variables.
//! Writing `Sigma = L L^T`, the constraint is equivalent to
//! `(lower - mu . x, upper - mu . x, ||L^T x||)` lying in the conic hull of
//! S(eps).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distrobust::{CovFamily, MeanBox, RobustSet};
use crate::error::{domain, Error, Result};
use crate::gauss;
use crate::json;
use crate::seps::{self, ConePoint3, RiskLevel, SmoothForm};

/// Relative pivot threshold below which a covariance is rejected.
pub const CHOLESKY_PIVOT_TOL: f64 = 1e-12;

/// Multivariate normal law with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianVector {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl PartialEq for GaussianVector {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl GaussianVector {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::Dimension(format!(
                "mean has {n} entries but covariance is {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return domain("mean and covariance must be finite");
        }
        let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                    return domain(format!("covariance is not symmetric at ({i}, {j})"));
                }
            }
        }
        let chol = cholesky(&cov)?;
        Ok(GaussianVector { mean, cov, chol })
    }

    /// Standard normal in `n` dimensions.
    pub fn standard(n: usize) -> Self {
        GaussianVector { mean: DVector::zeros(n), cov: DMatrix::identity(n, n), chol: DMatrix::identity(n, n) }
    }

    pub fn from_rows(mean: &[f64], cov: &[Vec<f64>]) -> Result<Self> {
        let n = mean.len();
        if cov.len() != n || cov.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("covariance must be {n}x{n}")));
        }
        let m = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
        GaussianVector::new(DVector::from_column_slice(mean), m)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular `L` with `L L^T = Sigma`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn cov_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.cov.row(i).iter().copied().collect()).collect()
    }
}

/// Cholesky factor with pivots checked against `CHOLESKY_PIVOT_TOL` times
/// the largest diagonal entry.
pub fn cholesky(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    let max_diag = (0..n).map(|i| cov[(i, i)]).fold(0.0f64, f64::max);
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if !(max_diag > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = cov[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > CHOLESKY_PIVOT_TOL * max_diag) {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// `sum coeffs[v] * v + constant` over named variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineExpr {
    #[serde(default)]
    pub coeffs: BTreeMap<String, f64>,
    #[serde(default, rename = "const")]
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn var(name: &str) -> Self {
        AffineExpr::term(name, 1.0)
    }

    pub fn term(name: &str, coeff: f64) -> Self {
        let mut e = AffineExpr::default();
        e.coeffs.insert(name.to_string(), coeff);
        e
    }

    pub fn with_term(mut self, name: &str, coeff: f64) -> Self {
        *self.coeffs.entry(name.to_string()).or_insert(0.0) += coeff;
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &AffineExpr, s: f64) {
        for (k, v) in &other.coeffs {
            *self.coeffs.entry(k.clone()).or_insert(0.0) += s * v;
        }
        self.constant += s * other.constant;
    }

    pub fn scaled(&self, s: f64) -> AffineExpr {
        let mut e = AffineExpr::default();
        e.add_scaled(self, s);
        e
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.coeffs.values().all(|v| v.is_finite())
    }

    pub fn eval(&self, values: &BTreeMap<String, f64>) -> Result<f64> {
        let mut s = self.constant;
        for (k, v) in &self.coeffs {
            let x = values.get(k).ok_or_else(|| Error::Domain(format!("no value for variable `{k}`")))?;
            s += v * x;
        }
        Ok(s)
    }

    pub fn dense(&self, index: &VarIndex) -> Result<DenseAffine> {
        let mut coeffs = vec![0.0; index.len()];
        for (k, v) in &self.coeffs {
            coeffs[index.get(k)?] += v;
        }
        Ok(DenseAffine { coeffs, constant: self.constant })
    }
}

/// Position of each variable name in a dense vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VarIndex {
    names: Vec<String>,
    pos: HashMap<String, usize>,
}

impl VarIndex {
    pub fn new(names: &[String]) -> Result<Self> {
        let mut pos = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if pos.insert(n.clone(), i).is_some() {
                return domain(format!("variable `{n}` declared twice"));
            }
        }
        Ok(VarIndex { names: names.to_vec(), pos })
    }

    pub fn get(&self, name: &str) -> Result<usize> {
        self.pos.get(name).copied().ok_or_else(|| Error::Domain(format!("unknown variable `{name}`")))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Values keyed by name.
    pub fn named(&self, x: &[f64]) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(x.iter().copied()).collect()
    }
}

/// Affine function on a dense variable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseAffine {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl DenseAffine {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

/// `coeffs . v + const  (sense)  rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConstraint {
    #[serde(default)]
    pub coeffs: BTreeMap<String, f64>,
    #[serde(default, rename = "const", skip_serializing_if = "is_zero")]
    pub constant: f64,
    pub sense: Sense,
    pub rhs: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl LinearConstraint {
    pub fn new(expr: AffineExpr, sense: Sense, rhs: f64) -> Self {
        LinearConstraint { coeffs: expr.coeffs, constant: expr.constant, sense, rhs }
    }

    pub fn expr(&self) -> AffineExpr {
        AffineExpr { coeffs: self.coeffs.clone(), constant: self.constant }
    }

    /// Amount by which `values` violates the row; zero when satisfied.
    pub fn violation(&self, values: &BTreeMap<String, f64>) -> Result<f64> {
        let lhs = self.expr().eval(values)?;
        Ok(match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        })
    }
}

/// Optional finite bounds on one variable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarBound {
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

/// `P(lower <= xi . x <= upper) >= 1 - eps`. A missing side is infinite,
/// which gives an ordinary one-sided Gaussian chance constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedCC {
    pub lower: Option<AffineExpr>,
    pub upper: Option<AffineExpr>,
    pub xi_coeffs: Vec<AffineExpr>,
    pub dist: GaussianVector,
    pub eps: RiskLevel,
    /// When present, the constraint must hold for every law in the set.
    pub robust: Option<RobustSet>,
}

impl TwoSidedCC {
    pub fn new(
        lower: Option<AffineExpr>,
        upper: Option<AffineExpr>,
        xi_coeffs: Vec<AffineExpr>,
        dist: GaussianVector,
        eps: RiskLevel,
    ) -> Result<Self> {
        let cc = TwoSidedCC { lower, upper, xi_coeffs, dist, eps, robust: None };
        cc.check()?;
        Ok(cc)
    }

    pub fn with_robust(mut self, set: RobustSet) -> Result<Self> {
        if set.dim() != self.dist.dim() {
            return Err(Error::Dimension(format!(
                "uncertainty set has dimension {} but the law has {}",
                set.dim(),
                self.dist.dim()
            )));
        }
        self.robust = Some(set);
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        if self.xi_coeffs.len() != self.dist.dim() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a {}-dimensional law",
                self.xi_coeffs.len(),
                self.dist.dim()
            )));
        }
        if self.lower.is_none() && self.upper.is_none() {
            return domain("a chance constraint needs at least one finite side");
        }
        Ok(())
    }

    pub fn is_two_sided(&self) -> bool {
        self.lower.is_some() && self.upper.is_some()
    }

    fn exprs(&self) -> impl Iterator<Item = &AffineExpr> {
        self.lower.iter().chain(self.upper.iter()).chain(self.xi_coeffs.iter())
    }

    /// Exact probability of the event at fixed variable values.
    pub fn probability(&self, values: &BTreeMap<String, f64>) -> Result<f64> {
        let s = standardize(self)?;
        let lo = s.lower.as_ref().map(|e| e.eval(values)).transpose()?;
        let hi = s.upper.as_ref().map(|e| e.eval(values)).transpose()?;
        let y = s.y.iter().map(|e| e.eval(values)).collect::<Result<Vec<_>>>()?;
        Ok(standardized_probability(lo, hi, norm(&y)))
    }
}

/// `P(lo <= z N <= hi)` for a standard normal `N`; `z = 0` is deterministic.
pub fn standardized_probability(lo: Option<f64>, hi: Option<f64>, z: f64) -> f64 {
    let lo = lo.unwrap_or(f64::NEG_INFINITY);
    let hi = hi.unwrap_or(f64::INFINITY);
    if z == 0.0 {
        return if lo <= 0.0 && 0.0 <= hi { 1.0 } else { 0.0 };
    }
    seps::mass(seps::Point2::new(lo / z, hi / z))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Minimize an affine objective subject to linear rows, variable bounds and
/// chance constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChanceProblem {
    pub variables: Vec<String>,
    pub objective: AffineExpr,
    pub linear: Vec<LinearConstraint>,
    pub ccs: Vec<TwoSidedCC>,
    pub bounds: BTreeMap<String, VarBound>,
}

impl ChanceProblem {
    pub fn new<S: AsRef<str>>(variables: &[S]) -> Self {
        ChanceProblem { variables: variables.iter().map(|s| s.as_ref().to_string()).collect(), ..Default::default() }
    }

    pub fn minimize(mut self, objective: AffineExpr) -> Self {
        self.objective = objective;
        self
    }

    pub fn subject_to(mut self, row: LinearConstraint) -> Self {
        self.linear.push(row);
        self
    }

    pub fn with_cc(mut self, cc: TwoSidedCC) -> Self {
        self.ccs.push(cc);
        self
    }

    pub fn bound(mut self, name: &str, lo: Option<f64>, hi: Option<f64>) -> Self {
        self.bounds.insert(name.to_string(), VarBound { lo, hi });
        self
    }

    pub fn index(&self) -> Result<VarIndex> {
        VarIndex::new(&self.variables)
    }

    /// Checks variable references, dimensions and finiteness.
    pub fn validate(&self) -> Result<()> {
        let index = self.index().map_err(|e| schema("variables", e))?;
        let check = |path: String, e: &AffineExpr| -> Result<()> {
            for k in e.coeffs.keys() {
                if index.get(k).is_err() {
                    return Err(Error::Schema { path: format!("{path}.coeffs.{k}"), message: "unknown variable".into() });
                }
            }
            if !e.is_finite() {
                return Err(Error::Schema { path, message: "non-finite coefficient".into() });
            }
            Ok(())
        };
        check("objective".into(), &self.objective)?;
        for (i, row) in self.linear.iter().enumerate() {
            check(format!("linear[{i}]"), &row.expr())?;
            if !row.rhs.is_finite() {
                return Err(Error::Schema { path: format!("linear[{i}].rhs"), message: "non-finite".into() });
            }
        }
        for (i, cc) in self.ccs.iter().enumerate() {
            cc.check().map_err(|e| schema(&format!("ccs[{i}]"), e))?;
            for e in cc.exprs() {
                check(format!("ccs[{i}]"), e)?;
            }
        }
        for (k, b) in &self.bounds {
            if index.get(k).is_err() {
                return Err(Error::Schema { path: format!("bounds.{k}"), message: "unknown variable".into() });
            }
            if let (Some(lo), Some(hi)) = (b.lo, b.hi) {
                if lo > hi {
                    return Err(Error::Schema { path: format!("bounds.{k}"), message: format!("lo {lo} > hi {hi}") });
                }
            }
        }
        Ok(())
    }

    /// Worst row violation of the deterministic part at `values`.
    pub fn linear_violation(&self, values: &BTreeMap<String, f64>) -> Result<f64> {
        let mut worst = 0.0f64;
        for row in &self.linear {
            worst = worst.max(row.violation(values)?);
        }
        for (k, b) in &self.bounds {
            let v = values.get(k).copied().unwrap_or(0.0);
            worst = worst.max(b.lo.map_or(0.0, |lo| lo - v)).max(b.hi.map_or(0.0, |hi| v - hi));
        }
        Ok(worst)
    }
}

fn schema(path: &str, e: Error) -> Error {
    Error::Schema { path: path.to_string(), message: e.to_string() }
}

/// Bounds shifted by the mean and the coefficients mapped through `L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    /// `lower - mu . x`
    pub lower: Option<AffineExpr>,
    /// `upper - mu . x`
    pub upper: Option<AffineExpr>,
    /// `L^T x`
    pub y: Vec<AffineExpr>,
}

/// Reduces a chance constraint under `N(mu, Sigma)` to the standard normal
/// case: `P(a <= xi . x <= b) = P(a' <= N . y <= b')` with
/// `N ~ N(0, I)`.
pub fn standardize(cc: &TwoSidedCC) -> Result<Standardized> {
    cc.check()?;
    let n = cc.dist.dim();
    let mut mx = AffineExpr::default();
    for (i, x) in cc.xi_coeffs.iter().enumerate() {
        mx.add_scaled(x, cc.dist.mean()[i]);
    }
    let shift = |e: &AffineExpr| {
        let mut s = e.clone();
        s.add_scaled(&mx, -1.0);
        s
    };
    let l = cc.dist.chol();
    let y = (0..n)
        .map(|j| {
            let mut e = AffineExpr::default();
            for i in j..n {
                if l[(i, j)] != 0.0 {
                    e.add_scaled(&cc.xi_coeffs[i], l[(i, j)]);
                }
            }
            e
        })
        .collect();
    Ok(Standardized { lower: cc.lower.as_ref().map(shift), upper: cc.upper.as_ref().map(shift), y })
}

/// Which side of the polyhedral sandwich the SOC formulation represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocMode {
    /// Three-cut outer approximation at `eps`: every feasible point has
    /// probability at least `1 - 1.25 eps`.
    Outer,
    /// The same family at `eps / factor`: every feasible point has
    /// probability at least `1 - eps`.
    Conservative,
}

impl FromStr for SocMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outer" => Ok(SocMode::Outer),
            "conservative" => Ok(SocMode::Conservative),
            _ => domain(format!("unknown formulation mode `{s}` (expected outer or conservative)")),
        }
    }
}

/// Certified factor of the three-cut family.
pub const THREE_CUT_FACTOR: f64 = 1.25;

/// `||vec||_2 <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocRow {
    pub vec: Vec<AffineExpr>,
    pub rhs: AffineExpr,
}

/// Second-order cone program: the original linear rows and bounds, one
/// auxiliary scale variable per chance constraint, one cone row per chance
/// constraint and up to three linear rows per chance constraint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocFormulation {
    pub variables: Vec<String>,
    pub objective: AffineExpr,
    pub soc: Vec<SocRow>,
    pub linear: Vec<LinearConstraint>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bounds: BTreeMap<String, VarBound>,
}

impl SocFormulation {
    /// Worst violation of all rows at `values` (cone rows as
    /// `||vec|| - rhs`).
    pub fn max_violation(&self, values: &BTreeMap<String, f64>) -> Result<f64> {
        let mut worst = 0.0f64;
        for row in &self.linear {
            worst = worst.max(row.violation(values)?);
        }
        for row in &self.soc {
            let v = row.vec.iter().map(|e| e.eval(values)).collect::<Result<Vec<_>>>()?;
            worst = worst.max(norm(&v) - row.rhs.eval(values)?);
        }
        Ok(worst)
    }
}

/// Name of the auxiliary scale variable of chance constraint `k`.
pub fn aux_name(variables: &[String], k: usize) -> String {
    let mut name = format!("t_cc{k}");
    while variables.contains(&name) {
        name.push('_');
    }
    name
}

/// SOC reformulation with the three-cut family (`factor = 1.25` in
/// conservative mode).
pub fn build_soc(p: &ChanceProblem, mode: SocMode) -> Result<SocFormulation> {
    build_soc_with_factor(p, mode, THREE_CUT_FACTOR)
}

/// SOC reformulation:
///
/// ```text
/// t >= ||L^T x||,  a' <= Phi^-1(e) t,  b' >= Phi^-1(1 - e) t,  a' - b' <= 2 Phi^-1(e/2) t
/// ```
///
/// with `e = eps` (outer) or `e = eps / factor` (conservative). One-sided
/// constraints keep only their own row, which is exact at `eps`.
pub fn build_soc_with_factor(p: &ChanceProblem, mode: SocMode, factor: f64) -> Result<SocFormulation> {
    p.validate()?;
    let mut variables = p.variables.clone();
    let mut soc = Vec::new();
    let mut linear = p.linear.clone();
    for (k, cc) in p.ccs.iter().enumerate() {
        if cc.robust.is_some() {
            return domain(format!("chance constraint {k} is distributionally robust; use the cutting-plane solver"));
        }
        if !cc.eps.is_standard() {
            return domain(format!("chance constraint {k} has eps > 1/2"));
        }
        let t = aux_name(&variables, k);
        variables.push(t.clone());
        let s = standardize(cc)?;
        soc.push(SocRow { vec: s.y.clone(), rhs: AffineExpr::var(&t) });
        let e = match (mode, cc.is_two_sided()) {
            (SocMode::Conservative, true) => cc.eps.scaled(factor)?.eps(),
            _ => cc.eps.eps(),
        };
        let q = gauss::quantile(e)?;
        if let Some(a) = &s.lower {
            linear.push(LinearConstraint::new(a.clone().with_term(&t, -q), Sense::Le, 0.0));
        }
        if let Some(b) = &s.upper {
            linear.push(LinearConstraint::new(b.scaled(-1.0).with_term(&t, -q), Sense::Le, 0.0));
        }
        if let (Some(a), Some(b)) = (&s.lower, &s.upper) {
            let mut d = a.clone();
            d.add_scaled(b, -1.0);
            let h = gauss::quantile(e / 2.0)?;
            linear.push(LinearConstraint::new(d.with_term(&t, -2.0 * h), Sense::Le, 0.0));
        }
    }
    Ok(SocFormulation { variables, objective: p.objective.clone(), soc, linear, bounds: p.bounds.clone() })
}

/// Concave constraint `g(v) >= 0` on the problem variables for a
/// derivative-based solver.
#[derive(Debug, Clone)]
pub struct SmoothConstraint {
    lower: Option<DenseAffine>,
    upper: Option<DenseAffine>,
    y: Vec<DenseAffine>,
    eps: RiskLevel,
    form: SmoothForm,
}

/// Stand-in for an infinite side: `Phi` and `phi` vanish there in double
/// precision.
const INFINITE_SIDE: f64 = 40.0;

/// Below this scale the perspective form is treated as undefined.
pub const SMOOTH_MIN_SCALE: f64 = 1e-12;

impl SmoothConstraint {
    /// Value and gradient with respect to the problem variables.
    pub fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let y: Vec<f64> = self.y.iter().map(|e| e.eval(x)).collect();
        let z = norm(&y);
        if z < SMOOTH_MIN_SCALE {
            return domain(format!("smooth form undefined at scale {z:e}"));
        }
        let a = self.lower.as_ref().map_or(-INFINITE_SIDE * z, |e| e.eval(x));
        let b = self.upper.as_ref().map_or(INFINITE_SIDE * z, |e| e.eval(x));
        let (v, g) = seps::smooth_value_grad(ConePoint3::new(a, b, z), self.eps, self.form)?;
        let n = x.len();
        let mut grad = vec![0.0; n];
        if let Some(e) = &self.lower {
            for (gi, c) in grad.iter_mut().zip(&e.coeffs) {
                *gi += g[0] * c;
            }
        }
        if let Some(e) = &self.upper {
            for (gi, c) in grad.iter_mut().zip(&e.coeffs) {
                *gi += g[1] * c;
            }
        }
        for (yj, e) in y.iter().zip(&self.y) {
            let w = g[2] * yj / z;
            for (gi, c) in grad.iter_mut().zip(&e.coeffs) {
                *gi += w * c;
            }
        }
        Ok((v, grad))
    }
}

/// One smooth evaluator per chance constraint, over the variables in
/// declaration order.
pub fn smooth_constraints(p: &ChanceProblem, form: SmoothForm) -> Result<Vec<SmoothConstraint>> {
    p.validate()?;
    let index = p.index()?;
    p.ccs
        .iter()
        .map(|cc| {
            if form == SmoothForm::Plain && !cc.eps.is_standard() {
                return domain("the plain form is concave only for eps <= 1/2");
            }
            let s = standardize(cc)?;
            Ok(SmoothConstraint {
                lower: s.lower.as_ref().map(|e| e.dense(&index)).transpose()?,
                upper: s.upper.as_ref().map(|e| e.dense(&index)).transpose()?,
                y: s.y.iter().map(|e| e.dense(&index)).collect::<Result<_>>()?,
                eps: cc.eps,
                form,
            })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    #[serde(default)]
    variables: Vec<String>,
    #[serde(default)]
    objective: AffineExpr,
    #[serde(default)]
    linear: Vec<LinearConstraint>,
    #[serde(default)]
    ccs: Vec<CcDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    bounds: BTreeMap<String, VarBound>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CcDoc {
    #[serde(default)]
    lower: Option<AffineExpr>,
    #[serde(default)]
    upper: Option<AffineExpr>,
    xi_coeffs: Vec<AffineExpr>,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    robust: Option<RobustDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobustDoc {
    mean_box: MeanBoxDoc,
    cov_members: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeanBoxDoc {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Problem document with 17-digit floats.
pub fn emit_problem(p: &ChanceProblem) -> Result<String> {
    let doc = ProblemDoc {
        variables: p.variables.clone(),
        objective: p.objective.clone(),
        linear: p.linear.clone(),
        ccs: p
            .ccs
            .iter()
            .map(|cc| CcDoc {
                lower: cc.lower.clone(),
                upper: cc.upper.clone(),
                xi_coeffs: cc.xi_coeffs.clone(),
                mean: cc.dist.mean().iter().copied().collect(),
                cov: cc.dist.cov_rows(),
                eps: cc.eps.eps(),
                robust: cc.robust.as_ref().map(|r| RobustDoc {
                    mean_box: MeanBoxDoc { lo: r.mean_box.lo.clone(), hi: r.mean_box.hi.clone() },
                    cov_members: r.cov.rows(),
                }),
            })
            .collect(),
        bounds: p.bounds.clone(),
    };
    json::to_string(&doc)
}

/// Parses and validates a problem document; errors name the offending path.
pub fn parse_problem(text: &str) -> Result<ChanceProblem> {
    let doc: ProblemDoc = json::from_str(text)?;
    let mut ccs = Vec::with_capacity(doc.ccs.len());
    for (i, c) in doc.ccs.into_iter().enumerate() {
        let at = |f: &str| format!("ccs[{i}].{f}");
        let eps = RiskLevel::relaxed(c.eps).map_err(|e| schema(&at("eps"), e))?;
        let dist = GaussianVector::from_rows(&c.mean, &c.cov).map_err(|e| schema(&at("cov"), e))?;
        let mut cc = TwoSidedCC::new(c.lower, c.upper, c.xi_coeffs, dist, eps).map_err(|e| schema(&at("xi_coeffs"), e))?;
        if let Some(r) = c.robust {
            let mean_box = MeanBox::new(r.mean_box.lo, r.mean_box.hi).map_err(|e| schema(&at("robust.mean_box"), e))?;
            let cov = CovFamily::from_rows(&r.cov_members).map_err(|e| schema(&at("robust.cov_members"), e))?;
            cc = cc.with_robust(RobustSet::new(mean_box, cov)?).map_err(|e| schema(&at("robust"), e))?;
        }
        ccs.push(cc);
    }
    let p = ChanceProblem { variables: doc.variables, objective: doc.objective, linear: doc.linear, ccs, bounds: doc.bounds };
    p.validate()?;
    Ok(p)
}

/// Formulation document with 17-digit floats.
pub fn emit_json(f: &SocFormulation) -> Result<String> {
    json::to_string(f)
}

pub fn parse_formulation(text: &str) -> Result<SocFormulation> {
    json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eps(e: f64) -> RiskLevel {
        RiskLevel::new(e).unwrap()
    }

    /// `P(a <= xi <= b) >= 1 - eps` with scalar standard `xi` and free `a, b`.
    fn interval_problem(e: f64) -> ChanceProblem {
        let cc = TwoSidedCC::new(
            Some(AffineExpr::var("a")),
            Some(AffineExpr::var("b")),
            vec![AffineExpr::constant(1.0)],
            GaussianVector::standard(1),
            eps(e),
        )
        .unwrap();
        ChanceProblem::new(&["a", "b"]).minimize(AffineExpr::var("b").with_term("a", -1.0)).with_cc(cc)
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn cholesky_reproduces_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            let s = random_spd(&mut rng, n);
            let g = GaussianVector::new(DVector::zeros(n), s.clone()).unwrap();
            let l = g.chol();
            let err = (l * l.transpose() - &s).abs().max();
            assert!(err <= 1e-10 * s.abs().max());
            for i in 0..n {
                assert!(l[(i, i)] > 0.0);
                for j in i + 1..n {
                    assert_eq!(l[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn non_pd_covariance_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(GaussianVector::new(DVector::zeros(2), m).unwrap_err(), Error::NotPositiveDefinite);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GaussianVector::new(DVector::zeros(2), m).is_err());
        assert!(GaussianVector::from_rows(&[0.0], &[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn standardize_identity_and_shift() {
        let p = interval_problem(0.05);
        let s = standardize(&p.ccs[0]).unwrap();
        assert_eq!(s.lower.unwrap(), AffineExpr::var("a"));
        assert_eq!(s.y, vec![AffineExpr::constant(1.0)]);

        let dist = GaussianVector::from_rows(&[1.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let cc = TwoSidedCC::new(
            Some(AffineExpr::var("a")),
            Some(AffineExpr::var("b")),
            vec![AffineExpr::constant(1.0), AffineExpr::constant(0.0)],
            dist,
            eps(0.1),
        )
        .unwrap();
        let s = standardize(&cc).unwrap();
        assert_eq!(s.lower.unwrap(), AffineExpr::var("a").with_constant(-1.0));
        assert_eq!(s.upper.unwrap(), AffineExpr::var("b").with_constant(-1.0));
    }

    #[test]
    fn standardized_norm_is_the_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4;
        let s = random_spd(&mut rng, n);
        let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let g = GaussianVector::new(DVector::zeros(n), s.clone()).unwrap();
        let cc = TwoSidedCC::new(
            Some(AffineExpr::constant(-1.0)),
            Some(AffineExpr::constant(1.0)),
            names.iter().map(|v| AffineExpr::var(v)).collect(),
            g,
            eps(0.1),
        )
        .unwrap();
        let st = standardize(&cc).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let vals: BTreeMap<String, f64> = names.iter().cloned().zip(x.iter().copied()).collect();
            let y: Vec<f64> = st.y.iter().map(|e| e.eval(&vals).unwrap()).collect();
            let xv = DVector::from_column_slice(&x);
            let q = (xv.transpose() * &s * &xv)[(0, 0)];
            assert_abs_diff_eq!(norm(&y), q.sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn standardize_preserves_probability() {
        let dist = GaussianVector::from_rows(&[0.5, -1.0], &[vec![2.0, 0.3], vec![0.3, 0.5]]).unwrap();
        let cc = TwoSidedCC::new(
            Some(AffineExpr::constant(-1.0)),
            Some(AffineExpr::constant(2.5)),
            vec![AffineExpr::constant(1.5), AffineExpr::constant(-0.7)],
            dist,
            eps(0.1),
        )
        .unwrap();
        // xi . x ~ N(0.75 + 0.7, 1.5^2 2 - 2 1.5 0.7 0.3 + 0.49 0.5)
        let m = 0.75 + 0.7;
        let v: f64 = 2.25 * 2.0 - 2.0 * 1.5 * 0.7 * 0.3 + 0.49 * 0.5;
        let direct = gauss::cdf((2.5 - m) / v.sqrt()) - gauss::cdf((-1.0 - m) / v.sqrt());
        assert_abs_diff_eq!(cc.probability(&BTreeMap::new()).unwrap(), direct, epsilon = 1e-10);
    }

    #[test]
    fn soc_rows_for_the_interval_problem() {
        let e = 0.05;
        let f = build_soc(&interval_problem(e), SocMode::Outer).unwrap();
        assert_eq!(f.soc.len(), 1);
        assert_eq!(f.linear.len(), 3);
        assert_eq!(f.variables, vec!["a", "b", "t_cc0"]);
        assert_eq!(f.soc[0].rhs, AffineExpr::var("t_cc0"));
        let q = gauss::quantile(e).unwrap();
        assert_abs_diff_eq!(f.linear[0].coeffs["t_cc0"], -q, epsilon = 0.0);
        assert_abs_diff_eq!(f.linear[1].coeffs["t_cc0"], -q, epsilon = 0.0);
        assert_abs_diff_eq!(f.linear[2].coeffs["t_cc0"], -2.0 * gauss::quantile(e / 2.0).unwrap(), epsilon = 0.0);

        let c = build_soc(&interval_problem(0.5), SocMode::Conservative).unwrap();
        assert_abs_diff_eq!(c.linear[0].coeffs["t_cc0"], -gauss::quantile(0.4).unwrap(), epsilon = 0.0);
        let relaxed = interval_problem(0.05);
        let mut r = relaxed.clone();
        r.ccs[0].eps = RiskLevel::relaxed(0.6).unwrap();
        assert!(build_soc(&r, SocMode::Outer).is_err());
    }

    #[test]
    fn aux_names_avoid_collisions() {
        let vars = vec!["t_cc0".to_string()];
        assert_eq!(aux_name(&vars, 0), "t_cc0_");
        assert_eq!(aux_name(&vars, 1), "t_cc1");
    }

    #[test]
    fn empty_problem_gives_empty_formulation() {
        let f = build_soc(&ChanceProblem::default(), SocMode::Outer).unwrap();
        assert_eq!(f, SocFormulation::default());
        let text = emit_json(&f).unwrap();
        assert_eq!(parse_formulation(&text).unwrap(), f);
    }

    #[test]
    fn outer_sandwich_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for e in [0.05, 0.2] {
            let f = build_soc(&interval_problem(e), SocMode::Outer).unwrap();
            let c = build_soc(&interval_problem(e), SocMode::Conservative).unwrap();
            for _ in 0..500 {
                let a = rng.random_range(-4.0..0.5);
                let b = rng.random_range(-0.5..4.0);
                let vals = BTreeMap::from([("a".to_string(), a), ("b".to_string(), b), ("t_cc0".to_string(), 1.0)]);
                let prob = seps::mass(seps::Point2::new(a, b));
                let outer = f.max_violation(&vals).unwrap() <= 1e-12;
                if prob >= 1.0 - e {
                    assert!(outer, "a={a} b={b}");
                }
                if outer {
                    assert!(prob >= 1.0 - 1.25 * e - 1e-12);
                }
                if c.max_violation(&vals).unwrap() <= 0.0 {
                    assert!(prob >= 1.0 - e);
                }
            }
        }
    }

    #[test]
    fn smooth_value_at_unit_scale() {
        let p = interval_problem(0.05);
        let s = smooth_constraints(&p, SmoothForm::Plain).unwrap();
        let (v, g) = s[0].eval(&[-1.7, 2.1]).unwrap();
        assert_abs_diff_eq!(v, gauss::cdf(2.1) - gauss::cdf(-1.7) - 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(g[0], -gauss::pdf(-1.7), epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], gauss::pdf(2.1), epsilon = 1e-15);
    }

    #[test]
    fn smooth_gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dist = GaussianVector::from_rows(&[0.2, -0.1], &[vec![1.0, 0.4], vec![0.4, 2.0]]).unwrap();
        let cc = TwoSidedCC::new(
            Some(AffineExpr::var("a").with_term("x", 0.3)),
            Some(AffineExpr::var("b")),
            vec![AffineExpr::var("x").with_constant(0.5), AffineExpr::var("y")],
            dist,
            eps(0.1),
        )
        .unwrap();
        let one_sided = TwoSidedCC { lower: None, ..cc.clone() };
        let p = ChanceProblem::new(&["a", "b", "x", "y"]).with_cc(cc).with_cc(one_sided);
        for form in [SmoothForm::Plain, SmoothForm::Log] {
            for ev in smooth_constraints(&p, form).unwrap() {
                for _ in 0..30 {
                    let x = [
                        rng.random_range(-3.0..-1.0),
                        rng.random_range(1.0..3.0),
                        rng.random_range(0.2..1.0),
                        rng.random_range(0.2..1.0),
                    ];
                    let (_, g) = ev.eval(&x).unwrap();
                    for k in 0..4 {
                        let h = 1e-6;
                        let mut xp = x;
                        let mut xm = x;
                        xp[k] += h;
                        xm[k] -= h;
                        let fd = (ev.eval(&xp).unwrap().0 - ev.eval(&xm).unwrap().0) / (2.0 * h);
                        assert!((fd - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs()), "{form:?} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn smooth_form_signals_vanishing_scale() {
        let cc = TwoSidedCC::new(
            Some(AffineExpr::var("a")),
            Some(AffineExpr::var("b")),
            vec![AffineExpr::var("s")],
            GaussianVector::standard(1),
            eps(0.1),
        )
        .unwrap();
        let p = ChanceProblem::new(&["a", "b", "s"]).with_cc(cc);
        let ev = &smooth_constraints(&p, SmoothForm::Log).unwrap()[0];
        assert!(ev.eval(&[-1.0, 1.0, 1e-14]).is_err());
        assert!(ev.eval(&[-1.0, 1.0, 1e-3]).is_ok());
    }

    #[test]
    fn problem_document_round_trip() {
        let mut p = interval_problem(0.05).bound("a", Some(-10.0), None);
        p.linear.push(LinearConstraint::new(AffineExpr::var("a").with_term("b", 1.0), Sense::Eq, 0.1));
        let text = emit_problem(&p).unwrap();
        assert_eq!(parse_problem(&text).unwrap(), p);
    }

    #[test]
    fn schema_errors_name_the_path() {
        let bad_var = r#"{"variables":["a"],"objective":{"coeffs":{"z":1.0}}}"#;
        match parse_problem(bad_var).unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "objective.coeffs.z"),
            e => panic!("{e:?}"),
        }
        let bad_cov = r#"{"variables":["a","b"],"ccs":[{"lower":{"coeffs":{"a":1}},"upper":{"coeffs":{"b":1}},
            "xi_coeffs":[{"const":1}],"mean":[0],"cov":[[-1]],"eps":0.1}]}"#;
        match parse_problem(bad_cov).unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "ccs[0].cov"),
            e => panic!("{e:?}"),
        }
        let bad_type = r#"{"variables":["a"],"linear":[{"coeffs":{"a":1},"sense":"<","rhs":1}]}"#;
        match parse_problem(bad_type).unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "linear[0].sense"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn formulation_document_counts_rows() {
        let f = build_soc(&interval_problem(0.05), SocMode::Outer).unwrap();
        let text = emit_json(&f).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["soc"].as_array().unwrap().len(), 1);
        assert_eq!(v["linear"].as_array().unwrap().len(), 3);
        assert_eq!(parse_formulation(&text).unwrap(), f);
    }
}
