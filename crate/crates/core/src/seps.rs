//! Exact oracles for the planar set
//!
//! ```text
//! S(eps) = { (x, y) : Phi(y) - Phi(x) >= 1 - eps }
//! ```
//!
//! of interval endpoints that capture at least `1 - eps` standard Gaussian
//! mass, and for its closed conic hull `{ (x, y, z) : (x/z, y/z) in S(eps), z > 0 }`
//! (closure adds the `z = 0` slice `x <= 0 <= y`).
//!
//! The boundary is parameterized by `lambda in (0, 1)` through
//! `x = Phi^-1(lambda eps)`, `y = Phi^-1(1 - (1 - lambda) eps)`, which turns
//! support-function evaluation and Euclidean projection into strictly convex
//! one-dimensional searches.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gauss::{self, cdf, interval_mass, pdf, sf};

/// Lambda searches never touch the open ends of `(0, 1)`.
pub const LAMBDA_CLAMP: f64 = 1e-12;

/// Golden-section width for lambda searches before the Newton polish.
pub const LAMBDA_TOL: f64 = 1e-10;

// Relative slack on eps in `contains`, covering the rounding of the two tail
// evaluations only.
const ROUNDING_SLACK: f64 = 8.0 * f64::EPSILON;

/// Violation probability budget.
///
/// [`RiskLevel::new`] accepts `0 < eps <= 1/2`, the range in which the conic
/// hull is monotone and the polyhedral families are defined.
/// [`RiskLevel::relaxed`] accepts any `eps in (0, 1)` and is meant for the
/// planar membership and boundary operations only.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RiskLevel(f64);

impl RiskLevel {
    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps <= 0.5 {
            Ok(RiskLevel(eps))
        } else {
            domain(format!("risk level must lie in (0, 1/2], got {eps}"))
        }
    }

    pub fn relaxed(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps < 1.0 {
            Ok(RiskLevel(eps))
        } else {
            domain(format!("relaxed risk level must lie in (0, 1), got {eps}"))
        }
    }

    pub fn eps(self) -> f64 {
        self.0
    }

    /// True when `eps <= 1/2`.
    pub fn is_standard(self) -> bool {
        self.0 <= 0.5
    }

    /// `eps / factor`, e.g. the level at which an alpha-approximation becomes
    /// conservative.
    pub fn scaled(self, factor: f64) -> Result<Self> {
        if !(factor >= 1.0) {
            return domain(format!("scaling factor must be >= 1, got {factor}"));
        }
        RiskLevel::new(self.0 / factor)
    }
}

impl TryFrom<f64> for RiskLevel {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        RiskLevel::new(v)
    }
}

impl From<RiskLevel> for f64 {
    fn from(r: RiskLevel) -> f64 {
        r.0
    }
}

/// Lower and upper integration limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(t * self.x + (1.0 - t) * other.x, t * self.y + (1.0 - t) * other.y)
    }
}

/// A point of R^3 tested against the conic hull; `z` is the scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConePoint3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ConePoint3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        ConePoint3 { x, y, z }
    }
}

/// Halfplane `a1 x + a2 y <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Halfplane2 {
    pub a1: f64,
    pub a2: f64,
    pub rhs: f64,
}

impl Halfplane2 {
    pub fn new(a1: f64, a2: f64, rhs: f64) -> Result<Self> {
        if a1 == 0.0 && a2 == 0.0 {
            return domain("halfplane normal must be nonzero");
        }
        Ok(Halfplane2 { a1, a2, rhs })
    }

    /// `a1 x + a2 y - rhs`; positive means the point violates the cut.
    pub fn violation(&self, p: Point2) -> f64 {
        self.a1 * p.x + self.a2 * p.y - self.rhs
    }

    /// Same halfplane with a unit Euclidean normal.
    pub fn normalized(&self) -> Halfplane2 {
        let n = self.a1.hypot(self.a2);
        Halfplane2 { a1: self.a1 / n, a2: self.a2 / n, rhs: self.rhs / n }
    }

    fn scaled_to_unit_max(a1: f64, a2: f64, rhs: f64) -> Halfplane2 {
        let s = a1.abs().max(a2.abs());
        Halfplane2 { a1: a1 / s, a2: a2 / s, rhs: rhs / s }
    }

    /// Gap `rhs - support(a1, a2)`. Nonnegative (up to solver tolerance)
    /// exactly when the cut is valid for S(eps); zero when tangent.
    pub fn slack(&self, eps: RiskLevel) -> Result<f64> {
        Ok(self.rhs - support(self.a1, self.a2, eps)?.value)
    }

    /// Homogenized cut `a1 x + a2 y - rhs z <= 0` on the conic hull.
    pub fn lift(&self) -> Halfspace3 {
        Halfspace3 { a: [self.a1, self.a2, -self.rhs] }
    }
}

/// Homogeneous halfspace `a . q <= 0` in `(x, y, z)` space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Halfspace3 {
    pub a: [f64; 3],
}

impl Halfspace3 {
    pub fn value(&self, q: ConePoint3) -> f64 {
        self.a[0] * q.x + self.a[1] * q.y + self.a[2] * q.z
    }

    /// Signed Euclidean distance of `q` beyond the hyperplane.
    pub fn violation(&self, q: ConePoint3) -> f64 {
        let n = (self.a[0] * self.a[0] + self.a[1] * self.a[1] + self.a[2] * self.a[2]).sqrt();
        self.value(q) / n
    }
}

/// Boundary parameter `lambda in (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BoundaryParam(f64);

impl BoundaryParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda > 0.0 && lambda < 1.0 {
            Ok(BoundaryParam(lambda))
        } else {
            domain(format!("boundary parameter must lie in (0, 1), got {lambda}"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `Phi(y) - Phi(x)` clamped to `[0, 1]`.
pub fn mass(p: Point2) -> f64 {
    interval_mass(p.x, p.y).clamp(0.0, 1.0)
}

/// Total tail mass `Phi(x) + 1 - Phi(y)`, i.e. the probability left outside
/// `[x, y]`. Evaluated without cancellation.
pub fn tail_mass(p: Point2) -> f64 {
    if p.y < p.x {
        return 1.0 + interval_mass(p.y, p.x);
    }
    cdf(p.x) + sf(p.y)
}

/// Membership in S(eps): `mass(p) >= 1 - eps`.
///
/// The comparison is made on the tail mass, which is accurate on both sides
/// of the origin, and only allows a few ulps of rounding; callers that need
/// real slack should use [`contains_within`].
pub fn contains(p: Point2, eps: RiskLevel) -> bool {
    tail_mass(p) <= eps.eps() * (1.0 + ROUNDING_SLACK)
}

/// Approximate membership `mass(p) >= 1 - eps - tol`.
pub fn contains_within(p: Point2, eps: RiskLevel, tol: f64) -> bool {
    tail_mass(p) <= eps.eps() + tol
}

/// Membership in the closed conic hull.
pub fn cone_contains(q: ConePoint3, eps: RiskLevel) -> bool {
    if q.z < 0.0 || q.z.is_nan() {
        false
    } else if q.z == 0.0 {
        q.x <= 0.0 && q.y >= 0.0
    } else {
        contains(Point2::new(q.x / q.z, q.y / q.z), eps)
    }
}

/// `q2` dominates `q1` when it has a larger lower limit, a smaller upper
/// limit and a larger scale. For `eps <= 1/2`, membership of `q2` then implies
/// membership of `q1` whenever `q1.z >= 0`.
pub fn monotone_dominates(q1: ConePoint3, q2: ConePoint3) -> bool {
    q2.x >= q1.x && q2.y <= q1.y && q2.z >= q1.z
}

fn lower_at(lambda: f64, eps: f64) -> f64 {
    gauss::quantile(lambda * eps).unwrap_or(f64::NEG_INFINITY)
}

fn upper_at(lambda: f64, eps: f64) -> f64 {
    gauss::quantile_upper((1.0 - lambda) * eps).unwrap_or(f64::INFINITY)
}

/// Boundary point `(Phi^-1(lambda eps), Phi^-1(1 - (1 - lambda) eps))`.
pub fn boundary_point(lambda: BoundaryParam, eps: RiskLevel) -> Point2 {
    Point2::new(lower_at(lambda.0, eps.0), upper_at(lambda.0, eps.0))
}

/// Tangent halfplane at `boundary_point(lambda)`, including the limits
/// `lambda = 0` (the cut `y >= Phi^-1(1 - eps)`) and `lambda = 1`
/// (the cut `x <= Phi^-1(eps)`). Coefficients are scaled so the larger
/// magnitude equals one.
pub fn tangent_at(lambda: f64, eps: RiskLevel) -> Result<Halfplane2> {
    if !(0.0..=1.0).contains(&lambda) {
        return domain(format!("tangent parameter must lie in [0, 1], got {lambda}"));
    }
    let e = eps.0;
    if lambda == 0.0 {
        let y = gauss::quantile_upper(e)?;
        return Ok(Halfplane2 { a1: 0.0, a2: -1.0, rhs: -y });
    }
    if lambda == 1.0 {
        let x = gauss::quantile(e)?;
        return Ok(Halfplane2 { a1: 1.0, a2: 0.0, rhs: x });
    }
    let p = boundary_point(BoundaryParam(lambda), eps);
    Ok(tangent_through(p))
}

// Outward normal of S at a boundary point is (phi(x), -phi(y)).
fn tangent_through(p: Point2) -> Halfplane2 {
    let (a1, a2) = (pdf(p.x), -pdf(p.y));
    if a1 == 0.0 && a2 == 0.0 {
        // both densities underflow; the point is deep in a corner
        return if p.x.abs() >= p.y.abs() {
            Halfplane2 { a1: 0.0, a2: -1.0, rhs: -p.y }
        } else {
            Halfplane2 { a1: 1.0, a2: 0.0, rhs: p.x }
        };
    }
    Halfplane2::scaled_to_unit_max(a1, a2, a1 * p.x + a2 * p.y)
}

/// Value of the support function together with the boundary point attaining
/// it, when the supremum is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub value: f64,
    pub maximizer: Option<Point2>,
    pub lambda: Option<f64>,
}

/// Support function `sup { a1 x + a2 y : (x, y) in S(eps) }`.
///
/// Directions with `a1 < 0` or `a2 > 0` follow one of the recession rays
/// `(-1, 0)` or `(0, 1)` and give `+inf`. The axis directions `(0, -1)` and
/// `(1, 0)` are the `lambda -> 0` and `lambda -> 1` limits and evaluate to
/// `a2 Phi^-1(1 - eps)` and `a1 Phi^-1(eps)` without being attained. The
/// remaining quadrant is a strictly convex search over lambda.
pub fn support(a1: f64, a2: f64, eps: RiskLevel) -> Result<Support> {
    if a1 == 0.0 && a2 == 0.0 {
        return domain("support direction must be nonzero");
    }
    if a1.is_nan() || a2.is_nan() {
        return domain("support direction has NaN");
    }
    let e = eps.0;
    if a1 < 0.0 || a2 > 0.0 {
        return Ok(Support { value: f64::INFINITY, maximizer: None, lambda: None });
    }
    if a1 == 0.0 {
        return Ok(Support { value: a2 * gauss::quantile_upper(e)?, maximizer: None, lambda: None });
    }
    if a2 == 0.0 {
        return Ok(Support { value: a1 * gauss::quantile(e)?, maximizer: None, lambda: None });
    }
    // minimize h(l) = -(a1 x(l) + a2 y(l)); dx/dl = e / phi(x), d2x/dl2 = e^2 x / phi(x)^2
    let h = |l: f64| -(a1 * lower_at(l, e) + a2 * upper_at(l, e));
    let dh = |l: f64| {
        let (x, y) = (lower_at(l, e), upper_at(l, e));
        -(a1 * e / pdf(x) + a2 * e / pdf(y))
    };
    let d2h = |l: f64| {
        let (x, y) = (lower_at(l, e), upper_at(l, e));
        let (px, py) = (pdf(x), pdf(y));
        -(a1 * e * e * x / (px * px) + a2 * e * e * y / (py * py))
    };
    let m = gauss::minimize_newton(h, dh, d2h, LAMBDA_CLAMP, 1.0 - LAMBDA_CLAMP, LAMBDA_TOL);
    let p = Point2::new(lower_at(m.argmin, e), upper_at(m.argmin, e));
    Ok(Support { value: a1 * p.x + a2 * p.y, maximizer: Some(p), lambda: Some(m.argmin) })
}

/// Second derivative in lambda of `a x(lambda) + b y(lambda)` along the
/// boundary. Positive for `a < 0 < b`, which makes the support search
/// strictly convex.
pub fn boundary_linear_curvature(a: f64, b: f64, lambda: BoundaryParam, eps: RiskLevel) -> f64 {
    let e = eps.0;
    let x = lower_at(lambda.0, e);
    let y = upper_at(lambda.0, e);
    let two_pi = 2.0 * std::f64::consts::PI;
    two_pi * a * e * e * x * (x * x).exp() + two_pi * b * e * e * y * (y * y).exp()
}

/// Euclidean projection onto S(eps) of an exterior point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: Point2,
    pub lambda: BoundaryParam,
}

/// Orthogonal projection of `p` onto S(eps).
///
/// The projection lies on the boundary between the horizontal and vertical
/// projections of `p`, so the search runs over the restricted window
/// `lambda in (1 - (1 - Phi(p.y)) / eps, Phi(p.x) / eps)`. Points whose window
/// sits close to `lambda = 1` are handled through the reflection
/// `(x, y) -> (-y, -x)`, which maps S(eps) onto itself and `lambda` to
/// `1 - lambda`, so the window is always resolved near zero in full relative
/// precision.
pub fn project(p: Point2, eps: RiskLevel) -> Result<Projection> {
    if !(p.x.is_finite() && p.y.is_finite()) {
        return domain("projection needs a finite point");
    }
    if contains(p, eps) {
        return Err(Error::AlreadyMember);
    }
    let e = eps.0;
    let lo = (1.0 - sf(p.y) / e).max(0.0);
    let hi = (cdf(p.x) / e).min(1.0);
    if lo + hi > 1.0 {
        let r = project_low_window(Point2::new(-p.y, -p.x), e)?;
        return Ok(Projection {
            point: Point2::new(-r.point.y, -r.point.x),
            lambda: BoundaryParam((1.0 - r.lambda.0).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)),
        });
    }
    project_low_window(p, e)
}

// Projection when the lambda window is closer to 0 than to 1.
fn project_low_window(p: Point2, e: f64) -> Result<Projection> {
    let lo = (1.0 - sf(p.y) / e).max(0.0);
    let hi = (cdf(p.x) / e).min(1.0);
    if !(hi > lo) || hi < 1e-290 {
        // window collapsed: the boundary is flat at this resolution and the
        // vertical projection is exact to double precision
        let y = gauss::quantile_upper(e - cdf(p.x)).unwrap_or(f64::INFINITY);
        let lambda = (cdf(p.x) / e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        return Ok(Projection { point: Point2::new(p.x, y), lambda: BoundaryParam(lambda) });
    }
    let width = hi - lo;
    let lam = |u: f64| lo + width * u;
    let h = |u: f64| {
        let l = lam(u);
        let dx = lower_at(l, e) - p.x;
        let dy = upper_at(l, e) - p.y;
        0.5 * (dx * dx + dy * dy)
    };
    let dh = |u: f64| {
        let l = lam(u);
        let (x, y) = (lower_at(l, e), upper_at(l, e));
        width * ((x - p.x) * e / pdf(x) + (y - p.y) * e / pdf(y))
    };
    let d2h = |u: f64| {
        let l = lam(u);
        let (x, y) = (lower_at(l, e), upper_at(l, e));
        let (gx, gy) = (e / pdf(x), e / pdf(y));
        width * width * (gx * gx + (x - p.x) * x * gx * gx + gy * gy + (y - p.y) * y * gy * gy)
    };
    let m = gauss::minimize_newton(h, dh, d2h, LAMBDA_CLAMP, 1.0 - LAMBDA_CLAMP, LAMBDA_TOL);
    let l = lam(m.argmin);
    let point = Point2::new(lower_at(l, e), upper_at(l, e));
    if !(point.x.is_finite() && point.y.is_finite()) {
        return Err(Error::NonConvergence { what: "projection onto S(eps)", estimate: l });
    }
    Ok(Projection { point, lambda: BoundaryParam(l.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)) })
}

/// Separating halfplane from the gradient of `f = 1 - eps - Phi(y) + Phi(x)`.
///
/// `f` is convex on the quadrant `x <= 0 <= y`, which contains S(eps) for
/// `eps <= 1/2`, so the linearization is taken at the clamp
/// `(min(p.x, 0), max(p.y, 0))` of `p` onto that quadrant; inside the
/// quadrant this is `p` itself. The cut is valid but generally not tangent.
/// Coefficients are scaled so the larger magnitude equals one; when both
/// densities underflow the tangent cut is returned instead.
pub fn separate_gradient(p: Point2, eps: RiskLevel) -> Result<Halfplane2> {
    if !eps.is_standard() {
        return domain("gradient cuts need eps <= 1/2");
    }
    if contains(p, eps) {
        return Err(Error::AlreadyMember);
    }
    let c = Point2::new(p.x.min(0.0), p.y.max(0.0));
    let f = tail_mass(c) - eps.0; // = 1 - eps - mass(c) > 0
    let (g1, g2) = (pdf(c.x), -pdf(c.y));
    if g1 == 0.0 && g2 == 0.0 {
        return separate_tangent(p, eps);
    }
    Ok(Halfplane2::scaled_to_unit_max(g1, g2, g1 * c.x + g2 * c.y - f))
}

/// Tangent separating halfplane at the projection of `p` onto S(eps).
/// The normal is the outward boundary normal at the projected point, which
/// is parallel to `p - proj`; coefficients are scaled so the larger
/// magnitude equals one.
pub fn separate_tangent(p: Point2, eps: RiskLevel) -> Result<Halfplane2> {
    let proj = project(p, eps)?;
    Ok(tangent_through(proj.point))
}

/// Which planar oracle to lift into the conic hull.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutKind {
    #[default]
    Tangent,
    Gradient,
}

/// Homogeneous cut separating `q` from the conic hull.
///
/// `z < 0` yields `-z <= 0`; `z = 0` yields `x <= 0` or `-y <= 0`; `z > 0`
/// lifts the planar cut at `(x/z, y/z)`.
pub fn cone_separate(q: ConePoint3, eps: RiskLevel, kind: CutKind) -> Result<Halfspace3> {
    if q.z < 0.0 {
        return Ok(Halfspace3 { a: [0.0, 0.0, -1.0] });
    }
    if cone_contains(q, eps) {
        return Err(Error::AlreadyMember);
    }
    if q.z == 0.0 {
        return Ok(if q.x > 0.0 {
            Halfspace3 { a: [1.0, 0.0, 0.0] }
        } else {
            Halfspace3 { a: [0.0, -1.0, 0.0] }
        });
    }
    let p = Point2::new(q.x / q.z, q.y / q.z);
    let cut = match kind {
        CutKind::Tangent => separate_tangent(p, eps)?,
        CutKind::Gradient => separate_gradient(p, eps)?,
    };
    Ok(cut.lift())
}

/// Smooth representation of the conic hull for derivative-based solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothForm {
    /// `z (log(Phi(y/z) - Phi(x/z)) - log(1 - eps))`, concave for all eps.
    Log,
    /// `z (Phi(y/z) - Phi(x/z) - (1 - eps))`, concave on the set for eps <= 1/2.
    Plain,
}

/// Value and gradient of the concave constraint function (feasible iff
/// value >= 0) at `q` with `q.z > 0`.
pub fn smooth_value_grad(q: ConePoint3, eps: RiskLevel, form: SmoothForm) -> Result<(f64, [f64; 3])> {
    if !(q.z > 0.0) {
        return domain(format!("smooth representation needs z > 0, got {}", q.z));
    }
    let (u, v) = (q.x / q.z, q.y / q.z);
    let m = interval_mass(u, v);
    let (pu, pv) = (pdf(u), pdf(v));
    let target = 1.0 - eps.0;
    match form {
        SmoothForm::Plain => {
            let val = q.z * (m - target);
            Ok((val, [-pu, pv, m - target + u * pu - v * pv]))
        }
        SmoothForm::Log => {
            if !(m > 0.0) {
                return domain("log form undefined where Phi(y/z) <= Phi(x/z)");
            }
            let log_target = (-eps.0).ln_1p();
            let val = q.z * (m.ln() - log_target);
            Ok((val, [-pu / m, pv / m, m.ln() - log_target + (u * pu - v * pv) / m]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn eps(e: f64) -> RiskLevel {
        RiskLevel::new(e).unwrap()
    }

    #[test]
    fn risk_level_ranges() {
        assert!(RiskLevel::new(0.0).is_err());
        assert!(RiskLevel::new(0.6).is_err());
        assert!(RiskLevel::new(0.5).is_ok());
        let r = RiskLevel::relaxed(0.7).unwrap();
        assert!(!r.is_standard());
        assert!(RiskLevel::relaxed(1.0).is_err());
        assert_abs_diff_eq!(eps(0.5).scaled(1.25).unwrap().eps(), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn mass_examples() {
        assert_abs_diff_eq!(mass(Point2::new(-2.0, 2.0)), 0.954_499_736_1, epsilon = 1e-10);
        assert_eq!(mass(Point2::new(0.0, 0.0)), 0.0);
        let e = 0.07;
        let q = Point2::new(gauss::quantile(e).unwrap(), gauss::quantile(1.0 - e).unwrap());
        assert_abs_diff_eq!(mass(q), 1.0 - 2.0 * e, epsilon = 1e-14);
    }

    #[test]
    fn membership_examples() {
        assert!(contains(Point2::new(-2.0, 2.0), eps(0.05)));
        assert!(!contains(Point2::new(0.0, 0.0), eps(0.05)));
        assert!(!contains(Point2::new(3.0, -3.0), eps(0.5)));
        assert!(contains_within(Point2::new(-1.95, 1.95), eps(0.05), 2e-3));
    }

    #[test]
    fn cone_membership_examples() {
        assert!(cone_contains(ConePoint3::new(-2.0, 2.0, 1.0), eps(0.05)));
        assert!(cone_contains(ConePoint3::new(-1.0, 1.0, 0.0), eps(0.05)));
        assert!(!cone_contains(ConePoint3::new(1.0, 2.0, 0.0), eps(0.05)));
        assert!(!cone_contains(ConePoint3::new(-5.0, 5.0, -1.0), eps(0.05)));
        assert!(cone_contains(ConePoint3::new(-4.0, 4.0, 2.0), eps(0.05)));
    }

    #[test]
    fn dominance_examples() {
        let q1 = ConePoint3::new(-3.0, 3.0, 0.5);
        let q2 = ConePoint3::new(-2.0, 2.0, 1.0);
        assert!(monotone_dominates(q1, q2));
        assert!(cone_contains(q2, eps(0.05)) && cone_contains(q1, eps(0.05)));
        assert!(monotone_dominates(q1, q1));
        assert!(!monotone_dominates(ConePoint3::new(-1.0, 1.0, 2.0), q2));
    }

    #[test]
    fn boundary_examples() {
        for e in [0.01, 0.2, 0.5] {
            let p = boundary_point(BoundaryParam::new(0.5).unwrap(), eps(e));
            let q = gauss::quantile(e / 2.0).unwrap();
            assert_abs_diff_eq!(p.x, q, epsilon = 1e-14);
            assert_abs_diff_eq!(p.y, -q, epsilon = 1e-14);
        }
        let p = boundary_point(BoundaryParam::new(0.3).unwrap(), eps(0.1));
        assert_abs_diff_eq!(mass(p), 0.9, epsilon = 1e-12);
        // lambda -> 1: x approaches Phi^-1(eps) and y diverges
        let p = boundary_point(BoundaryParam::new(1.0 - 1e-12).unwrap(), eps(0.1));
        assert_abs_diff_eq!(p.x, gauss::quantile(0.1).unwrap(), epsilon = 1e-10);
        assert!(p.y > 7.0);
        assert!(BoundaryParam::new(1.0).is_err());
        assert!(BoundaryParam::new(0.0).is_err());
    }

    #[test]
    fn boundary_points_are_members_with_equality() {
        for e in [0.01, 0.05, 0.1, 0.25, 0.5] {
            for i in 1..100 {
                let p = boundary_point(BoundaryParam::new(i as f64 / 100.0).unwrap(), eps(e));
                assert!(contains(p, eps(e)), "eps={e} i={i}");
                assert_abs_diff_eq!(mass(p), 1.0 - e, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn support_examples() {
        for e in [0.01, 0.05, 0.3] {
            let s = support(1.0, -1.0, eps(e)).unwrap();
            assert_abs_diff_eq!(s.value, 2.0 * gauss::quantile(e / 2.0).unwrap(), epsilon = 1e-9);
            assert_abs_diff_eq!(s.lambda.unwrap(), 0.5, epsilon = 1e-9);
        }
        assert_eq!(support(-1.0, 0.0, eps(0.05)).unwrap().value, f64::INFINITY);
        assert_eq!(support(1.0, 0.5, eps(0.05)).unwrap().value, f64::INFINITY);
        let s = support(0.0, -1.0, eps(0.05)).unwrap();
        assert_abs_diff_eq!(s.value, -gauss::quantile(0.95).unwrap(), epsilon = 1e-12);
        let s = support(2.0, 0.0, eps(0.05)).unwrap();
        assert_abs_diff_eq!(s.value, 2.0 * gauss::quantile(0.05).unwrap(), epsilon = 1e-12);
        assert!(support(0.0, 0.0, eps(0.05)).is_err());
    }

    #[test]
    fn support_axis_limits_match_lambda_limits() {
        // the closed-form edge cases are the lambda -> 0 and lambda -> 1 limits
        let e = eps(0.05);
        let near0 = support(1e-9, -1.0, e).unwrap().value;
        assert_abs_diff_eq!(near0, support(0.0, -1.0, e).unwrap().value, epsilon = 1e-6);
        let near1 = support(1.0, -1e-9, e).unwrap().value;
        assert_abs_diff_eq!(near1, support(1.0, 0.0, e).unwrap().value, epsilon = 1e-6);
    }

    #[test]
    fn support_matches_dense_boundary_scan() {
        let e = eps(0.1);
        for (a1, a2) in [(1.0, -0.3), (0.2, -1.0), (3.0, -2.0)] {
            let s = support(a1, a2, e).unwrap().value;
            let mut best = f64::NEG_INFINITY;
            for i in 1..20_000 {
                let p = boundary_point(BoundaryParam::new(i as f64 / 20_000.0).unwrap(), e);
                best = best.max(a1 * p.x + a2 * p.y);
            }
            assert!(s >= best - 1e-12);
            assert_abs_diff_eq!(s, best, epsilon = 1e-6);
        }
    }

    #[test]
    fn support_objective_is_strictly_convex() {
        for e in [0.01, 0.1, 0.5] {
            for i in 1..50 {
                let l = BoundaryParam::new(i as f64 / 50.0).unwrap();
                assert!(boundary_linear_curvature(-1.0, 0.7, l, eps(e)) > 0.0);
            }
        }
    }

    #[test]
    fn projection_at_origin_is_symmetric() {
        let e = eps(0.05);
        let pr = project(Point2::new(0.0, 0.0), e).unwrap();
        let q = gauss::quantile(0.025).unwrap();
        assert_abs_diff_eq!(pr.lambda.get(), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(pr.point.x, q, epsilon = 1e-9);
        assert_abs_diff_eq!(pr.point.y, -q, epsilon = 1e-9);
        assert_eq!(project(Point2::new(-3.0, 3.0), e).unwrap_err(), Error::AlreadyMember);
    }

    #[test]
    fn projection_matches_lambda_grid_scan() {
        let e = eps(0.05);
        let p = Point2::new(gauss::quantile(0.05).unwrap() + 0.1, gauss::quantile(0.95).unwrap());
        let pr = project(p, e).unwrap();
        assert!(pr.point.y >= gauss::quantile(0.95).unwrap());
        let mut best = (f64::INFINITY, Point2::new(0.0, 0.0));
        for i in 1..200_000 {
            let q = boundary_point(BoundaryParam::new(i as f64 / 200_000.0).unwrap(), e);
            let d = q.dist(p);
            if d < best.0 {
                best = (d, q);
            }
        }
        assert!(pr.point.dist(p) <= best.0 + 1e-12);
        assert_abs_diff_eq!(pr.point.dist(p), best.0, epsilon = 1e-7);
    }

    #[test]
    fn projection_far_along_axes() {
        let e = eps(0.05);
        let pr = project(Point2::new(-100.0, 0.0), e).unwrap();
        assert_abs_diff_eq!(pr.point.x, -100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pr.point.y, gauss::quantile(0.95).unwrap(), epsilon = 1e-12);
        let pr = project(Point2::new(0.0, 100.0), e).unwrap();
        assert_abs_diff_eq!(pr.point.y, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pr.point.x, gauss::quantile(0.05).unwrap(), epsilon = 1e-12);
        let pr = project(Point2::new(30.0, -30.0), e).unwrap();
        assert!(contains_within(pr.point, e, 1e-12));
    }

    #[test]
    fn gradient_cut_at_origin_is_the_weak_cut() {
        for e in [0.05, 0.2] {
            let cut = separate_gradient(Point2::new(0.0, 0.0), eps(e)).unwrap();
            assert_abs_diff_eq!(cut.a1, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(cut.a2, -1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(cut.rhs, -gauss::SQRT_2PI * (1.0 - e), epsilon = 1e-12);
        }
        // valid but not tangent at eps = 0.05
        let cut = separate_gradient(Point2::new(0.0, 0.0), eps(0.05)).unwrap();
        let sup = support(1.0, -1.0, eps(0.05)).unwrap().value;
        assert!(sup < cut.rhs - 1.0);
    }

    #[test]
    fn tangent_cut_at_origin_is_the_strong_cut() {
        let cut = separate_tangent(Point2::new(0.0, 0.0), eps(0.05)).unwrap();
        assert_abs_diff_eq!(cut.a1, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cut.a2, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cut.rhs, 2.0 * gauss::quantile(0.025).unwrap(), epsilon = 1e-8);
        assert_abs_diff_eq!(cut.slack(eps(0.05)).unwrap(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn tangent_cut_violation_equals_distance() {
        let e = eps(0.1);
        let p = Point2::new(-0.4, 1.1);
        let pr = project(p, e).unwrap();
        let cut = separate_tangent(p, e).unwrap().normalized();
        assert_abs_diff_eq!(cut.violation(p), p.dist(pr.point), epsilon = 1e-9);
        assert!(cut.violation(p) > 0.0);
    }

    #[test]
    fn cuts_reject_members() {
        let p = Point2::new(-3.0, 3.0);
        assert_eq!(separate_gradient(p, eps(0.05)).unwrap_err(), Error::AlreadyMember);
        assert_eq!(separate_tangent(p, eps(0.05)).unwrap_err(), Error::AlreadyMember);
    }

    #[test]
    fn nudged_boundary_point_is_separated() {
        let e = eps(0.05);
        let b = boundary_point(BoundaryParam::new(0.3).unwrap(), e);
        let p = Point2::new(b.x + 1e-4, b.y - 1e-4);
        assert!(separate_gradient(p, e).unwrap().violation(p) > 0.0);
        assert!(separate_tangent(p, e).unwrap().violation(p) > 0.0);
    }

    #[test]
    fn cone_cuts() {
        let e = eps(0.05);
        let cut = cone_separate(ConePoint3::new(0.0, 0.0, 1.0), e, CutKind::Tangent).unwrap();
        let q = gauss::quantile(0.025).unwrap();
        assert_abs_diff_eq!(cut.a[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cut.a[1], -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cut.a[2], -2.0 * q, epsilon = 1e-8);
        let cut = cone_separate(ConePoint3::new(1.0, 5.0, 0.0), e, CutKind::Tangent).unwrap();
        assert_eq!(cut.a, [1.0, 0.0, 0.0]);
        let cut = cone_separate(ConePoint3::new(-1.0, -5.0, 0.0), e, CutKind::Tangent).unwrap();
        assert_eq!(cut.a, [0.0, -1.0, 0.0]);
        let cut = cone_separate(ConePoint3::new(-1.0, 1.0, -2.0), e, CutKind::Tangent).unwrap();
        assert_eq!(cut.a, [0.0, 0.0, -1.0]);
        assert!(cone_separate(ConePoint3::new(-4.0, 4.0, 1.0), e, CutKind::Gradient).is_err());
    }

    #[test]
    fn smooth_forms_at_unit_scale() {
        let e = eps(0.05);
        let q = ConePoint3::new(-1.5, 2.5, 1.0);
        let (v, g) = smooth_value_grad(q, e, SmoothForm::Plain).unwrap();
        assert_abs_diff_eq!(v, cdf(2.5) - cdf(-1.5) - 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(g[0], -pdf(-1.5), epsilon = 1e-15);
        let b = boundary_point(BoundaryParam::new(0.4).unwrap(), e);
        let (v, _) = smooth_value_grad(ConePoint3::new(b.x, b.y, 1.0), e, SmoothForm::Log).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-13);
        assert!(smooth_value_grad(ConePoint3::new(-1.0, 1.0, 0.0), e, SmoothForm::Plain).is_err());
        assert!(smooth_value_grad(ConePoint3::new(1.0, -1.0, 1.0), e, SmoothForm::Log).is_err());
    }
}
