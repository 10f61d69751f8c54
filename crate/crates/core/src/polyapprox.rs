//! Polyhedral outer approximations of S(eps) and their approximation factors.
//!
//! A polyhedron `P` containing S(eps) is an alpha-approximation when every
//! point of `P` captures at least `1 - alpha eps` mass. Because the mass is
//! monotone along the two recession rays `(-1, 0)` and `(0, 1)`, the factor is
//! attained at a vertex.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::gauss;
use crate::seps::{self, tail_mass, Halfplane2, Point2, RiskLevel};

const FEAS_TOL: f64 = 1e-9;
const RAY_TOL: f64 = 1e-12;
const CUT_VALIDITY_TOL: f64 = 1e-9;

/// Intersection of finitely many halfplanes, with its vertices and extreme
/// rays precomputed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polyhedron2 {
    pub cuts: Vec<Halfplane2>,
    pub vertices: Vec<Point2>,
    pub rays: Vec<[f64; 2]>,
}

impl Polyhedron2 {
    /// Enumerates vertices by pairwise intersection and rays from the
    /// directions along each cut boundary that recede in every cut.
    pub fn from_cuts(cuts: Vec<Halfplane2>) -> Self {
        let feasible = |p: Point2| {
            cuts.iter().all(|c| c.violation(p) <= FEAS_TOL * (1.0 + c.rhs.abs()))
        };
        let mut vertices: Vec<Point2> = Vec::new();
        for i in 0..cuts.len() {
            for j in i + 1..cuts.len() {
                let (c, d) = (&cuts[i], &cuts[j]);
                let det = c.a1 * d.a2 - c.a2 * d.a1;
                if det.abs() <= 1e-14 {
                    continue;
                }
                let p = Point2::new(
                    (c.rhs * d.a2 - c.a2 * d.rhs) / det,
                    (c.a1 * d.rhs - c.rhs * d.a1) / det,
                );
                if feasible(p) && !vertices.iter().any(|v| v.dist(p) <= 1e-9) {
                    vertices.push(p);
                }
            }
        }
        vertices.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));

        let mut rays: Vec<[f64; 2]> = Vec::new();
        for c in &cuts {
            let n = c.a1.hypot(c.a2);
            for d in [[-c.a2 / n, c.a1 / n], [c.a2 / n, -c.a1 / n]] {
                let recedes = cuts.iter().all(|k| {
                    (k.a1 * d[0] + k.a2 * d[1]) / k.a1.hypot(k.a2) <= RAY_TOL
                });
                let fresh = !rays.iter().any(|r| (r[0] - d[0]).abs() + (r[1] - d[1]).abs() <= 1e-9);
                if recedes && fresh {
                    rays.push(d);
                }
            }
        }
        rays.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        Polyhedron2 { cuts, vertices, rays }
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.cuts.iter().all(|c| c.violation(p) <= tol)
    }

    /// Smallest Gaussian mass over the vertices.
    pub fn min_vertex_mass(&self) -> f64 {
        self.vertices.iter().map(|&v| seps::mass(v)).fold(f64::INFINITY, f64::min)
    }

    /// True when the extreme rays are exactly `(-1, 0)` and `(0, 1)`.
    pub fn has_canonical_rays(&self) -> bool {
        let close = |r: &[f64; 2], t: [f64; 2]| (r[0] - t[0]).abs() <= RAY_TOL && (r[1] - t[1]).abs() <= RAY_TOL;
        self.rays.len() == 2 && close(&self.rays[0], [-1.0, 0.0]) && close(&self.rays[1], [0.0, 1.0])
    }
}

/// Outer approximation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    /// The two axis cuts.
    A,
    /// Axis cuts plus the symmetric `x - y` cut.
    B,
    /// Tangent cuts at `lambda = i / (n - 1)`, `i = 0..n`.
    Tangent(usize),
}

impl Family {
    pub fn build(self, eps: RiskLevel) -> Result<Polyhedron2> {
        match self {
            Family::A => build_a(eps),
            Family::B => build_b(eps),
            Family::Tangent(n) => build_tangent(eps, n),
        }
    }
}

fn need_standard(eps: RiskLevel) -> Result<()> {
    if eps.is_standard() {
        Ok(())
    } else {
        domain("polyhedral families need eps <= 1/2")
    }
}

/// `x <= Phi^-1(eps)`, `y >= Phi^-1(1 - eps)`.
pub fn build_a(eps: RiskLevel) -> Result<Polyhedron2> {
    need_standard(eps)?;
    let q = gauss::quantile(eps.eps())?;
    Ok(Polyhedron2::from_cuts(vec![
        Halfplane2 { a1: 1.0, a2: 0.0, rhs: q },
        Halfplane2 { a1: 0.0, a2: -1.0, rhs: q },
    ]))
}

/// `A` plus `x - y <= 2 Phi^-1(eps / 2)`.
pub fn build_b(eps: RiskLevel) -> Result<Polyhedron2> {
    need_standard(eps)?;
    let e = eps.eps();
    let q = gauss::quantile(e)?;
    let h = gauss::quantile(e / 2.0)?;
    Ok(Polyhedron2::from_cuts(vec![
        Halfplane2 { a1: 1.0, a2: 0.0, rhs: q },
        Halfplane2 { a1: 0.0, a2: -1.0, rhs: q },
        Halfplane2 { a1: 1.0, a2: -1.0, rhs: 2.0 * h },
    ]))
}

/// Tangent cuts on the uniform grid `lambda_i = i / (n - 1)`, which includes
/// the two axis cuts as the `lambda = 0, 1` limits.
pub fn build_tangent(eps: RiskLevel, n_cuts: usize) -> Result<Polyhedron2> {
    need_standard(eps)?;
    if n_cuts < 2 {
        return domain(format!("a tangent family needs at least 2 cuts, got {n_cuts}"));
    }
    let cuts = (0..n_cuts)
        .map(|i| seps::tangent_at(i as f64 / (n_cuts - 1) as f64, eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(Polyhedron2::from_cuts(cuts))
}

/// Approximation factor of an outer polyhedron, read off its vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaCertificate {
    pub alpha: f64,
    pub worst_vertex: Point2,
    /// `(1 - eps) - mass(worst_vertex)`.
    pub worst_mass_deficit: f64,
}

/// Certifies `P` as an alpha-approximation of S(eps).
///
/// Fails when the rays are not exactly `(-1, 0)` and `(0, 1)` (no finite
/// factor exists) or when some cut cuts into S(eps).
pub fn certify_alpha(p: &Polyhedron2, eps: RiskLevel) -> Result<AlphaCertificate> {
    need_standard(eps)?;
    if !p.has_canonical_rays() {
        return domain(format!(
            "rays {:?} differ from (-1, 0), (0, 1); no approximation factor exists",
            p.rays
        ));
    }
    for c in &p.cuts {
        let slack = c.slack(eps)?;
        if slack < -CUT_VALIDITY_TOL {
            return domain(format!("cut {c:?} is not valid for S(eps): slack {slack:e}"));
        }
    }
    let e = eps.eps();
    let mut best: Option<(f64, Point2)> = None;
    for &v in &p.vertices {
        let tail = tail_mass(v);
        if best.is_none_or(|(t, _)| tail > t) {
            best = Some((tail, v));
        }
    }
    let Some((tail, v)) = best else {
        return domain("polyhedron has no vertices");
    };
    Ok(AlphaCertificate { alpha: tail / e, worst_vertex: v, worst_mass_deficit: tail - e })
}

/// The family evaluated at `eps / alpha`, which lies inside S(eps) whenever
/// the family is an alpha-approximation.
pub fn build_conservative(family: Family, eps: RiskLevel, alpha: f64) -> Result<Polyhedron2> {
    family.build(eps.scaled(alpha)?)
}

/// One grid point of the tail-inequality check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub eps: f64,
    /// `Phi^-1(1 - eps/2) - Phi^-1(1 - eps)`
    pub tail2_lhs: f64,
    /// `Phi^-1(1 - eps/4) - Phi^-1(1 - eps/2)`
    pub tail2_rhs: f64,
    /// `Phi^-1(eps) - 2 Phi^-1(eps/2)`
    pub bound4_lhs: f64,
    /// `Phi^-1(1 - eps/4)`
    pub bound4_rhs: f64,
}

impl TailPoint {
    pub fn holds(&self) -> bool {
        self.tail2_lhs >= self.tail2_rhs && self.bound4_lhs >= self.bound4_rhs
    }
}

/// Checks behind the 1.25 factor of the three-cut family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailInequalityReport {
    pub points: Vec<TailPoint>,
    pub violations: Vec<f64>,
    /// `f'(1/2)` for `f(eps) = Phi^-1(1 - eps/2) - Phi^-1(1 - eps)`.
    pub slope_at_half: f64,
    pub slope_ok: bool,
    /// `Phi^-1(1 - eps/2)^2 - Phi^-1(1 - eps)^2` at `limit_eps`.
    pub limit_eps: f64,
    pub limit_value: f64,
    pub limit_target: f64,
    pub limit_ok: bool,
}

impl TailInequalityReport {
    pub fn all_ok(&self) -> bool {
        self.violations.is_empty() && self.slope_ok && self.limit_ok
    }
}

pub const SLOPE_TARGET: f64 = 0.93;
pub const SLOPE_TOL: f64 = 0.01;
pub const LIMIT_EPS: f64 = 1e-6;
pub const LIMIT_TOL: f64 = 1e-3;

/// Evaluates both tail inequalities on `eps_grid`, the slope of their
/// difference function at `1/2`, and the small-eps limit of the squared
/// quantile gap against `2 log 2`.
pub fn verify_tail_inequalities(eps_grid: &[f64]) -> Result<TailInequalityReport> {
    let up = |e: f64| gauss::quantile_upper(e);
    let mut points = Vec::with_capacity(eps_grid.len());
    let mut violations = Vec::new();
    for &e in eps_grid {
        RiskLevel::new(e)?;
        let p = TailPoint {
            eps: e,
            tail2_lhs: up(e / 2.0)? - up(e)?,
            tail2_rhs: up(e / 4.0)? - up(e / 2.0)?,
            bound4_lhs: gauss::quantile(e)? - 2.0 * gauss::quantile(e / 2.0)?,
            bound4_rhs: up(e / 4.0)?,
        };
        if !p.holds() {
            violations.push(e);
        }
        points.push(p);
    }
    let slope = -0.5 * gauss::quantile_derivative(0.75)? + gauss::quantile_derivative(0.5)?;
    let limit_value = up(LIMIT_EPS / 2.0)?.powi(2) - up(LIMIT_EPS)?.powi(2);
    let limit_target = 2.0 * std::f64::consts::LN_2;
    Ok(TailInequalityReport {
        points,
        violations,
        slope_at_half: slope,
        slope_ok: (slope - SLOPE_TARGET).abs() <= SLOPE_TOL,
        limit_eps: LIMIT_EPS,
        limit_value,
        limit_target,
        limit_ok: (limit_value - limit_target).abs() <= LIMIT_TOL,
    })
}

/// Certificate row for the JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateRow {
    pub family: Family,
    pub eps: f64,
    pub n_cuts: usize,
    pub n_vertices: usize,
    pub certificate: AlphaCertificate,
    pub conservative_min_mass: f64,
}

/// Certificates for `families` across `eps_grid`, with the minimum vertex
/// mass of each family taken at `eps / alpha`.
pub fn certificate_report(families: &[Family], eps_grid: &[f64]) -> Result<Vec<CertificateRow>> {
    let mut rows = Vec::new();
    for &family in families {
        for &e in eps_grid {
            let eps = RiskLevel::new(e)?;
            let p = family.build(eps)?;
            let certificate = certify_alpha(&p, eps)?;
            let conservative = build_conservative(family, eps, certificate.alpha.max(1.0))?;
            rows.push(CertificateRow {
                family,
                eps: e,
                n_cuts: p.cuts.len(),
                n_vertices: p.vertices.len(),
                certificate,
                conservative_min_mass: conservative.min_vertex_mass(),
            });
        }
    }
    Ok(rows)
}

/// The risk levels on which the three-cut factor is certified.
pub const CERTIFICATION_GRID: [f64; 7] = [1e-4, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::seps::BoundaryParam;

    fn eps(e: f64) -> RiskLevel {
        RiskLevel::new(e).unwrap()
    }

    #[test]
    fn a_family_shape() {
        let p = build_a(eps(0.5)).unwrap();
        assert_eq!(p.vertices.len(), 1);
        assert_abs_diff_eq!(p.vertices[0].x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.vertices[0].y, 0.0, epsilon = 1e-15);
        assert!(p.has_canonical_rays());
        for e in [0.01, 0.1, 0.3] {
            let p = build_a(eps(e)).unwrap();
            assert_abs_diff_eq!(seps::mass(p.vertices[0]), 1.0 - 2.0 * e, epsilon = 1e-14);
        }
        assert!(build_a(RiskLevel::relaxed(0.7).unwrap()).is_err());
    }

    #[test]
    fn b_family_vertices() {
        for e in [0.01, 0.05, 0.5] {
            let p = build_b(eps(e)).unwrap();
            let q = gauss::quantile(e).unwrap();
            let h = gauss::quantile(e / 2.0).unwrap();
            let qu = gauss::quantile_upper(e).unwrap();
            assert_eq!(p.vertices.len(), 2);
            let v1 = Point2::new(2.0 * h + qu, qu);
            let v2 = Point2::new(q, q - 2.0 * h);
            assert!(p.vertices[0].dist(v1) < 1e-12, "{:?}", p.vertices);
            assert!(p.vertices[1].dist(v2) < 1e-12);
            // symmetric under (x, y) -> (-y, -x)
            assert_abs_diff_eq!(p.vertices[0].x, -p.vertices[1].y, epsilon = 1e-12);
            assert_abs_diff_eq!(p.vertices[0].y, -p.vertices[1].x, epsilon = 1e-12);
            assert!(p.has_canonical_rays());
        }
        let p = build_b(eps(0.5)).unwrap();
        let v = p.vertices[1];
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, -2.0 * gauss::quantile(0.25).unwrap(), epsilon = 1e-14);
        // Phi(1.34898) - 1/2, via direct evaluation
        assert_abs_diff_eq!(seps::mass(v), 0.411_328_224_673_824, epsilon = 1e-12);
        assert!(seps::mass(v) >= 1.0 - 1.25 * 0.5);
    }

    #[test]
    fn tangent_limits_reproduce_a_and_b() {
        for e in [0.01, 0.2, 0.5] {
            let t2 = build_tangent(eps(e), 2).unwrap();
            let a = build_a(eps(e)).unwrap();
            assert_eq!(t2.vertices.len(), 1);
            assert!(t2.vertices[0].dist(a.vertices[0]) < 1e-12);
            let t3 = build_tangent(eps(e), 3).unwrap();
            let b = build_b(eps(e)).unwrap();
            assert_eq!(t3.vertices.len(), 2);
            for (u, v) in t3.vertices.iter().zip(&b.vertices) {
                assert!(u.dist(*v) < 1e-9, "{u:?} vs {v:?}");
            }
        }
        assert!(build_tangent(eps(0.1), 1).is_err());
    }

    #[test]
    fn certificates_on_the_grid() {
        let mut worst_b = 0.0f64;
        for e in CERTIFICATION_GRID {
            let a = certify_alpha(&build_a(eps(e)).unwrap(), eps(e)).unwrap();
            assert!(a.alpha <= 2.0 + 1e-9 && a.alpha >= 1.0);
            let b = certify_alpha(&build_b(eps(e)).unwrap(), eps(e)).unwrap();
            assert!(b.alpha <= 1.25 + 1e-9 && b.alpha >= 1.0, "eps={e} alpha={}", b.alpha);
            worst_b = worst_b.max(b.alpha);
        }
        assert!(worst_b >= 1.20);
        let t = certify_alpha(&build_tangent(eps(0.05), 9).unwrap(), eps(0.05)).unwrap();
        assert!(t.alpha <= 1.25);
    }

    #[test]
    fn b_certificate_values() {
        // (1 - mass(vertex)) / eps evaluated independently through erfc
        let expected = [
            (1e-4, 1.243_10),
            (0.05, 1.229_01),
            (0.5, 1.177_34),
        ];
        for (e, a) in expected {
            let c = certify_alpha(&build_b(eps(e)).unwrap(), eps(e)).unwrap();
            assert_abs_diff_eq!(c.alpha, a, epsilon = 1e-5);
        }
    }

    #[test]
    fn certification_rejects_bad_shapes() {
        let one_cut = Polyhedron2::from_cuts(vec![Halfplane2 { a1: 1.0, a2: -1.0, rhs: -3.0 }]);
        assert!(certify_alpha(&one_cut, eps(0.05)).is_err());
        let too_tight = Polyhedron2::from_cuts(vec![
            Halfplane2 { a1: 1.0, a2: 0.0, rhs: -3.0 },
            Halfplane2 { a1: 0.0, a2: -1.0, rhs: -3.0 },
        ]);
        assert!(certify_alpha(&too_tight, eps(0.05)).is_err());
    }

    #[test]
    fn conservative_counterparts_are_inside() {
        for e in CERTIFICATION_GRID {
            let b = build_conservative(Family::B, eps(e), 1.25).unwrap();
            for v in &b.vertices {
                assert!(seps::contains(*v, eps(e)), "eps={e} {v:?}");
            }
            let a = build_conservative(Family::A, eps(e), 2.0).unwrap();
            assert!(a.min_vertex_mass() >= 1.0 - e - 1e-15);
        }
        let b = build_conservative(Family::B, eps(0.5), 1.25).unwrap();
        let direct = build_b(eps(0.4)).unwrap();
        assert_eq!(b, direct);
    }

    #[test]
    fn outer_families_contain_boundary() {
        for e in [0.01, 0.1, 0.5] {
            let fams = [build_a(eps(e)).unwrap(), build_b(eps(e)).unwrap(), build_tangent(eps(e), 7).unwrap()];
            for i in 1..=200 {
                let p = seps::boundary_point(BoundaryParam::new(i as f64 / 201.0).unwrap(), eps(e));
                for f in &fams {
                    assert!(f.contains(p, 1e-10));
                }
            }
        }
    }

    #[test]
    fn tangent_alpha_refines_on_nested_grids() {
        for e in [0.01, 0.1, 0.5] {
            let mut prev = f64::INFINITY;
            for n in [2, 3, 5, 9, 17, 33] {
                let a = certify_alpha(&build_tangent(eps(e), n).unwrap(), eps(e)).unwrap().alpha;
                assert!(a <= prev + 1e-12, "eps={e} n={n}");
                prev = a;
            }
            assert!(prev < 1.02, "eps={e} alpha={prev}");
        }
    }

    #[test]
    fn tail_inequalities() {
        let grid: Vec<f64> = (1..=1000).map(|i| 0.5 * i as f64 / 1000.0).collect();
        let r = verify_tail_inequalities(&grid).unwrap();
        assert!(r.violations.is_empty());
        assert!(r.slope_ok);
        // sqrt(2 pi) - sqrt(2 pi) exp(Phi^-1(3/4)^2 / 2) / 2
        let z = 0.674_489_750_196_081_7f64;
        assert_abs_diff_eq!(r.slope_at_half, gauss::SQRT_2PI * (1.0 - 0.5 * (z * z / 2.0).exp()), epsilon = 1e-12);
        let half = verify_tail_inequalities(&[0.5]).unwrap();
        assert!(half.points[0].bound4_lhs >= half.points[0].bound4_rhs);
        assert!(verify_tail_inequalities(&[0.7]).is_err());
    }

    #[test]
    fn squared_quantile_gap_creeps_toward_two_log_two() {
        // the gap grows toward 2 log 2 only logarithmically as eps shrinks
        let gap = |e: f64| {
            gauss::quantile_upper(e / 2.0).unwrap().powi(2) - gauss::quantile_upper(e).unwrap().powi(2)
        };
        let mut prev = 0.0;
        for k in [2, 6, 20, 60, 200] {
            let g = gap(10f64.powi(-k));
            assert!(g > prev && g < 2.0 * std::f64::consts::LN_2);
            prev = g;
        }
        assert!(prev > 1.37);
    }
}
