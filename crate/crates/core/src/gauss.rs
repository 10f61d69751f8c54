//! Scalar Gaussian special functions and the 1-D numerical kernels used by
//! every other module: density, CDF and quantile of the standard normal, the
//! chi distribution, adaptive Gauss-Kronrod quadrature, golden-section and
//! Brent search.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{domain, Error, Result};

/// 1/sqrt(2 pi)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// sqrt(2 pi)
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Infinite integration limits are clamped here. The standard normal tail
/// beyond 9 carries less than 1e-18 of mass.
pub const GAUSS_TRUNCATION: f64 = 9.0;

/// A probability level in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Prob(f64);

impl Prob {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Prob(value))
        } else {
            domain(format!("probability {value} outside [0, 1]"))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            Prob(0.0)
        } else {
            Prob(value.clamp(0.0, 1.0))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Prob> for f64 {
    fn from(p: Prob) -> f64 {
        p.0
    }
}

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate to full double precision in both tails.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper tail `1 - cdf(x)` without cancellation.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `cdf(y) - cdf(x)` evaluated on whichever tail keeps precision.
pub fn interval_mass(x: f64, y: f64) -> f64 {
    if y <= x {
        return 0.0;
    }
    if x >= 0.0 {
        sf(x) - sf(y)
    } else if y <= 0.0 {
        cdf(y) - cdf(x)
    } else {
        1.0 - cdf(x) - sf(y)
    }
}

// Acklam's rational approximation; refined by Newton below.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn acklam_lower(p: f64) -> f64 {
    // valid for 0 < p <= 0.5
    if p < 0.024_25 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((ACKLAM_C[0] * q + ACKLAM_C[1]) * q + ACKLAM_C[2]) * q + ACKLAM_C[3]) * q
            + ACKLAM_C[4])
            * q
            + ACKLAM_C[5])
            / ((((ACKLAM_D[0] * q + ACKLAM_D[1]) * q + ACKLAM_D[2]) * q + ACKLAM_D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((ACKLAM_A[0] * r + ACKLAM_A[1]) * r + ACKLAM_A[2]) * r + ACKLAM_A[3]) * r
            + ACKLAM_A[4])
            * r
            + ACKLAM_A[5])
            * q
            / (((((ACKLAM_B[0] * r + ACKLAM_B[1]) * r + ACKLAM_B[2]) * r + ACKLAM_B[3]) * r
                + ACKLAM_B[4])
                * r
                + 1.0)
    }
}

/// Standard normal quantile for `0 < p < 1`.
///
/// A rational initializer is polished with Newton steps that use the closed
/// form `d/dp quantile(p) = sqrt(2 pi) exp(quantile(p)^2 / 2)`. The upper half
/// is mirrored from the lower tail so that small tail probabilities keep
/// their relative precision.
pub fn quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("quantile requires 0 < p < 1, got {p}"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

/// `quantile(1 - q)` computed as `-quantile(q)` so tiny `q` stays exact.
pub fn quantile_upper(q: f64) -> Result<f64> {
    quantile(q).map(|x| -x)
}

fn lower_quantile(p: f64) -> f64 {
    let mut x = acklam_lower(p);
    for _ in 0..8 {
        let resid = cdf(x) - p;
        let step = resid * SQRT_2PI * (0.5 * x * x).exp();
        if !step.is_finite() {
            break;
        }
        x -= step;
        if step.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// First derivative of the quantile function at `p`.
pub fn quantile_derivative(p: f64) -> Result<f64> {
    let x = quantile(p)?;
    Ok(SQRT_2PI * (0.5 * x * x).exp())
}

/// Second derivative of the quantile function at `p`:
/// `2 pi quantile(p) exp(quantile(p)^2)`.
pub fn quantile_second_derivative(p: f64) -> Result<f64> {
    let x = quantile(p)?;
    Ok(2.0 * PI * x * (x * x).exp())
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefix = -x + a * x.ln() - libm::lgamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum * log_prefix.exp()).min(1.0)
    } else {
        // Lentz continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-17 {
                break;
            }
        }
        (1.0 - log_prefix.exp() * h).max(0.0)
    }
}

/// CDF of the chi distribution with `dof` degrees of freedom.
pub fn chi_cdf(dof: u32, x: f64) -> Result<f64> {
    if dof == 0 {
        return domain("chi distribution needs dof >= 1");
    }
    if x.is_nan() || x < 0.0 {
        return domain(format!("chi_cdf requires x >= 0, got {x}"));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    if dof == 2 {
        return Ok(-(-0.5 * x * x).exp_m1());
    }
    Ok(gamma_p(0.5 * dof as f64, 0.5 * x * x))
}

/// Quantile of the chi distribution. Closed form for two degrees of freedom,
/// bisection to 1e-12 otherwise.
pub fn chi_inv(dof: u32, p: f64) -> Result<f64> {
    if dof == 0 {
        return domain("chi distribution needs dof >= 1");
    }
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("chi_inv requires 0 < p < 1, got {p}"));
    }
    if dof == 2 {
        return Ok((-2.0 * (-p).ln_1p()).sqrt());
    }
    let mut lo = 0.0;
    let mut hi = (dof as f64).sqrt() + 1.0;
    while chi_cdf(dof, hi)? < p {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if chi_cdf(dof, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { abs_tol: 1e-9, max_depth: 60 }
    }
}

impl QuadratureSpec {
    pub fn with_tol(abs_tol: f64) -> Self {
        QuadratureSpec { abs_tol, ..Default::default() }
    }
}

const INITIAL_PANELS: usize = 8;

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights on the odd Kronrod nodes
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Adaptive Gauss-Kronrod (7/15) quadrature of `f` over `[lo, hi]`.
///
/// Infinite limits are clamped to `±GAUSS_TRUNCATION`, which is only
/// appropriate for Gaussian-weighted integrands.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(spec.abs_tol > 0.0) || spec.max_depth == 0 {
        return domain("quadrature needs abs_tol > 0 and max_depth >= 1");
    }
    if lo.is_nan() || hi.is_nan() {
        return domain("NaN integration limit");
    }
    let (lo, hi, sign) = if hi < lo { (hi, lo, -1.0) } else { (lo, hi, 1.0) };
    let lo = lo.max(-GAUSS_TRUNCATION);
    let hi = hi.min(GAUSS_TRUNCATION);
    if hi <= lo {
        return Ok(0.0);
    }
    let width = (hi - lo) / INITIAL_PANELS as f64;
    let tol = spec.abs_tol / INITIAL_PANELS as f64;
    let mut total = 0.0;
    let mut ok = true;
    for i in 0..INITIAL_PANELS {
        let a = lo + width * i as f64;
        let b = if i + 1 == INITIAL_PANELS { hi } else { a + width };
        total += gk_step(&f, a, b, tol, spec.max_depth, &mut ok);
    }
    if !ok || !total.is_finite() {
        return Err(Error::NonConvergence { what: "adaptive quadrature", estimate: sign * total });
    }
    Ok(sign * total)
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = G_WEIGHTS[3] * fc;
    for j in 0..7 {
        let pair = f(c - h * GK_NODES[j]) + f(c + h * GK_NODES[j]);
        kronrod += GK_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            gauss += G_WEIGHTS[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn gk_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32, ok: &mut bool) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || (b - a) <= 1e-14 * (1.0 + a.abs()) {
        return value;
    }
    if depth == 0 {
        *ok = false;
        return value;
    }
    let m = 0.5 * (a + b);
    gk_step(f, a, m, 0.5 * tol, depth - 1, ok) + gk_step(f, m, b, 0.5 * tol, depth - 1, ok)
}

/// Result of a 1-D minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub argmin: f64,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

const GOLDEN_MAX_ITER: usize = 300;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimizer of a unimodal `h` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`.
pub fn minimize<F: Fn(f64) -> f64>(h: F, lo: f64, hi: f64, tol: f64) -> Minimum {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = h(c);
    let mut fd = h(d);
    let mut it = 0;
    while (b - a) > tol && it < GOLDEN_MAX_ITER {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = h(d);
        }
        it += 1;
    }
    let (argmin, value) = if fc <= fd { (c, fc) } else { (d, fd) };
    Minimum { argmin, value, converged: (b - a) <= tol, iterations: it }
}

/// Brent's method (golden section with parabolic steps) for a unimodal `h`
/// on `[lo, hi]`. Returns early once some evaluation is `<= target`.
pub fn minimize_brent<F: Fn(f64) -> f64>(h: F, lo: f64, hi: f64, tol: f64, target: f64) -> Minimum {
    let c_golden = 1.0 - INV_PHI;
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut x = a + c_golden * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = h(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let tol1 = 0.5 * tol;
    let mut converged = false;
    let mut it = 0;
    while it < GOLDEN_MAX_ITER {
        let m = 0.5 * (a + b);
        if fx <= target || (x - m).abs() <= tol - 0.5 * (b - a) {
            converged = true;
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol || b - u < tol {
                    d = tol1.copysign(m - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = c_golden * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = h(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
        it += 1;
    }
    Minimum { argmin: x, value: fx, converged, iterations: it }
}

/// Golden-section search followed by a safeguarded Newton polish on the
/// first-order condition `dh = 0`. Newton steps stay inside `[lo, hi]` and are
/// only kept when they shrink `|dh|`.
pub fn minimize_newton<F, G, H>(h: F, dh: G, d2h: H, lo: f64, hi: f64, tol: f64) -> Minimum
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    let mut m = minimize(&h, lo, hi, tol);
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut x = m.argmin;
    let mut g = dh(x);
    for _ in 0..8 {
        let curv = d2h(x);
        if !(curv > 0.0) || !g.is_finite() {
            break;
        }
        let next = (x - g / curv).clamp(lo, hi);
        let g_next = dh(next);
        if !(g_next.abs() < g.abs()) {
            break;
        }
        x = next;
        g = g_next;
        if g == 0.0 {
            break;
        }
    }
    if x != m.argmin {
        let v = h(x);
        if v <= m.value + 1e-15 * m.value.abs().max(1.0) {
            m.argmin = x;
            m.value = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn density_values() {
        assert_abs_diff_eq!(pdf(0.0), 0.398_942_280_4, epsilon = 1e-10);
        assert_abs_diff_eq!(pdf(1.0), 0.241_970_724_5, epsilon = 1e-10);
        for x in [-3.0, -0.4, 0.7, 5.5] {
            assert_eq!(pdf(x), pdf(-x));
        }
    }

    #[test]
    fn cdf_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert_abs_diff_eq!(cdf(2.0) - cdf(-2.0), 0.954_499_736_1, epsilon = 1e-10);
        assert_eq!(cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(cdf(f64::INFINITY), 1.0);
        for x in [-7.0, -1.3, 0.2, 3.1] {
            assert_abs_diff_eq!(cdf(x), 1.0 - cdf(-x), epsilon = 1e-15);
        }
    }

    #[test]
    fn interval_mass_uses_stable_tail() {
        // both limits deep in the upper tail
        let m = interval_mass(8.0, 9.0);
        assert!(m > 0.0);
        assert_abs_diff_eq!(m / (sf(8.0) - sf(9.0)), 1.0, epsilon = 1e-14);
        assert_eq!(interval_mass(1.0, 1.0), 0.0);
    }

    #[test]
    fn quantile_values() {
        assert_eq!(quantile(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(quantile(0.05).unwrap(), -1.644_853_627_0, epsilon = 1e-10);
        // 1 - p is exact for these
        for p in [0.001953125, 0.125, 0.2, 0.49] {
            assert_abs_diff_eq!(quantile(p).unwrap(), -quantile(1.0 - p).unwrap(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(quantile(1e-12).unwrap(), -7.034_483_825_301_13, epsilon = 1e-9);
        assert!(quantile(0.0).is_err());
        assert!(quantile(1.0).is_err());
        assert!(quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_tail_relative_accuracy() {
        for p in [1e-300, 1e-100, 1e-20, 1e-8] {
            let x = quantile(p).unwrap();
            assert!(((cdf(x) - p) / p).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn quantile_derivative_matches_finite_difference() {
        for p in [0.01, 0.3, 0.8] {
            let h = 1e-6;
            let fd = (quantile(p + h).unwrap() - quantile(p - h).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(quantile_derivative(p).unwrap() / fd, 1.0, epsilon = 1e-7);
            let fd2 = (quantile_derivative(p + h).unwrap() - quantile_derivative(p - h).unwrap())
                / (2.0 * h);
            assert_abs_diff_eq!(quantile_second_derivative(p).unwrap() / fd2, 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn chi_values() {
        assert_abs_diff_eq!(chi_cdf(2, 1.0 / 0.8).unwrap(), 0.542, epsilon = 5e-4);
        assert_abs_diff_eq!(chi_inv(2, 0.5).unwrap(), 1.177_410_022_6, epsilon = 1e-10);
        assert_eq!(chi_cdf(2, 0.0).unwrap(), 0.0);
        assert!(chi_cdf(0, 1.0).is_err());
        assert!(chi_cdf(3, -1.0).is_err());
        assert!(chi_inv(2, 1.0).is_err());
    }

    #[test]
    fn chi_general_dof_agrees_with_closed_forms() {
        // dof 1: chi is |Z|
        for x in [0.3, 1.0, 2.5] {
            assert_abs_diff_eq!(chi_cdf(1, x).unwrap(), cdf(x) - cdf(-x), epsilon = 1e-14);
        }
        // dof 2 through the incomplete gamma route
        for x in [0.2, 1.1, 3.0, 6.0] {
            assert_abs_diff_eq!(gamma_p(1.0, 0.5 * x * x), 1.0 - (-0.5 * x * x).exp(), epsilon = 1e-14);
        }
        // dof 3: erf(x/sqrt2) - sqrt(2/pi) x exp(-x^2/2)
        for x in [0.5, 1.7, 4.0] {
            let expected = (cdf(x) - cdf(-x)) - 2.0 * x * pdf(x);
            assert_abs_diff_eq!(chi_cdf(3, x).unwrap(), expected, epsilon = 1e-14);
        }
        let x = chi_inv(5, 0.9).unwrap();
        assert_abs_diff_eq!(chi_cdf(5, x).unwrap(), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn chi_inverse_round_trip() {
        for i in 1..100 {
            let p = i as f64 / 100.0;
            assert_abs_diff_eq!(chi_cdf(2, chi_inv(2, p).unwrap()).unwrap(), p, epsilon = 1e-10);
        }
    }

    #[test]
    fn integrate_normalization() {
        let spec = QuadratureSpec::with_tol(1e-12);
        assert_abs_diff_eq!(integrate(pdf, -9.0, 9.0, &spec).unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(integrate(pdf, f64::NEG_INFINITY, f64::INFINITY, &spec).unwrap(), 1.0, epsilon = 1e-10);
        let spec = QuadratureSpec::default();
        assert_abs_diff_eq!(integrate(pdf, -2.0, 2.0, &spec).unwrap(), 0.954_499_736_1, epsilon = 1e-9);
        assert_eq!(integrate(pdf, 0.4, 0.4, &spec).unwrap(), 0.0);
        assert_abs_diff_eq!(integrate(pdf, 2.0, -2.0, &spec).unwrap(), -0.954_499_736_1, epsilon = 1e-9);
    }

    #[test]
    fn integrate_reports_nonconvergence() {
        let spec = QuadratureSpec { abs_tol: 1e-12, max_depth: 2 };
        let err = integrate(|x: f64| (50.0 * x).sin().abs(), 0.0, 3.0, &spec).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn golden_section_quadratics() {
        let m = minimize(|t| (t - 0.3) * (t - 0.3), 0.0, 1.0, 1e-10);
        assert!(m.converged);
        assert_abs_diff_eq!(m.argmin, 0.3, epsilon = 1e-8);
        let m = minimize(|t| -(t - t * t), 0.0, 1.0, 1e-10);
        assert_abs_diff_eq!(m.argmin, 0.5, epsilon = 1e-8);
        let m = minimize_newton(
            |t| (t - 0.3) * (t - 0.3),
            |t| 2.0 * (t - 0.3),
            |_| 2.0,
            0.0,
            1.0,
            1e-6,
        );
        assert_abs_diff_eq!(m.argmin, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn brent_agrees_with_golden_and_stops_at_target() {
        let f = |t: f64| (t - 1.3).exp() - t;
        let g = minimize(f, -5.0, 5.0, 1e-10);
        let b = minimize_brent(f, -5.0, 5.0, 1e-10, f64::NEG_INFINITY);
        assert!(b.converged);
        assert_abs_diff_eq!(b.argmin, 1.3, epsilon = 1e-8);
        assert_abs_diff_eq!(b.argmin, g.argmin, epsilon = 1e-7);
        assert!(b.iterations < g.iterations);
        let b = minimize_brent(|t| t, 0.0, 1.0, 1e-10, f64::NEG_INFINITY);
        assert!(b.argmin < 1e-9);
        let b = minimize_brent(f, -5.0, 5.0, 1e-10, 0.0);
        assert!(b.value <= 0.0 && b.converged);
    }

    #[test]
    fn golden_section_iteration_cap() {
        let m = minimize(|t| t, 0.0, 1.0, 0.0);
        assert!(!m.converged);
        assert_eq!(m.iterations, GOLDEN_MAX_ITER);
    }
}
