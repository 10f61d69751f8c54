//! Distributionally robust two-sided chance constraints.
//!
//! The constraint must hold for every `N(mu, Sigma)` with `mu` in a box and
//! `Sigma` in a finite family. Only `mu . x` and `x^T Sigma x` matter, so the
//! worst case reduces to the two extreme shifts and the largest variance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::seps::{self, ConePoint3, CutKind, RiskLevel};

/// Componentwise box `lo <= mu <= hi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl MeanBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension(format!("box bounds have lengths {} and {}", lo.len(), hi.len())));
        }
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i]) || !lo[i].is_finite() || !hi[i].is_finite()) {
            return domain(format!("box component {i} has lo {} > hi {}", lo[i], hi[i]));
        }
        Ok(MeanBox { lo, hi })
    }

    /// The degenerate box `{mu}`.
    pub fn point(mu: &[f64]) -> Self {
        MeanBox { lo: mu.to_vec(), hi: mu.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Corner minimizing `mu . x`.
    pub fn argmin(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| if x[i] >= 0.0 { self.lo[i] } else { self.hi[i] }).collect()
    }

    /// Corner maximizing `mu . x`.
    pub fn argmax(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| if x[i] >= 0.0 { self.hi[i] } else { self.lo[i] }).collect()
    }
}

/// Finite family of covariance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CovFamily {
    members: Vec<DMatrix<f64>>,
}

impl CovFamily {
    pub fn new(members: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = members.first() else {
            return domain("covariance family must be nonempty");
        };
        let n = first.nrows();
        for (k, m) in members.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension(format!("member {k} is {}x{}, expected {n}x{n}", m.nrows(), m.ncols())));
            }
            let scale = m.abs().max().max(1.0);
            if (m - m.transpose()).abs().max() > 1e-12 * scale {
                return domain(format!("member {k} is not symmetric"));
            }
            if n > 0 && SymmetricEigen::new(m.clone()).eigenvalues.min() < -1e-12 * scale {
                return domain(format!("member {k} is not positive semidefinite"));
            }
        }
        Ok(CovFamily { members })
    }

    pub fn from_rows(members: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mats = members
            .iter()
            .map(|rows| {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Dimension("covariance members must be square".into()));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        CovFamily::new(mats)
    }

    pub fn members(&self) -> &[DMatrix<f64>] {
        &self.members
    }

    pub fn dim(&self) -> usize {
        self.members[0].nrows()
    }

    pub fn rows(&self) -> Vec<Vec<Vec<f64>>> {
        self.members
            .iter()
            .map(|m| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
            .collect()
    }
}

/// `U_mu x U_Sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustSet {
    pub mean_box: MeanBox,
    pub cov: CovFamily,
}

impl RobustSet {
    pub fn new(mean_box: MeanBox, cov: CovFamily) -> Result<Self> {
        if mean_box.dim() != cov.dim() {
            return Err(Error::Dimension(format!(
                "mean box has dimension {} but covariances are {}x{}",
                mean_box.dim(),
                cov.dim(),
                cov.dim()
            )));
        }
        Ok(RobustSet { mean_box, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean_box.dim()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn check_dim(x: &[f64], n: usize) -> Result<()> {
    if x.len() == n {
        Ok(())
    } else {
        Err(Error::Dimension(format!("vector has {} entries, expected {n}", x.len())))
    }
}

/// `(min mu . x, max mu . x)` over the box.
pub fn worst_mean(x: &[f64], u: &MeanBox) -> Result<(f64, f64)> {
    check_dim(x, u.dim())?;
    Ok((dot(&u.argmin(x), x), dot(&u.argmax(x), x)))
}

/// `max x^T Sigma x` over the family, with the index of a maximizing member.
pub fn worst_sigma(x: &[f64], u: &CovFamily) -> Result<(f64, usize)> {
    check_dim(x, u.dim())?;
    let v = DVector::from_column_slice(x);
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, m) in u.members.iter().enumerate() {
        let q = v.dot(&(m * &v));
        if q > best.0 {
            best = (q, k);
        }
    }
    Ok((best.0.max(0.0), best.1))
}

/// Whether `P(a <= xi . x <= b) >= 1 - eps` for every law in `set`.
pub fn robust_feasible(a: f64, b: f64, x: &[f64], eps: RiskLevel, set: &RobustSet) -> Result<bool> {
    let (lo, hi) = worst_mean(x, &set.mean_box)?;
    let t = worst_sigma(x, &set.cov)?.0.sqrt();
    Ok([lo, hi].iter().all(|m| seps::cone_contains(ConePoint3::new(a - m, b - m, t), eps)))
}

/// Which worst-case ingredient a robust cut comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RobustCutKind {
    /// `t >= sqrt(x^T Sigma x)` linearized at the current `x` for the
    /// maximizing member.
    Variance { member: usize },
    /// Conic-hull cut at the extreme shift `mu . x`.
    Shift { mu: Vec<f64> },
}

/// Cut `ca a + cb b + cx . x + ct t <= 0` valid for every robust-feasible
/// `(a, b, x)` with `t >= max_Sigma sqrt(x^T Sigma x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftedCut {
    pub ca: f64,
    pub cb: f64,
    pub cx: Vec<f64>,
    pub ct: f64,
    pub kind: RobustCutKind,
}

impl LiftedCut {
    pub fn value(&self, a: f64, b: f64, x: &[f64], t: f64) -> f64 {
        self.ca * a + self.cb * b + dot(&self.cx, x) + self.ct * t
    }
}

/// Finds a violated worst-case constraint at `(a, b, x, t)`.
///
/// With `t = None` the scale is fixed at the worst standard deviation and
/// only shift cuts are produced. With an explicit `t`, a `t` below the worst
/// standard deviation yields the variance cut first. Otherwise the cut of the
/// more violated mean endpoint is returned.
pub fn robust_separate(
    a: f64,
    b: f64,
    x: &[f64],
    t: Option<f64>,
    eps: RiskLevel,
    set: &RobustSet,
    kind: CutKind,
) -> Result<LiftedCut> {
    let (var, member) = worst_sigma(x, &set.cov)?;
    let sd = var.sqrt();
    let t = match t {
        Some(t) if t < sd => {
            let cx = if sd > 0.0 {
                let v = DVector::from_column_slice(x);
                (&set.cov.members[member] * v / sd).iter().copied().collect()
            } else {
                vec![0.0; x.len()]
            };
            return Ok(LiftedCut { ca: 0.0, cb: 0.0, cx, ct: -1.0, kind: RobustCutKind::Variance { member } });
        }
        Some(t) => t,
        None => sd,
    };
    let mut best: Option<(f64, LiftedCut)> = None;
    for mu in [set.mean_box.argmin(x), set.mean_box.argmax(x)] {
        let m = dot(&mu, x);
        let q = ConePoint3::new(a - m, b - m, t);
        if !seps::cone_contains(q, eps) {
            let h = seps::cone_separate(q, eps, kind)?;
            let v = h.violation(q);
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                let shift = -(h.a[0] + h.a[1]);
                let cx = mu.iter().map(|v| shift * v).collect();
                best = Some((v, LiftedCut { ca: h.a[0], cb: h.a[1], cx, ct: h.a[2], kind: RobustCutKind::Shift { mu } }));
            }
        }
    }
    best.map(|(_, c)| c).ok_or(Error::AlreadyMember)
}

/// Smallest interval mass over a uniform grid of shifts in
/// `[min mu . x, max mu . x]` at the worst standard deviation, together with
/// the smaller of the two endpoint masses. Used to audit the endpoint rule.
pub fn shift_grid_audit(a: f64, b: f64, x: &[f64], set: &RobustSet, n: usize) -> Result<(f64, f64)> {
    let (lo, hi) = worst_mean(x, &set.mean_box)?;
    let sd = worst_sigma(x, &set.cov)?.0.sqrt();
    let mass = |m: f64| crate::formulation::standardized_probability(Some(a - m), Some(b - m), sd);
    let grid = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n.max(1) as f64).map(mass).fold(f64::INFINITY, f64::min);
    Ok((grid, mass(lo).min(mass(hi))))
}
