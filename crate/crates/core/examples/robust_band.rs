//! A two-sided constraint that must hold for every mean in a box and every
//! covariance in a finite family.

use nalgebra::DMatrix;
use twosided::distrobust::{self, CovFamily, MeanBox, RobustSet};
use twosided::solver::{self, KelleyOptions};
use twosided::{verify, RiskLevel};

fn main() -> twosided::Result<()> {
    let eps = RiskLevel::new(0.05)?;
    let set = RobustSet::new(
        MeanBox::new(vec![-0.2], vec![0.3])?,
        CovFamily::new(vec![DMatrix::identity(1, 1), DMatrix::identity(1, 1) * 1.5])?,
    )?;
    let nominal = verify::width_problem(eps)?;
    let mut robust = nominal.clone();
    robust.ccs[0] = robust.ccs[0].clone().with_robust(set.clone())?;

    let rn = solver::kelley_solve(&nominal, &KelleyOptions::default())?;
    let rr = solver::kelley_solve(&robust, &KelleyOptions::default())?;
    let (a, b) = (rr.value("a").unwrap_or(f64::NAN), rr.value("b").unwrap_or(f64::NAN));
    println!("nominal width {:.6}, robust width {:.6}", rn.objective, rr.objective);
    println!("robust interval [{a:.6}, {b:.6}]");
    let (lo, hi) = distrobust::shift_grid_audit(a, b, &[1.0], &set, 201)?;
    println!("worst mass over a grid of shifts: {lo:.6} (max {hi:.6})");
    Ok(())
}
