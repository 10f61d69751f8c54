//! Narrowest interval holding 1 - eps of a standard normal, found by the
//! cutting-plane solver, and a portfolio band solved exactly and through the
//! SOC approximations.

use twosided::formulation::{AffineExpr, ChanceProblem, GaussianVector, LinearConstraint, Sense, SocMode, TwoSidedCC};
use twosided::seps::CutKind;
use twosided::solver::{self, KelleyOptions};
use twosided::{gauss, verify, RiskLevel};

fn portfolio(eps: f64) -> twosided::Result<ChanceProblem> {
    let mean = [0.06, 0.04, 0.02];
    let cov = vec![vec![0.040, 0.006, 0.000], vec![0.006, 0.010, 0.001], vec![0.000, 0.001, 0.002]];
    let assets = ["w0", "w1", "w2"];
    let band = TwoSidedCC::new(
        Some(AffineExpr::constant(-0.08)),
        Some(AffineExpr::constant(0.15)),
        assets.iter().map(|w| AffineExpr::var(w)).collect(),
        GaussianVector::from_rows(&mean, &cov)?,
        RiskLevel::new(eps)?,
    )?;
    let objective = assets.iter().zip(mean).fold(AffineExpr::default(), |e, (w, m)| e.with_term(w, -m));
    let budget = assets.iter().fold(AffineExpr::default(), |e, w| e.with_term(w, 1.0));
    let mut p = ChanceProblem::new(&assets)
        .minimize(objective)
        .subject_to(LinearConstraint::new(budget, Sense::Eq, 1.0))
        .with_cc(band);
    for w in assets {
        p = p.bound(w, Some(0.0), Some(1.0));
    }
    Ok(p)
}

fn main() -> twosided::Result<()> {
    let eps = 0.05;
    for kind in [CutKind::Tangent, CutKind::Gradient] {
        let opts = KelleyOptions { cut_kind: kind, seed_cuts: false, ..Default::default() };
        let r = solver::kelley_solve(&verify::width_problem(RiskLevel::new(eps)?)?, &opts)?;
        println!(
            "{kind:?}: width {:.9} (closed form {:.9}) in {} iterations",
            r.objective,
            -2.0 * gauss::quantile(eps / 2.0)?,
            r.iterations
        );
    }

    let p = portfolio(eps)?;
    let exact = solver::kelley_solve(&p, &KelleyOptions::default())?;
    let outer = solver::solve_via_soc(&p, SocMode::Outer, &KelleyOptions::default())?;
    let inner = solver::solve_via_soc(&p, SocMode::Conservative, &KelleyOptions::default())?;
    for (name, r) in [("outer", &outer), ("exact", &exact), ("conservative", &inner)] {
        let prob = solver::cc_probabilities(&p, &r.values())?[0];
        println!("{name:<13} {:?} expected return {:.6}  band probability {prob:.6}", r.status, -r.objective);
    }
    print!("{}", exact.log_csv()?);
    Ok(())
}
