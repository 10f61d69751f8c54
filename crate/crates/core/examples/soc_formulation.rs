//! A two-sided portfolio band constraint written as problem JSON and
//! reformulated as a second-order cone program.

use twosided::formulation::{self, AffineExpr, ChanceProblem, GaussianVector, LinearConstraint, Sense, SocMode, TwoSidedCC};
use twosided::RiskLevel;

fn main() -> twosided::Result<()> {
    let mean = [0.06, 0.04, 0.02];
    let cov = vec![vec![0.040, 0.006, 0.000], vec![0.006, 0.010, 0.001], vec![0.000, 0.001, 0.002]];
    let assets = ["w0", "w1", "w2"];
    let band = TwoSidedCC::new(
        Some(AffineExpr::constant(-0.08)),
        Some(AffineExpr::constant(0.15)),
        assets.iter().map(|w| AffineExpr::var(w)).collect(),
        GaussianVector::from_rows(&mean, &cov)?,
        RiskLevel::new(0.1)?,
    )?;
    let mut objective = AffineExpr::default();
    for (w, m) in assets.iter().zip(mean) {
        objective = objective.with_term(w, -m);
    }
    let budget = assets.iter().fold(AffineExpr::default(), |e, w| e.with_term(w, 1.0));
    let mut problem = ChanceProblem::new(&assets)
        .minimize(objective)
        .subject_to(LinearConstraint::new(budget, Sense::Eq, 1.0))
        .with_cc(band);
    for w in assets {
        problem = problem.bound(w, Some(0.0), None);
    }

    println!("{}", formulation::emit_problem(&problem)?);
    let soc = formulation::build_soc(&problem, SocMode::Conservative)?;
    println!("{}", formulation::emit_json(&soc)?);
    Ok(())
}
