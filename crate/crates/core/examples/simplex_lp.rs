//! The dense two-phase simplex on a small production-planning LP.

use twosided::formulation::Sense;
use twosided::solver::{self, DenseLP};

fn main() -> twosided::Result<()> {
    // maximize 3 x + 5 y subject to x <= 4, 2 y <= 12, 3 x + 2 y <= 18
    let lp = DenseLP::new(vec![-3.0, -5.0])
        .row(vec![1.0, 0.0], Sense::Le, 4.0)
        .row(vec![0.0, 2.0], Sense::Le, 12.0)
        .row(vec![3.0, 2.0], Sense::Le, 18.0);
    let r = solver::simplex_solve(&lp)?;
    println!("{:?}: objective {} at {:?}", r.status, -r.objective, r.point);

    let infeasible = DenseLP::new(vec![1.0]).row(vec![1.0], Sense::Ge, 2.0).row(vec![1.0], Sense::Le, 1.0);
    println!("{:?}", solver::simplex_solve(&infeasible)?.status);
    Ok(())
}
