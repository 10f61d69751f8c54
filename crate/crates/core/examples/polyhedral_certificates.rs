//! Outer polyhedra of S(eps) and their certified approximation factors.

use twosided::polyapprox::{self, Family, CERTIFICATION_GRID};

fn main() -> twosided::Result<()> {
    let rows = polyapprox::certificate_report(&[Family::A, Family::B, Family::Tangent(8)], &CERTIFICATION_GRID)?;
    println!("{:<12} {:>8} {:>6} {:>10} {:>14}", "family", "eps", "cuts", "alpha", "inner mass");
    for r in &rows {
        println!(
            "{:<12} {:>8} {:>6} {:>10.6} {:>14.8}",
            format!("{:?}", r.family),
            r.eps,
            r.n_cuts,
            r.certificate.alpha,
            r.conservative_min_mass
        );
    }

    let tails = polyapprox::verify_tail_inequalities(&[1e-8, 1e-4, 0.01, 0.1, 0.5])?;
    println!("slope at 1/2: {:.5}", tails.slope_at_half);
    println!("squared gap at eps = {:e}: {:.5} (2 log 2 = {:.5})", tails.limit_eps, tails.limit_value, tails.limit_target);
    println!("inequalities hold on the grid: {}", tails.violations.is_empty());
    Ok(())
}
