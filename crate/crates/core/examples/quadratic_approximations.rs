//! Exact region of the quadratic example against the two-sided, robust and
//! CVaR approximations on a grid, written as CSV for plotting.

use twosided::quadcc::{self, GridSpec};
use twosided::RiskLevel;

fn main() -> twosided::Result<()> {
    let eps = RiskLevel::relaxed(0.05)?;
    let rows = quadcc::compare_grid(eps, GridSpec { n: 31, lo: 0.0, hi: 0.6 })?;
    let s = quadcc::summarize(&rows, eps);
    eprintln!(
        "{} cells: exact {}, two-sided {}, robust {}, cvar {}",
        s.cells, s.exact, s.two_sided, s.robust, s.cvar
    );
    eprintln!(
        "every approximation inside the exact region: {}",
        quadcc::grid_subset(&rows, |r| r.two_sided, |r| r.exact)
            && quadcc::grid_subset(&rows, |r| r.robust, |r| r.exact)
            && quadcc::grid_subset(&rows, |r| r.cvar, |r| r.exact)
    );
    print!("{}", quadcc::to_csv(&rows)?);
    Ok(())
}
