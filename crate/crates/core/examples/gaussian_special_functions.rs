//! Normal CDF and quantile, chi quantiles and the adaptive quadrature.

use twosided::gauss;

fn main() -> twosided::Result<()> {
    for p in [1e-12, 1e-6, 0.025, 0.5, 0.975] {
        let z = gauss::quantile(p)?;
        println!("Phi^-1({p:e}) = {z:.15}  Phi(z) - p = {:.1e}", gauss::cdf(z) - p);
    }
    println!("interval mass of [-1.96, 1.96] = {:.12}", gauss::interval_mass(-1.96, 1.96));
    for dof in [1, 2, 3] {
        println!("chi_{dof} 95% quantile = {:.12}", gauss::chi_inv(dof, 0.95)?);
    }
    let spec = gauss::QuadratureSpec::with_tol(1e-12);
    let second_moment = gauss::integrate(|x| x * x * gauss::pdf(x), f64::NEG_INFINITY, f64::INFINITY, &spec)?;
    println!("E[N^2] by quadrature = {second_moment:.12}");
    Ok(())
}
