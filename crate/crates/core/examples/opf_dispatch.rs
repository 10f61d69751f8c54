//! Chance-constrained DC optimal power flow on the bundled networks, in each
//! constraint mode, with a Monte Carlo check of the line flows.

use twosided::opf::{self, OpfMode, OpfOptions};
use twosided::RiskLevel;

fn main() -> twosided::Result<()> {
    let eps = RiskLevel::new(0.05)?;
    let opts = OpfOptions::default();
    for (name, _) in opf::FIXTURES {
        let net = opf::fixture(name)?;
        println!("{name}: {} buses, {} lines, {} generators", net.n_bus(), net.lines.len(), net.gens.len());
        let det = opf::solve_dcopf(&net, opts.slack)?;
        println!("  deterministic   cost {:.6}", det.objective);
        for mode in OpfMode::ALL {
            let r = opf::solve_opf(&net, eps, mode, &opts)?;
            let worst = r.evaluation.as_ref().map_or(f64::NAN, |e| e.max_line_violation());
            println!("  {:<16} cost {:.6}  worst line risk {worst:.6}  p {:.4?}  alpha {:.4?}", mode.to_string(), r.cost, r.p, r.alpha);
        }
    }

    let net = opf::fixture("three_bus")?;
    let r = opf::solve_opf(&net, eps, OpfMode::TwoSidedExact, &opts)?;
    let ev = opf::evaluate_dispatch(&net, &r.p, &r.alpha, opts.slack)?;
    let mc = opf::monte_carlo_flows(&net, &r.p, &r.alpha, opts.slack, 100_000, 7)?;
    for (l, (m, v)) in mc.iter().enumerate() {
        println!("line {l}: analytic {:.5} +- {:.5}, sampled {m:.5} +- {:.5}", ev.flow_mean[l], ev.flow_sd[l], v.sqrt());
    }
    Ok(())
}
