//! Closed-form Fisher information for one target, checked against a
//! finite-difference evaluation of the Gaussian model.

use mimo_placement::fim::{numerical_fim_oracle, state_fim_and_crlb, FimOptions};
use mimo_placement::scenario::load_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = load_scenario(include_str!("../scenarios/single_target.json"))?;
    let t = s.targets()[0];
    let pos = t.position(&s.radar);
    println!("target at ({:.1}, {:.1}) m: cell {}, theta {:.4} rad, beta {:.4}", pos.x, pos.y, t.cell, t.theta, t.beta);

    let rep = state_fim_and_crlb(&s, FimOptions::default())?;
    let oracle = numerical_fim_oracle(&s);
    let rel = (&rep.parameter_fim - &oracle).norm() / oracle.norm();
    println!("parameter FIM vs finite differences: relative error {rel:.2e}");

    println!("state CRLB (x, y, xi, zeta):");
    for r in 0..rep.crlb.nrows() {
        let row: Vec<String> = rep.crlb.row(r).iter().map(|v| format!("{v:>12.4e}")).collect();
        println!("  {}", row.join(" "));
    }
    println!("trace {:.4e}, det {:.4e}, max eigenvalue {:.4e}, cond {:.2e}", rep.metrics.trace, rep.metrics.det, rep.metrics.max_eig, rep.cond);
    println!("position bound: {:.3} m", rep.position_bound(0));
    Ok(())
}
