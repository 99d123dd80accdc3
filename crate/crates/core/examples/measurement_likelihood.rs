//! Draw noisy range-bin measurements and recover the target by maximum
//! likelihood.

use mimo_placement::mc::{ml_estimate, GridSpec};
use mimo_placement::scenario::load_scenario;
use mimo_placement::signal::{log_likelihood, sample_measurement};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = load_scenario(include_str!("../scenarios/single_target.json"))?;
    let truth = s.targets()[0];
    let rho = sample_measurement(&s, 7);
    println!("{} bins x {} paths starting at bin {}", rho.bins(), rho.paths, rho.first_bin);

    // Likelihood along the DOA axis with everything else at the truth.
    for dtheta in [-0.02, -0.01, 0.0, 0.01, 0.02] {
        let mut t = truth;
        t.theta += dtheta;
        let ll = log_likelihood(&rho, &s.with_targets(vec![t]))?;
        println!("theta {:+.2} rad off: log-likelihood {ll:.3}", dtheta);
    }

    let est = ml_estimate(&rho, &s, &[truth], &GridSpec::default())?;
    let p = truth.position(&s.radar);
    let e = est[0];
    println!("truth    ({:.2}, {:.2}) m", p.x, p.y);
    println!("estimate ({:.2}, {:.2}) m, amplitude ({:.3}, {:.3})", e.x, e.y, e.xi, e.zeta);
    Ok(())
}
