//! Single-target placement by convex relaxation, for a transceiver array
//! and a split transmit/receive array.

use mimo_placement::placement::ula_geometry;
use mimo_placement::scenario::load_scenario;
use mimo_placement::sdp::place_single_target;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let split = load_scenario(include_str!("../scenarios/separate_2x2.json"))?;
    let mono = split.with_array(ula_geometry(3, split.radar.wavelength));

    for (name, s) in [("3 transceivers", &mono), ("2 tx + 2 rx", &split)] {
        let target = s.targets()[0];
        let sol = place_single_target(&target, &s.array, &s.constraints, 1e-8, 1)?;
        println!("{name}: bound {:.4} m^2, achieved {:.4} m^2, {} iterations, {}", sol.relaxation_bound.unwrap_or(f64::NAN), sol.achieved_cost, sol.iterations, sol.status);
        let worst = sol.rank1_residuals.iter().cloned().fold(0.0, f64::max);
        println!("  worst rank-1 residual {worst:.2e}, ring violation {:.2e}", s.constraints.max_violation(&sol.geometry));
        for a in sol.geometry.antennas() {
            println!("  ({:+.4}, {:+.4})", a.x, a.y);
        }
    }
    Ok(())
}
