//! Random-restart local search for two targets in the same cell, against
//! the linear array it starts from.

use mimo_placement::fim::Metric;
use mimo_placement::placement::{placement_cost, sample_restart_optimize, SamplerConfig};
use mimo_placement::scenario::load_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = load_scenario(include_str!("../scenarios/two_targets.json"))?;
    let cfg = SamplerConfig::for_wavelength(s.radar.wavelength, 3);
    let (sol, trace) = sample_restart_optimize(&s, &cfg)?;

    let accepted = trace.records.iter().filter(|r| r.accepted).count();
    println!("{} restarts, {accepted} accepted", trace.records.len());
    println!("linear array cost {:.4}", placement_cost(&s, Metric::Trace)?);
    println!("optimized cost    {:.4}", sol.achieved_cost);
    for a in sol.geometry.antennas() {
        println!("  ({:+.4}, {:+.4})", a.x, a.y);
    }
    Ok(())
}
