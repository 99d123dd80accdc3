//! Position bound against the number of transceivers for a linear,
//! an optimized and a random layout.

use mimo_placement::mc::{crlb_sweep, GeometrySpec, SweepAxis, SweepConfig};
use mimo_placement::placement::SamplerConfig;
use mimo_placement::scenario::load_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = load_scenario(include_str!("../scenarios/single_target.json"))?;
    let cfg = SweepConfig { sampler: SamplerConfig::for_wavelength(s.radar.wavelength, 5), seed: 5 };
    let geometries = [GeometrySpec::Ula, GeometrySpec::Optimal, GeometrySpec::Random];
    let rows = crlb_sweep(&s, SweepAxis::AntennaCount, &[2.0, 3.0, 4.0, 5.0], &geometries, &cfg)?;

    println!("{:>3} {:>8} {:>10}", "M", "layout", "sqrt(tr)");
    for r in rows {
        println!("{:>3} {:>8} {:>10.3}", r.axis_value, r.geometry, r.trace.sqrt());
    }
    Ok(())
}
