//! Monte-Carlo RMSE of the maximum-likelihood estimator next to the
//! bound, for a linear and an optimized layout.

use mimo_placement::mc::{resolve_geometry, rmse_experiment, ExperimentConfig, GeometrySpec, SweepConfig};
use mimo_placement::placement::SamplerConfig;
use mimo_placement::scenario::load_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = load_scenario(include_str!("../scenarios/single_target.json"))?;
    let sweep = SweepConfig { sampler: SamplerConfig::for_wavelength(s.radar.wavelength, 1), seed: 1 };
    let cfg = ExperimentConfig::new(40, 2024);

    println!("{:>8} {:>6} {:>10} {:>10}", "layout", "snr", "rmse_m", "crlb_m");
    for spec in [GeometrySpec::Ula, GeometrySpec::Optimal] {
        let g = resolve_geometry(&s, &spec, &sweep)?;
        for r in rmse_experiment(&s.with_array(g), &[10.0, 20.0, 30.0], &cfg)? {
            let t = r.targets[0];
            println!("{:>8} {:>6.1} {:>10.3} {:>10.3}", spec.name(), r.snr_db, t.rmse_m, t.crlb_m);
        }
    }
    Ok(())
}
