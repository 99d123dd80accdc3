//! Range of per-path phase differences between two targets as their DOA
//! separation grows, for pair distances between the inner and outer ring.

use mimo_placement::placement::omega_separation_interval;

fn main() {
    let (d, e, wavelength) = (0.3, 0.6, 0.3);
    println!("{:>10} {:>10} {:>10}", "dtheta", "lo", "hi");
    for i in 1..=12 {
        let dtheta = i as f64 * std::f64::consts::PI / 12.0;
        let (lo, hi) = omega_separation_interval(dtheta, d, e, wavelength);
        println!("{dtheta:>10.4} {lo:>10.4} {hi:>10.4}");
    }
}
