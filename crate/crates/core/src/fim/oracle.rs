//! Brute-force Fisher information: dense mean and covariance rebuilt from
//! scratch for a perturbed parameter vector, differentiated numerically.

use nalgebra::{DMatrix, DVector};

use crate::scenario::Scenario;

/// Central-difference step for every parameter.
pub const ORACLE_STEP: f64 = 1e-6;

/// Dense mean and covariance of the stacked output for parameter vector
/// `theta` (stacking order of the scenario's targets).
pub fn dense_model(s: &Scenario, theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let r = &s.radar;
    let (m_count, n_count) = (s.array.m(), s.array.n());
    let paths = m_count * n_count;
    let first = s.first_bin();
    let bins = s.bin_count();
    let width = 2 * paths;
    let dim = width * bins;
    let k = 2.0 * std::f64::consts::PI / r.wavelength;
    let root_k = f64::from(r.snapshots).sqrt();

    let mut mean = DVector::zeros(dim);
    let mut weights = DMatrix::<f64>::zeros(bins, bins);
    for t in 0..s.targets().len() {
        let cell = s.relative_cell(t);
        let (th, beta, xi, zeta) = (theta[4 * t], theta[4 * t + 1], theta[4 * t + 2], theta[4 * t + 3]);
        let mut w = vec![0.0; bins];
        if cell >= first {
            w[cell - first] = beta;
        }
        if cell >= first + 1 {
            w[cell - 1 - first] = 1.0 - beta;
        }
        for (b, wb) in w.iter().enumerate() {
            for (b2, wb2) in w.iter().enumerate() {
                weights[(b, b2)] += wb * wb2;
            }
        }
        for m in 0..m_count {
            let gain = r.powers[m].sqrt();
            for n in 0..n_count {
                let d = (s.array.rx[n] - s.array.tx[m]) * gain;
                let phase = k * (th.sin() * d.x + th.cos() * d.y);
                let re = root_k * (xi * phase.cos() - zeta * phase.sin());
                let im = root_k * (xi * phase.sin() + zeta * phase.cos());
                let l = m * n_count + n;
                for (b, wb) in w.iter().enumerate() {
                    mean[b * width + l] += wb * re;
                    mean[b * width + paths + l] += wb * im;
                }
            }
        }
    }
    let g = f64::from(r.snapshots) * r.scatter_var;
    let mut cov = DMatrix::zeros(dim, dim);
    for b in 0..bins {
        for b2 in 0..bins {
            let v = g * weights[(b, b2)] + if b == b2 { r.noise_var } else { 0.0 };
            if v == 0.0 {
                continue;
            }
            for i in 0..width {
                cov[(b * width + i, b2 * width + i)] = v;
            }
        }
    }
    (mean, cov)
}

/// Stacked parameter vector of the scenario's targets.
pub fn parameter_vector(s: &Scenario) -> Vec<f64> {
    s.targets().iter().flat_map(|t| [t.theta, t.beta, t.xi, t.zeta]).collect()
}

type Model = (DVector<f64>, DMatrix<f64>);

fn central(s: &Scenario, base: &[f64], i: usize, h: f64) -> Model {
    let mut up = base.to_vec();
    let mut dn = base.to_vec();
    up[i] += h;
    dn[i] -= h;
    let (mu_p, cov_p) = dense_model(s, &up);
    let (mu_m, cov_m) = dense_model(s, &dn);
    ((mu_p - mu_m) / (2.0 * h), (cov_p - cov_m) / (2.0 * h))
}

/// Derivatives of mean and covariance in every parameter: central
/// differences at `h` and `h/2` combined by one Richardson step.
pub fn model_derivatives(s: &Scenario) -> Vec<Model> {
    let base = parameter_vector(s);
    (0..base.len())
        .map(|i| {
            let (m1, c1) = central(s, &base, i, ORACLE_STEP);
            let (m2, c2) = central(s, &base, i, ORACLE_STEP / 2.0);
            ((m2 * 4.0 - m1) / 3.0, (c2 * 4.0 - c1) / 3.0)
        })
        .collect()
}

/// `J_ij = ∂μᵢᵀ Σ⁻¹ ∂μⱼ + ½ tr(Σ⁻¹ ∂Σᵢ Σ⁻¹ ∂Σⱼ)` on the dense model.
pub fn numerical_fim_oracle(s: &Scenario) -> DMatrix<f64> {
    let base = parameter_vector(s);
    let (_, cov) = dense_model(s, &base);
    let chol = cov.cholesky().expect("covariance is positive definite");
    let derivs = model_derivatives(s);
    let n = derivs.len();
    let solved_mu: Vec<DVector<f64>> = derivs.iter().map(|(m, _)| chol.solve(m)).collect();
    let solved_cov: Vec<DMatrix<f64>> = derivs.iter().map(|(_, c)| chol.solve(c)).collect();
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mean_term = derivs[a].0.dot(&solved_mu[b]);
            let cov_term = if solved_cov[a].amax() == 0.0 || solved_cov[b].amax() == 0.0 {
                0.0
            } else {
                0.5 * (&solved_cov[a] * &solved_cov[b]).trace()
            };
            j[(a, b)] = mean_term + cov_term;
            j[(b, a)] = j[(a, b)];
        }
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fim::{assemble_parameter_fim, FimOptions};
    use crate::scenario::{ArrayGeometry, PlacementConstraints, Point, RadarConfig, TargetParams};

    fn scenario() -> Scenario {
        let g = ArrayGeometry::separate(
            vec![Point::new(0.2, 0.1), Point::new(-0.3, 0.25)],
            vec![Point::new(0.05, -0.4), Point::new(-0.1, 0.3), Point::new(0.15, -0.25)],
        );
        let t = |cell, theta, beta, xi, zeta| TargetParams { cell, theta, beta, xi, zeta };
        Scenario::new(
            RadarConfig::standard(2),
            g,
            PlacementConstraints::for_wavelength(0.3),
            vec![t(9, 0.4, 0.3, 3.0, 3.0), t(10, -1.2, 0.7, 2.0, -1.0)],
        )
    }

    #[test]
    fn amplitude_entries_are_equal() {
        let mut s = scenario();
        s = s.with_targets(vec![s.targets()[0]]);
        let j = numerical_fim_oracle(&s);
        assert!(j[(2, 2)] > 0.0);
        assert!((j[(2, 2)] - j[(3, 3)]).abs() < 1e-8 * j[(2, 2)]);
    }

    #[test]
    fn covariance_depends_on_ratio_only() {
        let d = model_derivatives(&scenario());
        for (i, (_, c)) in d.iter().enumerate() {
            if i % 4 == 1 {
                assert!(c.amax() > 0.0);
            } else {
                assert!(c.amax() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_matches_oracle() {
        let s = scenario();
        let cf = assemble_parameter_fim(&s, FimOptions::default()).unwrap();
        let or = numerical_fim_oracle(&s);
        assert!((&cf - &or).norm() / or.norm() < 1e-6, "{cf}\n{or}");
    }

    #[test]
    fn covariance_term_matches_score_covariance() {
        // Weak mean and strong scatter so the covariance term dominates the
        // ratio entry; a wrong weight on it would show up as a 2x error.
        use crate::signal::{log_likelihood, MeasurementSampler};
        use rand_chacha::rand_core::SeedableRng;
        let mut s = scenario();
        let mut t = s.targets()[0];
        t.xi = 0.01;
        t.zeta = 0.0;
        s = s.with_targets(vec![t]);
        s.radar.scatter_var = 0.05;
        let j = numerical_fim_oracle(&s);
        let mean_only: f64 = model_derivatives(&s)[1].0.norm_squared();
        assert!(mean_only < 0.2 * j[(1, 1)]);
        let sampler = MeasurementSampler::new(&s);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        let mut up = s.targets()[0];
        up.beta += h;
        let mut dn = s.targets()[0];
        dn.beta -= h;
        let (su, sd) = (s.with_targets(vec![up]), s.with_targets(vec![dn]));
        let n = 20_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let rho = sampler.draw(&mut rng);
            let score = (log_likelihood(&rho, &su).unwrap() - log_likelihood(&rho, &sd).unwrap()) / (2.0 * h);
            acc += score * score;
        }
        let est = acc / n as f64;
        assert!((est - j[(1, 1)]).abs() < 0.05 * j[(1, 1)], "{est} vs {}", j[(1, 1)]);
    }
}
