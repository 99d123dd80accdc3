//! Virtual-path phases, mean matched-filter output, the block-tridiagonal
//! Gaussian covariance of the stacked output, sampling and log-likelihood.
//!
//! Measurement layout: bins ascending, each bin holding the `MN` real parts
//! followed by the `MN` imaginary parts of its complex output. Path
//! `l = m·N + n` joins transmitter `m` and receiver `n` (0-based).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scenario::{ArrayGeometry, Point, RadarConfig, Scenario, TargetParams};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SignalError {
    #[error("measurement has {found} entries, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("restricted covariance is numerically singular (det = {det:e})")]
    SingularRestriction { det: f64 },
    #[error("covariance factor is not positive definite")]
    NotPositiveDefinite,
}

/// Power-scaled receiver-minus-transmitter differences, one per path.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMatrix {
    columns: Vec<Point>,
    receivers: usize,
}

impl OmegaMatrix {
    pub fn columns(&self) -> &[Point] {
        &self.columns
    }

    pub fn paths(&self) -> usize {
        self.columns.len()
    }

    pub fn path_index(&self, m: usize, n: usize) -> usize {
        m * self.receivers + n
    }

    pub fn column_sum(&self) -> Point {
        self.columns.iter().fold(Point::zeros(), |a, c| a + c)
    }
}

pub fn omega_matrix(array: &ArrayGeometry, radar: &RadarConfig) -> OmegaMatrix {
    let mut columns = Vec::with_capacity(array.m() * array.n());
    for (m, st) in array.tx.iter().enumerate() {
        let gain = radar.powers.get(m).copied().unwrap_or(1.0).sqrt();
        for sr in &array.rx {
            columns.push((sr - st) * gain);
        }
    }
    OmegaMatrix {
        columns,
        receivers: array.n(),
    }
}

/// Per-path phases and gains of one target.
#[derive(Debug, Clone)]
pub struct Steering {
    /// Path phase `ω(l)` (rad).
    pub phase: Vec<f64>,
    /// `∂ω(l)/∂θ = (2π/λ)·pᵀΩ(:,l)`.
    pub phase_rate: Vec<f64>,
    /// Direction-derivative vector `[cos θ, −sin θ]`.
    pub p: Point,
    pub re_psi: Vec<f64>,
    pub im_psi: Vec<f64>,
}

impl Steering {
    pub fn new(theta: f64, omega: &OmegaMatrix, radar: &RadarConfig) -> Self {
        let k = radar.wavenumber();
        let dir = Point::new(theta.sin(), theta.cos());
        let p = Point::new(theta.cos(), -theta.sin());
        let amp = f64::from(radar.snapshots).sqrt();
        let phase: Vec<f64> = omega.columns.iter().map(|c| k * dir.dot(c)).collect();
        let phase_rate = omega.columns.iter().map(|c| k * p.dot(c)).collect();
        let re_psi = phase.iter().map(|w| amp * w.cos()).collect();
        let im_psi = phase.iter().map(|w| amp * w.sin()).collect();
        Self {
            phase,
            phase_rate,
            p,
            re_psi,
            im_psi,
        }
    }

    /// Mean path response `(ξ̄ + jζ̄)·ψ(l)` as `(re, im)`.
    pub fn response(&self, l: usize, xi: f64, zeta: f64) -> (f64, f64) {
        let (a, b) = (self.re_psi[l], self.im_psi[l]);
        (xi * a - zeta * b, xi * b + zeta * a)
    }
}

/// Stacked real measurement vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub data: DVector<f64>,
    pub paths: usize,
    /// Absolute (relative-cell) index of the first stored bin.
    pub first_bin: usize,
}

impl MeasurementVector {
    pub fn zeros(bins: usize, paths: usize, first_bin: usize) -> Self {
        Self {
            data: DVector::zeros(2 * paths * bins),
            paths,
            first_bin,
        }
    }

    pub fn bins(&self) -> usize {
        if self.paths == 0 {
            0
        } else {
            self.data.len() / (2 * self.paths)
        }
    }

    /// Offset of the real part of `path` in stored bin `slot`.
    pub fn re_index(&self, slot: usize, path: usize) -> usize {
        2 * self.paths * slot + path
    }

    pub fn im_index(&self, slot: usize, path: usize) -> usize {
        2 * self.paths * slot + self.paths + path
    }

    /// Complex value of one bin/path as `(re, im)`.
    pub fn get(&self, slot: usize, path: usize) -> (f64, f64) {
        (self.data[self.re_index(slot, path)], self.data[self.im_index(slot, path)])
    }

    fn add(&mut self, slot: usize, path: usize, re: f64, im: f64) {
        let (i, j) = (self.re_index(slot, path), self.im_index(slot, path));
        self.data[i] += re;
        self.data[j] += im;
    }
}

/// Weight of target `t` (relative cell `c`) in absolute bin `bin`.
pub fn bin_weight(cell: usize, beta: f64, bin: usize) -> f64 {
    if bin == cell {
        beta
    } else if bin + 1 == cell {
        1.0 - beta
    } else {
        0.0
    }
}

/// Add one target's mean contribution to `out`.
pub(crate) fn add_target_response(
    out: &mut MeasurementVector,
    cell: usize,
    t: &TargetParams,
    steering: &Steering,
) {
    for bin in [cell - 1, cell] {
        if bin < out.first_bin {
            continue;
        }
        let w = bin_weight(cell, t.beta, bin);
        if w == 0.0 {
            continue;
        }
        let slot = bin - out.first_bin;
        for l in 0..out.paths {
            let (re, im) = steering.response(l, t.xi, t.zeta);
            out.add(slot, l, w * re, w * im);
        }
    }
}

/// Mean of the stacked matched-filter output.
pub fn mean_response(s: &Scenario) -> MeasurementVector {
    let paths = s.paths();
    let mut out = MeasurementVector::zeros(s.bin_count(), paths, s.first_bin());
    let omega = omega_matrix(&s.array, &s.radar);
    for (i, t) in s.targets().iter().enumerate() {
        let steering = Steering::new(t.theta, &omega, &s.radar);
        add_target_response(&mut out, s.relative_cell(i), t, &steering);
    }
    out
}

/// Covariance `Σ = S ⊗ I_{2MN}` with `S` the tridiagonal scalar factor over
/// the stored bins.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    /// Scalar factor `S`, one row per stored bin.
    pub factor: DMatrix<f64>,
    /// Identity dimension `2MN`.
    pub block_dim: usize,
    pub first_bin: usize,
}

impl CovarianceModel {
    pub fn bins(&self) -> usize {
        self.factor.nrows()
    }

    /// Dense `Σ`; intended for oracles and small problems.
    pub fn dense(&self) -> DMatrix<f64> {
        self.factor.kronecker(&DMatrix::identity(self.block_dim, self.block_dim))
    }

    pub fn factor_inverse(&self) -> Result<DMatrix<f64>, SignalError> {
        self.factor
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(SignalError::NotPositiveDefinite)
    }

    /// `log det Σ = 2MN · log det S`.
    pub fn log_det(&self) -> Result<f64, SignalError> {
        let chol = self.factor.clone().cholesky().ok_or(SignalError::NotPositiveDefinite)?;
        let ld: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        Ok(self.block_dim as f64 * ld)
    }

    /// Symmetric square root of `S` via its eigendecomposition.
    pub fn factor_sqrt(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.factor.clone());
        let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
    }
}

/// Diagonal and lower-diagonal entries of the scalar factor over absolute
/// bins `0..=C`: `diag[c]` and `cross[c] = S[c, c−1]` (`cross[0] = 0`).
pub fn bin_scalars(s: &Scenario) -> (Vec<f64>, Vec<f64>) {
    let span = s.cell_span();
    let mut diag = vec![s.radar.noise_var; span + 1];
    let mut cross = vec![0.0; span + 1];
    let g = f64::from(s.radar.snapshots) * s.radar.scatter_var;
    for (i, t) in s.targets().iter().enumerate() {
        let c = s.relative_cell(i);
        diag[c] += g * t.beta * t.beta;
        diag[c - 1] += g * (1.0 - t.beta) * (1.0 - t.beta);
        cross[c] += g * (1.0 - t.beta) * t.beta;
    }
    (diag, cross)
}

pub fn covariance(s: &Scenario) -> CovarianceModel {
    let (diag, cross) = bin_scalars(s);
    let first = s.first_bin();
    let n = s.bin_count();
    let mut factor = DMatrix::zeros(n, n);
    for i in 0..n {
        let b = i + first;
        factor[(i, i)] = diag[b];
        if i > 0 {
            factor[(i, i - 1)] = cross[b];
            factor[(i - 1, i)] = cross[b];
        }
    }
    CovarianceModel {
        factor,
        block_dim: 2 * s.paths(),
        first_bin: first,
    }
}

/// Three-bin restriction of the scalar factor with its closed-form inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedCovariance {
    /// Absolute bins covered; entries beyond the stored range are padding.
    pub bins: [isize; 3],
    /// `[[c1, c4, 0], [c4, c2, c5], [0, c5, c3]]`.
    pub matrix: Matrix3<f64>,
    /// `k1..k6`: inverse diagonal (k1, k2, k3), then the (1,2), (1,3) and
    /// (2,3) entries.
    pub k: [f64; 6],
}

impl RestrictedCovariance {
    pub fn inverse(&self) -> Matrix3<f64> {
        let [k1, k2, k3, k4, k5, k6] = self.k;
        Matrix3::new(k1, k4, k5, k4, k2, k6, k5, k6, k3)
    }
}

/// Closed-form inverse entries of a symmetric tridiagonal 3×3 matrix.
pub fn tridiagonal3_inverse(c1: f64, c2: f64, c3: f64, c4: f64, c5: f64) -> Result<[f64; 6], SignalError> {
    let det = c1 * (c2 * c3 - c5 * c5) - c4 * c4 * c3;
    let scale = c1.abs().max(c2.abs()).max(c3.abs()).powi(3);
    if !(det.abs() > 1e-14 * scale) {
        return Err(SignalError::SingularRestriction { det });
    }
    Ok([
        (c2 * c3 - c5 * c5) / det,
        c1 * c3 / det,
        (c1 * c2 - c4 * c4) / det,
        -c4 * c3 / det,
        c4 * c5 / det,
        -c1 * c5 / det,
    ])
}

/// Restriction of the scalar factor to absolute bins `first, first+1,
/// first+2`. Bins outside the stored range are padded with a decoupled
/// noise-only entry, which carries no weight in any Fisher term.
pub fn restricted_covariance(s: &Scenario, first: isize) -> Result<RestrictedCovariance, SignalError> {
    let (diag, cross) = bin_scalars(s);
    let lo = s.first_bin() as isize;
    let hi = s.cell_span() as isize;
    let stored = |b: isize| b >= lo && b <= hi;
    let bins = [first, first + 1, first + 2];
    let d = bins.map(|b| if stored(b) { diag[b as usize] } else { s.radar.noise_var });
    let x = |b: isize| {
        if stored(b) && stored(b - 1) {
            cross[b as usize]
        } else {
            0.0
        }
    };
    let (c4, c5) = (x(bins[1]), x(bins[2]));
    let k = tridiagonal3_inverse(d[0], d[1], d[2], c4, c5)?;
    Ok(RestrictedCovariance {
        bins,
        matrix: Matrix3::new(d[0], c4, 0.0, c4, d[1], c5, 0.0, c5, d[2]),
        k,
    })
}

/// Gaussian sampler for `N(ρ̄, Σ)` built once per scenario.
#[derive(Debug, Clone)]
pub struct MeasurementSampler {
    mean: MeasurementVector,
    root: DMatrix<f64>,
}

impl MeasurementSampler {
    pub fn new(s: &Scenario) -> Self {
        Self {
            mean: mean_response(s),
            root: covariance(s).factor_sqrt(),
        }
    }

    pub fn mean(&self) -> &MeasurementVector {
        &self.mean
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> MeasurementVector {
        let bins = self.mean.bins();
        let width = 2 * self.mean.paths;
        let z = DMatrix::<f64>::from_fn(bins, width, |_, _| rng.sample(StandardNormal));
        let colored = &self.root * z;
        let mut out = self.mean.clone();
        for b in 0..bins {
            for j in 0..width {
                out.data[b * width + j] += colored[(b, j)];
            }
        }
        out
    }
}

/// One draw from the measurement distribution, reproducible from `seed`.
pub fn sample_measurement(s: &Scenario, seed: u64) -> MeasurementVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MeasurementSampler::new(s).draw(&mut rng)
}

/// Exact Gaussian log-density of `rho` under the scenario's model.
pub fn log_likelihood(rho: &MeasurementVector, s: &Scenario) -> Result<f64, SignalError> {
    let mean = mean_response(s);
    if rho.data.len() != mean.data.len() {
        return Err(SignalError::DimensionMismatch {
            expected: mean.data.len(),
            found: rho.data.len(),
        });
    }
    let cov = covariance(s);
    let sinv = cov.factor_inverse()?;
    let width = cov.block_dim;
    let bins = cov.bins();
    let r = &rho.data - &mean.data;
    let mut quad = 0.0;
    for b in 0..bins {
        for b2 in 0..bins {
            let w = sinv[(b, b2)];
            if w == 0.0 {
                continue;
            }
            let dot = r.rows(b * width, width).dot(&r.rows(b2 * width, width));
            quad += w * dot;
        }
    }
    let dim = r.len() as f64;
    Ok(-0.5 * (dim * (2.0 * PI).ln() + cov.log_det()? + quad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{PlacementConstraints, TargetParams};
    use proptest::prelude::*;

    fn target(cell: u32, theta: f64, beta: f64) -> TargetParams {
        TargetParams {
            cell,
            theta,
            beta,
            xi: 3.0,
            zeta: 3.0,
        }
    }

    fn scenario(array: ArrayGeometry, targets: Vec<TargetParams>) -> Scenario {
        let radar = RadarConfig::standard(array.m());
        Scenario::new(radar, array, PlacementConstraints::for_wavelength(0.3), targets)
    }

    fn two_by_two() -> ArrayGeometry {
        ArrayGeometry::transceiver(vec![Point::new(-0.3, 0.0), Point::new(0.3, 0.0)])
    }

    #[test]
    fn omega_examples() {
        let r = RadarConfig::standard(1);
        let single = ArrayGeometry::separate(vec![Point::zeros()], vec![Point::zeros()]);
        assert_eq!(omega_matrix(&single, &r).columns(), &[Point::zeros()]);

        let fan = ArrayGeometry::separate(vec![Point::zeros()], vec![Point::new(1.0, 0.0), Point::new(-1.0, 0.0)]);
        let om = omega_matrix(&fan, &r);
        assert_eq!(om.columns(), &[Point::new(1.0, 0.0), Point::new(-1.0, 0.0)]);
        assert_eq!(om.column_sum(), Point::zeros());

        let om = omega_matrix(&two_by_two(), &RadarConfig::standard(2));
        assert_eq!(om.paths(), 4);
        assert!(om.column_sum().norm() < 1e-15);
    }

    #[test]
    fn path_index_is_transmitter_major() {
        let r = RadarConfig::standard(2);
        let g = ArrayGeometry::separate(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)],
            vec![Point::new(0.0, 2.0), Point::new(0.0, 3.0), Point::new(0.0, 4.0)],
        );
        let om = omega_matrix(&g, &r);
        let l = om.path_index(1, 2);
        assert_eq!(l, 5);
        assert_eq!(om.columns()[l], Point::new(-1.0, 4.0));
    }

    #[test]
    fn empty_scenario_is_zero_mean_white_noise() {
        let s = scenario(two_by_two(), vec![]);
        assert_eq!(mean_response(&s).data.len(), 0);
        let cov = covariance(&s);
        assert_eq!(cov.bins(), 0);
        let rc = restricted_covariance(&s, 0).unwrap();
        assert_eq!(rc.k, [1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn unit_ratio_puts_everything_in_own_bin() {
        let s = scenario(two_by_two(), vec![target(5, 0.4, 1.0)]);
        let mean = mean_response(&s);
        assert_eq!(mean.bins(), 2);
        assert!(mean.data.rows(0, 8).iter().all(|v| *v == 0.0));
        assert!(mean.data.rows(8, 8).iter().any(|v| *v != 0.0));
        let cov = covariance(&s);
        assert_eq!(cov.factor[(0, 1)], 0.0);
    }

    #[test]
    fn collocated_single_path_mean() {
        let g = ArrayGeometry::separate(vec![Point::zeros()], vec![Point::zeros()]);
        let mut t = target(1, 0.7, 0.25);
        t.xi = 1.0;
        t.zeta = 0.0;
        let s = scenario(g, vec![t]);
        let mean = mean_response(&s);
        assert!((mean.get(1, 0).0 - 0.25 * 128f64.sqrt()).abs() < 1e-12);
        assert!((mean.get(0, 0).0 - 0.75 * 128f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean.get(1, 0).1, 0.0);
    }

    #[test]
    fn half_ratio_cross_term() {
        let s = scenario(two_by_two(), vec![target(3, 0.0, 0.5)]);
        let cov = covariance(&s);
        assert!((cov.factor[(1, 0)] - 3.2e-3).abs() < 1e-15);
        assert!((cov.factor[(1, 1)] - (1.0 + 3.2e-3)).abs() < 1e-15);
    }

    #[test]
    fn bin0_switch_drops_the_spill_bin() {
        let mut s = scenario(two_by_two(), vec![target(3, 0.2, 0.5), target(4, -0.2, 0.3)]);
        assert_eq!(mean_response(&s).bins(), 3);
        s.radar.include_bin0 = false;
        let m = mean_response(&s);
        assert_eq!(m.bins(), 2);
        assert_eq!(m.first_bin, 1);
        assert_eq!(covariance(&s).bins(), 2);
    }

    #[test]
    fn restricted_inverse_matches_generic() {
        let (a, b) = (2.5, 0.7);
        let k = tridiagonal3_inverse(a, a, a, b, 0.0).unwrap();
        let m = Matrix3::new(a, b, 0.0, b, a, 0.0, 0.0, 0.0, a);
        let inv = m.try_inverse().unwrap();
        let ours = Matrix3::new(k[0], k[3], k[4], k[3], k[1], k[5], k[4], k[5], k[2]);
        assert!((inv - ours).norm() < 1e-14);
    }

    #[test]
    fn restricted_matches_dense_on_two_target_scenario() {
        let r = RadarConfig::standard(4);
        let t1 = TargetParams::from_cartesian(Point::new(410.0, -710.0), 3.0, 3.0, &r).unwrap();
        let mut t2 = t1;
        t2.theta = PI / 3.0;
        t2.beta = 0.66;
        let g = ArrayGeometry::transceiver((0..4).map(|i| Point::new(0.3 * i as f64 - 0.45, 0.0)).collect());
        let s = scenario(g, vec![t1, t2]);
        let rc = restricted_covariance(&s, 0).unwrap();
        let dense = covariance(&s).factor;
        assert_eq!(dense.nrows(), 2);
        let inv = rc.inverse();
        assert!((rc.matrix * inv - Matrix3::identity()).norm() < 1e-12);
        let dinv = dense.try_inverse().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv[(i, j)] - dinv[(i, j)]).abs() < 1e-12);
            }
        }
        assert!((inv[(2, 2)] - 1.0).abs() < 1e-15);
    }

    fn dense_log_density(rho: &DVector<f64>, mean: &DVector<f64>, sigma: &DMatrix<f64>) -> f64 {
        let chol = sigma.clone().cholesky().unwrap();
        let r = rho - mean;
        let sol = chol.solve(&r);
        let ld: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        -0.5 * (r.len() as f64 * (2.0 * PI).ln() + ld + r.dot(&sol))
    }

    #[test]
    fn log_likelihood_matches_dense_density() {
        let s = scenario(two_by_two(), vec![target(3, 0.2, 0.5), target(4, -0.7, 0.3)]);
        let mut s = s;
        s.radar.scatter_var = 0.05;
        let sigma = covariance(&s).dense();
        let mean = mean_response(&s);
        for seed in 0..5 {
            let rho = sample_measurement(&s, seed);
            let ours = log_likelihood(&rho, &s).unwrap();
            let theirs = dense_log_density(&rho.data, &mean.data, &sigma);
            assert!((ours - theirs).abs() < 1e-10 * theirs.abs().max(1.0));
        }
        let peak = log_likelihood(&mean, &s).unwrap();
        let expected = -0.5 * covariance(&s).log_det().unwrap() - 0.5 * mean.data.len() as f64 * (2.0 * PI).ln();
        assert!((peak - expected).abs() < 1e-10);
    }

    #[test]
    fn log_likelihood_decreases_away_from_mean() {
        let s = scenario(two_by_two(), vec![target(3, 0.2, 0.5)]);
        let mean = mean_response(&s);
        let dir = sample_measurement(&s, 9).data - &mean.data;
        let mut last = f64::INFINITY;
        for step in 0..6 {
            let mut rho = mean.clone();
            rho.data += &dir * (step as f64 * 0.5);
            let ll = log_likelihood(&rho, &s).unwrap();
            assert!(ll < last);
            last = ll;
        }
        let short = MeasurementVector::zeros(1, 4, 0);
        assert!(matches!(log_likelihood(&short, &s), Err(SignalError::DimensionMismatch { .. })));
    }

    #[test]
    fn noiseless_sample_equals_mean() {
        let mut s = scenario(two_by_two(), vec![target(3, 0.2, 0.5)]);
        s.radar.scatter_var = 0.0;
        s.radar.noise_var = 1e-30;
        let rho = sample_measurement(&s, 3);
        assert!((rho.data - mean_response(&s).data).amax() < 1e-12);
    }

    #[test]
    fn sampler_moments() {
        let mut s = scenario(two_by_two(), vec![target(3, 0.2, 0.5), target(4, 1.0, 0.3)]);
        s.radar.scatter_var = 2e-3;
        let sampler = MeasurementSampler::new(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let dim = sampler.mean().data.len();
        let mut sum = DVector::zeros(dim);
        let mut outer = DMatrix::zeros(dim, dim);
        for _ in 0..n {
            let r = sampler.draw(&mut rng).data - &sampler.mean().data;
            sum += &r;
            outer.ger(1.0, &r, &r, 1.0);
        }
        let sigma = covariance(&s).dense();
        let mean_err = &sum / n as f64;
        for i in 0..dim {
            assert!(mean_err[i].abs() < 4.0 * (sigma[(i, i)] / n as f64).sqrt());
        }
        let emp = outer / n as f64;
        assert!((emp - &sigma).norm() / sigma.norm() < 0.05);
    }

    proptest! {
        #[test]
        fn path_energy_is_snapshot_count(theta in -PI..PI, pts in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..5)) {
            let g = ArrayGeometry::transceiver(pts.iter().map(|&(x, y)| Point::new(x, y)).collect());
            let r = RadarConfig::standard(g.m());
            let st = Steering::new(theta, &omega_matrix(&g, &r), &r);
            for l in 0..st.phase.len() {
                let e = st.re_psi[l].powi(2) + st.im_psi[l].powi(2);
                prop_assert!((e - 128.0).abs() < 1e-12);
            }
        }

        #[test]
        fn transceiver_columns_cancel(pts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..7)) {
            let g = ArrayGeometry::transceiver(pts.iter().map(|&(x, y)| Point::new(x, y)).collect());
            let r = RadarConfig::standard(g.m());
            prop_assert!(omega_matrix(&g, &r).column_sum().norm() <= 1e-12 * r.wavelength);
        }

        #[test]
        fn translation_invariance(dx in -10.0..10.0f64, dy in -10.0..10.0f64, theta in -PI..PI, beta in 0.0..1.0f64) {
            let s = scenario(two_by_two(), vec![target(2, theta, beta)]);
            let moved = s.with_array(s.array.translated(Point::new(dx, dy)));
            prop_assert!((mean_response(&s).data - mean_response(&moved).data).amax() < 1e-9);
            prop_assert_eq!(covariance(&s), covariance(&moved));
        }

        #[test]
        fn mean_is_linear_in_amplitude(a in -5.0..5.0f64, theta in -PI..PI, beta in 0.0..1.0f64) {
            let t = target(2, theta, beta);
            let s = scenario(two_by_two(), vec![t]);
            let mut scaled = t;
            scaled.xi *= a;
            scaled.zeta *= a;
            let lhs = mean_response(&s.with_targets(vec![scaled])).data;
            let rhs = mean_response(&s).data * a;
            prop_assert!((lhs - rhs).amax() < 1e-10);
        }

        #[test]
        fn covariance_is_spd_tridiagonal(betas in prop::collection::vec(0.0..1.0f64, 1..4), cells in prop::collection::vec(1u32..4, 3)) {
            let targets: Vec<_> = betas.iter().zip(cells.iter()).map(|(&b, &c)| target(c, 0.1, b)).collect();
            let mut s = scenario(two_by_two(), targets);
            s.radar.scatter_var = 0.01;
            let f = covariance(&s).factor;
            prop_assert_eq!(&f, &f.transpose());
            for i in 0..f.nrows() {
                for j in 0..f.ncols() {
                    if i.abs_diff(j) > 1 {
                        prop_assert_eq!(f[(i, j)], 0.0);
                    }
                }
            }
            prop_assert!(f.cholesky().is_some());
        }
    }
}
