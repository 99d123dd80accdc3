//! Closed-form Fisher information for targets straddling range cells, its
//! mapping to Cartesian state through the system matrix, and the CRLB.
//!
//! Parameter and state vectors are stacked cell-major, then by target within
//! a cell (the order of [`Scenario::targets`]), then `(θ, β, ξ̄, ζ̄)` or
//! `(x, y, ξ̄, ζ̄)`.

pub mod oracle;

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::scenario::Scenario;
use crate::signal::{bin_weight, omega_matrix, restricted_covariance, SignalError, Steering};

pub use oracle::numerical_fim_oracle;

/// Condition number above which the FIM is declared singular.
pub const SINGULAR_COND: f64 = 1e12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FimError {
    #[error("targets {a} and {b} are {gap} cells apart; the three-cell window cannot couple them")]
    CellGap { a: usize, b: usize, gap: usize },
    #[error("target {target} sits at the array origin")]
    ZeroRange { target: usize },
    #[error("Fisher information is singular (equilibrated condition number {cond:e})")]
    SingularFim { cond: f64, min_eig: f64, max_eig: f64 },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// How bins are coupled when computing the inverse-covariance weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceWindow {
    /// Three consecutive bins around each target pair, inverted in closed
    /// form. Exact whenever the scenario spans at most two cells.
    #[default]
    ThreeCell,
    /// Exact inverse of the full tridiagonal factor.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FimOptions {
    pub window: CovarianceWindow,
    /// Add `ε·I` with `ε = 1e-10·trace/dim` instead of failing on a singular FIM.
    pub ridge: bool,
}

/// Bins over which a pair's weights are evaluated, with the matching block
/// of the inverse scalar covariance.
#[derive(Debug, Clone)]
struct BinCoupling {
    bins: Vec<isize>,
    stored: Vec<bool>,
    sinv: DMatrix<f64>,
}

impl BinCoupling {
    fn full(s: &Scenario) -> Result<Self, FimError> {
        let cov = crate::signal::covariance(s);
        let first = s.first_bin() as isize;
        let n = cov.bins();
        Ok(Self {
            bins: (0..n as isize).map(|i| i + first).collect(),
            stored: vec![true; n],
            sinv: cov.factor_inverse()?,
        })
    }

    fn window(s: &Scenario, ca: usize, cb: usize) -> Result<Self, FimError> {
        let lo_stored = s.first_bin() as isize;
        let hi_stored = s.cell_span() as isize;
        let needed = [ca as isize - 1, ca as isize, cb as isize - 1, cb as isize];
        let inside = needed.iter().copied().filter(|b| *b >= lo_stored && *b <= hi_stored);
        let lo = inside.clone().min().unwrap_or(lo_stored);
        let hi = inside.max().unwrap_or(lo_stored);
        let mut start = lo;
        while start + 2 > hi_stored && start - 1 >= (hi - 2).max(lo_stored) {
            start -= 1;
        }
        let rc = restricted_covariance(s, start)?;
        let inv = rc.inverse();
        Ok(Self {
            bins: rc.bins.to_vec(),
            stored: rc.bins.iter().map(|b| *b >= lo_stored && *b <= hi_stored).collect(),
            sinv: DMatrix::from_fn(3, 3, |i, j| inv[(i, j)]),
        })
    }

    fn position(&self, bin: isize) -> Option<usize> {
        self.bins.iter().position(|b| *b == bin).filter(|&i| self.stored[i])
    }

    /// Amplitude weights `(1−β, β)` on bins `c−1, c`.
    fn amplitude_weights(&self, cell: usize, beta: f64) -> Vec<f64> {
        self.bins
            .iter()
            .zip(&self.stored)
            .map(|(&b, &st)| if st && b >= 0 { bin_weight(cell, beta, b as usize) } else { 0.0 })
            .collect()
    }

    /// Derivative of the weights in `β`: `−1` on bin `c−1`, `+1` on bin `c`.
    fn ratio_weights(&self, cell: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.bins.len()];
        if let Some(i) = self.position(cell as isize) {
            v[i] = 1.0;
        }
        if let Some(i) = self.position(cell as isize - 1) {
            v[i] = -1.0;
        }
        v
    }

    /// `∂S/∂β` of one target restricted to this bin set.
    fn ratio_derivative(&self, cell: usize, beta: f64, g: f64) -> DMatrix<f64> {
        let n = self.bins.len();
        let mut d = DMatrix::zeros(n, n);
        let own = self.position(cell as isize);
        let prev = self.position(cell as isize - 1);
        if let Some(i) = own {
            d[(i, i)] += 2.0 * g * beta;
        }
        if let Some(j) = prev {
            d[(j, j)] -= 2.0 * g * (1.0 - beta);
        }
        if let (Some(i), Some(j)) = (own, prev) {
            d[(i, j)] += g * (1.0 - 2.0 * beta);
            d[(j, i)] += g * (1.0 - 2.0 * beta);
        }
        d
    }

    fn weigh(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                acc += x * self.sinv[(i, j)] * y;
            }
        }
        acc
    }
}

/// Amplitude products and inverse-covariance weights of one target pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCoefficients {
    /// `ξ̄_a ξ̄_b + ζ̄_a ζ̄_b`.
    pub kappa: f64,
    /// `ξ̄_a ζ̄_b − ζ̄_a ξ̄_b`.
    pub iota: f64,
    /// Weight shared by entries not involving `β`: `w_aᵀ S⁻¹ w_b`.
    pub c_theta_theta: f64,
    /// `u_aᵀ S⁻¹ u_b`.
    pub c_beta_beta: f64,
    /// `w_aᵀ S⁻¹ u_b`.
    pub c_theta_beta: f64,
    /// `u_aᵀ S⁻¹ w_b`.
    pub c_beta_theta: f64,
    /// Covariance contribution to the `(β_a, β_b)` entry.
    pub f_beta_beta: f64,
}

fn coefficients(s: &Scenario, a: usize, b: usize, cpl: &BinCoupling) -> PairCoefficients {
    let (ta, tb) = (&s.targets()[a], &s.targets()[b]);
    let (ca, cb) = (s.relative_cell(a), s.relative_cell(b));
    let wa = cpl.amplitude_weights(ca, ta.beta);
    let wb = cpl.amplitude_weights(cb, tb.beta);
    let ua = cpl.ratio_weights(ca);
    let ub = cpl.ratio_weights(cb);
    let g = f64::from(s.radar.snapshots) * s.radar.scatter_var;
    let da = cpl.ratio_derivative(ca, ta.beta, g);
    let db = cpl.ratio_derivative(cb, tb.beta, g);
    let f = (&cpl.sinv * da * &cpl.sinv * db).trace() * s.paths() as f64;
    PairCoefficients {
        kappa: ta.xi * tb.xi + ta.zeta * tb.zeta,
        iota: ta.xi * tb.zeta - ta.zeta * tb.xi,
        c_theta_theta: cpl.weigh(&wa, &wb),
        c_beta_beta: cpl.weigh(&ua, &ub),
        c_theta_beta: cpl.weigh(&wa, &ub),
        c_beta_theta: cpl.weigh(&ua, &wb),
        f_beta_beta: f,
    }
}

fn check_gap(s: &Scenario, a: usize, b: usize) -> Result<(), FimError> {
    let gap = s.relative_cell(a).abs_diff(s.relative_cell(b));
    if gap > 1 {
        Err(FimError::CellGap { a, b, gap })
    } else {
        Ok(())
    }
}

/// Coefficients of the pair `(a, b)` (indices into [`Scenario::targets`]).
pub fn pair_coefficients(s: &Scenario, a: usize, b: usize, opts: FimOptions) -> Result<PairCoefficients, FimError> {
    let cpl = match opts.window {
        CovarianceWindow::ThreeCell => {
            check_gap(s, a, b)?;
            BinCoupling::window(s, s.relative_cell(a), s.relative_cell(b))?
        }
        CovarianceWindow::Full => BinCoupling::full(s)?,
    };
    Ok(coefficients(s, a, b, &cpl))
}

/// Path sums of the 16 sinusoid families, rows `(θ, β, ξ̄, ζ̄)` of target
/// `a`, columns of target `b`.
fn path_sums(sa: &Steering, sb: &Steering, ta: (f64, f64), tb: (f64, f64), kappa: f64, iota: f64) -> Matrix4<f64> {
    let (xa, za) = ta;
    let (xb, zb) = tb;
    let mut m = Matrix4::zeros();
    for l in 0..sa.phase.len() {
        let (s, c) = (sb.phase[l] - sa.phase[l]).sin_cos();
        let (ra, rb) = (sa.phase_rate[l], sb.phase_rate[l]);
        let re = kappa * c - iota * s;
        let im = kappa * s + iota * c;
        m[(0, 0)] += ra * rb * re;
        m[(0, 1)] += ra * im;
        m[(0, 2)] += ra * (xa * s - za * c);
        m[(0, 3)] += ra * (xa * c + za * s);
        m[(1, 0)] -= rb * im;
        m[(1, 1)] += re;
        m[(1, 2)] += xa * c + za * s;
        m[(1, 3)] += za * c - xa * s;
        m[(2, 0)] -= rb * (xb * s + zb * c);
        m[(2, 1)] += xb * c - zb * s;
        m[(2, 2)] += c;
        m[(2, 3)] -= s;
        m[(3, 0)] += rb * (xb * c - zb * s);
        m[(3, 1)] += xb * s + zb * c;
        m[(3, 2)] += s;
        m[(3, 3)] += c;
    }
    m
}

fn block_from(s: &Scenario, a: usize, b: usize, steer: &[Steering], cpl: &BinCoupling) -> Matrix4<f64> {
    let (ta, tb) = (&s.targets()[a], &s.targets()[b]);
    let co = coefficients(s, a, b, cpl);
    let sums = path_sums(&steer[a], &steer[b], (ta.xi, ta.zeta), (tb.xi, tb.zeta), co.kappa, co.iota);
    let k = f64::from(s.radar.snapshots);
    let weight = |i: usize, j: usize| match (i == 1, j == 1) {
        (false, false) => co.c_theta_theta,
        (false, true) => co.c_theta_beta,
        (true, false) => co.c_beta_theta,
        (true, true) => co.c_beta_beta,
    };
    let mut out = Matrix4::from_fn(|i, j| k * weight(i, j) * sums[(i, j)]);
    out[(1, 1)] += co.f_beta_beta;
    out
}

fn steering_all(s: &Scenario) -> Vec<Steering> {
    let omega = omega_matrix(&s.array, &s.radar);
    s.targets().iter().map(|t| Steering::new(t.theta, &omega, &s.radar)).collect()
}

/// 4×4 information block between targets `a` and `b`.
pub fn pair_fim_block(s: &Scenario, a: usize, b: usize, opts: FimOptions) -> Result<Matrix4<f64>, FimError> {
    let cpl = match opts.window {
        CovarianceWindow::ThreeCell => {
            check_gap(s, a, b)?;
            BinCoupling::window(s, s.relative_cell(a), s.relative_cell(b))?
        }
        CovarianceWindow::Full => BinCoupling::full(s)?,
    };
    Ok(block_from(s, a, b, &steering_all(s), &cpl))
}

/// Parameter-space FIM `J_ΘΘ′` (4T × 4T).
pub fn assemble_parameter_fim(s: &Scenario, opts: FimOptions) -> Result<DMatrix<f64>, FimError> {
    let t = s.targets().len();
    let steer = steering_all(s);
    let full = match opts.window {
        CovarianceWindow::Full => Some(BinCoupling::full(s)?),
        CovarianceWindow::ThreeCell => None,
    };
    let mut j = DMatrix::zeros(4 * t, 4 * t);
    for a in 0..t {
        for b in a..t {
            let blk = match &full {
                Some(cpl) => block_from(s, a, b, &steer, cpl),
                None => {
                    if s.relative_cell(a).abs_diff(s.relative_cell(b)) > 1 {
                        continue;
                    }
                    let cpl = BinCoupling::window(s, s.relative_cell(a), s.relative_cell(b))?;
                    block_from(s, a, b, &steer, &cpl)
                }
            };
            for r in 0..4 {
                for c in 0..4 {
                    j[(4 * a + r, 4 * b + c)] = blk[(r, c)];
                    j[(4 * b + c, 4 * a + r)] = blk[(r, c)];
                }
            }
        }
    }
    Ok(j)
}

/// Jacobian `Γ` with `Γ[X_i, Θ_j] = ∂Θ_j/∂X_i`, block diagonal per target.
pub fn system_matrix(s: &Scenario) -> Result<DMatrix<f64>, FimError> {
    let t = s.targets().len();
    let mut g = DMatrix::zeros(4 * t, 4 * t);
    for (i, tp) in s.targets().iter().enumerate() {
        let r = tp.range(&s.radar);
        if !(r > 0.0) {
            return Err(FimError::ZeroRange { target: i });
        }
        let (x, y) = (r * tp.theta.cos(), r * tp.theta.sin());
        let o = 4 * i;
        g[(o, o)] = -y / (r * r);
        g[(o + 1, o)] = x / (r * r);
        g[(o, o + 1)] = x / (r * s.radar.bin_width);
        g[(o + 1, o + 1)] = y / (r * s.radar.bin_width);
        g[(o + 2, o + 2)] = 1.0;
        g[(o + 3, o + 3)] = 1.0;
    }
    Ok(g)
}

/// Scalar summaries of a covariance bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub trace: f64,
    pub det: f64,
    pub max_eig: f64,
}

impl Metrics {
    pub fn of(m: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(m.clone());
        Self {
            trace: m.trace(),
            det: eig.eigenvalues.iter().product(),
            max_eig: eig.eigenvalues.max(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Trace,
    Det,
    MaxEig,
}

impl Metric {
    pub fn pick(self, m: &Metrics) -> f64 {
        match self {
            Metric::Trace => m.trace,
            Metric::Det => m.det,
            Metric::MaxEig => m.max_eig,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FimReport {
    pub parameter_fim: DMatrix<f64>,
    pub system: DMatrix<f64>,
    pub state_fim: DMatrix<f64>,
    pub crlb: DMatrix<f64>,
    pub metrics: Metrics,
    /// Metrics of each target's 2×2 position block of the CRLB.
    pub position: Vec<Metrics>,
    /// Condition number of the equilibrated state FIM.
    pub cond: f64,
    pub ridge_applied: bool,
}

impl FimReport {
    /// `√trace` of target `t`'s position block (m).
    pub fn position_bound(&self, t: usize) -> f64 {
        self.position[t].trace.sqrt()
    }
}

/// Invert a symmetric FIM after Jacobi equilibration. Returns the inverse
/// and the equilibrated condition number.
pub fn invert_fim(j: &DMatrix<f64>, ridge: bool) -> Result<(DMatrix<f64>, f64, bool), FimError> {
    let n = j.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), 1.0, false));
    }
    let attempt = |m: &DMatrix<f64>| -> (Option<DMatrix<f64>>, f64, f64, f64) {
        let d = m.diagonal();
        let dmax = d.amax();
        if !(dmax > 0.0) || d.iter().any(|v| !(*v > 1e-300)) {
            return (None, f64::INFINITY, 0.0, dmax);
        }
        let scale = d.map(|v| 1.0 / v.sqrt());
        let e = DMatrix::from_fn(n, n, |r, c| m[(r, c)] * scale[r] * scale[c]);
        let eig = SymmetricEigen::new(e);
        let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(cond <= SINGULAR_COND) {
            return (None, cond, lo, hi);
        }
        let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
        let einv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
        let out = DMatrix::from_fn(n, n, |r, c| einv[(r, c)] * scale[r] * scale[c]);
        (Some(out), cond, lo, hi)
    };
    match attempt(j) {
        (Some(inv), cond, _, _) => Ok((inv, cond, false)),
        (None, cond, lo, hi) => {
            if !ridge {
                return Err(FimError::SingularFim { cond, min_eig: lo, max_eig: hi });
            }
            let eps = 1e-10 * j.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
            let mut r = j.clone();
            for i in 0..n {
                r[(i, i)] += eps;
            }
            match attempt(&r) {
                (Some(inv), cond, _, _) => Ok((inv, cond, true)),
                (None, cond, lo, hi) => Err(FimError::SingularFim { cond, min_eig: lo, max_eig: hi }),
            }
        }
    }
}

/// Build a report from an assembled parameter FIM and system matrix.
pub fn crlb_from_parts(parameter_fim: DMatrix<f64>, system: DMatrix<f64>, ridge: bool) -> Result<FimReport, FimError> {
    let state_fim = &system * &parameter_fim * system.transpose();
    let state_fim = (&state_fim + state_fim.transpose()) * 0.5;
    let (crlb, cond, ridge_applied) = invert_fim(&state_fim, ridge)?;
    let t = crlb.nrows() / 4;
    let position = (0..t)
        .map(|i| Metrics::of(&crlb.view((4 * i, 4 * i), (2, 2)).into_owned()))
        .collect();
    Ok(FimReport {
        metrics: Metrics::of(&crlb),
        position,
        parameter_fim,
        system,
        state_fim,
        crlb,
        cond,
        ridge_applied,
    })
}

pub fn state_fim_and_crlb(s: &Scenario, opts: FimOptions) -> Result<FimReport, FimError> {
    let j = assemble_parameter_fim(s, opts)?;
    let g = system_matrix(s)?;
    crlb_from_parts(j, g, opts.ridge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ArrayGeometry, PlacementConstraints, Point, RadarConfig, TargetParams};
    use nalgebra::Complex;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn scenario(array: ArrayGeometry, targets: Vec<TargetParams>) -> Scenario {
        let radar = RadarConfig::standard(array.m());
        Scenario::new(radar, array, PlacementConstraints::for_wavelength(0.3), targets)
    }

    fn tgt(cell: u32, theta: f64, beta: f64, xi: f64, zeta: f64) -> TargetParams {
        TargetParams { cell, theta, beta, xi, zeta }
    }

    fn square() -> ArrayGeometry {
        ArrayGeometry::transceiver(vec![
            Point::new(0.3, 0.0),
            Point::new(0.0, 0.3),
            Point::new(-0.3, 0.0),
            Point::new(0.0, -0.3),
        ])
    }

    /// Same sums written as `Re(conj(f_a) f_b e^{jΔ})` with `f^θ = j·rate·α`,
    /// `f^β = α`, `f^ξ = 1`, `f^ζ = j`.
    fn complex_sums(sa: &Steering, sb: &Steering, aa: Complex<f64>, ab: Complex<f64>) -> Matrix4<f64> {
        let j = Complex::new(0.0, 1.0);
        let mut m = Matrix4::zeros();
        for l in 0..sa.phase.len() {
            let fa = [j * sa.phase_rate[l] * aa, aa, Complex::new(1.0, 0.0), j];
            let fb = [j * sb.phase_rate[l] * ab, ab, Complex::new(1.0, 0.0), j];
            let rot = Complex::from_polar(1.0, sb.phase[l] - sa.phase[l]);
            for r in 0..4 {
                for c in 0..4 {
                    m[(r, c)] += (fa[r].conj() * fb[c] * rot).re;
                }
            }
        }
        m
    }

    #[test]
    fn sinusoid_table_matches_complex_form() {
        let r = RadarConfig::standard(4);
        let om = omega_matrix(&square(), &r);
        let sa = Steering::new(0.4, &om, &r);
        let sb = Steering::new(-1.1, &om, &r);
        let (aa, ab) = (Complex::new(1.5, -0.7), Complex::new(-0.4, 2.0));
        let kappa = aa.re * ab.re + aa.im * ab.im;
        let iota = aa.re * ab.im - aa.im * ab.re;
        let ours = path_sums(&sa, &sb, (aa.re, aa.im), (ab.re, ab.im), kappa, iota);
        let theirs = complex_sums(&sa, &sb, aa, ab);
        assert!((ours - theirs).amax() < 1e-9 * theirs.amax());
    }

    #[test]
    fn real_amplitude_has_no_amplitude_cross_term() {
        let s = scenario(square(), vec![tgt(4, 0.3, 0.6, 2.0, 0.0)]);
        let b = pair_fim_block(&s, 0, 0, FimOptions::default()).unwrap();
        assert_eq!(b[(2, 3)], 0.0);
        assert!((b[(2, 2)] - b[(3, 3)]).abs() < 1e-12 * b[(2, 2)]);
    }

    #[test]
    fn single_collocated_path_has_no_doa_information() {
        let g = ArrayGeometry::transceiver(vec![Point::zeros()]);
        let s = scenario(g, vec![tgt(2, 0.3, 0.6, 3.0, 3.0)]);
        let b = pair_fim_block(&s, 0, 0, FimOptions::default()).unwrap();
        assert_eq!(b[(0, 0)], 0.0);
        assert!(matches!(state_fim_and_crlb(&s, FimOptions::default()), Err(FimError::SingularFim { .. })));
    }

    #[test]
    fn distant_cells_do_not_couple() {
        let s = scenario(square(), vec![tgt(4, 0.3, 0.6, 3.0, 3.0), tgt(7, -0.3, 0.2, 3.0, 3.0)]);
        assert!(matches!(
            pair_fim_block(&s, 0, 1, FimOptions::default()),
            Err(FimError::CellGap { gap: 3, .. })
        ));
        let j = assemble_parameter_fim(&s, FimOptions::default()).unwrap();
        assert_eq!(j.view((0, 4), (4, 4)).amax(), 0.0);
        let full = FimOptions { window: CovarianceWindow::Full, ..Default::default() };
        let jf = assemble_parameter_fim(&s, full).unwrap();
        assert!(jf.view((0, 4), (4, 4)).amax() < 1e-9 * jf.amax());
    }

    #[test]
    fn duplicate_targets_are_singular() {
        let t = tgt(4, 0.3, 0.6, 3.0, 3.0);
        let s = scenario(square(), vec![t, t]);
        let j = assemble_parameter_fim(&s, FimOptions::default()).unwrap();
        let rank = j.clone().svd(false, false).rank(1e-9 * j.amax());
        assert!(rank < 8);
        assert!(matches!(state_fim_and_crlb(&s, FimOptions::default()), Err(FimError::SingularFim { .. })));
        let ridged = state_fim_and_crlb(&s, FimOptions { ridge: true, ..Default::default() }).unwrap();
        assert!(ridged.ridge_applied);
    }

    #[test]
    fn identity_fim_gives_identity_bound() {
        let rep = crlb_from_parts(DMatrix::identity(4, 4), DMatrix::identity(4, 4), false).unwrap();
        assert!((rep.crlb - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
    }

    #[test]
    fn system_matrix_on_x_axis() {
        let s = scenario(square(), vec![tgt(3, 0.0, 0.5, 1.0, 0.0)]);
        let g = system_matrix(&s).unwrap();
        let r = 75.0;
        assert!(g[(0, 0)].abs() < 1e-18);
        assert!((g[(1, 0)] - 1.0 / r).abs() < 1e-15);
        assert!((g[(0, 1)] - 1.0 / 30.0).abs() < 1e-15);
        assert!(g[(1, 1)].abs() < 1e-15);
    }

    #[test]
    fn system_matrix_matches_finite_differences() {
        use crate::scenario::params_from_cartesian;
        let radar = RadarConfig::standard(4);
        for &(x, y) in &[(410.0, -710.0), (-55.0, 12.0), (3.0, 80.0)] {
            let t = TargetParams::from_cartesian(Point::new(x, y), 1.0, 1.0, &radar).unwrap();
            let s = scenario(square(), vec![t]);
            let g = system_matrix(&s).unwrap();
            let h = 1e-5;
            for (row, d) in [(0, Point::new(h, 0.0)), (1, Point::new(0.0, h))] {
                let p = params_from_cartesian(Point::new(x, y) + d, &radar).unwrap();
                let m = params_from_cartesian(Point::new(x, y) - d, &radar).unwrap();
                assert!(((p.theta - m.theta) / (2.0 * h) - g[(row, 0)]).abs() < 1e-7);
                assert!(((p.beta - m.beta) / (2.0 * h) - g[(row, 1)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn power_scaling_raises_doa_information() {
        let s = scenario(square(), vec![tgt(4, 0.3, 0.6, 3.0, 3.0)]);
        let mut loud = s.clone();
        loud.radar.powers = vec![4.0; 4];
        let a = pair_fim_block(&s, 0, 0, FimOptions::default()).unwrap();
        let b = pair_fim_block(&loud, 0, 0, FimOptions::default()).unwrap();
        assert!((b[(0, 0)] - 4.0 * a[(0, 0)]).abs() < 1e-9 * b[(0, 0)]);
        let ca = state_fim_and_crlb(&s, FimOptions::default()).unwrap();
        let cb = state_fim_and_crlb(&loud, FimOptions::default()).unwrap();
        assert!(cb.position[0].trace < ca.position[0].trace);
    }

    #[test]
    fn single_target_doa_entry_is_a_quadratic_form() {
        let s = scenario(square(), vec![tgt(4, 0.7, 0.4, 2.0, -1.0)]);
        let b = pair_fim_block(&s, 0, 0, FimOptions::default()).unwrap();
        let co = pair_coefficients(&s, 0, 0, FimOptions::default()).unwrap();
        let om = omega_matrix(&s.array, &s.radar);
        let p = Point::new(0.7f64.cos(), -0.7f64.sin());
        let quad: f64 = om.columns().iter().map(|c| p.dot(c).powi(2)).sum();
        let k = s.radar.wavenumber();
        let expected = 128.0 * co.c_theta_theta * 5.0 * k * k * quad;
        assert!((b[(0, 0)] - expected).abs() < 1e-10 * expected);
    }

    proptest! {
        #[test]
        fn fim_is_symmetric_psd(t1 in -PI..PI, t2 in -PI..PI, b1 in 0.05..0.95f64, b2 in 0.05..0.95f64, gap in 0u32..2) {
            let s = scenario(square(), vec![tgt(5, t1, b1, 3.0, 1.0), tgt(5 + gap, t2, b2, -1.0, 2.0)]);
            let j = assemble_parameter_fim(&s, FimOptions::default()).unwrap();
            prop_assert_eq!(&j, &j.transpose());
            let eig = SymmetricEigen::new(j.clone());
            prop_assert!(eig.eigenvalues.min() >= -1e-8 * j.norm());
        }

        #[test]
        fn translation_leaves_fim_unchanged(dx in -5.0..5.0f64, dy in -5.0..5.0f64, th in -PI..PI) {
            let s = scenario(square(), vec![tgt(5, th, 0.3, 3.0, 1.0), tgt(6, -th, 0.8, 1.0, 2.0)]);
            let moved = s.with_array(s.array.translated(Point::new(dx, dy)));
            let a = assemble_parameter_fim(&s, FimOptions::default()).unwrap();
            let b = assemble_parameter_fim(&moved, FimOptions::default()).unwrap();
            prop_assert!((&a - &b).amax() < 1e-9 * a.amax());
        }
    }
}
