//! Multi-target placement: CRLB cost, restart sampling around the best
//! geometry, the phase-separation interval for two DOAs, and the baseline
//! geometries used in comparisons.

pub mod local;

use nalgebra::{Cholesky, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::fim::{state_fim_and_crlb, FimError, FimOptions, Metric};
use crate::scenario::{ArrayGeometry, PlacementConstraints, Point, Scenario};
use crate::sdp::SdpError;
use local::{local_minimize, LocalConfig, LocalError, Parameterization};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlacementError {
    #[error("invalid array shape: {0}")]
    Shape(String),
    #[error("pair (n={n}, m={m}) has bounds that admit no distance")]
    InfeasibleBounds { n: usize, m: usize },
    #[error("relaxation solver failed: {0}")]
    Solver(#[from] SdpError),
    #[error("rounding failed: {0}")]
    Recovery(String),
    #[error("recovered geometry violates the rings by {violation:e} m")]
    RecoveryInfeasible { violation: f64 },
    #[error("no layout found within the rings (closest misses by {violation:e} m)")]
    NoFeasibleLayout { violation: f64 },
    #[error("every local solve failed")]
    AllRestartsFailed,
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error(transparent)]
    Fim(#[from] FimError),
}

/// Optimized geometry with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct PlacementSolution {
    #[serde(skip)]
    pub geometry: ArrayGeometry,
    /// Objective of the convex relaxation, when one was solved (m²).
    pub relaxation_bound: Option<f64>,
    pub achieved_cost: f64,
    pub gap: Option<f64>,
    pub rank1_residuals: Vec<f64>,
    pub iterations: usize,
    pub status: String,
}

/// CRLB summary of the scenario's current geometry under `metric`.
pub fn placement_cost(s: &Scenario, metric: Metric) -> Result<f64, FimError> {
    let rep = state_fim_and_crlb(s, FimOptions::default())?;
    Ok(metric.pick(&rep.metrics))
}

/// Cost used inside line searches: singular probes retry with the ridge and
/// evaluate to `+∞` if that fails as well.
pub fn robust_cost(s: &Scenario, metric: Metric) -> f64 {
    match placement_cost(s, metric) {
        Ok(c) if c.is_finite() && c > 0.0 => c,
        _ => match state_fim_and_crlb(s, FimOptions { ridge: true, ..Default::default() }) {
            Ok(rep) => metric.pick(&rep.metrics),
            Err(_) => f64::INFINITY,
        },
    }
}

/// Restart-loop settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerConfig {
    /// Restart budget `U`.
    pub restarts: usize,
    /// Stop after this many consecutive rejected restarts.
    pub patience: usize,
    /// Per-antenna perturbation covariance (m²).
    #[serde(skip)]
    pub q: Matrix2<f64>,
    #[serde(skip)]
    pub local: LocalConfig,
    pub seed: u64,
    pub metric: Metric,
}

impl SamplerConfig {
    pub fn for_wavelength(wavelength: f64, seed: u64) -> Self {
        let std = wavelength / 2.0;
        Self {
            restarts: 50,
            patience: 10,
            q: Matrix2::identity() * (std * std),
            local: LocalConfig::for_wavelength(wavelength),
            seed,
            metric: Metric::Trace,
        }
    }

    pub fn with_std(mut self, std: f64) -> Self {
        self.q = Matrix2::identity() * (std * std);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartRecord {
    /// 0 for the initial solve.
    pub restart: usize,
    #[serde(skip)]
    pub init: ArrayGeometry,
    #[serde(skip)]
    pub geometry: ArrayGeometry,
    pub cost: f64,
    pub inner_iterations: usize,
    pub accepted: bool,
    /// Cost after each inner step.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct OptimizerTrace {
    pub records: Vec<RestartRecord>,
    /// Best cost after each record; non-increasing.
    pub best: Vec<f64>,
}

/// Independent stream for restart `k` of a run seeded with `seed`.
pub fn restart_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64 + 1);
    rng
}

/// Random geometry of the template's shape satisfying the rings: uniform
/// draws in a disk of radius `e/2`, recentered, kept if feasible; after a
/// number of rejections the draw is projected onto the rings instead.
/// Fails when the rings admit no layout the projection can reach.
pub fn random_feasible_geometry<R: Rng + ?Sized>(
    template: &ArrayGeometry,
    constraints: &PlacementConstraints,
    rng: &mut R,
) -> Result<ArrayGeometry, PlacementError> {
    let par = Parameterization::new(template, constraints);
    let radius = 0.5 * constraints.e;
    let tol = 1e-10 * constraints.e.max(1.0);
    let draw = |rng: &mut R| {
        let ants: Vec<Point> = (0..template.antenna_count())
            .map(|_| {
                let r = radius * rng.random::<f64>().sqrt();
                let phi = rng.random::<f64>() * std::f64::consts::TAU;
                Point::new(r * phi.cos(), r * phi.sin())
            })
            .collect();
        template.with_antennas(&ants).centered()
    };
    for _ in 0..200 {
        let g = draw(rng);
        if constraints.max_violation(&g) <= tol {
            return Ok(g);
        }
    }
    let mut closest = f64::INFINITY;
    for _ in 0..200 {
        let g = draw(rng);
        let y = par.project(&par.coordinates(&g), tol);
        let v = par.violation(&y);
        if v <= tol {
            return Ok(par.geometry(&y));
        }
        closest = closest.min(v);
    }
    Err(PlacementError::NoFeasibleLayout { violation: closest })
}

/// Uniform linear transceiver array on the x-axis: half-wavelength
/// spacing, centered on the origin.
pub fn ula_geometry(count: usize, wavelength: f64) -> ArrayGeometry {
    let half = wavelength / 2.0;
    let mid = (count as f64 - 1.0) / 2.0;
    ArrayGeometry::transceiver((0..count).map(|i| Point::new((i as f64 - mid) * half, 0.0)).collect())
}

fn perturb<R: Rng + ?Sized>(g: &ArrayGeometry, q_chol: &Matrix2<f64>, rng: &mut R) -> ArrayGeometry {
    let ants: Vec<Point> = g
        .antennas()
        .iter()
        .map(|a| {
            let z = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
            a + q_chol * z
        })
        .collect();
    g.with_antennas(&ants).centered()
}

/// Minimize the CRLB cost from `init` under the scenario's rings.
pub fn local_optimize(
    s: &Scenario,
    init: &ArrayGeometry,
    cfg: &SamplerConfig,
) -> Result<local::LocalResult, LocalError> {
    let cost = |g: &ArrayGeometry| robust_cost(&s.with_array(g.clone()), cfg.metric);
    local_minimize(cost, init, &s.constraints, &cfg.local)
}

/// Restart loop: optimize from a random feasible start, then repeatedly
/// perturb the incumbent, re-optimize, and accept when the cost does not
/// increase. Stops after `restarts` perturbations or `patience` consecutive
/// rejections.
pub fn sample_restart_optimize(s: &Scenario, cfg: &SamplerConfig) -> Result<(PlacementSolution, OptimizerTrace), PlacementError> {
    let q_chol = Cholesky::new(cfg.q)
        .ok_or_else(|| PlacementError::Shape("restart covariance must be positive definite".into()))?
        .l();
    let mut trace = OptimizerTrace::default();
    let mut rng0 = restart_rng(cfg.seed, 0);
    let mut incumbent: Option<(ArrayGeometry, f64)> = None;
    let mut first_iters = 0;
    for attempt in 0..5 {
        let init = random_feasible_geometry(&s.array, &s.constraints, &mut rng0)?;
        if let Ok(r) = local_optimize(s, &init, cfg) {
            if r.cost.is_finite() {
                first_iters = r.iterations;
                trace.records.push(RestartRecord {
                    restart: 0,
                    init,
                    geometry: r.geometry.clone(),
                    cost: r.cost,
                    inner_iterations: r.iterations,
                    accepted: true,
                    history: r.history,
                });
                trace.best.push(r.cost);
                incumbent = Some((r.geometry, r.cost));
                break;
            }
        }
        if attempt == 4 {
            return Err(PlacementError::AllRestartsFailed);
        }
    }
    let (mut best_geom, mut best_cost) = incumbent.expect("initial solve succeeded");
    let mut total_iters = first_iters;
    let mut rejected = 0;
    let mut u = 1;
    while u <= cfg.restarts && rejected < cfg.patience {
        let mut rng = restart_rng(cfg.seed, u);
        let init = perturb(&best_geom, &q_chol, &mut rng);
        let outcome = local_optimize(s, &init, cfg);
        let (geometry, cost, iters, history) = match outcome {
            Ok(r) => (r.geometry, r.cost, r.iterations, r.history),
            Err(_) => (init.clone(), f64::INFINITY, 0, Vec::new()),
        };
        total_iters += iters;
        let accepted = cost.is_finite() && cost / best_cost <= 1.0;
        if accepted {
            best_geom = geometry.clone();
            best_cost = cost;
            rejected = 0;
        } else {
            rejected += 1;
        }
        trace.records.push(RestartRecord {
            restart: u,
            init,
            geometry,
            cost,
            inner_iterations: iters,
            accepted,
            history,
        });
        trace.best.push(best_cost);
        u += 1;
    }
    let solution = PlacementSolution {
        geometry: best_geom,
        relaxation_bound: None,
        achieved_cost: best_cost,
        gap: None,
        rank1_residuals: Vec::new(),
        iterations: total_iters,
        status: format!(
            "{} restarts, stopped on {}",
            u - 1,
            if rejected >= cfg.patience { "patience" } else { "budget" }
        ),
    };
    Ok((solution, trace))
}

/// Interval containing the per-path phase difference of two targets whose
/// DOAs differ by `dtheta`, for pair distances in `[d, e]`.
pub fn omega_separation_interval(dtheta: f64, d: f64, e: f64, wavelength: f64) -> (f64, f64) {
    let chord = (2.0 * (1.0 - dtheta.cos())).max(0.0).sqrt();
    let k = 2.0 * std::f64::consts::PI / wavelength;
    (k * d * chord, k * e * chord)
}
