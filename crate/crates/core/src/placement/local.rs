//! Local minimization of a geometry cost under the ring constraints
//! `d ≤ ‖s_tm − s_rn‖ ≤ e` with the joint centroid pinned at the origin.
//!
//! The centroid is eliminated by writing the last physical antenna as minus
//! the sum of the others. Rings are handled by an augmented Lagrangian whose
//! inner problems are solved by BFGS with Armijo backtracking; a final
//! Gauss-Newton projection removes any residual violation.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scenario::{ArrayGeometry, PairBound, PlacementConstraints, Point};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LocalError {
    #[error("cost is infinite at every probed geometry")]
    SingularEverywhere,
    #[error("could not reach feasibility (max ring violation {violation:e} m)")]
    Infeasible { violation: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalConfig {
    /// Central-difference step for the cost gradient (m).
    pub grad_step: f64,
    /// BFGS iterations per augmented-Lagrangian round.
    pub max_iter: usize,
    pub rounds: usize,
    /// Stationarity tolerance on the scaled Lagrangian gradient.
    pub tol: f64,
    /// Ring-constraint tolerance after projection (m).
    pub feas_tol: f64,
}

impl LocalConfig {
    pub fn for_wavelength(wavelength: f64) -> Self {
        Self {
            grad_step: 1e-6 * wavelength,
            max_iter: 200,
            rounds: 8,
            tol: 1e-8,
            feas_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalStatus {
    Converged,
    /// The line search stalled before the stationarity test passed; the
    /// best iterate is returned.
    LineSearchFailure,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LocalResult {
    pub geometry: ArrayGeometry,
    pub cost: f64,
    pub iterations: usize,
    pub status: LocalStatus,
    pub max_violation: f64,
    /// Cost after every accepted inner step, across rounds.
    pub history: Vec<f64>,
}

/// Free-coordinate parameterization of a geometry shape.
#[derive(Debug, Clone)]
pub struct Parameterization {
    template: ArrayGeometry,
    antennas: usize,
    pairs: Vec<PairBound>,
    /// For each pair, the coefficient of each free antenna in `s_tm − s_rn`.
    coefs: Vec<Vec<f64>>,
}

impl Parameterization {
    pub fn new(template: &ArrayGeometry, constraints: &PlacementConstraints) -> Self {
        let antennas = template.antenna_count();
        let pairs = constraints.constrained_pairs(template.mode, template.m(), template.n());
        let last = antennas - 1;
        let coefs = pairs
            .iter()
            .map(|p| {
                let (ia, ib) = template.pair_antennas(p.n, p.m);
                let ind = |a: usize, i: usize| if a == i { 1.0 } else { 0.0 };
                (0..last)
                    .map(|a| ind(a, ia) - ind(a, ib) - (ind(last, ia) - ind(last, ib)))
                    .collect()
            })
            .collect();
        Self {
            template: template.clone(),
            antennas,
            pairs,
            coefs,
        }
    }

    pub fn dim(&self) -> usize {
        2 * (self.antennas - 1)
    }

    pub fn pairs(&self) -> &[PairBound] {
        &self.pairs
    }

    /// Pair-difference coefficients of the free antennas.
    pub fn coefficients(&self, pair: usize) -> &[f64] {
        &self.coefs[pair]
    }

    pub fn geometry(&self, y: &DVector<f64>) -> ArrayGeometry {
        let mut ants: Vec<Point> = (0..self.antennas - 1).map(|a| Point::new(y[2 * a], y[2 * a + 1])).collect();
        let sum = ants.iter().fold(Point::zeros(), |acc, p| acc + p);
        ants.push(-sum);
        self.template.with_antennas(&ants)
    }

    /// Free coordinates of `g` after shifting its centroid to the origin.
    pub fn coordinates(&self, g: &ArrayGeometry) -> DVector<f64> {
        let ants = g.centered().antennas();
        DVector::from_fn(self.dim(), |i, _| if i % 2 == 0 { ants[i / 2].x } else { ants[i / 2].y })
    }

    pub fn difference(&self, y: &DVector<f64>, pair: usize) -> Point {
        let c = &self.coefs[pair];
        let mut d = Point::zeros();
        for (a, &w) in c.iter().enumerate() {
            if w != 0.0 {
                d += Point::new(y[2 * a], y[2 * a + 1]) * w;
            }
        }
        d
    }

    /// Scaled constraints `(‖Δ‖² − d²)/e² ≥ 0` and `(e² − ‖Δ‖²)/e² ≥ 0`,
    /// interleaved per pair. Degenerate rings (`d = e`) contribute both.
    fn constraints(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(2 * self.pairs.len());
        for (i, p) in self.pairs.iter().enumerate() {
            let r2 = self.difference(y, i).norm_squared();
            let e2 = p.e * p.e;
            g[2 * i] = (r2 - p.d * p.d) / e2;
            g[2 * i + 1] = (e2 - r2) / e2;
        }
        g
    }

    fn constraint_jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(2 * self.pairs.len(), self.dim());
        for (i, p) in self.pairs.iter().enumerate() {
            let d = self.difference(y, i);
            let e2 = p.e * p.e;
            for (a, &w) in self.coefs[i].iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let gx = 2.0 * d.x * w / e2;
                let gy = 2.0 * d.y * w / e2;
                j[(2 * i, 2 * a)] = gx;
                j[(2 * i, 2 * a + 1)] = gy;
                j[(2 * i + 1, 2 * a)] = -gx;
                j[(2 * i + 1, 2 * a + 1)] = -gy;
            }
        }
        j
    }

    /// Largest ring violation in meters.
    pub fn violation(&self, y: &DVector<f64>) -> f64 {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let r = self.difference(y, i).norm();
                (p.d - r).max(r - p.e).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Gauss-Newton minimum-norm steps onto the feasible set.
    pub fn project(&self, y: &DVector<f64>, feas_tol: f64) -> DVector<f64> {
        let mut y = y.clone();
        for _ in 0..100 {
            if self.violation(&y) <= feas_tol * 0.1 {
                break;
            }
            let g = self.constraints(&y);
            let jac = self.constraint_jacobian(&y);
            let active: Vec<usize> = (0..g.len()).filter(|&i| g[i] < 1e-14).collect();
            if active.is_empty() {
                break;
            }
            let ja = DMatrix::from_fn(active.len(), y.len(), |r, c| jac[(active[r], c)]);
            // Aim slightly inside so round-off cannot leave us outside.
            let target = DVector::from_fn(active.len(), |r, _| 1e-13 - g[active[r]]);
            let jjt = &ja * ja.transpose();
            let step = match jjt.clone().cholesky() {
                Some(c) => ja.transpose() * c.solve(&target),
                None => match ja.clone().pseudo_inverse(1e-14) {
                    Ok(pinv) => pinv * target,
                    Err(_) => break,
                },
            };
            if !step.iter().all(|v| v.is_finite()) || step.norm() == 0.0 {
                break;
            }
            y += step;
        }
        y
    }
}

fn penalty(g: f64, lambda: f64, rho: f64) -> (f64, f64) {
    // Value and derivative in g of the inequality augmented Lagrangian term.
    if rho * g < lambda {
        (-lambda * g + 0.5 * rho * g * g, -lambda + rho * g)
    } else {
        (-lambda * lambda / (2.0 * rho), 0.0)
    }
}

struct Objective<'a, F> {
    cost: &'a F,
    par: &'a Parameterization,
    scale: f64,
    step: f64,
    evals: usize,
}

impl<'a, F: Fn(&ArrayGeometry) -> f64> Objective<'a, F> {
    fn f(&mut self, y: &DVector<f64>) -> f64 {
        self.evals += 1;
        (self.cost)(&self.par.geometry(y)) / self.scale
    }

    fn grad(&mut self, y: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(y.len());
        let mut probe = y.clone();
        for i in 0..y.len() {
            probe[i] = y[i] + self.step;
            let up = self.f(&probe);
            probe[i] = y[i] - self.step;
            let dn = self.f(&probe);
            probe[i] = y[i];
            g[i] = (up - dn) / (2.0 * self.step);
        }
        g
    }
}

/// Minimize `cost` from `init` subject to the rings and the centroid.
///
/// `cost` may return `+∞` for degenerate geometries; such probes are treated
/// as failed line-search steps.
pub fn local_minimize<F>(
    cost: F,
    init: &ArrayGeometry,
    constraints: &PlacementConstraints,
    cfg: &LocalConfig,
) -> Result<LocalResult, LocalError>
where
    F: Fn(&ArrayGeometry) -> f64,
{
    let par = Parameterization::new(init, constraints);
    let mut y = par.coordinates(init);
    if par.dim() == 0 {
        let g = par.geometry(&y);
        let c = cost(&g);
        return Ok(LocalResult {
            geometry: g,
            cost: c,
            iterations: 0,
            status: LocalStatus::Converged,
            max_violation: 0.0,
            history: vec![c],
        });
    }
    let mut c0 = cost(&par.geometry(&y));
    if !c0.is_finite() {
        // Nudge a singular start onto the feasible set and retry once.
        y = par.project(&y, cfg.feas_tol);
        c0 = cost(&par.geometry(&y));
        if !c0.is_finite() {
            return Err(LocalError::SingularEverywhere);
        }
    }
    let scale = if c0.abs() > 1e-300 { c0.abs() } else { 1.0 };
    let mut obj = Objective {
        cost: &cost,
        par: &par,
        scale,
        step: cfg.grad_step,
        evals: 0,
    };

    let ncon = 2 * par.pairs().len();
    let mut lambda = DVector::<f64>::zeros(ncon);
    let mut rho = 10.0;
    let mut iterations = 0;
    let mut status = LocalStatus::MaxIterations;
    let mut history = vec![c0];
    let mut last_violation = f64::INFINITY;

    for _round in 0..cfg.rounds {
        let lagrangian = |obj: &mut Objective<F>, y: &DVector<f64>| -> (f64, f64) {
            let f = obj.f(y);
            let g = par.constraints(y);
            let p: f64 = (0..ncon).map(|i| penalty(g[i], lambda[i], rho).0).sum();
            (f + p, f)
        };
        let lag_grad = |obj: &mut Objective<F>, y: &DVector<f64>| -> DVector<f64> {
            let mut gr = obj.grad(y);
            let g = par.constraints(y);
            let jac = par.constraint_jacobian(y);
            for i in 0..ncon {
                let d = penalty(g[i], lambda[i], rho).1;
                if d != 0.0 {
                    gr += jac.row(i).transpose() * d;
                }
            }
            gr
        };

        let (mut val, _) = lagrangian(&mut obj, &y);
        let mut grad = lag_grad(&mut obj, &y);
        let n = y.len();
        let mut h = DMatrix::<f64>::identity(n, n);
        status = LocalStatus::MaxIterations;
        for _ in 0..cfg.max_iter {
            if grad.amax() <= cfg.tol {
                status = LocalStatus::Converged;
                break;
            }
            let mut dir = -(&h * &grad);
            if dir.dot(&grad) >= 0.0 {
                h = DMatrix::identity(n, n);
                dir = -grad.clone();
            }
            // Keep the first trial step at a physically sensible length.
            let max_len = 0.25 * constraints.e.max(1e-12);
            if dir.norm() > max_len {
                dir *= max_len / dir.norm();
            }
            let slope = dir.dot(&grad);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..50 {
                let trial = &y + &dir * t;
                let (tv, tf) = lagrangian(&mut obj, &trial);
                if tv.is_finite() && tv <= val + 1e-4 * t * slope {
                    accepted = Some((trial, tv, tf));
                    break;
                }
                t *= 0.5;
            }
            let Some((ny, nv, nf)) = accepted else {
                status = LocalStatus::LineSearchFailure;
                break;
            };
            iterations += 1;
            let ng = lag_grad(&mut obj, &ny);
            let s = &ny - &y;
            let yk = &ng - &grad;
            let sy = s.dot(&yk);
            if sy > 1e-16 * s.norm() * yk.norm() {
                let rho_k = 1.0 / sy;
                let i = DMatrix::<f64>::identity(n, n);
                let left = &i - &s * yk.transpose() * rho_k;
                let right = &i - &yk * s.transpose() * rho_k;
                h = &left * &h * &right + &s * s.transpose() * rho_k;
            }
            let change = (val - nv).abs();
            y = ny;
            val = nv;
            grad = ng;
            history.push(nf * scale);
            if change <= 1e-15 * val.abs().max(1.0) && s.amax() <= 1e-13 * constraints.e {
                status = LocalStatus::Converged;
                break;
            }
        }

        let g = par.constraints(&y);
        for i in 0..ncon {
            lambda[i] = (lambda[i] - rho * g[i]).max(0.0);
        }
        let violation = par.violation(&y);
        if violation > 0.25 * last_violation && violation > cfg.feas_tol {
            rho *= 10.0;
        }
        last_violation = violation;
        if violation <= cfg.feas_tol && status == LocalStatus::Converged {
            break;
        }
    }

    y = par.project(&y, cfg.feas_tol);
    let max_violation = par.violation(&y);
    let geometry = par.geometry(&y);
    let final_cost = cost(&geometry);
    if max_violation > cfg.feas_tol {
        return Err(LocalError::Infeasible { violation: max_violation });
    }
    history.push(final_cost);
    Ok(LocalResult {
        geometry,
        cost: final_cost,
        iterations,
        status,
        max_violation,
        history,
    })
}
