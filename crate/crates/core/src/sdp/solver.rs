//! Primal-dual interior-point method for small block SDPs in dual form
//!
//! ```text
//! maximize  bᵀy   subject to   Z_k = C_k − Σ_i y_i A_{k,i} ⪰ 0   for every block k
//! ```
//!
//! with the primal `minimize Σ⟨C_k, X_k⟩ s.t. Σ_k ⟨A_{k,i}, X_k⟩ = b_i, X ⪰ 0`.
//! HKM search direction with Mehrotra predictor-corrector, dense Schur
//! complement. Blocks are expected to be tiny (1×1 or 3×3).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SdpError {
    #[error("no convergence after {iterations} iterations (gap {gap:e}, primal infeasibility {pinf:e}, dual infeasibility {dinf:e})")]
    MaxIterations {
        iterations: usize,
        gap: f64,
        pinf: f64,
        dinf: f64,
    },
    #[error("numerical failure at iteration {iteration}: {reason}")]
    NumericalFailure { iteration: usize, reason: String },
}

/// One cone block: constant term and the sparse list of `(variable, A)`.
#[derive(Debug, Clone)]
pub struct ConeBlock {
    pub c: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl ConeBlock {
    pub fn new(c: DMatrix<f64>) -> Self {
        Self { c, terms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    /// Add `coef·mat` to the coefficient of variable `var`.
    pub fn add(&mut self, var: usize, mat: DMatrix<f64>) {
        match self.terms.iter_mut().find(|(v, _)| *v == var) {
            Some((_, m)) => *m += mat,
            None => self.terms.push((var, mat)),
        }
    }

    /// `C − Σ yᵢAᵢ`.
    pub fn slack(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut z = self.c.clone();
        for (v, a) in &self.terms {
            z -= a * y[*v];
        }
        z
    }
}

#[derive(Debug, Clone)]
pub struct DualSdp {
    pub b: DVector<f64>,
    pub blocks: Vec<ConeBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            step: 0.98,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpResult {
    pub y: DVector<f64>,
    pub x: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub iterations: usize,
    pub pinf: f64,
    pub dinf: f64,
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest `α ≤ cap` keeping `X + αΔX ⪰ 0`, or `None` if `X` is not PD.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let chol = x.clone().cholesky()?;
    let linv = chol.l().try_inverse()?;
    let w = sym(&linv * dx * linv.transpose());
    let lo = SymmetricEigen::new(w).eigenvalues.min();
    Some(if lo < 0.0 { -1.0 / lo } else { f64::INFINITY })
}

impl DualSdp {
    fn apply(&self, mats: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.b.len());
        for (blk, m) in self.blocks.iter().zip(mats) {
            for (v, a) in &blk.terms {
                out[*v] += inner(a, m);
            }
        }
        out
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .map(|blk| {
                let mut m = DMatrix::zeros(blk.dim(), blk.dim());
                for (v, a) in &blk.terms {
                    m += a * y[*v];
                }
                m
            })
            .collect()
    }

    /// Solve from the infeasible start `X = αI`, `y = y0`, `Z = C − A*y0`
    /// when that is positive definite (`Z = αI` otherwise).
    pub fn solve(&self, y0: Option<DVector<f64>>, settings: SdpSettings) -> Result<SdpResult, SdpError> {
        let m = self.b.len();
        let n_total: usize = self.blocks.iter().map(|b| b.dim()).sum();
        let b_norm = self.b.norm();
        let c_norm = self.blocks.iter().map(|b| b.c.norm_squared()).sum::<f64>().sqrt();
        let a_max = self
            .blocks
            .iter()
            .flat_map(|b| b.terms.iter().map(|(_, a)| a.norm()))
            .fold(0.0, f64::max);

        let mut y = y0.unwrap_or_else(|| DVector::zeros(m));
        let alpha_x = 10f64.max((n_total as f64).sqrt()).max(b_norm / (1.0 + a_max));
        let alpha_z = 10f64.max((n_total as f64).sqrt()).max(c_norm).max(a_max);
        let mut x: Vec<DMatrix<f64>> = self.blocks.iter().map(|b| DMatrix::identity(b.dim(), b.dim()) * alpha_x).collect();
        let feasible_start: Vec<DMatrix<f64>> = self.blocks.iter().map(|b| b.slack(&y)).collect();
        let mut z: Vec<DMatrix<f64>> = if feasible_start.iter().all(|s| s.clone().cholesky().is_some()) {
            feasible_start
        } else {
            y.fill(0.0);
            self.blocks.iter().map(|b| DMatrix::identity(b.dim(), b.dim()) * alpha_z).collect()
        };

        let fail = |iteration: usize, reason: &str| SdpError::NumericalFailure {
            iteration,
            reason: reason.to_string(),
        };

        let (mut gap, mut pinf, mut dinf) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for iter in 0..=settings.max_iter {
            let ax = self.apply(&x);
            let rp = &self.b - &ax;
            let aty = self.adjoint(&y);
            let rd: Vec<DMatrix<f64>> = self
                .blocks
                .iter()
                .zip(&z)
                .zip(&aty)
                .map(|((blk, zk), ak)| &blk.c - zk - ak)
                .collect();
            let pobj: f64 = self.blocks.iter().zip(&x).map(|(blk, xk)| inner(&blk.c, xk)).sum();
            let dobj = self.b.dot(&y);
            let xz: f64 = x.iter().zip(&z).map(|(a, b)| inner(a, b)).sum();
            let denom = 1.0 + pobj.abs() + dobj.abs();
            gap = (pobj - dobj).abs().max(xz) / denom;
            pinf = rp.norm() / (1.0 + b_norm);
            dinf = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + c_norm);
            if gap <= settings.tol && pinf <= settings.tol && dinf <= settings.tol {
                return Ok(SdpResult {
                    y,
                    x,
                    z,
                    primal_obj: pobj,
                    dual_obj: dobj,
                    iterations: iter,
                    pinf,
                    dinf,
                });
            }
            if iter == settings.max_iter {
                break;
            }
            let mu = xz / n_total as f64;

            let zinv: Vec<DMatrix<f64>> = z
                .iter()
                .map(|zk| zk.clone().cholesky().map(|c| c.inverse()))
                .collect::<Option<_>>()
                .ok_or_else(|| fail(iter, "slack matrix lost definiteness"))?;

            // Schur complement M_ij = Σ tr(A_i X A_j Z⁻¹).
            let mut schur = DMatrix::zeros(m, m);
            for ((blk, xk), zi) in self.blocks.iter().zip(&x).zip(&zinv) {
                let left: Vec<DMatrix<f64>> = blk.terms.iter().map(|(_, a)| a * xk).collect();
                let right: Vec<DMatrix<f64>> = blk.terms.iter().map(|(_, a)| a * zi).collect();
                for (i, (vi, _)) in blk.terms.iter().enumerate() {
                    for (j, (vj, _)) in blk.terms.iter().enumerate() {
                        schur[(*vi, *vj)] += inner(&left[i], &right[j].transpose());
                    }
                }
            }
            let schur = sym(schur);
            let chol = schur.clone().cholesky();
            let lu = schur.clone().lu();
            let solve = |rhs: &DVector<f64>| -> Option<DVector<f64>> {
                match &chol {
                    Some(c) => Some(c.solve(rhs)),
                    None => lu.solve(rhs),
                }
            };

            let x_rd_zinv: Vec<DMatrix<f64>> = x.iter().zip(&rd).zip(&zinv).map(|((xk, r), zi)| xk * r * zi).collect();
            let base_rhs = &rp + &ax + self.apply(&x_rd_zinv);

            let direction = |r: &[DMatrix<f64>]| -> Option<(DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
                let r_zinv: Vec<DMatrix<f64>> = r.iter().zip(&zinv).map(|(rk, zi)| rk * zi).collect();
                let rhs = &base_rhs - self.apply(&r_zinv);
                let dy = solve(&rhs)?;
                let aty = self.adjoint(&dy);
                let dz: Vec<DMatrix<f64>> = rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
                let dx: Vec<DMatrix<f64>> = r_zinv
                    .iter()
                    .zip(&x)
                    .zip(&dz)
                    .zip(&zinv)
                    .map(|(((rz, xk), dzk), zi)| sym(rz - xk - xk * dzk * zi))
                    .collect();
                Some((dy, dx, dz))
            };
            let steps = |dx: &[DMatrix<f64>], dz: &[DMatrix<f64>]| -> Option<(f64, f64)> {
                let mut ap = f64::INFINITY;
                let mut ad = f64::INFINITY;
                for k in 0..x.len() {
                    ap = ap.min(max_step(&x[k], &dx[k])?);
                    ad = ad.min(max_step(&z[k], &dz[k])?);
                }
                Some((ap, ad))
            };

            // Predictor.
            let zero: Vec<DMatrix<f64>> = x.iter().map(|xk| DMatrix::zeros(xk.nrows(), xk.ncols())).collect();
            let (_, dxa, dza) = direction(&zero).ok_or_else(|| fail(iter, "singular Schur complement"))?;
            let (ap, ad) = steps(&dxa, &dza).ok_or_else(|| fail(iter, "iterate left the cone"))?;
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let xz_aff: f64 = (0..x.len())
                .map(|k| inner(&(&x[k] + &dxa[k] * ap), &(&z[k] + &dza[k] * ad)))
                .sum();
            let sigma = (xz_aff / xz).clamp(0.0, 1.0).powi(3);

            // Corrector.
            let r: Vec<DMatrix<f64>> = (0..x.len())
                .map(|k| DMatrix::identity(x[k].nrows(), x[k].nrows()) * (sigma * mu) - &dxa[k] * &dza[k])
                .collect();
            let (dy, dx, dz) = direction(&r).ok_or_else(|| fail(iter, "singular Schur complement"))?;
            let (ap, ad) = steps(&dx, &dz).ok_or_else(|| fail(iter, "iterate left the cone"))?;
            let ap = (settings.step * ap).min(1.0);
            let ad = (settings.step * ad).min(1.0);
            for k in 0..x.len() {
                x[k] += &dx[k] * ap;
                z[k] += &dz[k] * ad;
            }
            y += dy * ad;
            if !y.iter().all(|v| v.is_finite()) {
                return Err(fail(iter, "non-finite iterate"));
            }
        }
        Err(SdpError::MaxIterations {
            iterations: settings.max_iter,
            gap,
            pinf,
            dinf,
        })
    }
}
