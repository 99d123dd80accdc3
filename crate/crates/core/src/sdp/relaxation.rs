//! Lifted relaxation of `max Σ (pᵀΔs_nm)²` over ring-constrained pair
//! differences, with `T_nm ⪰ Δs Δsᵀ` expressed through its Schur complement.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::solver::{ConeBlock, DualSdp, SdpError, SdpSettings};
use crate::placement::local::{local_minimize, LocalConfig, Parameterization};
use crate::placement::{random_feasible_geometry, PlacementError, PlacementSolution};
use crate::scenario::{ArrayGeometry, ArrayMode, PairBound, PlacementConstraints, Point, TargetParams};

/// Variable layout and data of the relaxation for one target direction.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub mode: ArrayMode,
    pub m: usize,
    pub n: usize,
    /// `p = [cos θ, −sin θ]`.
    pub p: Point,
    pub constraints: PlacementConstraints,
    pairs: Vec<PairBound>,
    par: Parameterization,
    /// First variable index of each pair's lifted entries.
    lifted_at: Vec<usize>,
    epigraph_at: Vec<usize>,
    vars: usize,
}

impl SdpProblem {
    pub fn pairs(&self) -> &[PairBound] {
        &self.pairs
    }

    /// Number of 3×3 matrix-inequality blocks.
    pub fn lmi_blocks(&self) -> usize {
        2 * self.pairs.len()
    }

    pub fn epigraph_count(&self) -> usize {
        self.epigraph_at.len()
    }

    pub fn variable_count(&self) -> usize {
        self.vars
    }

    fn degenerate(p: &PairBound) -> bool {
        p.e - p.d <= 1e-12 * p.e
    }

    /// Lifted matrix of pair `i` from a dual vector.
    fn lifted(&self, y: &DVector<f64>, i: usize) -> Matrix2<f64> {
        let at = self.lifted_at[i];
        let pb = &self.pairs[i];
        if Self::degenerate(pb) {
            let t11 = y[at];
            Matrix2::new(t11, y[at + 1], y[at + 1], pb.d * pb.d - t11)
        } else {
            Matrix2::new(y[at], y[at + 1], y[at + 1], y[at + 2])
        }
    }

    fn to_dual(&self) -> DualSdp {
        let mut b = DVector::zeros(self.vars);
        for &t in &self.epigraph_at {
            b[t] = 1.0;
        }
        let proj = self.p * self.p.transpose();
        let e = |r: usize, c: usize| {
            let mut m = DMatrix::zeros(3, 3);
            m[(r, c)] = 1.0;
            m[(c, r)] = 1.0;
            m
        };
        let scalar = |v: f64| DMatrix::from_element(1, 1, v);
        let mut blocks = Vec::new();
        for (i, pb) in self.pairs.iter().enumerate() {
            let coefs = self.par.coefficients(i);
            let add_difference = |blk: &mut ConeBlock| {
                for (a, &w) in coefs.iter().enumerate() {
                    if w != 0.0 {
                        blk.add(2 * a, e(0, 2) * -w);
                        blk.add(2 * a + 1, e(1, 2) * -w);
                    }
                }
            };
            let (d2, e2) = (pb.d * pb.d, pb.e * pb.e);
            let at = self.lifted_at[i];
            let t = self.epigraph_at[i];

            // ‖Δs‖² ≤ e²  ⇔  [[I, Δs], [Δsᵀ, e²]] ⪰ 0
            let mut ring = ConeBlock::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, e2])));
            add_difference(&mut ring);
            blocks.push(ring);

            // T ⪰ Δs Δsᵀ  ⇔  [[T, Δs], [Δsᵀ, 1]] ⪰ 0
            let degenerate = Self::degenerate(pb);
            let c_diag = if degenerate { vec![0.0, d2, 1.0] } else { vec![0.0, 0.0, 1.0] };
            let mut lift = ConeBlock::new(DMatrix::from_diagonal(&DVector::from_vec(c_diag)));
            if degenerate {
                let mut a = DMatrix::zeros(3, 3);
                a[(0, 0)] = -1.0;
                a[(1, 1)] = 1.0;
                lift.add(at, a);
                lift.add(at + 1, e(0, 1) * -1.0);
            } else {
                let mut a11 = DMatrix::zeros(3, 3);
                a11[(0, 0)] = -1.0;
                let mut a22 = DMatrix::zeros(3, 3);
                a22[(1, 1)] = -1.0;
                lift.add(at, a11);
                lift.add(at + 1, e(0, 1) * -1.0);
                lift.add(at + 2, a22);
            }
            add_difference(&mut lift);
            blocks.push(lift);

            if degenerate {
                // tr(TP) − t ≥ 0 with T22 = d² − T11.
                let mut epi = ConeBlock::new(scalar(proj[(1, 1)] * d2));
                epi.add(at, scalar(-(proj[(0, 0)] - proj[(1, 1)])));
                epi.add(at + 1, scalar(-2.0 * proj[(0, 1)]));
                epi.add(t, scalar(1.0));
                blocks.push(epi);
            } else {
                let mut lower = ConeBlock::new(scalar(-d2));
                lower.add(at, scalar(-1.0));
                lower.add(at + 2, scalar(-1.0));
                blocks.push(lower);
                let mut upper = ConeBlock::new(scalar(e2));
                upper.add(at, scalar(1.0));
                upper.add(at + 2, scalar(1.0));
                blocks.push(upper);
                let mut epi = ConeBlock::new(scalar(0.0));
                epi.add(at, scalar(-proj[(0, 0)]));
                epi.add(at + 1, scalar(-2.0 * proj[(0, 1)]));
                epi.add(at + 2, scalar(-proj[(1, 1)]));
                epi.add(t, scalar(1.0));
                blocks.push(epi);
            }
        }
        DualSdp { b, blocks }
    }

    /// Strictly feasible starting point: antennas at the origin, lifted
    /// matrices at the mid-ring multiple of the identity.
    fn interior_point(&self) -> DVector<f64> {
        let mut y = DVector::zeros(self.vars);
        for (i, pb) in self.pairs.iter().enumerate() {
            let at = self.lifted_at[i];
            let mid = 0.25 * (pb.d * pb.d + pb.e * pb.e);
            if Self::degenerate(pb) {
                y[at] = 0.5 * pb.d * pb.d;
            } else {
                y[at] = mid;
                y[at + 2] = mid;
            }
            let t = self.lifted(&y, i);
            y[self.epigraph_at[i]] = 0.5 * (self.p.transpose() * t * self.p)[(0, 0)];
        }
        y
    }
}

/// Build the relaxation for one target. Only the direction of arrival
/// enters; powers are taken as unit.
pub fn build_relaxation(
    target: &TargetParams,
    m: usize,
    n: usize,
    mode: ArrayMode,
    constraints: &PlacementConstraints,
) -> Result<SdpProblem, PlacementError> {
    let template = match mode {
        ArrayMode::Transceiver => {
            if m != n {
                return Err(PlacementError::Shape("transceiver arrays need M = N".into()));
            }
            ArrayGeometry::transceiver(vec![Point::zeros(); m])
        }
        ArrayMode::Separate => ArrayGeometry::separate(vec![Point::zeros(); m], vec![Point::zeros(); n]),
    };
    if m == 0 || n == 0 {
        return Err(PlacementError::Shape("need at least one transmitter and one receiver".into()));
    }
    let pairs = constraints.constrained_pairs(mode, m, n);
    for p in &pairs {
        if !(p.d > 0.0 && p.d <= p.e) {
            return Err(PlacementError::InfeasibleBounds { n: p.n, m: p.m });
        }
    }
    let par = Parameterization::new(&template, constraints);
    let mut vars = par.dim();
    let mut lifted_at = Vec::with_capacity(pairs.len());
    let mut epigraph_at = Vec::with_capacity(pairs.len());
    for p in &pairs {
        lifted_at.push(vars);
        vars += if SdpProblem::degenerate(p) { 2 } else { 3 };
        epigraph_at.push(vars);
        vars += 1;
    }
    Ok(SdpProblem {
        mode,
        m,
        n,
        p: Point::new(target.theta.cos(), -target.theta.sin()),
        constraints: constraints.clone(),
        pairs,
        par,
        lifted_at,
        epigraph_at,
        vars,
    })
}

/// Solved relaxation before rounding.
#[derive(Debug, Clone)]
pub struct RelaxationSolution {
    pub bound: f64,
    pub lifted: Vec<Matrix2<f64>>,
    /// Geometry read directly off the position variables.
    pub positions: ArrayGeometry,
    pub iterations: usize,
    pub status: String,
}

pub fn solve_sdp(problem: &SdpProblem, tol: f64) -> Result<RelaxationSolution, SdpError> {
    let settings = SdpSettings { tol, ..Default::default() };
    let dual = problem.to_dual();
    let res = dual.solve(Some(problem.interior_point()), settings)?;
    let lifted = (0..problem.pairs.len()).map(|i| problem.lifted(&res.y, i)).collect();
    let free = res.y.rows(0, problem.par.dim()).into_owned();
    Ok(RelaxationSolution {
        bound: res.dual_obj,
        lifted,
        positions: problem.par.geometry(&free),
        iterations: res.iterations,
        status: format!("converged (gap {:.1e})", (res.primal_obj - res.dual_obj).abs()),
    })
}

/// `Σ_{m,n} (pᵀ(s_tm − s_rn))²` over every transmit-receive pair.
pub fn doa_spread(geom: &ArrayGeometry, p: Point) -> f64 {
    let mut acc = 0.0;
    for m in 0..geom.m() {
        for n in 0..geom.n() {
            acc += p.dot(&geom.pair_difference(n, m)).powi(2);
        }
    }
    acc
}

/// Rotate every antenna by `dtheta` about the origin.
///
/// Rotating the array by `−Δθ` maps the optimum for DOA `θ` onto the optimum
/// for `θ + Δθ` (the direction vector `p` turns by `−Δθ`).
pub fn rotate_solution(geom: &ArrayGeometry, dtheta: f64) -> ArrayGeometry {
    let (s, c) = dtheta.sin_cos();
    let rot = Matrix2::new(c, -s, s, c);
    let ants: Vec<Point> = geom.antennas().iter().map(|a| rot * a).collect();
    geom.with_antennas(&ants)
}

fn principal(t: &Matrix2<f64>, p: Point) -> (Point, f64) {
    let eig = SymmetricEigen::new(*t);
    let (hi, lo) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let mut v: Point = eig.eigenvectors.column(hi).into_owned();
    if p.dot(&v) < 0.0 {
        v = -v;
    }
    let l1 = eig.eigenvalues[hi];
    let residual = if l1 > 0.0 { eig.eigenvalues[lo].max(0.0) / l1 } else { 1.0 };
    (v, residual)
}

/// Round the relaxation to a feasible geometry: principal directions scaled
/// to the lifted radius, least-squares positions with the centroid pinned,
/// then a local polish when the result is infeasible or the array is in
/// transceiver mode.
pub fn recover_geometry(
    sol: &RelaxationSolution,
    problem: &SdpProblem,
    seed: u64,
) -> Result<PlacementSolution, PlacementError> {
    let p = problem.p;
    let pairs = &problem.pairs;
    let template = problem.par.geometry(&DVector::zeros(problem.par.dim()));
    let ants = template.antenna_count();

    let mut residuals = Vec::with_capacity(pairs.len());
    let mut targets = Vec::with_capacity(pairs.len());
    for (i, pb) in pairs.iter().enumerate() {
        let t = &sol.lifted[i];
        let (v, res) = principal(t, p);
        residuals.push(res);
        let radius = t.trace().max(0.0).sqrt().clamp(pb.d, pb.e);
        targets.push(v * radius);
    }

    // Least squares: s_ia − s_ib = Δ*, Σ s = 0.
    let rows = 2 * pairs.len() + 2;
    let mut a = DMatrix::zeros(rows, 2 * ants);
    let mut rhs = DVector::zeros(rows);
    for (i, pb) in pairs.iter().enumerate() {
        let (ia, ib) = template.pair_antennas(pb.n, pb.m);
        for k in 0..2 {
            a[(2 * i + k, 2 * ia + k)] += 1.0;
            a[(2 * i + k, 2 * ib + k)] -= 1.0;
            rhs[2 * i + k] = targets[i][k];
        }
    }
    for j in 0..ants {
        a[(rows - 2, 2 * j)] = 1.0;
        a[(rows - 1, 2 * j + 1)] = 1.0;
    }
    let svd = a.svd(true, true);
    let x = svd.solve(&rhs, 1e-12).map_err(|e| PlacementError::Recovery(e.to_string()))?;
    let rounded: Vec<Point> = (0..ants).map(|j| Point::new(x[2 * j], x[2 * j + 1])).collect();
    let rounded = template.with_antennas(&rounded);

    let feas_tol = 1e-10 * problem.constraints.e.max(1.0);
    let violated = problem.constraints.max_violation(&rounded) > feas_tol;
    let mut best = rounded.clone();
    let mut best_cost = if violated { f64::NEG_INFINITY } else { doa_spread(&rounded, p) };
    let mut polished = false;

    if violated || problem.mode == ArrayMode::Transceiver {
        polished = true;
        let cfg = LocalConfig::for_wavelength(problem.constraints.d);
        let cost = |g: &ArrayGeometry| -doa_spread(g, p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut starts = vec![rounded.clone(), sol.positions.clone()];
        for _ in 0..6 {
            starts.extend(random_feasible_geometry(&template, &problem.constraints, &mut rng).ok());
        }
        for start in &starts {
            if let Ok(r) = local_minimize(cost, start, &problem.constraints, &cfg) {
                if -r.cost > best_cost {
                    best_cost = -r.cost;
                    best = r.geometry;
                }
            }
        }
    }
    let violation = problem.constraints.max_violation(&best);
    if !best_cost.is_finite() || violation > feas_tol {
        return Err(PlacementError::RecoveryInfeasible { violation });
    }
    let gap = (sol.bound - best_cost) / sol.bound.abs().max(f64::MIN_POSITIVE);
    Ok(PlacementSolution {
        geometry: best,
        relaxation_bound: Some(sol.bound),
        achieved_cost: best_cost,
        gap: Some(gap),
        rank1_residuals: residuals,
        iterations: sol.iterations,
        status: if polished {
            format!("{}; polished", sol.status)
        } else {
            sol.status.clone()
        },
    })
}

/// Build, solve and round in one call.
pub fn place_single_target(
    target: &TargetParams,
    template: &ArrayGeometry,
    constraints: &PlacementConstraints,
    tol: f64,
    seed: u64,
) -> Result<PlacementSolution, PlacementError> {
    let problem = build_relaxation(target, template.m(), template.n(), template.mode, constraints)?;
    let sol = solve_sdp(&problem, tol)?;
    recover_geometry(&sol, &problem, seed)
}
