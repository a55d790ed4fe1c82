//! Relaxed impulsive control problem by direct transcription.
//!
//! Controls `(v, w) ∈ B_k⁺` are piecewise constant on `N` intervals of a
//! fixed parameter budget `S`; because `λ` is positively homogeneous, a fixed
//! budget with unit-ball controls reaches every reparameterization of a
//! candidate of length at most `S`. Intervals with `v = w = 0` are idle and
//! cost nothing. The endpoint conditions `θ(S) = 1` and `y(S) = x1` are
//! enforced by a quadratic penalty with continuation.

mod gap;
mod lbfgs;
mod projection;
mod spg;
mod transcription;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controls::OrdinaryControl;
use crate::cost::LagrangianSpec;
use crate::dynamics::ControlAffineSystem;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub use gap::{gap_probe, GapCell, GapOptions, GapReport, DEFAULT_EPSILONS, DEFAULT_ETAS};
pub use projection::{project_half_ball, project_restricted};

use spg::{minimize, Objective, SpgOptions};
use transcription::Transcription;

/// Minimize `∫ λ(y, v, w) ds` subject to the auxiliary dynamics,
/// `(v, w) ∈ B_k⁺`, `θ(0) = 0`, `θ(S) = horizon`, `y(0) = x0`, `y(S) = x1`.
#[derive(Debug, Clone)]
pub struct RelaxedProblem {
    pub sys: ControlAffineSystem,
    pub spec: LagrangianSpec,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub horizon: f64,
    /// Transcription interval length `S`.
    pub budget: f64,
}

impl RelaxedProblem {
    /// Uses the default budget `S = 2 (1 + |x1 − x0|)`.
    pub fn new(sys: ControlAffineSystem, spec: LagrangianSpec, x0: Vec<f64>, x1: Vec<f64>) -> Result<Self> {
        let n = sys.state_dim();
        for x in [&x0, &x1] {
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: x.len(),
                });
            }
        }
        let budget = default_budget(&x0, &x1);
        Ok(Self {
            sys,
            spec,
            x0,
            x1,
            horizon: 1.0,
            budget,
        })
    }

    pub fn with_budget(mut self, budget: f64) -> Result<Self> {
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::InvalidArgument(format!("budget S must be positive, got {budget}")));
        }
        self.budget = budget;
        Ok(self)
    }

    /// Same problem with the drift removed.
    pub fn without_drift(&self) -> Self {
        Self {
            sys: self.sys.without_drift(),
            ..self.clone()
        }
    }
}

pub fn default_budget(x0: &[f64], x1: &[f64]) -> f64 {
    let d = x0.iter().zip(x1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    2.0 * (1.0 + d)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Random starts in addition to the heuristic warm starts.
    pub starts: usize,
    pub warm_start: bool,
    /// Penalty weights, applied in order.
    pub penalties: Vec<f64>,
    pub feas_tol: f64,
    /// Classification threshold for impulse arcs.
    pub v_tol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    pub seed: u64,
    /// RK4 steps per interval.
    pub substeps: usize,
    /// Iterations per penalty stage.
    pub max_iters: usize,
    /// Grid levels: the first level has `N / 2^(levels−1)` intervals (at
    /// least 10), each later level doubles it up to `N`.
    pub levels: usize,
    pub optimizer: Optimizer,
    /// Endpoint tolerance `ε`: only `|y_N − x1| > ε` is penalized.
    pub endpoint_slack: f64,
    pub execution: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            warm_start: true,
            penalties: vec![1e2, 1e3, 1e4],
            feas_tol: 1e-2,
            v_tol: 1e-3,
            fd_step: 1e-6,
            seed: 0,
            substeps: 1,
            max_iters: 400,
            levels: 4,
            optimizer: Optimizer::default(),
            endpoint_slack: 0.0,
            execution: Execution::default(),
        }
    }
}

/// Maximal run of intervals `first..end` with `v < v_tol` and `|w| > v_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseArc {
    pub first: usize,
    pub end: usize,
    pub s_start: f64,
    pub s_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedSolution {
    /// `s_0..s_N`.
    pub grid: Vec<f64>,
    /// `v_j` per interval.
    pub v: Vec<f64>,
    /// `w_j` per interval.
    pub w: Vec<Vec<f64>>,
    /// `θ_j` per node.
    pub theta: Vec<f64>,
    /// `y_j` per node.
    pub states: Vec<Vec<f64>>,
    /// Cumulative running cost per node.
    pub running_cost: Vec<f64>,
    pub cost: f64,
    /// `|y_N − x1|`.
    pub residual: f64,
    /// `|θ_N − horizon|`.
    pub time_residual: f64,
    pub impulse_arcs: Vec<ImpulseArc>,
    pub v_tol: f64,
    /// Lower bound on `v` used by the solve (0 for the relaxed problem).
    pub v_lower: f64,
}

impl RelaxedSolution {
    pub fn intervals(&self) -> usize {
        self.v.len()
    }

    fn active(&self, j: usize) -> Option<f64> {
        let z = (self.v[j] * self.v[j] + self.w[j].iter().map(|a| a * a).sum::<f64>()).sqrt();
        (z > self.v_tol).then(|| self.v[j] / z)
    }

    /// `(j, v_j / |(v_j, w_j)|)` over non-idle intervals: the time rate of
    /// the unit-speed reparameterization.
    pub fn canonical_v_profile(&self) -> Vec<(usize, f64)> {
        (0..self.intervals()).filter_map(|j| self.active(j).map(|v| (j, v))).collect()
    }

    /// No canonical rate exceeds an earlier one by more than `noise`.
    pub fn v_nonincreasing(&self, noise: f64) -> bool {
        let mut lowest = f64::INFINITY;
        for (_, v) in self.canonical_v_profile() {
            if v > lowest + noise {
                return false;
            }
            lowest = lowest.min(v);
        }
        true
    }

    /// The last non-idle interval belongs to an impulse arc.
    pub fn ends_in_impulse_arc(&self) -> bool {
        match (self.canonical_v_profile().last(), self.impulse_arcs.last()) {
            (Some(&(j, _)), Some(arc)) => arc.first <= j && j < arc.end,
            _ => false,
        }
    }

    /// Smallest canonical time rate over non-idle intervals.
    pub fn min_canonical_v(&self) -> f64 {
        self.canonical_v_profile().iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    pub fn terminal_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// `u = w / v` on the time grid `θ_j`; requires `v_j > 0` everywhere.
    pub fn to_ordinary(&self) -> Result<OrdinaryControl> {
        if let Some(j) = self.v.iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidControl(format!(
                "interval {j} has v = 0; only solutions with v > 0 are ordinary controls"
            )));
        }
        let values = self
            .v
            .iter()
            .zip(&self.w)
            .map(|(v, w)| w.iter().map(|a| a / v).collect())
            .collect();
        OrdinaryControl::new(*self.theta.last().unwrap(), self.theta.clone(), values)
    }

    /// One row per grid node; the control columns hold the interval starting
    /// at the node (the last node repeats the last interval).
    pub fn to_csv(&self) -> String {
        let k = self.w.first().map_or(0, Vec::len);
        let n = self.states.first().map_or(0, Vec::len);
        let mut out = String::from("s,v");
        for i in 1..=k {
            out.push_str(&format!(",w_{i}"));
        }
        out.push_str(",theta");
        for i in 1..=n {
            out.push_str(&format!(",y_{i}"));
        }
        out.push_str(",running_cost\n");
        for (j, s) in self.grid.iter().enumerate() {
            let c = j.min(self.intervals().saturating_sub(1));
            out.push_str(&format!("{s},{}", self.v[c]));
            for a in &self.w[c] {
                out.push_str(&format!(",{a}"));
            }
            out.push_str(&format!(",{}", self.theta[j]));
            for a in &self.states[j] {
                out.push_str(&format!(",{a}"));
            }
            out.push_str(&format!(",{}\n", self.running_cost[j]));
        }
        out
    }
}

impl Objective for Transcription<'_> {
    fn value(&self, z: &[f64]) -> f64 {
        self.objective(z)
    }

    fn value_and_gradient(&self, z: &[f64]) -> (f64, Option<Vec<f64>>) {
        Transcription::value_and_gradient(self, z)
    }

    fn project(&self, z: &mut [f64]) {
        Transcription::project(self, z)
    }

    fn free_coordinates(&self, z: &[f64], g: &[f64]) -> Vec<bool> {
        let b = self.block();
        (0..z.len())
            .map(|i| !(i % b == 0 && z[i] <= self.v_lower + 1e-12 && g[i] > 0.0))
            .collect()
    }
}

/// First-order method used for each penalty stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Projected limited-memory BFGS.
    #[default]
    Lbfgs,
    /// Spectral projected gradient.
    Spg,
}

/// Relaxed problem over `B_k⁺`.
pub fn solve_relaxed(p: &RelaxedProblem, intervals: usize, opts: &SolverOptions) -> Result<RelaxedSolution> {
    solve_with_lower_bound(p, intervals, opts, 0.0)
}

/// Restricted problem over `{v ≥ η} ∩ unit ball`, whose solutions are
/// ordinary controls. Requires `η S ≤ 1` so that the time constraint is
/// attainable.
pub fn solve_restricted(p: &RelaxedProblem, eta: f64, intervals: usize, opts: &SolverOptions) -> Result<RelaxedSolution> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1), got {eta}")));
    }
    if eta * p.budget > p.horizon {
        return Err(Error::InvalidArgument(format!(
            "eta = {eta} forces θ(S) ≥ {} > {}; lower eta or the budget S",
            eta * p.budget,
            p.horizon
        )));
    }
    solve_with_lower_bound(p, intervals, opts, eta)
}

fn validate(p: &RelaxedProblem, intervals: usize, opts: &SolverOptions) -> Result<()> {
    if intervals < 10 {
        return Err(Error::InvalidArgument(format!("N must be at least 10, got {intervals}")));
    }
    if opts.penalties.is_empty() || opts.penalties.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidArgument("penalty weights must be positive and nonempty".into()));
    }
    if opts.substeps == 0 || opts.levels == 0 || !(opts.fd_step > 0.0) || !(opts.feas_tol > 0.0) || opts.endpoint_slack < 0.0 {
        return Err(Error::InvalidArgument("invalid solver options".into()));
    }
    if p.x0.len() != p.sys.state_dim() || p.x1.len() != p.sys.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: p.sys.state_dim(),
            found: p.x0.len(),
        });
    }
    if !opts.warm_start && opts.starts == 0 {
        return Err(Error::InvalidArgument("no starting points requested".into()));
    }
    Ok(())
}

fn solve_with_lower_bound(
    p: &RelaxedProblem,
    intervals: usize,
    opts: &SolverOptions,
    v_lower: f64,
) -> Result<RelaxedSolution> {
    validate(p, intervals, opts)?;
    let grids = grid_levels(intervals, opts.levels);
    let level = |n: usize| Transcription {
        problem: p,
        intervals: n,
        h: p.budget / n as f64,
        substeps: opts.substeps,
        mu: opts.penalties[0],
        slack: opts.endpoint_slack,
        v_lower,
        fd_step: opts.fd_step,
    };
    let coarse = level(grids[0]);
    let mut starts = Vec::new();
    if opts.warm_start {
        starts.extend(warm_starts(&coarse));
    }
    starts.extend((0..opts.starts).map(|i| random_start(&coarse, opts.seed.wrapping_add(i as u64))));

    let run = |t: &Transcription<'_>, z: Vec<f64>| match opts.optimizer {
        Optimizer::Spg => {
            let o = SpgOptions {
                max_iters: opts.max_iters,
                ..SpgOptions::default()
            };
            minimize(t, z, &o).0
        }
        Optimizer::Lbfgs => {
            let o = lbfgs::LbfgsOptions {
                max_iters: opts.max_iters,
                ..Default::default()
            };
            lbfgs::minimize(t, z, &o).0
        }
    };
    let mu_final = *opts.penalties.last().unwrap();
    let candidates = par::map(opts.execution, starts, |z0| {
        let mut t = level(grids[0]);
        let mut z = z0;
        for &mu in &opts.penalties {
            t.mu = mu;
            z = run(&t, z);
        }
        for &n in &grids[1..] {
            z = prolong(&z, t.intervals, n, t.block());
            t = level(n);
            t.mu = mu_final;
            z = run(&t, z);
        }
        finish(&t, &z, opts.v_tol)
    });

    let tol_y = opts.endpoint_slack + opts.feas_tol;
    let feasible = |s: &RelaxedSolution| s.residual <= tol_y && s.time_residual <= opts.feas_tol;
    let mut best: Option<RelaxedSolution> = None;
    let mut closest = f64::INFINITY;
    for c in candidates.into_iter().flatten() {
        closest = closest.min(c.residual.max(c.time_residual));
        if feasible(&c) && c.cost.is_finite() && best.as_ref().map_or(true, |b| c.cost < b.cost) {
            best = Some(c);
        }
    }
    best.ok_or(Error::Infeasible {
        residual: closest,
        tolerance: tol_y,
    })
}

fn grid_levels(intervals: usize, levels: usize) -> Vec<usize> {
    let mut grids = vec![intervals];
    while grids.len() < levels && grids[0] / 2 >= 10 {
        grids.insert(0, grids[0] / 2);
    }
    grids
}

/// Piecewise-constant controls on `coarse` intervals resampled onto `fine`.
fn prolong(z: &[f64], coarse: usize, fine: usize, block: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(fine * block);
    for j in 0..fine {
        let c = (j * coarse) / fine;
        out.extend_from_slice(&z[c * block..(c + 1) * block]);
    }
    out
}

fn finish(t: &Transcription<'_>, z: &[f64], v_tol: f64) -> Option<RelaxedSolution> {
    let states = t.forward(z)?;
    let n = t.n();
    let b = t.block();
    let d = n + 2;
    let nodes = t.intervals + 1;
    let grid: Vec<f64> = (0..nodes).map(|j| t.h * j as f64).collect();
    let v: Vec<f64> = (0..t.intervals).map(|j| z[j * b]).collect();
    let w: Vec<Vec<f64>> = (0..t.intervals).map(|j| z[j * b + 1..(j + 1) * b].to_vec()).collect();
    let theta: Vec<f64> = (0..nodes).map(|j| states[j * d]).collect();
    let ys: Vec<Vec<f64>> = (0..nodes).map(|j| states[j * d + 1..j * d + 1 + n].to_vec()).collect();
    let running: Vec<f64> = (0..nodes).map(|j| states[j * d + n + 1]).collect();
    let last = ys.last().unwrap();
    let residual = last.iter().zip(&t.problem.x1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let time_residual = (theta.last().unwrap() - t.problem.horizon).abs();

    let mut impulse_arcs = Vec::new();
    let mut open: Option<usize> = None;
    for j in 0..=t.intervals {
        let jump = j < t.intervals && v[j] < v_tol && w[j].iter().map(|a| a * a).sum::<f64>().sqrt() > v_tol;
        match (open, jump) {
            (None, true) => open = Some(j),
            (Some(first), false) => {
                impulse_arcs.push(ImpulseArc {
                    first,
                    end: j,
                    s_start: grid[first],
                    s_end: grid[j],
                });
                open = None;
            }
            _ => {}
        }
    }
    Some(RelaxedSolution {
        cost: *running.last().unwrap(),
        grid,
        v,
        w,
        theta,
        states: ys,
        running_cost: running,
        residual,
        time_residual,
        impulse_arcs,
        v_tol,
        v_lower: t.v_lower,
    })
}

/// `G(x0)⁺ (x1 − x0)`.
fn least_squares_control(p: &RelaxedProblem) -> Vec<f64> {
    let n = p.sys.state_dim();
    let k = p.sys.control_dim();
    let g = nalgebra::DMatrix::from_row_slice(n, k, &p.sys.control_matrix_at(&p.x0));
    let delta = nalgebra::DVector::from_iterator(n, p.x1.iter().zip(&p.x0).map(|(a, b)| a - b));
    match g.pseudo_inverse(1e-12) {
        Ok(pinv) => (pinv * delta).iter().copied().collect(),
        Err(_) => vec![0.0; k],
    }
}

/// Straight line (time and state move together over the whole budget) and
/// jump-then-wait (the state displacement first, then time alone).
fn warm_starts(t: &Transcription<'_>) -> Vec<Vec<f64>> {
    let p = t.problem;
    let b = t.block();
    let s = p.budget;
    let w = least_squares_control(p);
    let mut straight = Vec::with_capacity(t.intervals * b);
    for _ in 0..t.intervals {
        straight.push(p.horizon / s);
        straight.extend(w.iter().map(|a| a / s));
    }
    let mut out = vec![straight];

    let wn = w.iter().map(|a| a * a).sum::<f64>().sqrt();
    let jump = (wn / t.h).ceil() as usize;
    if wn > 0.0 && jump < t.intervals {
        let rest = (t.intervals - jump) as f64 * t.h;
        let v_rest = (p.horizon - t.v_lower * jump as f64 * t.h) / rest;
        let mut z = Vec::with_capacity(t.intervals * b);
        for j in 0..t.intervals {
            if j < jump {
                z.push(t.v_lower);
                z.extend(w.iter().map(|a| a / (jump as f64 * t.h)));
            } else {
                z.push(v_rest);
                z.extend(std::iter::repeat(0.0).take(b - 1));
            }
        }
        out.push(z);
    }
    out
}

/// Piecewise-constant random controls on 1 to 8 blocks, with `v` rescaled so
/// that `θ(S) = horizon` when the bound allows it.
fn random_start(t: &Transcription<'_>, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = t.block();
    let blocks = rng.gen_range(1..=8usize).min(t.intervals);
    let values: Vec<Vec<f64>> = (0..blocks)
        .map(|_| {
            let mut u: Vec<f64> = (0..b).map(|_| rng.gen_range(-1.0..1.0)).collect();
            u[0] = rng.gen_range(0.0..1.0);
            u
        })
        .collect();
    let mut z = Vec::with_capacity(t.intervals * b);
    for j in 0..t.intervals {
        z.extend_from_slice(&values[j * blocks / t.intervals]);
    }
    t.project(&mut z);
    let total: f64 = z.iter().step_by(b).sum::<f64>() * t.h;
    if total > 0.0 {
        let scale = t.problem.horizon / total;
        for v in z.iter_mut().step_by(b) {
            *v *= scale;
        }
    }
    t.project(&mut z);
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost;

    fn trivial() -> RelaxedProblem {
        let sys = ControlAffineSystem::new(
            1,
            1,
            |_, out| out[0] = 0.0,
            |_, out| out[0] = 1.0,
        );
        RelaxedProblem::new(sys, cost::norm_plus_one(), vec![0.0], vec![0.0]).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = trivial();
        let t = Transcription {
            problem: &p,
            intervals: 12,
            h: p.budget / 12.0,
            substeps: 1,
            mu: 10.0,
            slack: 0.0,
            v_lower: 0.0,
            fd_step: 1e-6,
        };
        let mut z = random_start(&t, 3);
        for (i, a) in z.iter_mut().enumerate() {
            *a = 0.3 * *a + 0.05 * ((i % 5) as f64 + 1.0);
        }
        let (_, g) = t.value_and_gradient(&z);
        let g = g.unwrap();
        for i in [0, 5, 11, 18] {
            let mut zp = z.clone();
            zp[i] += 1e-6;
            let mut zm = z.clone();
            zm[i] -= 1e-6;
            let fd = (t.objective(&zp) - t.objective(&zm)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn trivial_problem_costs_one() {
        let sol = solve_relaxed(&trivial(), 40, &SolverOptions::default()).unwrap();
        assert!((sol.cost - 1.0).abs() < 0.02, "{}", sol.cost);
        assert!(sol.residual < 1e-2);
        for (v, w) in sol.v.iter().zip(&sol.w) {
            assert!(*v >= 0.0 && v * v + w[0] * w[0] <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn restricted_bound_is_checked() {
        let p = trivial();
        let opts = SolverOptions::default();
        assert!(solve_restricted(&p, 0.0, 20, &opts).is_err());
        assert!(solve_restricted(&p, 0.6, 20, &opts).is_err());
        assert!(solve_relaxed(&p, 5, &opts).is_err());
    }

    #[test]
    fn restricted_solution_is_ordinary() {
        let p = trivial();
        let sol = solve_restricted(&p, 0.1, 20, &SolverOptions::default()).unwrap();
        assert!(sol.v.iter().all(|&v| v >= 0.1));
        let u = sol.to_ordinary().unwrap();
        assert!((u.horizon() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn csv_layout() {
        let sol = solve_relaxed(&trivial(), 10, &SolverOptions { starts: 1, ..Default::default() }).unwrap();
        let csv = sol.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "s,v,w_1,theta,y_1,running_cost");
        assert_eq!(lines.count(), 11);
    }
}
