//! Direct transcription: piecewise-constant `(v, w)` on a uniform grid, one
//! RK4 map per interval on the augmented state `[θ, y, C]`.
//!
//! Gradients use the discrete adjoint of the step maps. Each vector-Jacobian
//! product is formed from finite differences of a single step, so the cost of
//! a gradient is a fixed multiple of one forward pass.

use crate::dynamics::rk4_auxiliary;

use super::projection::project_in_place;
use super::RelaxedProblem;

const BLOWUP: f64 = 1e6;

#[derive(Clone)]
pub(crate) struct Transcription<'a> {
    pub problem: &'a RelaxedProblem,
    pub intervals: usize,
    pub h: f64,
    pub substeps: usize,
    pub mu: f64,
    pub slack: f64,
    pub v_lower: f64,
    pub fd_step: f64,
}

impl<'a> Transcription<'a> {
    pub fn n(&self) -> usize {
        self.problem.sys.state_dim()
    }

    pub fn k(&self) -> usize {
        self.problem.sys.control_dim()
    }

    /// Decision variables per interval.
    pub fn block(&self) -> usize {
        self.k() + 1
    }

    fn width(&self) -> usize {
        self.n() + 2
    }

    pub fn project(&self, z: &mut [f64]) {
        let b = self.block();
        for chunk in z.chunks_mut(b) {
            let (v, w) = chunk.split_first_mut().unwrap();
            *v = project_in_place(*v, w, self.v_lower);
        }
    }

    /// One interval: `out = Φ(x, v, w)`. Returns false on a non-finite or
    /// blown-up state.
    fn step(&self, x: &[f64], v: f64, w: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(x);
        let spec = &self.problem.spec;
        let running = |y: &[f64], v: f64, w: &[f64]| spec.lambda_raw(y, v, w);
        rk4_auxiliary(&self.problem.sys, Some(&running), out, v, w, self.h, self.substeps);
        let n = self.n();
        out.iter().all(|a| a.is_finite()) && out[1..=n].iter().all(|a| a.abs() <= BLOWUP)
    }

    /// States `x_0..x_N` flattened, or `None` if the trajectory fails.
    pub fn forward(&self, z: &[f64]) -> Option<Vec<f64>> {
        let d = self.width();
        let b = self.block();
        let mut states = vec![0.0; (self.intervals + 1) * d];
        states[1..=self.n()].copy_from_slice(&self.problem.x0);
        for j in 0..self.intervals {
            let (head, tail) = states.split_at_mut((j + 1) * d);
            let u = &z[j * b..(j + 1) * b];
            if !self.step(&head[j * d..], u[0], &u[1..], &mut tail[..d]) {
                return None;
            }
        }
        Some(states)
    }

    /// Running cost and penalty of a terminal state, plus the penalty gradient.
    fn terminal(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = self.n();
        let x1 = &self.problem.x1;
        let mut grad = vec![0.0; n + 2];
        let dt = x[0] - self.problem.horizon;
        let r = x[1..=n].iter().zip(x1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let excess = (r - self.slack).max(0.0);
        let value = x[n + 1] + self.mu * (dt * dt + excess * excess);
        grad[0] = 2.0 * self.mu * dt;
        if excess > 0.0 {
            for i in 0..n {
                grad[1 + i] = 2.0 * self.mu * excess * (x[1 + i] - x1[i]) / r;
            }
        }
        grad[n + 1] = 1.0;
        (value, grad)
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        match self.forward(z) {
            Some(states) => {
                let d = self.width();
                self.terminal(&states[self.intervals * d..]).0
            }
            None => f64::INFINITY,
        }
    }

    /// `pᵀ Φ(x, v, w)`, or `None` when the step fails.
    fn adjoint_value(&self, p: &[f64], x: &[f64], u: &[f64], scratch: &mut [f64]) -> Option<f64> {
        if self.step(x, u[0], &u[1..], scratch) {
            Some(p.iter().zip(scratch.iter()).map(|(a, b)| a * b).sum())
        } else {
            None
        }
    }

    /// Finite-difference derivative of `pᵀΦ` in one coordinate of `x` or `u`.
    /// Central where possible; one-sided at the lower bound of `v` or when one
    /// side fails.
    fn partial(
        &self,
        p: &[f64],
        x: &mut [f64],
        u: &mut [f64],
        coord: Coord,
        base: f64,
        scratch: &mut [f64],
    ) -> f64 {
        let lo = match coord {
            Coord::Control(0) => Some(self.v_lower),
            _ => None,
        };
        let x0 = match coord {
            Coord::State(i) => x[i],
            Coord::Control(c) => u[c],
        };
        let set = |x: &mut [f64], u: &mut [f64], val: f64| match coord {
            Coord::State(i) => x[i] = val,
            Coord::Control(c) => u[c] = val,
        };
        let delta = self.fd_step * x0.abs().max(1.0);
        set(x, u, x0 + delta);
        let plus = self.adjoint_value(p, x, u, scratch);
        let minus = if lo.map_or(true, |lo| x0 - delta >= lo) {
            set(x, u, x0 - delta);
            self.adjoint_value(p, x, u, scratch)
        } else {
            None
        };
        set(x, u, x0);
        match (plus, minus) {
            (Some(a), Some(b)) => (a - b) / (2.0 * delta),
            (Some(a), None) => (a - base) / delta,
            (None, Some(b)) => (base - b) / delta,
            (None, None) => 0.0,
        }
    }

    /// Objective and gradient; the gradient is `None` when the objective is
    /// infinite.
    pub fn value_and_gradient(&self, z: &[f64]) -> (f64, Option<Vec<f64>>) {
        let Some(states) = self.forward(z) else {
            return (f64::INFINITY, None);
        };
        let n = self.n();
        let d = self.width();
        let b = self.block();
        let (value, mut p) = self.terminal(&states[self.intervals * d..]);
        let mut grad = vec![0.0; z.len()];
        let mut scratch = vec![0.0; d];
        let mut x = vec![0.0; d];
        let mut u = vec![0.0; b];
        let mut p_prev = vec![0.0; d];
        for j in (0..self.intervals).rev() {
            x.copy_from_slice(&states[j * d..(j + 1) * d]);
            u.copy_from_slice(&z[j * b..(j + 1) * b]);
            let next = &states[(j + 1) * d..(j + 2) * d];
            let base: f64 = p.iter().zip(next).map(|(a, b)| a * b).sum();
            for c in 0..b {
                grad[j * b + c] = self.partial(&p, &mut x, &mut u, Coord::Control(c), base, &mut scratch);
            }
            // θ and C enter the step map additively
            p_prev[0] = p[0];
            p_prev[n + 1] = p[n + 1];
            for i in 1..=n {
                p_prev[i] = self.partial(&p, &mut x, &mut u, Coord::State(i), base, &mut scratch);
            }
            std::mem::swap(&mut p, &mut p_prev);
        }
        (value, Some(grad))
    }
}

#[derive(Clone, Copy)]
enum Coord {
    State(usize),
    Control(usize),
}
