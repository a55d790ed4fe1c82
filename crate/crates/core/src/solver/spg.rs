//! Spectral projected gradient with a nonmonotone Armijo line search.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SpgOptions {
    pub max_iters: usize,
    pub memory: usize,
    /// Stop when the projected-gradient step has sup-norm below this.
    pub tolerance: f64,
}

impl Default for SpgOptions {
    fn default() -> Self {
        Self {
            max_iters: 400,
            memory: 10,
            tolerance: 1e-9,
        }
    }
}

pub(crate) trait Objective {
    fn value(&self, z: &[f64]) -> f64;
    fn value_and_gradient(&self, z: &[f64]) -> (f64, Option<Vec<f64>>);
    fn project(&self, z: &mut [f64]);

    /// Coordinates not held at a bound by the gradient.
    fn free_coordinates(&self, z: &[f64], _g: &[f64]) -> Vec<bool> {
        vec![true; z.len()]
    }
}

const GAMMA: f64 = 1e-4;
const ALPHA_MIN: f64 = 1e-12;
const ALPHA_MAX: f64 = 1e12;
const MAX_BACKTRACKS: usize = 40;

/// Minimizes from `z` (projected first); returns the final point and value.
pub(crate) fn minimize<O: Objective>(obj: &O, mut z: Vec<f64>, opts: &SpgOptions) -> (Vec<f64>, f64) {
    obj.project(&mut z);
    let (mut f, g) = obj.value_and_gradient(&z);
    let Some(mut g) = g else {
        return (z, f);
    };
    let mut history: VecDeque<f64> = VecDeque::with_capacity(opts.memory);
    history.push_back(f);

    let mut trial = z.clone();
    let pg = projected_step(obj, &z, &g, 1.0, &mut trial);
    let mut alpha = if pg > 0.0 { (1.0 / pg).clamp(ALPHA_MIN, ALPHA_MAX) } else { 1.0 };

    for _ in 0..opts.max_iters {
        let step_norm = projected_step(obj, &z, &g, alpha, &mut trial);
        // direction d = trial − z
        let d: Vec<f64> = trial.iter().zip(&z).map(|(a, b)| a - b).collect();
        if step_norm <= opts.tolerance {
            break;
        }
        let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if gd >= 0.0 {
            break;
        }
        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for ((t, a), b) in trial.iter_mut().zip(&z).zip(&d) {
                *t = a + lambda * b;
            }
            let ft = obj.value(&trial);
            if ft <= f_ref + GAMMA * lambda * gd {
                accepted = Some(ft);
                break;
            }
            lambda = if ft.is_finite() {
                let q = -gd * lambda * lambda / (2.0 * (ft - f - lambda * gd));
                q.clamp(0.1 * lambda, 0.5 * lambda)
            } else {
                0.1 * lambda
            };
        }
        if accepted.is_none() {
            break;
        }
        let (f_new, g_new) = obj.value_and_gradient(&trial);
        let Some(g_new) = g_new else {
            break;
        };
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..z.len() {
            let s = trial[i] - z[i];
            ss += s * s;
            sy += s * (g_new[i] - g[i]);
        }
        alpha = if sy > 0.0 { (ss / sy).clamp(ALPHA_MIN, ALPHA_MAX) } else { ALPHA_MAX };
        std::mem::swap(&mut z, &mut trial);
        f = f_new;
        g = g_new;
        if history.len() == opts.memory {
            history.pop_front();
        }
        history.push_back(f);
    }
    (z, f)
}

/// Writes `P(z − αg)` into `out` and returns `‖P(z − αg) − z‖∞`.
fn projected_step<O: Objective>(obj: &O, z: &[f64], g: &[f64], alpha: f64, out: &mut [f64]) -> f64 {
    for ((o, a), b) in out.iter_mut().zip(z).zip(g) {
        *o = a - alpha * b;
    }
    obj.project(out);
    out.iter().zip(z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
