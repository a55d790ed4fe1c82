//! Projected limited-memory BFGS with a two-metric treatment of the bound on
//! `v`: coordinates held at the bound by the gradient are frozen, the rest
//! take the quasi-Newton direction, and every trial point is projected.

use std::collections::VecDeque;

use super::spg::Objective;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    /// Stop when the projected-gradient step has sup-norm below this.
    pub tolerance: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 400,
            memory: 10,
            tolerance: 1e-9,
        }
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `H q` by the two-loop recursion restricted to the free coordinates.
fn two_loop(q: &mut [f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>)>, free: &[bool]) {
    let masked = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(x, &f)| if f { *x } else { 0.0 }).collect() };
    let mut alphas = Vec::with_capacity(pairs.len());
    let restricted: Vec<(Vec<f64>, Vec<f64>, f64)> = pairs
        .iter()
        .filter_map(|(s, y)| {
            let (s, y) = (masked(s), masked(y));
            let sy = dot(&s, &y);
            (sy > 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt()).then(|| (s, y, 1.0 / sy))
        })
        .collect();
    for (s, y, rho) in restricted.iter().rev() {
        let a = rho * dot(s, q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let gamma = restricted.last().map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y));
    q.iter_mut().for_each(|x| *x *= gamma);
    for ((s, y, rho), a) in restricted.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
}

pub(crate) fn minimize<O: Objective>(obj: &O, mut z: Vec<f64>, opts: &LbfgsOptions) -> (Vec<f64>, f64) {
    obj.project(&mut z);
    let (mut f, g) = obj.value_and_gradient(&z);
    let Some(mut g) = g else {
        return (z, f);
    };
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(opts.memory);
    let mut trial = vec![0.0; z.len()];

    for _ in 0..opts.max_iters {
        for ((t, a), b) in trial.iter_mut().zip(&z).zip(&g) {
            *t = a - b;
        }
        obj.project(&mut trial);
        let pg = trial.iter().zip(&z).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if pg <= opts.tolerance {
            break;
        }
        let free = obj.free_coordinates(&z, &g);
        let mut d: Vec<f64> = g.iter().zip(&free).map(|(x, &f)| if f { *x } else { 0.0 }).collect();
        if pairs.is_empty() {
            let scale = 0.1 / sup_norm(&d).max(1e-300);
            d.iter_mut().for_each(|x| *x *= scale.min(1.0));
        } else {
            two_loop(&mut d, &pairs, &free);
        }
        d.iter_mut().for_each(|x| *x = -*x);
        if dot(&g, &d) >= 0.0 {
            pairs.clear();
            let scale = 0.1 / sup_norm(&g).max(1e-300);
            for (di, (gi, &fr)) in d.iter_mut().zip(g.iter().zip(&free)) {
                *di = if fr { -gi * scale.min(1.0) } else { 0.0 };
            }
        }

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            for ((tr, a), b) in trial.iter_mut().zip(&z).zip(&d) {
                *tr = a + t * b;
            }
            obj.project(&mut trial);
            let step: Vec<f64> = trial.iter().zip(&z).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            if decrease >= 0.0 {
                t *= 0.5;
                continue;
            }
            let ft = obj.value(&trial);
            if ft <= f + ARMIJO * decrease {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if pairs.is_empty() {
                break;
            }
            pairs.clear();
            continue;
        }
        let (f_new, g_new) = obj.value_and_gradient(&trial);
        let Some(g_new) = g_new else {
            break;
        };
        let s: Vec<f64> = trial.iter().zip(&z).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-16 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y));
        }
        let rel = (f - f_new).abs() / f.abs().max(1.0);
        std::mem::swap(&mut z, &mut trial);
        f = f_new;
        g = g_new;
        if rel < 1e-15 {
            break;
        }
    }
    (z, f)
}
