//! Random corpora and closed-form oracles shared by the integration tests.
#![allow(dead_code)]

use impopt::controls::OrdinaryControl;
use impopt::curves::{MonotoneMap, SampledCurve};
use impopt::dynamics::ControlAffineSystem;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect()
}

/// Random linear system `ẋ = Ax + Bu` together with its matrices.
pub fn random_linear(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (ControlAffineSystem, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let a = random_matrix(rng, n, n, 1.0);
    let b = random_matrix(rng, n, k, 1.0);
    let sys = ControlAffineSystem::linear(a.clone(), b.clone()).unwrap();
    (sys, a, b)
}

pub fn random_ordinary(rng: &mut ChaCha8Rng, k: usize, pieces: usize, horizon: f64) -> OrdinaryControl {
    let mut cuts: Vec<f64> = (1..pieces).map(|_| rng.gen_range(0.05..0.95) * horizon).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut times = vec![0.0];
    times.extend(cuts);
    times.push(horizon);
    let values = (1..times.len())
        .map(|_| (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    OrdinaryControl::new(horizon, times, values).unwrap()
}

/// Random polyline with `m` strictly increasing params.
pub fn random_polyline(rng: &mut ChaCha8Rng, dim: usize, m: usize) -> SampledCurve {
    let mut s = 0.0;
    let mut params = Vec::with_capacity(m);
    let mut points = Vec::with_capacity(m);
    for _ in 0..m {
        params.push(s);
        s += rng.gen_range(0.1..2.0);
        points.push((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    SampledCurve::new(params, points).unwrap()
}

/// Strictly increasing piecewise-linear map of `[0, total]` onto itself.
pub fn random_sigma(rng: &mut ChaCha8Rng, total: f64, knots: usize) -> MonotoneMap {
    let r: Vec<f64> = (0..=knots).map(|i| total * i as f64 / knots as f64).collect();
    let mut incr: Vec<f64> = (0..knots).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = incr.iter().sum();
    incr.iter_mut().for_each(|x| *x *= total / sum);
    let mut values = vec![0.0];
    for d in incr {
        values.push(values.last().unwrap() + d);
    }
    *values.last_mut().unwrap() = total;
    MonotoneMap::new(r, values).unwrap()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..b.len()).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}

/// `exp(M)` by scaling and squaring with a degree-20 Taylor polynomial.
pub fn expm(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let norm = m.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 2f64.powi(-squarings);
    let a: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
    let identity: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut result = identity.clone();
    let mut term = identity;
    for p in 1..=20 {
        term = mat_mul(&term, &a);
        term.iter_mut().flatten().for_each(|x| *x /= p as f64);
        for (r, t) in result.iter_mut().flatten().zip(term.iter().flatten()) {
            *r += t;
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result);
    }
    result
}

/// Exact terminal state of `ẋ = Ax + Bu` for piecewise-constant `u`, via the
/// exponential of the augmented matrix `[[A, Bu], [0, 0]]` on each piece.
pub fn linear_terminal(a: &[Vec<f64>], b: &[Vec<f64>], u: &OrdinaryControl, x0: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut x = x0.to_vec();
    for (j, val) in u.values().iter().enumerate() {
        let h = u.times()[j + 1] - u.times()[j];
        let mut aug = vec![vec![0.0; n + 1]; n + 1];
        for i in 0..n {
            for l in 0..n {
                aug[i][l] = a[i][l] * h;
            }
            aug[i][n] = b[i].iter().zip(val).map(|(p, q)| p * q).sum::<f64>() * h;
        }
        let e = expm(&aug);
        x = (0..n)
            .map(|i| (0..n).map(|l| e[i][l] * x[l]).sum::<f64>() + e[i][n])
            .collect();
    }
    x
}
