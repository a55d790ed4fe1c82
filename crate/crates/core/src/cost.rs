//! Auxiliary Lagrangian `λ(y, v, w)` and the extended cost functional.
//!
//! For `v > 0`, `λ(y, v, w) = L(y, w/v) v`. At `v = 0` it is the recession
//! limit `lim_{η→0⁺} L(y, w/η) η`, either supplied in closed form or computed
//! along a geometric sequence of `η`. Infinite values are explicit
//! ([`ExtendedReal::Infinite`]) and make any cost containing them infinite.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::controls::{regularize, from_ordinary, GeneralizedControl, OrdinaryControl};
use crate::dynamics::{rk4_auxiliary, ControlAffineSystem, IntegrationOptions};
use crate::error::{Error, Result};

/// Values of `L(y, w/η) η` above this are taken as divergence.
pub const DIVERGENCE_CUTOFF: f64 = 1e12;

/// A real number or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtendedReal::Infinite
        } else {
            ExtendedReal::Finite(x)
        }
    }

    /// `+∞` maps to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(x) => x,
            ExtendedReal::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Infinite => None,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::Infinite => write!(f, "+inf"),
        }
    }
}

pub type LagrangianFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type RecessionFn = Arc<dyn Fn(&[f64], &[f64]) -> ExtendedReal + Send + Sync>;

/// Running cost `L(x, u)` with an optional closed-form recession function.
#[derive(Clone)]
pub struct LagrangianSpec {
    name: String,
    lagrangian: LagrangianFn,
    recession: Option<RecessionFn>,
    growth: Option<(f64, f64)>,
}

impl fmt::Debug for LagrangianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianSpec")
            .field("name", &self.name)
            .field("has_recession", &self.recession.is_some())
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl LagrangianSpec {
    pub fn new(
        name: impl Into<String>,
        lagrangian: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            lagrangian: Arc::new(lagrangian),
            recession: None,
            growth: None,
        }
    }

    pub fn with_recession(
        mut self,
        recession: impl Fn(&[f64], &[f64]) -> ExtendedReal + Send + Sync + 'static,
    ) -> Self {
        self.recession = Some(Arc::new(recession));
        self
    }

    /// Constants `(a, b)` with `L(x, u) >= a + b |u|`.
    pub fn with_growth(mut self, a: f64, b: f64) -> Self {
        self.growth = Some((a, b));
        self
    }

    /// Drops the closed-form recession, forcing the numerical limit.
    pub fn without_recession(&self) -> Self {
        Self {
            recession: None,
            ..self.clone()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn growth(&self) -> Option<(f64, f64)> {
        self.growth
    }

    pub fn has_recession(&self) -> bool {
        self.recession.is_some()
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        (self.lagrangian)(x, u)
    }

    /// `λ(y, v, w)` as a plain float (`+∞` as `f64::INFINITY`); `v >= 0` is
    /// the caller's responsibility.
    pub(crate) fn lambda_raw(&self, y: &[f64], v: f64, w: &[f64]) -> f64 {
        if v > 0.0 {
            let u: SmallVec<[f64; 8]> = w.iter().map(|x| x / v).collect();
            let val = (self.lagrangian)(y, &u) * v;
            if val.is_nan() {
                f64::INFINITY
            } else {
                val
            }
        } else {
            self.recession_at(y, w).to_f64()
        }
    }

    fn recession_at(&self, y: &[f64], w: &[f64]) -> ExtendedReal {
        match &self.recession {
            Some(r) => r(y, w),
            None => numeric_recession(self, y, w),
        }
    }

    /// Samples `L(x, u) >= a + b|u|` on the given points; returns the number
    /// of violations (0 when no growth constants are recorded).
    pub fn growth_violations(&self, samples: &[(Vec<f64>, Vec<f64>)]) -> usize {
        let Some((a, b)) = self.growth else {
            return 0;
        };
        samples
            .iter()
            .filter(|(x, u)| {
                let nu = u.iter().map(|c| c * c).sum::<f64>().sqrt();
                self.eval(x, u) < a + b * nu - 1e-12
            })
            .count()
    }
}

/// `lim_{η→0⁺} L(y, w/η) η` along `η = 10^{-2}, 10^{-4}, …, 10^{-10}`.
///
/// Divergence: a term above [`DIVERGENCE_CUTOFF`], or the last three terms
/// growing by more than a factor 2 at each step.
pub fn numeric_recession(spec: &LagrangianSpec, y: &[f64], w: &[f64]) -> ExtendedReal {
    let mut seq = [0.0f64; 5];
    for (i, slot) in seq.iter_mut().enumerate() {
        let eta = 10f64.powi(-2 * (i as i32 + 1));
        let u: SmallVec<[f64; 8]> = w.iter().map(|x| x / eta).collect();
        let val = spec.eval(y, &u) * eta;
        if !(val.abs() <= DIVERGENCE_CUTOFF) {
            return ExtendedReal::Infinite;
        }
        *slot = val;
    }
    let growing = seq[4] > 0.0 && seq[3] > 0.0 && seq[4] > 2.0 * seq[3] && seq[3] > 2.0 * seq[2];
    if growing {
        ExtendedReal::Infinite
    } else {
        ExtendedReal::Finite(seq[4])
    }
}

/// `λ(y, v, w)`; errors on `v < 0`.
pub fn lambda_eval(spec: &LagrangianSpec, y: &[f64], v: f64, w: &[f64]) -> Result<ExtendedReal> {
    if v < 0.0 || v.is_nan() {
        return Err(Error::NegativeTimeRate(v));
    }
    Ok(ExtendedReal::from_f64(spec.lambda_raw(y, v, w)))
}

/// `I = ∫_0^{V#(T)} λ(y, v, w) ds` along the generalized trajectory of `gc`.
///
/// The running cost is integrated as an extra state of the same RK4 scheme
/// as the trajectory, which makes the quadrature Simpson's rule on every
/// substep (nodes at substep ends and midpoints).
pub fn extended_cost(
    spec: &LagrangianSpec,
    sys: &ControlAffineSystem,
    gc: &GeneralizedControl,
    x0: &[f64],
    opts: &IntegrationOptions,
) -> Result<ExtendedReal> {
    let n = sys.state_dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if gc.control_dim() != sys.control_dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.control_dim(),
            found: gc.control_dim(),
        });
    }
    let running = |y: &[f64], v: f64, w: &[f64]| spec.lambda_raw(y, v, w);
    let steps = opts.steps_per_segment.max(1);
    let mut x = vec![0.0; n + 2];
    x[1..=n].copy_from_slice(x0);
    let mut s = 0.0;
    for seg in gc.horizon_segments() {
        let h = seg.length / steps as f64;
        for _ in 0..steps {
            rk4_auxiliary(sys, Some(&running), &mut x, seg.v, &seg.w, h, 1);
            s += h;
            if x[n + 1] == f64::INFINITY || x[n + 1].is_nan() {
                return Ok(ExtendedReal::Infinite);
            }
            let norm = x[1..=n].iter().map(|a| a * a).sum::<f64>().sqrt();
            if !(norm <= opts.blowup_bound) {
                return Err(Error::BlowUp { s, norm });
            }
        }
    }
    Ok(ExtendedReal::Finite(x[n + 1]))
}

/// Classical cost `∫_0^T L(x_u, u) dt` by RK4 quadrature in time.
pub fn ordinary_cost(
    spec: &LagrangianSpec,
    sys: &ControlAffineSystem,
    u: &OrdinaryControl,
    x0: &[f64],
    opts: &IntegrationOptions,
) -> Result<ExtendedReal> {
    let n = sys.state_dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    let running = |y: &[f64], v: f64, w: &[f64]| spec.lambda_raw(y, v, w);
    let steps = opts.steps_per_segment.max(1);
    let mut x = vec![0.0; n + 2];
    x[1..=n].copy_from_slice(x0);
    for (j, val) in u.values().iter().enumerate() {
        let h = u.times()[j + 1] - u.times()[j];
        rk4_auxiliary(sys, Some(&running), &mut x, 1.0, val, h, steps);
        if x[n + 1] == f64::INFINITY || x[n + 1].is_nan() {
            return Ok(ExtendedReal::Infinite);
        }
    }
    Ok(ExtendedReal::Finite(x[n + 1]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `λ(mix) − (t λ(p1) + (1−t) λ(p2))` observed.
    pub worst_excess: f64,
}

/// Samples the convexity inequality of `(v, w) ↦ λ(y, v, w)` on `v > 0`.
pub fn convexity_check(
    spec: &LagrangianSpec,
    y: &[f64],
    k: usize,
    sample_count: usize,
    seed: u64,
) -> ConvexityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let draw = |rng: &mut ChaCha8Rng| {
        let v: f64 = rng.gen_range(1e-3..2.0);
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        (v, w)
    };
    for _ in 0..sample_count.max(1) {
        let (v1, w1) = draw(&mut rng);
        let (v2, w2) = draw(&mut rng);
        let t: f64 = rng.gen_range(0.0..1.0);
        let vm = t * v1 + (1.0 - t) * v2;
        let wm: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let lhs = spec.lambda_raw(y, vm, &wm);
        let rhs = t * spec.lambda_raw(y, v1, &w1) + (1.0 - t) * spec.lambda_raw(y, v2, &w2);
        let excess = lhs - rhs;
        worst = worst.max(excess);
        if excess > 1e-9 {
            violations += 1;
        }
    }
    ConvexityReport {
        samples: sample_count.max(1),
        violations,
        worst_excess: worst,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LscReport {
    pub base_cost: ExtendedReal,
    pub eps: Vec<f64>,
    pub costs: Vec<ExtendedReal>,
    /// Smallest regularized cost.
    pub liminf: ExtendedReal,
    pub tolerance: f64,
    /// `liminf >= base_cost − tolerance`.
    pub holds: bool,
}

/// Evaluates the cost of `regularize(gc, ε)` along `eps_list` and checks the
/// lower-semicontinuity inequality against the cost of `gc`.
pub fn lsc_probe(
    spec: &LagrangianSpec,
    sys: &ControlAffineSystem,
    gc: &GeneralizedControl,
    x0: &[f64],
    eps_list: &[f64],
    opts: &IntegrationOptions,
    tolerance: f64,
) -> Result<LscReport> {
    let base_cost = extended_cost(spec, sys, gc, x0, opts)?;
    let costs = eps_list
        .iter()
        .map(|&e| {
            let u = regularize(gc, e)?;
            extended_cost(spec, sys, &from_ordinary(&u), x0, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let liminf = costs
        .iter()
        .copied()
        .fold(ExtendedReal::Infinite, |m, c| if c < m { c } else { m });
    let holds = match (liminf, base_cost) {
        (_, ExtendedReal::Infinite) => liminf == ExtendedReal::Infinite,
        (ExtendedReal::Infinite, _) => true,
        (ExtendedReal::Finite(l), ExtendedReal::Finite(b)) => l >= b - tolerance,
    };
    Ok(LscReport {
        base_cost,
        eps: eps_list.to_vec(),
        costs,
        liminf,
        tolerance,
        holds,
    })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `L = |u|`.
pub fn fuel() -> LagrangianSpec {
    LagrangianSpec::new("fuel", |_, u| norm(u))
        .with_recession(|_, w| ExtendedReal::Finite(norm(w)))
        .with_growth(0.0, 1.0)
}

/// `L = sqrt(1 + |u|²)`, so that `λ = sqrt(v² + |w|²)`.
pub fn norm_plus_one() -> LagrangianSpec {
    LagrangianSpec::new("norm-plus-one", |_, u| (1.0 + u.iter().map(|a| a * a).sum::<f64>()).sqrt())
        .with_recession(|_, w| ExtendedReal::Finite(norm(w)))
        .with_growth(0.0, 1.0)
}

/// Arc-length cost of the Heisenberg example (same integrand as
/// [`norm_plus_one`]).
pub fn heisenberg() -> LagrangianSpec {
    LagrangianSpec {
        name: "heisenberg".into(),
        ..norm_plus_one()
    }
}

fn gap1_h(x1: f64, u: f64) -> f64 {
    if x1 == 0.0 {
        0.0
    } else {
        (u.abs() - 1.0 / x1.abs().sqrt()).max(0.0)
    }
}

/// `L = |x₁| + h(x₁, u)` with `h = max(|u| − |x₁|^{-1/2}, 0)` off `x₁ = 0`.
pub fn gap1() -> LagrangianSpec {
    LagrangianSpec::new("gap1", |x, u| x[0].abs() + gap1_h(x[0], u[0])).with_recession(|y, w| {
        ExtendedReal::Finite(if y[0] == 0.0 { 0.0 } else { w[0].abs() })
    })
}

/// `L = |x₁|^α u²`.
pub fn gap2(alpha: f64) -> LagrangianSpec {
    LagrangianSpec::new(format!("gap2:{alpha}"), move |x, u| x[0].abs().powf(alpha) * u[0] * u[0])
        .with_recession(|y, w| {
            if y[0] == 0.0 || w[0] == 0.0 {
                ExtendedReal::Finite(0.0)
            } else {
                ExtendedReal::Infinite
            }
        })
}

/// Names accepted by [`lagrangian_by_name`].
pub const LAGRANGIAN_NAMES: &[&str] = &["fuel", "norm-plus-one", "gap1", "gap2:<alpha>", "heisenberg"];

/// Built-in Lagrangians by name.
pub fn lagrangian_by_name(name: &str) -> Result<LagrangianSpec> {
    let unknown = || Error::UnknownName {
        kind: "lagrangian",
        name: name.to_string(),
        available: LAGRANGIAN_NAMES.join(", "),
    };
    match name {
        "fuel" => Ok(fuel()),
        "norm-plus-one" => Ok(norm_plus_one()),
        "heisenberg" => Ok(heisenberg()),
        "gap1" => Ok(gap1()),
        "gap2" => Ok(gap2(1.0)),
        _ => {
            let alpha = name
                .strip_prefix("gap2:")
                .and_then(|a| a.parse::<f64>().ok())
                .filter(|a| *a > 0.0)
                .ok_or_else(unknown)?;
            Ok(gap2(alpha))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn norm_plus_one_gives_euclidean_norm() {
        let l = norm_plus_one();
        let y = [0.0; 3];
        let lam = lambda_eval(&l, &y, 0.0, &[0.6, 0.8]).unwrap();
        assert_eq!(lam, ExtendedReal::Finite(1.0));
        let lam = lambda_eval(&l, &y, 0.3, &[0.4, 0.0]).unwrap().to_f64();
        assert_abs_diff_eq!(lam, 0.5, epsilon = 1e-15);
        // numeric limit agrees
        let lam = lambda_eval(&l.without_recession(), &y, 0.0, &[0.6, 0.8]).unwrap().to_f64();
        assert_abs_diff_eq!(lam, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fuel_recession_is_exact() {
        let l = fuel().without_recession();
        assert_eq!(lambda_eval(&l, &[0.0], 0.0, &[-3.0]).unwrap(), ExtendedReal::Finite(3.0));
    }

    #[test]
    fn gap2_is_infinite_off_the_axis() {
        let y = [0.5, 0.0];
        assert_eq!(lambda_eval(&gap2(1.0), &y, 0.0, &[1.0]).unwrap(), ExtendedReal::Infinite);
        assert_eq!(
            lambda_eval(&gap2(1.0).without_recession(), &y, 0.0, &[1.0]).unwrap(),
            ExtendedReal::Infinite
        );
        assert_eq!(
            lambda_eval(&gap2(1.0), &[0.0, 0.3], 0.0, &[1.0]).unwrap(),
            ExtendedReal::Finite(0.0)
        );
    }

    #[test]
    fn negative_rate_is_rejected() {
        assert!(matches!(
            lambda_eval(&fuel(), &[0.0], -0.1, &[1.0]),
            Err(Error::NegativeTimeRate(_))
        ));
    }

    #[test]
    fn convexity_reports() {
        assert_eq!(convexity_check(&norm_plus_one(), &[0.0], 2, 2000, 1).violations, 0);
        assert_eq!(convexity_check(&fuel(), &[0.0], 1, 2000, 2).violations, 0);
        let concave = LagrangianSpec::new("neg-square", |_, u| -u[0] * u[0]);
        assert!(convexity_check(&concave, &[0.0], 1, 2000, 3).violations > 0);
    }

    #[test]
    fn registry() {
        assert_eq!(lagrangian_by_name("gap2:2").unwrap().name(), "gap2:2");
        assert!(lagrangian_by_name("heisenberg").unwrap().has_recession());
        let err = lagrangian_by_name("nope").unwrap_err().to_string();
        assert!(err.contains("fuel") && err.contains("gap1"));
        assert!(lagrangian_by_name("gap2:-1").is_err());
    }
}
