//! Generalized input-to-trajectory map for control-affine systems
//! `ẋ = f(x) + G(x) u`.
//!
//! A generalized control is integrated through the auxiliary system
//! `ẏ = f(y) v + G(y) w`, `V̇ = v` in its arc-length parameter; the pair
//! `(V, y)` is the generalized trajectory.

use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::controls::{GeneralizedControl, OrdinaryControl};
use crate::curves::{
    arc_length, canonical_reparam, refined_distance, MonotoneMap, SampledCurve, SpaceTimeCurve,
};
use crate::error::{Error, Result};

/// Writes `f(x)` into the output slice.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Writes `G(x)` row-major (`n` rows, `k` columns) into the output slice.
pub type MatrixField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

pub(crate) type Buf = SmallVec<[f64; 16]>;

#[derive(Clone)]
pub struct ControlAffineSystem {
    n: usize,
    k: usize,
    drift: VectorField,
    control: MatrixField,
    growth: Option<(f64, f64)>,
}

impl fmt::Debug for ControlAffineSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlAffineSystem")
            .field("n", &self.n)
            .field("k", &self.k)
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl ControlAffineSystem {
    pub fn new(
        n: usize,
        k: usize,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        control: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        assert!(n > 0 && k > 0, "state and control dimensions must be positive");
        Self {
            n,
            k,
            drift: Arc::new(drift),
            control: Arc::new(control),
            growth: None,
        }
    }

    /// Linear system `ẋ = A x + B u` with `A` (n×n) and `B` (n×k) given by rows.
    pub fn linear(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self> {
        let n = a.len();
        if n == 0 || b.len() != n || a.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("A must be n×n and B must have n rows".into()));
        }
        let k = b[0].len();
        if k == 0 || b.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument("B rows must share a positive length".into()));
        }
        let norm_a = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let norm_b = b.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let flat_b: Vec<f64> = b.into_iter().flatten().collect();
        Ok(Self::new(
            n,
            k,
            move |x, out| {
                for (o, row) in out.iter_mut().zip(&a) {
                    *o = row.iter().zip(x).map(|(p, q)| p * q).sum();
                }
            },
            move |_, out| out.copy_from_slice(&flat_b),
        )
        .with_growth(norm_a, norm_b))
    }

    /// Records constants with `|f(x)| + |G(x)| <= a + b |x|`.
    pub fn with_growth(mut self, a: f64, b: f64) -> Self {
        self.growth = Some((a, b));
        self
    }

    /// Same control fields, drift replaced by zero.
    pub fn without_drift(&self) -> Self {
        Self {
            n: self.n,
            k: self.k,
            drift: Arc::new(|_, out: &mut [f64]| out.fill(0.0)),
            control: self.control.clone(),
            growth: self.growth,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn control_dim(&self) -> usize {
        self.k
    }

    pub fn growth(&self) -> Option<(f64, f64)> {
        self.growth
    }

    pub fn drift_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        (self.drift)(x, &mut out);
        out
    }

    pub fn control_matrix_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.k];
        (self.control)(x, &mut out);
        out
    }

    /// `out = f(y) v + G(y) w`.
    pub fn auxiliary_rhs(&self, y: &[f64], v: f64, w: &[f64], out: &mut [f64]) {
        let mut g: SmallVec<[f64; 32]> = SmallVec::from_elem(0.0, self.n * self.k);
        (self.drift)(y, out);
        (self.control)(y, &mut g);
        for (i, o) in out.iter_mut().enumerate() {
            *o = *o * v
                + g[i * self.k..(i + 1) * self.k]
                    .iter()
                    .zip(w)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
        }
    }
}

/// Running cost along the auxiliary system: `(y, v, w) -> λ`, `+∞` as
/// `f64::INFINITY`.
pub(crate) type RunningCost<'a> = &'a (dyn Fn(&[f64], f64, &[f64]) -> f64 + Sync);

/// Augmented right-hand side for the state layout `[V, y_1..y_n, (C)]`.
fn augmented_rhs(
    sys: &ControlAffineSystem,
    running: Option<RunningCost<'_>>,
    x: &[f64],
    v: f64,
    w: &[f64],
    out: &mut [f64],
) {
    let n = sys.n;
    out[0] = v;
    sys.auxiliary_rhs(&x[1..=n], v, w, &mut out[1..=n]);
    if let Some(cost) = running {
        out[n + 1] = cost(&x[1..=n], v, w);
    }
}

/// Classical RK4 for constant `(v, w)`, `substeps` steps of size `h / substeps`.
/// State layout `[V, y, (C)]`; the running cost slot is present iff `running`
/// is given.
pub(crate) fn rk4_auxiliary(
    sys: &ControlAffineSystem,
    running: Option<RunningCost<'_>>,
    x: &mut [f64],
    v: f64,
    w: &[f64],
    h: f64,
    substeps: usize,
) {
    let d = x.len();
    let dt = h / substeps as f64;
    let mut k1: Buf = SmallVec::from_elem(0.0, d);
    let mut k2: Buf = SmallVec::from_elem(0.0, d);
    let mut k3: Buf = SmallVec::from_elem(0.0, d);
    let mut k4: Buf = SmallVec::from_elem(0.0, d);
    let mut tmp: Buf = SmallVec::from_elem(0.0, d);
    for _ in 0..substeps {
        augmented_rhs(sys, running, x, v, w, &mut k1);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        augmented_rhs(sys, running, &tmp, v, w, &mut k2);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        augmented_rhs(sys, running, &tmp, v, w, &mut k3);
        for i in 0..d {
            tmp[i] = x[i] + dt * k3[i];
        }
        augmented_rhs(sys, running, &tmp, v, w, &mut k4);
        for i in 0..d {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrationOptions {
    /// RK4 steps per piece of constant control.
    pub steps_per_segment: usize,
    /// Bound on `|y|`; exceeding it is reported as blow-up.
    pub blowup_bound: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            steps_per_segment: 64,
            blowup_bound: 1e6,
        }
    }
}

/// Generalized trajectory `(V, y)` over `[0, V#(T)]`, sampled at every RK4
/// node and parameterized by the control's arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedTrajectory {
    curve: SpaceTimeCurve,
    horizon: f64,
}

impl GeneralizedTrajectory {
    pub fn new(curve: SpaceTimeCurve, horizon: f64) -> Self {
        Self { curve, horizon }
    }

    pub fn curve(&self) -> &SpaceTimeCurve {
        &self.curve
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `y(V#(T))`, the state after any jump at `T`.
    pub fn endpoint(&self) -> Result<Vec<f64>> {
        let reached = self.curve.final_time();
        if reached < self.horizon - 1e-12 * (1.0 + self.horizon) {
            return Err(Error::TimeIncomplete {
                reached,
                horizon: self.horizon,
            });
        }
        let t = self.horizon.min(reached);
        Ok(self.curve.project_time(&[t])?.remove(0))
    }

    /// CSV with columns `s,V,y_1..y_n`.
    pub fn to_csv(&self) -> String {
        let n = self.curve.state_dim();
        let mut out = String::from("s,V");
        for i in 1..=n {
            out.push_str(&format!(",y_{i}"));
        }
        out.push('\n');
        let base = self.curve.base();
        for (s, p) in base.params().iter().zip(base.points()) {
            out.push_str(&s.to_string());
            for x in p {
                out.push(',');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Free-function form of [`GeneralizedTrajectory::endpoint`].
pub fn endpoint(traj: &GeneralizedTrajectory) -> Result<Vec<f64>> {
    traj.endpoint()
}

fn check_state(sys: &ControlAffineSystem, x0: &[f64]) -> Result<()> {
    if x0.len() != sys.n {
        return Err(Error::DimensionMismatch {
            expected: sys.n,
            found: x0.len(),
        });
    }
    Ok(())
}

fn check_bound(y: &[f64], s: f64, bound: f64) -> Result<()> {
    let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm <= bound) {
        return Err(Error::BlowUp { s, norm });
    }
    Ok(())
}

/// Integrates piecewise-constant `(v, w)` pieces given as
/// `(parameter length, v, w)`; returns the sampled `(V, y)` curve.
fn integrate_pieces(
    sys: &ControlAffineSystem,
    pieces: &[(f64, f64, Vec<f64>)],
    x0: &[f64],
    opts: &IntegrationOptions,
) -> Result<SampledCurve> {
    let steps = opts.steps_per_segment.max(1);
    let mut x = vec![0.0; sys.n + 1];
    x[1..].copy_from_slice(x0);
    let mut s = 0.0;
    let mut params = vec![0.0];
    let mut points = vec![x.clone()];
    for (len, v, w) in pieces {
        let h = len / steps as f64;
        for _ in 0..steps {
            rk4_auxiliary(sys, None, &mut x, *v, w, h, 1);
            s += h;
            check_bound(&x[1..], s, opts.blowup_bound)?;
            params.push(s);
            points.push(x.clone());
        }
    }
    SampledCurve::new(params, points)
}

/// Integrates the auxiliary system for `gc` from `x0` over `[0, V#(T)]`.
pub fn integrate_auxiliary(
    sys: &ControlAffineSystem,
    gc: &GeneralizedControl,
    x0: &[f64],
    opts: &IntegrationOptions,
) -> Result<GeneralizedTrajectory> {
    check_state(sys, x0)?;
    if gc.control_dim() != sys.k {
        return Err(Error::DimensionMismatch {
            expected: sys.k,
            found: gc.control_dim(),
        });
    }
    let pieces: Vec<(f64, f64, Vec<f64>)> = gc
        .horizon_segments()
        .into_iter()
        .map(|s| (s.length, s.v, s.w))
        .collect();
    let curve = integrate_pieces(sys, &pieces, x0, opts)?;
    Ok(GeneralizedTrajectory::new(
        SpaceTimeCurve::new(curve)?,
        gc.horizon(),
    ))
}

/// Classical trajectory `x_u` sampled on the control grid refined by
/// `steps_per_interval`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinaryTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl OrdinaryTrajectory {
    pub fn terminal(&self) -> &[f64] {
        self.states.last().unwrap()
    }
}

/// Direct RK4 of `ẋ = f(x) + G(x) u` on the grid of `u`.
pub fn ordinary_trajectory(
    sys: &ControlAffineSystem,
    u: &OrdinaryControl,
    x0: &[f64],
    opts: &IntegrationOptions,
) -> Result<OrdinaryTrajectory> {
    check_state(sys, x0)?;
    if u.control_dim() != sys.k {
        return Err(Error::DimensionMismatch {
            expected: sys.k,
            found: u.control_dim(),
        });
    }
    let steps = opts.steps_per_segment.max(1);
    // time is the V slot with v = 1
    let mut x = vec![0.0; sys.n + 1];
    x[1..].copy_from_slice(x0);
    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let grid = u.times();
    for (j, val) in u.values().iter().enumerate() {
        let h = (grid[j + 1] - grid[j]) / steps as f64;
        for i in 0..steps {
            rk4_auxiliary(sys, None, &mut x, 1.0, val, h, 1);
            let t = if i + 1 == steps {
                grid[j + 1]
            } else {
                grid[j] + (i + 1) as f64 * h
            };
            check_bound(&x[1..], t, opts.blowup_bound)?;
            times.push(t);
            states.push(x[1..].to_vec());
        }
    }
    Ok(OrdinaryTrajectory { times, states })
}

/// Result of integrating a non-canonical representative of a control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReparamReport {
    /// `d⁺` between the canonicalized trajectories.
    pub distance_plus: f64,
    /// `|y(V#(T))|` difference of the endpoints.
    pub endpoint_discrepancy: f64,
}

/// Integrates the auxiliary system under `(V ∘ σ, W ∘ σ)`, whose rates are
/// `(v, w) ∘ σ · σ'`, and compares with the canonical run.
///
/// `sigma` must be strictly increasing from `0` onto `[0, V#(T)]`.
pub fn reparam_check(
    sys: &ControlAffineSystem,
    gc: &GeneralizedControl,
    x0: &[f64],
    sigma: &MonotoneMap,
    opts: &IntegrationOptions,
    refine: f64,
) -> Result<ReparamReport> {
    let segs = gc.horizon_segments();
    let total = gc.exit_param();
    let r_knots = sigma.knots();
    let r_end = *r_knots.last().unwrap();
    if sigma.eval(r_knots[0]).abs() > 1e-12 || (sigma.eval(r_end) - total).abs() > 1e-9 * (1.0 + total)
    {
        return Err(Error::InvalidArgument(
            "sigma must map its domain onto [0, V#(T)]".into(),
        ));
    }
    if sigma.values().windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sigma must be strictly increasing".into()));
    }
    let mut rs: Vec<f64> = r_knots.to_vec();
    for s in &segs[1..] {
        rs.push(sigma.pseudo_inverse(s.start)?);
    }
    rs.sort_by(|a, b| a.total_cmp(b));
    rs.dedup();
    let mut pieces = Vec::with_capacity(rs.len());
    for win in rs.windows(2) {
        let (ra, rb) = (win[0], win[1]);
        let (sa, sb) = (sigma.eval(ra), sigma.eval(rb));
        let rate = (sb - sa) / (rb - ra);
        let mid = 0.5 * (sa + sb);
        let idx = segs
            .partition_point(|s| s.start <= mid)
            .clamp(1, segs.len())
            - 1;
        let seg = &segs[idx];
        pieces.push((
            rb - ra,
            seg.v * rate,
            seg.w.iter().map(|w| w * rate).collect(),
        ));
    }
    let reparam = integrate_pieces(sys, &pieces, x0, opts)?;
    let canonical = integrate_auxiliary(sys, gc, x0, opts)?;
    let a = canonical_reparam(&reparam)?;
    let b = canonical_reparam(canonical.curve().base())?;
    let distance_plus = refined_distance(&a, &b, refine, true)?;
    let end_a = reparam.end()[1..].to_vec();
    let end_b = canonical.endpoint()?;
    let endpoint_discrepancy = end_a
        .iter()
        .zip(&end_b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    debug_assert!(arc_length(&a).is_finite());
    Ok(ReparamReport {
        distance_plus,
        endpoint_discrepancy,
    })
}
