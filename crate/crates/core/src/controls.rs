//! Fréchet generalized controls: space-time curves `(V, W)` in `R^{1+k}` with
//! `V(0) = 0`, `W(0) = 0`, stored in unit-speed form.

use serde::{Deserialize, Serialize};

use crate::curves::{
    arc_length, canonical_reparam, refined_distance, SampledCurve, SpaceTimeCurve,
};
use crate::error::{Error, Result};

/// Unit-speed tolerance for the canonical form.
pub const UNIT_SPEED_TOL: f64 = 1e-9;

/// Default refinement scale for control distances.
pub const DEFAULT_REFINE: f64 = 0.01;

/// Piecewise-constant control: `values[j]` is applied on `[times[j], times[j+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OrdinaryRepr", into = "OrdinaryRepr")]
pub struct OrdinaryControl {
    horizon: f64,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct OrdinaryRepr {
    #[serde(rename = "T")]
    horizon: f64,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<OrdinaryRepr> for OrdinaryControl {
    type Error = Error;

    fn try_from(r: OrdinaryRepr) -> Result<Self> {
        OrdinaryControl::new(r.horizon, r.times, r.values)
    }
}

impl From<OrdinaryControl> for OrdinaryRepr {
    fn from(u: OrdinaryControl) -> Self {
        OrdinaryRepr {
            horizon: u.horizon,
            times: u.times,
            values: u.values,
        }
    }
}

impl OrdinaryControl {
    pub fn new(horizon: f64, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidControl(format!("horizon must be positive, got {horizon}")));
        }
        if times.len() < 2 || values.len() + 1 != times.len() {
            return Err(Error::InvalidControl(format!(
                "expected one value per grid interval: {} times, {} values",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 || (times[times.len() - 1] - horizon).abs() > 1e-12 * horizon {
            return Err(Error::InvalidControl("grid must cover [0, T]".into()));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NonIncreasingTimes { index: i + 1 });
        }
        let k = values[0].len();
        if k == 0 {
            return Err(Error::InvalidControl("control dimension must be positive".into()));
        }
        for u in &values {
            if u.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: u.len(),
                });
            }
            if u.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidControl("non-finite control value".into()));
            }
        }
        Ok(Self {
            horizon,
            times,
            values,
        })
    }

    /// Constant control `value` on a uniform grid of `intervals` cells.
    pub fn constant(horizon: f64, intervals: usize, value: Vec<f64>) -> Result<Self> {
        let times = (0..=intervals)
            .map(|i| horizon * i as f64 / intervals as f64)
            .collect();
        Self::new(horizon, times, vec![value; intervals])
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn control_dim(&self) -> usize {
        self.values[0].len()
    }

    /// Value at time `t` (right-continuous; the last value is held at `T`).
    pub fn eval(&self, t: f64) -> &[f64] {
        let i = self
            .times
            .partition_point(|&s| s <= t)
            .clamp(1, self.values.len())
            - 1;
        &self.values[i]
    }

    /// Primitive `U(t_j)` at every grid time.
    pub fn primitive(&self) -> Vec<Vec<f64>> {
        let k = self.control_dim();
        let mut acc = vec![0.0; k];
        let mut out = vec![acc.clone()];
        for (j, u) in self.values.iter().enumerate() {
            let dt = self.times[j + 1] - self.times[j];
            for (a, x) in acc.iter_mut().zip(u) {
                *a += x * dt;
            }
            out.push(acc.clone());
        }
        out
    }

    /// `∫ |u| dt`.
    pub fn l1_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(j, u)| norm(u) * (self.times[j + 1] - self.times[j]))
            .sum()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// One piece of a generalized control on which `(v, w)` is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSegment {
    /// Arc-length parameter at the start of the piece.
    pub start: f64,
    pub length: f64,
    pub v: f64,
    pub w: Vec<f64>,
}

impl ControlSegment {
    pub fn is_jump(&self) -> bool {
        self.v == 0.0
    }
}

/// Canonical representative of a Fréchet generalized control on `[0, T]`.
///
/// The curve is unit-speed, starts at the origin, has nondecreasing `V` and
/// extends past `V = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneralizedRepr", into = "GeneralizedRepr")]
pub struct GeneralizedControl {
    curve: SpaceTimeCurve,
    horizon: f64,
}

#[derive(Serialize, Deserialize)]
struct GeneralizedRepr {
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(flatten)]
    curve: SampledCurve,
}

impl TryFrom<GeneralizedRepr> for GeneralizedControl {
    type Error = Error;

    fn try_from(r: GeneralizedRepr) -> Result<Self> {
        GeneralizedControl::from_curve(r.curve, r.horizon)
    }
}

impl From<GeneralizedControl> for GeneralizedRepr {
    fn from(g: GeneralizedControl) -> Self {
        GeneralizedRepr {
            horizon: g.horizon,
            curve: g.curve.into_base(),
        }
    }
}

impl GeneralizedControl {
    /// Canonicalizes `curve` and checks the generalized-control invariants.
    pub fn from_curve(curve: SampledCurve, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidControl(format!("horizon must be positive, got {horizon}")));
        }
        if curve.start().iter().any(|&x| x.abs() > 1e-12) {
            return Err(Error::InvalidControl("(V, W) must start at the origin".into()));
        }
        let canonical = canonical_reparam(&curve)?;
        let curve = SpaceTimeCurve::new(canonical)
            .map_err(|e| Error::InvalidControl(format!("V must be nondecreasing: {e}")))?;
        if !(curve.final_time() > horizon) {
            return Err(Error::InvalidControl(format!(
                "V must reach beyond T = {horizon}, ends at {}",
                curve.final_time()
            )));
        }
        Ok(Self { curve, horizon })
    }

    pub fn curve(&self) -> &SpaceTimeCurve {
        &self.curve
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn control_dim(&self) -> usize {
        self.curve.state_dim()
    }

    /// `V#(T)`: arc length at which the control leaves the horizon.
    pub fn exit_param(&self) -> f64 {
        self.curve
            .param_at_time(self.horizon)
            .expect("V reaches beyond T by construction")
    }

    /// The segment over `[0, V#(T)]`.
    pub fn truncated(&self) -> SpaceTimeCurve {
        self.curve
            .truncate_at_time(self.horizon)
            .expect("horizon is positive")
    }

    /// Pieces of constant `(v, w)` of the whole curve.
    pub fn segments(&self) -> Vec<ControlSegment> {
        segments_of(self.curve.base())
    }

    /// Pieces of constant `(v, w)` over `[0, V#(T)]`.
    pub fn horizon_segments(&self) -> Vec<ControlSegment> {
        segments_of(self.truncated().base())
    }

    /// Arc length of the segment over `[0, V#(T)]`.
    pub fn horizon_length(&self) -> f64 {
        arc_length(self.truncated().base())
    }

    /// Strengthened distance `d_T⁺` computed at refinement `h`.
    pub fn distance_plus(&self, other: &GeneralizedControl, h: f64) -> Result<f64> {
        let horizon = self.horizon.min(other.horizon);
        let a = self.curve.truncate_at_time(horizon)?;
        let b = other.curve.truncate_at_time(horizon)?;
        refined_distance(a.base(), b.base(), h, true)
    }

    /// Largest deviation from unit speed over all segments.
    pub fn unit_speed_defect(&self) -> f64 {
        self.segments()
            .iter()
            .map(|s| (s.v * s.v + s.w.iter().map(|x| x * x).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn segments_of(c: &SampledCurve) -> Vec<ControlSegment> {
    let p = c.params();
    let pts = c.points();
    (0..c.len() - 1)
        .map(|j| {
            let ds = p[j + 1] - p[j];
            let dv = pts[j + 1][0] - pts[j][0];
            ControlSegment {
                start: p[j],
                length: ds,
                // exact zero on vertical legs
                v: if dv == 0.0 { 0.0 } else { dv / ds },
                w: pts[j + 1][1..]
                    .iter()
                    .zip(&pts[j][1..])
                    .map(|(b, a)| (b - a) / ds)
                    .collect(),
            }
        })
        .collect()
}

/// Embeds an ordinary control as the graph `(t, U(t))`, extended by a constant
/// tail of duration `T` past the horizon.
pub fn from_ordinary(u: &OrdinaryControl) -> GeneralizedControl {
    let prim = u.primitive();
    let mut points: Vec<Vec<f64>> = u
        .times
        .iter()
        .zip(&prim)
        .map(|(t, w)| {
            let mut p = vec![*t];
            p.extend_from_slice(w);
            p
        })
        .collect();
    let mut tail = points.last().unwrap().clone();
    tail[0] = 2.0 * u.horizon;
    points.push(tail);
    let curve = SampledCurve::from_points(points).expect("graph of a valid control");
    GeneralizedControl::from_curve(curve, u.horizon).expect("graph of a valid control")
}

/// A jump at time `time`, traversed as the given straight legs in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub time: f64,
    pub legs: Vec<Vec<f64>>,
}

impl Impulse {
    pub fn single(time: f64, delta: Vec<f64>) -> Self {
        Self {
            time,
            legs: vec![delta],
        }
    }

    pub fn sequential(time: f64, legs: Vec<Vec<f64>>) -> Self {
        Self { time, legs }
    }

    pub fn mass(&self) -> f64 {
        self.legs.iter().map(|l| norm(l)).sum()
    }
}

/// Impulsive control with one straight jump `Δ_j` at each time `t_j`.
pub fn impulse_control(
    k: usize,
    jumps: &[(f64, Vec<f64>)],
    horizon: f64,
) -> Result<GeneralizedControl> {
    let impulses: Vec<Impulse> = jumps
        .iter()
        .map(|(t, d)| Impulse::single(*t, d.clone()))
        .collect();
    sequential_impulse(k, &impulses, horizon)
}

/// Impulsive control whose jumps are concatenations of straight legs at
/// frozen `V`, traversed in the given order. Between jumps `W` is constant and
/// `V` advances; the curve continues for a tail of duration `T` past the
/// horizon.
pub fn sequential_impulse(
    k: usize,
    impulses: &[Impulse],
    horizon: f64,
) -> Result<GeneralizedControl> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidControl(format!("horizon must be positive, got {horizon}")));
    }
    let mut prev = 0.0;
    for (i, imp) in impulses.iter().enumerate() {
        if imp.time < prev || imp.time > horizon || !imp.time.is_finite() {
            return Err(Error::NonIncreasingTimes { index: i });
        }
        prev = imp.time;
        for leg in &imp.legs {
            if leg.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: leg.len(),
                });
            }
        }
    }
    let mut cur = vec![0.0; k + 1];
    let mut points = vec![cur.clone()];
    for imp in impulses {
        if imp.time > cur[0] {
            cur[0] = imp.time;
            points.push(cur.clone());
        }
        for leg in &imp.legs {
            if leg.iter().all(|&x| x == 0.0) {
                continue;
            }
            for (c, d) in cur[1..].iter_mut().zip(leg) {
                *c += d;
            }
            points.push(cur.clone());
        }
    }
    cur[0] = 2.0 * horizon;
    points.push(cur);
    GeneralizedControl::from_curve(SampledCurve::from_points(points)?, horizon)
}

/// Ordinary control approximating `gc`: the time rate `v` is replaced by
/// `max(v, eps/T)` and rescaled so that `[0, V#(T)]` still maps onto
/// `[0, T]`; the control is `u = d(W ∘ V_ε⁻¹)/dt` on the resulting grid.
pub fn regularize(gc: &GeneralizedControl, eps: f64) -> Result<OrdinaryControl> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let horizon = gc.horizon;
    let floor = eps / horizon;
    let segs = gc.horizon_segments();
    let rates: Vec<f64> = segs.iter().map(|s| s.v.max(floor)).collect();
    let total: f64 = segs.iter().zip(&rates).map(|(s, r)| r * s.length).sum();
    let scale = horizon / total;
    let mut times = vec![0.0];
    let mut values = Vec::with_capacity(segs.len());
    let mut t = 0.0;
    for (s, r) in segs.iter().zip(&rates) {
        t += scale * r * s.length;
        times.push(t);
        values.push(s.w.iter().map(|w| w / (scale * r)).collect());
    }
    *times.last_mut().unwrap() = horizon;
    OrdinaryControl::new(horizon, times, values)
}

/// Outcome of a numerical Cauchy check on a sequence of controls.
#[derive(Debug, Clone)]
pub enum SequenceLimit {
    Converged {
        limit: GeneralizedControl,
        distances: Vec<f64>,
    },
    NoConvergence {
        distances: Vec<f64>,
    },
}

impl SequenceLimit {
    pub fn distances(&self) -> &[f64] {
        match self {
            SequenceLimit::Converged { distances, .. } | SequenceLimit::NoConvergence { distances } => {
                distances
            }
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, SequenceLimit::Converged { .. })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LimitOptions {
    /// Largest accepted final successive distance.
    pub tolerance: f64,
    /// Refinement scale for the distance computation.
    pub refine: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            tolerance: 0.05,
            refine: 0.005,
        }
    }
}

/// Checks that successive `d_T⁺` distances decrease and end below the
/// tolerance; the last element is returned as the limit representative.
pub fn limit_of_sequence(
    controls: &[GeneralizedControl],
    opts: LimitOptions,
) -> Result<SequenceLimit> {
    let last = controls.last().ok_or(Error::EmptySequence)?;
    let distances = controls
        .windows(2)
        .map(|w| w[0].distance_plus(&w[1], opts.refine))
        .collect::<Result<Vec<f64>>>()?;
    let monotone = distances.windows(2).all(|w| w[1] <= w[0]);
    let small = distances.last().map_or(true, |&d| d < opts.tolerance);
    Ok(if monotone && small {
        SequenceLimit::Converged {
            limit: last.clone(),
            distances,
        }
    } else {
        SequenceLimit::NoConvergence { distances }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_control_is_a_time_line() {
        let u = OrdinaryControl::constant(1.0, 4, vec![0.0]).unwrap();
        let g = from_ordinary(&u);
        for s in g.segments() {
            assert_eq!(s.v, 1.0);
            assert_eq!(s.w, vec![0.0]);
        }
        assert_eq!(g.horizon_length(), 1.0);
    }

    #[test]
    fn constant_control_direction() {
        let c = 2.0;
        let u = OrdinaryControl::constant(1.0, 1, vec![c]).unwrap();
        let g = from_ordinary(&u);
        let s = &g.horizon_segments()[0];
        let n = (1.0f64 + c * c).sqrt();
        assert_abs_diff_eq!(s.v, 1.0 / n, epsilon = 1e-12);
        assert_abs_diff_eq!(s.w[0], c / n, epsilon = 1e-12);
    }

    #[test]
    fn needle_has_steep_then_flat_leg() {
        let i = 10.0f64;
        let ubar = 1.0 / (1.0 - (-1.0 / i).exp());
        let u = OrdinaryControl::new(1.0, vec![0.0, 1.0 / i, 1.0], vec![vec![ubar], vec![0.0]]).unwrap();
        let g = from_ordinary(&u);
        let segs = g.horizon_segments();
        assert_eq!(segs.len(), 2);
        assert!(segs[0].w[0] > 0.99 && segs[1].w[0] == 0.0);
        let end = g.truncated().base().end().to_vec();
        assert_abs_diff_eq!(end[1], ubar / i, epsilon = 1e-12);
    }

    #[test]
    fn unit_impulse_at_zero() {
        let g = impulse_control(1, &[(0.0, vec![1.0])], 1.0).unwrap();
        let t = g.truncated();
        assert_eq!(
            t.base().points(),
            &[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]
        );
        assert_eq!(g.exit_param(), 2.0);
        assert!(g.segments()[0].is_jump());
    }

    #[test]
    fn no_jumps_equals_zero_control() {
        let a = impulse_control(2, &[], 1.0).unwrap();
        let b = from_ordinary(&OrdinaryControl::constant(1.0, 1, vec![0.0, 0.0]).unwrap());
        assert_eq!(a.distance_plus(&b, DEFAULT_REFINE).unwrap(), 0.0);
        assert_eq!(a.curve().state_at(0.7), b.curve().state_at(0.7));
    }

    #[test]
    fn sequential_single_leg_matches_impulse() {
        let a = impulse_control(2, &[(0.3, vec![1.0, -1.0])], 1.0).unwrap();
        let b = sequential_impulse(2, &[Impulse::sequential(0.3, vec![vec![1.0, -1.0]])], 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_order_jumps_rejected() {
        let r = impulse_control(1, &[(0.5, vec![1.0]), (0.2, vec![1.0])], 1.0);
        assert!(matches!(r, Err(Error::NonIncreasingTimes { index: 1 })));
    }

    #[test]
    fn regularize_leaves_ordinary_control_alone() {
        let u = OrdinaryControl::new(
            2.0,
            vec![0.0, 0.5, 1.25, 2.0],
            vec![vec![1.0], vec![-2.0], vec![0.5]],
        )
        .unwrap();
        let r = regularize(&from_ordinary(&u), 0.01).unwrap();
        assert_eq!(r.times().len(), u.times().len());
        for (a, b) in r.times().iter().zip(u.times()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        for (a, b) in r.values().iter().zip(u.values()) {
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-9);
        }
    }

    #[test]
    fn regularized_unit_impulse_is_a_needle() {
        // jump leg: rate 0.1, length 1; time leg: rate 1, length 1.
        // scale = 1/1.1, so the needle lasts 0.1/1.1 with height 11.
        let g = impulse_control(1, &[(0.0, vec![1.0])], 1.0).unwrap();
        let r = regularize(&g, 0.1).unwrap();
        assert_abs_diff_eq!(r.times()[1], 0.1 / 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(r.values()[0][0], 11.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.l1_norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn regularization_converges() {
        let g = impulse_control(1, &[(0.0, vec![1.0])], 1.0).unwrap();
        let d: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| from_ordinary(&regularize(&g, e).unwrap()).distance_plus(&g, 0.002).unwrap())
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn constant_sequence_converges_trivially() {
        let g = impulse_control(1, &[(0.5, vec![1.0])], 1.0).unwrap();
        let out = limit_of_sequence(&[g.clone(), g.clone(), g.clone()], LimitOptions::default()).unwrap();
        assert!(out.is_converged());
        assert!(out.distances().iter().all(|&d| d == 0.0));
        assert!(matches!(
            limit_of_sequence(&[], LimitOptions::default()),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn json_shapes() {
        let u = OrdinaryControl::constant(1.0, 2, vec![0.5]).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, r#"{"T":1.0,"times":[0.0,0.5,1.0],"values":[[0.5],[0.5]]}"#);
        let g = impulse_control(1, &[(0.0, vec![1.0])], 1.0).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.starts_with(r#"{"T":1.0,"dim":2,"params""#), "{s}");
        let back: GeneralizedControl = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }
}
