//! Oriented rectifiable curves represented as polylines.
//!
//! A [`SampledCurve`] is the piecewise-linear interpolant of its samples. The
//! metrics here are the (discrete) Fréchet distance, its strengthened form that
//! also compares total lengths, and a W_{1,1}-type distance between canonical
//! (unit-speed) parameterizations. Space-time curves carry time as their first
//! coordinate and support truncation at a horizon, projection back to a
//! function of time, and lifting of functions with jumps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chords at most this long (relative to the coordinate scale) are treated as
/// repeated points by [`canonical_reparam`].
const DUPLICATE_TOL: f64 = 1e-15;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn lerp(a: &[f64], b: &[f64], frac: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + frac * (y - x)).collect()
}

#[derive(Serialize, Deserialize)]
struct CurveRepr {
    dim: usize,
    params: Vec<f64>,
    points: Vec<Vec<f64>>,
}

/// Polyline parameterization `s_j -> p_j` of a curve in `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRepr", into = "CurveRepr")]
pub struct SampledCurve {
    params: Vec<f64>,
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl TryFrom<CurveRepr> for SampledCurve {
    type Error = Error;

    fn try_from(r: CurveRepr) -> Result<Self> {
        let c = SampledCurve::new(r.params, r.points)?;
        if c.dim != r.dim {
            return Err(Error::DimensionMismatch {
                expected: r.dim,
                found: c.dim,
            });
        }
        Ok(c)
    }
}

impl From<SampledCurve> for CurveRepr {
    fn from(c: SampledCurve) -> Self {
        CurveRepr {
            dim: c.dim,
            params: c.params,
            points: c.points,
        }
    }
}

impl SampledCurve {
    pub fn new(params: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if params.len() != points.len() {
            return Err(Error::InvalidCurve(format!(
                "{} params for {} points",
                params.len(),
                points.len()
            )));
        }
        if params.len() < 2 {
            return Err(Error::InvalidCurve("need at least two samples".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidCurve("points must have positive dimension".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidCurve("non-finite coordinate".into()));
            }
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidCurve("non-finite parameter".into()));
        }
        if let Some(i) = params.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCurve(format!(
                "params not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self {
            params,
            points,
            dim,
        })
    }

    /// Parameterizes the points by their index.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let params = (0..points.len()).map(|i| i as f64).collect();
        Self::new(params, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn start(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn end(&self) -> &[f64] {
        &self.points[self.points.len() - 1]
    }

    pub fn param_range(&self) -> (f64, f64) {
        (self.params[0], self.params[self.params.len() - 1])
    }

    /// Cumulative arc length `ℓ(s_j)` at every sample; the last entry is the
    /// total length.
    pub fn cumulative_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.points.windows(2) {
            acc += dist(&w[0], &w[1]);
            out.push(acc);
        }
        out
    }

    /// Evaluates the interpolant, clamping outside the parameter range.
    /// Returns stored samples bit-exactly at knots.
    pub fn eval(&self, s: f64) -> Vec<f64> {
        let (lo, hi) = self.param_range();
        if s <= lo {
            return self.points[0].clone();
        }
        if s >= hi {
            return self.end().to_vec();
        }
        let i = self.params.partition_point(|&p| p <= s) - 1;
        if s == self.params[i] {
            return self.points[i].clone();
        }
        let frac = (s - self.params[i]) / (self.params[i + 1] - self.params[i]);
        lerp(&self.points[i], &self.points[i + 1], frac)
    }

    /// Derivative on the segment containing `s` (right derivative at knots).
    pub fn derivative(&self, s: f64) -> Vec<f64> {
        let n = self.len();
        let i = self.params.partition_point(|&p| p <= s).clamp(1, n - 1) - 1;
        let ds = self.params[i + 1] - self.params[i];
        self.points[i + 1]
            .iter()
            .zip(&self.points[i])
            .map(|(b, a)| (b - a) / ds)
            .collect()
    }

    /// One coordinate of every sample, as a column.
    pub fn coordinate(&self, axis: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[axis]).collect()
    }
}

/// Total length of the polyline (sum of chord lengths).
pub fn arc_length(c: &SampledCurve) -> f64 {
    c.points.windows(2).map(|w| dist(&w[0], &w[1])).sum()
}

/// Nondecreasing piecewise-linear map `α` given by knots and values.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneMap {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl MonotoneMap {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(Error::InvalidArgument(
                "monotone map needs matching knots and values (at least two)".into(),
            ));
        }
        if let Some(i) = knots.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "knots not increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument(format!(
                "values decrease at index {}",
                i + 1
            )));
        }
        Ok(Self { knots, values })
    }

    pub fn identity(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![lo, hi])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, s: f64) -> f64 {
        let n = self.knots.len();
        if s <= self.knots[0] {
            return self.values[0];
        }
        if s >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let i = self.knots.partition_point(|&k| k <= s) - 1;
        if s == self.knots[i] {
            return self.values[i];
        }
        let frac = (s - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// Right inverse `α#(t) = sup { s : α(s) <= t }`; on a plateau this is the
    /// right end of the plateau.
    pub fn pseudo_inverse(&self, t: f64) -> Result<f64> {
        let n = self.values.len();
        if t < self.values[0] {
            return Err(Error::BelowRange {
                query: t,
                min: self.values[0],
            });
        }
        if t > self.values[n - 1] {
            return Err(Error::BeyondHorizon {
                query: t,
                max: self.values[n - 1],
            });
        }
        let j = self.values.partition_point(|&v| v <= t) - 1;
        if j == n - 1 {
            return Ok(self.knots[n - 1]);
        }
        let (v0, v1) = (self.values[j], self.values[j + 1]);
        if t == v0 {
            return Ok(self.knots[j]);
        }
        let frac = (t - v0) / (v1 - v0);
        Ok(self.knots[j] + frac * (self.knots[j + 1] - self.knots[j]))
    }
}

/// Free-function form of [`MonotoneMap::pseudo_inverse`].
pub fn pseudo_inverse(a: &MonotoneMap, t: f64) -> Result<f64> {
    a.pseudo_inverse(t)
}

/// Arc-length (unit-speed) parameterization `g ∘ ℓ_g^#` starting at 0.
/// Repeated consecutive points are collapsed.
pub fn canonical_reparam(c: &SampledCurve) -> Result<SampledCurve> {
    let scale = c
        .points
        .iter()
        .flat_map(|p| p.iter())
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let mut params = vec![0.0];
    let mut points = vec![c.points[0].clone()];
    let mut acc = 0.0;
    for p in &c.points[1..] {
        let d = dist(points.last().unwrap(), p);
        if d <= DUPLICATE_TOL * scale {
            continue;
        }
        acc += d;
        params.push(acc);
        points.push(p.clone());
    }
    if points.len() < 2 {
        return Err(Error::DegenerateCurve);
    }
    SampledCurve::new(params, points)
}

/// Subdivides every segment into equal pieces no longer than `h`.
pub fn refine(c: &SampledCurve, h: f64) -> Result<SampledCurve> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("refinement step must be positive, got {h}")));
    }
    let mut params = vec![c.params[0]];
    let mut points = vec![c.points[0].clone()];
    for i in 0..c.len() - 1 {
        let (a, b) = (&c.points[i], &c.points[i + 1]);
        let pieces = (dist(a, b) / h).ceil().max(1.0) as usize;
        let (s0, s1) = (c.params[i], c.params[i + 1]);
        for j in 1..pieces {
            let frac = j as f64 / pieces as f64;
            params.push(s0 + frac * (s1 - s0));
            points.push(lerp(a, b, frac));
        }
        params.push(s1);
        points.push(b.clone());
    }
    SampledCurve::new(params, points)
}

/// Reparameterizes `c` by `sigma`, i.e. returns the polyline `c ∘ σ`.
/// `sigma` must be strictly increasing and map its knot range onto the
/// parameter range of `c`. All breakpoints of the composition are kept, so the
/// image is unchanged.
pub fn compose(c: &SampledCurve, sigma: &MonotoneMap) -> Result<SampledCurve> {
    let (lo, hi) = c.param_range();
    let (r0, r1) = (sigma.knots[0], *sigma.knots.last().unwrap());
    if (sigma.eval(r0) - lo).abs() > 1e-12 * (1.0 + lo.abs())
        || (sigma.eval(r1) - hi).abs() > 1e-12 * (1.0 + hi.abs())
    {
        return Err(Error::InvalidArgument(
            "reparameterization must map onto the curve's parameter range".into(),
        ));
    }
    if sigma.values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "reparameterization must be strictly increasing".into(),
        ));
    }
    let mut rs: Vec<f64> = sigma.knots.clone();
    for &s in &c.params[1..c.params.len() - 1] {
        rs.push(sigma.pseudo_inverse(s)?);
    }
    rs.sort_by(|a, b| a.total_cmp(b));
    rs.dedup();
    let points = rs.iter().map(|&r| c.eval(sigma.eval(r))).collect();
    SampledCurve::new(rs, points)
}

/// Discrete Fréchet distance between the sample sequences of two curves.
///
/// Dynamic programming over the sample grid with monotone couplings; refine
/// both curves (see [`refine`]) to approximate the continuous distance within
/// the refinement scale.
pub fn frechet_distance(c1: &SampledCurve, c2: &SampledCurve) -> Result<f64> {
    if c1.dim != c2.dim {
        return Err(Error::DimensionMismatch {
            expected: c1.dim,
            found: c2.dim,
        });
    }
    let m = c2.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, p) in c1.points.iter().enumerate() {
        for j in 0..m {
            let d = dist(p, &c2.points[j]);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => d.max(cur[j - 1]),
                (_, 0) => d.max(prev[0]),
                _ => d.max(prev[j].min(prev[j - 1]).min(cur[j - 1])),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// Fréchet distance plus the absolute difference of total lengths.
pub fn strengthened_distance(c1: &SampledCurve, c2: &SampledCurve) -> Result<f64> {
    Ok(frechet_distance(c1, c2)? + (arc_length(c1) - arc_length(c2)).abs())
}

/// Refines both curves to step `h` and returns the discrete Fréchet distance,
/// or the strengthened distance when `strengthened` is set.
pub fn refined_distance(
    c1: &SampledCurve,
    c2: &SampledCurve,
    h: f64,
    strengthened: bool,
) -> Result<f64> {
    let d = frechet_distance(&refine(c1, h)?, &refine(c2, h)?)?;
    if strengthened {
        Ok(d + (arc_length(c1) - arc_length(c2)).abs())
    } else {
        Ok(d)
    }
}

/// Distance between the canonical parameterizations of two curves in the
/// W_{1,1} sense: sup-norm of the points plus the L1 norm of the difference of
/// unit tangents, on a common uniform grid of `cells` cells. Past its length a
/// curve is extended as a constant.
pub fn sobolev_distance(c1: &SampledCurve, c2: &SampledCurve, cells: usize) -> Result<f64> {
    if c1.dim != c2.dim {
        return Err(Error::DimensionMismatch {
            expected: c1.dim,
            found: c2.dim,
        });
    }
    let (a, b) = (canonical_reparam(c1)?, canonical_reparam(c2)?);
    let la = a.param_range().1;
    let lb = b.param_range().1;
    let total = la.max(lb);
    let cells = cells.max(1);
    let ds = total / cells as f64;
    let tangent = |c: &SampledCurve, len: f64, s: f64| {
        if s >= len {
            vec![0.0; c.dim]
        } else {
            c.derivative(s)
        }
    };
    let mut sup = 0.0f64;
    let mut l1 = 0.0;
    for i in 0..=cells {
        let s = i as f64 * ds;
        sup = sup.max(dist(&a.eval(s), &b.eval(s)));
        if i < cells {
            let mid = s + 0.5 * ds;
            l1 += dist(&tangent(&a, la, mid), &tangent(&b, lb, mid)) * ds;
        }
    }
    Ok(sup + l1)
}

/// Curve in space-time `R^{1+n}`: the first coordinate θ is time, starting at
/// 0 and nondecreasing; the remaining coordinates are the state `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampledCurve", into = "SampledCurve")]
pub struct SpaceTimeCurve {
    base: SampledCurve,
}

impl TryFrom<SampledCurve> for SpaceTimeCurve {
    type Error = Error;

    fn try_from(c: SampledCurve) -> Result<Self> {
        SpaceTimeCurve::new(c)
    }
}

impl From<SpaceTimeCurve> for SampledCurve {
    fn from(c: SpaceTimeCurve) -> Self {
        c.base
    }
}

impl SpaceTimeCurve {
    pub fn new(base: SampledCurve) -> Result<Self> {
        if base.dim < 2 {
            return Err(Error::InvalidCurve(
                "space-time curve needs a time and at least one state coordinate".into(),
            ));
        }
        if base.points[0][0].abs() > 1e-12 {
            return Err(Error::InvalidCurve(format!(
                "time must start at 0, starts at {}",
                base.points[0][0]
            )));
        }
        if let Some(i) = base.points.windows(2).position(|w| w[1][0] < w[0][0]) {
            return Err(Error::InvalidCurve(format!(
                "time decreases at sample {}",
                i + 1
            )));
        }
        Ok(Self { base })
    }

    pub fn base(&self) -> &SampledCurve {
        &self.base
    }

    pub fn into_base(self) -> SampledCurve {
        self.base
    }

    /// Dimension of the state part `y`.
    pub fn state_dim(&self) -> usize {
        self.base.dim - 1
    }

    /// Final time θ(s_m).
    pub fn final_time(&self) -> f64 {
        self.base.end()[0]
    }

    /// θ as a monotone map of the curve parameter.
    pub fn time_map(&self) -> MonotoneMap {
        MonotoneMap {
            knots: self.base.params.clone(),
            values: self.base.coordinate(0),
        }
    }

    /// Parameter `θ#(t)`.
    pub fn param_at_time(&self, t: f64) -> Result<f64> {
        self.time_map().pseudo_inverse(t)
    }

    /// State component `y(s)`.
    pub fn state_at(&self, s: f64) -> Vec<f64> {
        self.base.eval(s)[1..].to_vec()
    }

    pub fn canonical(&self) -> Result<SpaceTimeCurve> {
        SpaceTimeCurve::new(canonical_reparam(&self.base)?)
    }

    /// Cuts the curve at `s* = θ#(T)`. The curve is constant `(T, y(s*))`
    /// afterwards, which for polylines is the same as ending there. Curves
    /// ending before `T` are returned unchanged.
    pub fn truncate_at_time(&self, horizon: f64) -> Result<SpaceTimeCurve> {
        if horizon < 0.0 {
            return Err(Error::InvalidArgument(format!("negative horizon {horizon}")));
        }
        if horizon >= self.final_time() {
            return Ok(self.clone());
        }
        let s_star = self.param_at_time(horizon)?;
        let c = &self.base;
        let mut params = Vec::new();
        let mut points = Vec::new();
        for (s, p) in c.params.iter().zip(&c.points) {
            if *s < s_star {
                params.push(*s);
                points.push(p.clone());
            }
        }
        let mut last = c.eval(s_star);
        last[0] = horizon;
        if params.is_empty() {
            params.push(s_star);
            points.push(last.clone());
            params.push(s_star + 1.0);
        } else {
            params.push(s_star);
        }
        points.push(last);
        SpaceTimeCurve::new(SampledCurve::new(params, points)?)
    }

    /// `y(θ#(t))` for each query time (right-continuous at jumps).
    pub fn project_time(&self, query_times: &[f64]) -> Result<Vec<Vec<f64>>> {
        let map = self.time_map();
        query_times
            .iter()
            .map(|&t| Ok(self.state_at(map.pseudo_inverse(t)?)))
            .collect()
    }
}

/// Free-function form of [`SpaceTimeCurve::truncate_at_time`].
pub fn truncate_at_time(c: &SpaceTimeCurve, horizon: f64) -> Result<SpaceTimeCurve> {
    c.truncate_at_time(horizon)
}

/// Free-function form of [`SpaceTimeCurve::project_time`].
pub fn project_time(c: &SpaceTimeCurve, query_times: &[f64]) -> Result<Vec<Vec<f64>>> {
    c.project_time(query_times)
}

/// Path traversed in state space, at frozen time, across a jump from the
/// left limit to the right value. Returns interior waypoints only.
pub trait JumpPolicy {
    fn waypoints(&self, left: &[f64], right: &[f64]) -> Vec<Vec<f64>>;
}

/// Straight segment between the one-sided limits.
#[derive(Debug, Clone, Copy, Default)]
pub struct SegmentJump;

impl JumpPolicy for SegmentJump {
    fn waypoints(&self, _left: &[f64], _right: &[f64]) -> Vec<Vec<f64>> {
        Vec::new()
    }
}

/// Axis-parallel legs, one coordinate at a time in the given order
/// (natural order when `order` is empty).
#[derive(Debug, Clone, Default)]
pub struct StaircaseJump {
    pub order: Vec<usize>,
}

impl JumpPolicy for StaircaseJump {
    fn waypoints(&self, left: &[f64], right: &[f64]) -> Vec<Vec<f64>> {
        let order: Vec<usize> = if self.order.is_empty() {
            (0..left.len()).collect()
        } else {
            self.order.clone()
        };
        let mut cur = left.to_vec();
        let mut out = Vec::new();
        for &axis in &order[..order.len().saturating_sub(1)] {
            if cur[axis] != right[axis] {
                cur[axis] = right[axis];
                out.push(cur.clone());
            }
        }
        out
    }
}

/// Lifts a sampled function of bounded variation to a space-time curve.
///
/// `times` must be nondecreasing; a time may appear twice in a row, which marks
/// a jump from the first value (left limit) to the second (value at and after
/// the jump). Between distinct times the function is the linear interpolant.
/// The jump arc is produced by `policy`. The result is in canonical
/// parameterization.
pub fn lift_bv(
    times: &[f64],
    values: &[Vec<f64>],
    policy: &dyn JumpPolicy,
) -> Result<SpaceTimeCurve> {
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::InvalidArgument(
            "lift needs one value per time and at least one sample".into(),
        ));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidArgument("sampled function must start at t = 0".into()));
    }
    for i in 1..times.len() {
        if times[i] < times[i - 1] || !times[i].is_finite() {
            return Err(Error::NonIncreasingTimes { index: i });
        }
        if i >= 2 && times[i] == times[i - 1] && times[i - 1] == times[i - 2] {
            return Err(Error::NonIncreasingTimes { index: i });
        }
    }
    let n = values[0].len();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        if values[i].len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: values[i].len(),
            });
        }
        if i > 0 && times[i] == times[i - 1] {
            for w in policy.waypoints(&values[i - 1], &values[i]) {
                let mut p = Vec::with_capacity(n + 1);
                p.push(times[i]);
                p.extend(w);
                points.push(p);
            }
        }
        let mut p = Vec::with_capacity(n + 1);
        p.push(times[i]);
        p.extend_from_slice(&values[i]);
        points.push(p);
    }
    if points.len() < 2 {
        return Err(Error::DegenerateCurve);
    }
    let raw = SampledCurve::from_points(points)?;
    SpaceTimeCurve::new(canonical_reparam(&raw)?)
}
