//! Built-in systems, problems and fixtures, and the problem file format.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::controls::{impulse_control, sequential_impulse, GeneralizedControl, Impulse, OrdinaryControl};
use crate::cost::{self, lagrangian_by_name, LagrangianSpec};
use crate::curves::SampledCurve;
use crate::dynamics::ControlAffineSystem;
use crate::error::{Error, Result};
use crate::solver::RelaxedProblem;

/// Drift of the Heisenberg examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeisenbergDrift {
    /// `f = (0, 0, −x₃)`.
    Linear,
    /// `f = (0, 0, 1)`.
    Constant,
}

impl std::str::FromStr for HeisenbergDrift {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "constant" => Ok(Self::Constant),
            _ => Err(Error::UnknownName {
                kind: "drift",
                name: s.to_string(),
                available: "linear, constant".into(),
            }),
        }
    }
}

/// `ẋ = x + u`.
pub fn fuel_system() -> ControlAffineSystem {
    ControlAffineSystem::linear(vec![vec![1.0]], vec![vec![1.0]]).expect("1×1 system")
}

/// `ẋ = u` on the line.
pub fn integrator_system() -> ControlAffineSystem {
    ControlAffineSystem::new(1, 1, |_, out| out[0] = 0.0, |_, out| out[0] = 1.0).with_growth(1.0, 0.0)
}

/// `ẋ₁ = u₁, ẋ₂ = u₂, ẋ₃ = x₂ u₁`.
pub fn example2_system() -> ControlAffineSystem {
    ControlAffineSystem::new(
        3,
        2,
        |_, out| out.fill(0.0),
        |x, g| {
            g.copy_from_slice(&[1.0, 0.0, 0.0, 1.0, x[1], 0.0]);
        },
    )
    .with_growth(2.0, 1.0)
}

/// `ẋ₁ = x₁ + x₂, ẋ₂ = u`.
pub fn gap_system() -> ControlAffineSystem {
    ControlAffineSystem::new(
        2,
        1,
        |x, out| {
            out[0] = x[0] + x[1];
            out[1] = 0.0;
        },
        |_, g| g.copy_from_slice(&[0.0, 1.0]),
    )
    .with_growth(1.0, 2.0)
}

/// `ẋ₁ = u₁, ẋ₂ = u₂, ẋ₃ = 2x₂u₁ − 2x₁u₂ + f₃`.
pub fn heisenberg_system(drift: HeisenbergDrift) -> ControlAffineSystem {
    let g = |x: &[f64], g: &mut [f64]| {
        g.copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 2.0 * x[1], -2.0 * x[0]]);
    };
    match drift {
        HeisenbergDrift::Linear => ControlAffineSystem::new(
            3,
            2,
            |x, out| {
                out[0] = 0.0;
                out[1] = 0.0;
                out[2] = -x[2];
            },
            g,
        ),
        HeisenbergDrift::Constant => ControlAffineSystem::new(
            3,
            2,
            |_, out| out.copy_from_slice(&[0.0, 0.0, 1.0]),
            g,
        ),
    }
}

pub const SYSTEM_NAMES: &[&str] = &[
    "fuel",
    "integrator",
    "example2",
    "gap1",
    "heisenberg:linear",
    "heisenberg:constant",
];

pub fn system_by_name(name: &str) -> Result<ControlAffineSystem> {
    match name {
        "fuel" => Ok(fuel_system()),
        "integrator" | "trivial" => Ok(integrator_system()),
        "example2" => Ok(example2_system()),
        "gap1" | "gap2" => Ok(gap_system()),
        "gap1-driftless" => Ok(gap_system().without_drift()),
        "heisenberg" | "heisenberg:linear" => Ok(heisenberg_system(HeisenbergDrift::Linear)),
        "heisenberg:constant" => Ok(heisenberg_system(HeisenbergDrift::Constant)),
        _ => Err(Error::UnknownName {
            kind: "system",
            name: name.to_string(),
            available: SYSTEM_NAMES.join(", "),
        }),
    }
}

/// Fuel transfer: `∫|u| → min`, `ẋ = x + u`, `x(0) = 0`, `x(1) = e`, budget 3.
pub fn fuel_problem() -> RelaxedProblem {
    RelaxedProblem::new(fuel_system(), cost::fuel(), vec![0.0], vec![1f64.exp()])
        .and_then(|p| p.with_budget(3.0))
        .expect("valid problem")
}

/// `ẋ = u`, `L = sqrt(1 + u²)`, `0 → 0`.
pub fn trivial_problem() -> RelaxedProblem {
    RelaxedProblem::new(integrator_system(), cost::norm_plus_one(), vec![0.0], vec![0.0]).expect("valid problem")
}

/// First gap problem, from `(0, −1)` to `(0, 0)`.
pub fn gap1_problem() -> RelaxedProblem {
    RelaxedProblem::new(gap_system(), cost::gap1(), vec![0.0, -1.0], vec![0.0, 0.0]).expect("valid problem")
}

/// Second gap problem with exponent `alpha`.
pub fn gap2_problem(alpha: f64) -> RelaxedProblem {
    RelaxedProblem::new(gap_system(), cost::gap2(alpha), vec![0.0, -1.0], vec![0.0, 0.0]).expect("valid problem")
}

/// Heisenberg arc length from the origin to `(0, 0, c)`.
pub fn heisenberg_problem(drift: HeisenbergDrift, c: f64) -> RelaxedProblem {
    RelaxedProblem::new(heisenberg_system(drift), cost::heisenberg(), vec![0.0; 3], vec![0.0, 0.0, c])
        .expect("valid problem")
}

pub const PROBLEM_NAMES: &[&str] = &[
    "fuel",
    "trivial",
    "gap1",
    "gap1-driftless",
    "gap2:<alpha>",
    "heisenberg:<linear|constant>:<C>",
];

/// Parses `fuel`, `trivial`, `gap1`, `gap1-driftless`, `gap2[:alpha]`,
/// `heisenberg[:drift[:C]]` (defaults: `alpha = 1`, linear drift, `C = 30`).
pub fn problem_by_name(name: &str) -> Result<RelaxedProblem> {
    let unknown = || Error::UnknownName {
        kind: "problem",
        name: name.to_string(),
        available: PROBLEM_NAMES.join(", "),
    };
    let mut parts = name.split(':');
    let head = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    match (head, rest.as_slice()) {
        ("fuel", []) => Ok(fuel_problem()),
        ("trivial", []) => Ok(trivial_problem()),
        ("gap1", []) => Ok(gap1_problem()),
        ("gap1-driftless", []) => Ok(gap1_problem().without_drift()),
        ("gap2", []) => Ok(gap2_problem(1.0)),
        ("gap2", [a]) => {
            let alpha: f64 = a.parse().map_err(|_| unknown())?;
            if !(alpha > 0.0) {
                return Err(unknown());
            }
            Ok(gap2_problem(alpha))
        }
        ("heisenberg", []) => Ok(heisenberg_problem(HeisenbergDrift::Linear, 30.0)),
        ("heisenberg", [d]) => {
            let drift: HeisenbergDrift = d.parse()?;
            let c = if drift == HeisenbergDrift::Linear { 30.0 } else { 1.0 };
            Ok(heisenberg_problem(drift, c))
        }
        ("heisenberg", [d, c]) => {
            let c: f64 = c.parse().map_err(|_| unknown())?;
            Ok(heisenberg_problem(d.parse()?, c))
        }
        _ => Err(unknown()),
    }
}

/// A system by name or a linear system `ẋ = A x + B u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemRef {
    Name(String),
    Linear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
}

impl SystemRef {
    pub fn build(&self) -> Result<ControlAffineSystem> {
        match self {
            SystemRef::Name(n) => system_by_name(n),
            SystemRef::Linear { a, b } => ControlAffineSystem::linear(a.clone(), b.clone()),
        }
    }
}

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub system: SystemRef,
    pub lagrangian: String,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<usize>,
}

impl ProblemFile {
    pub fn build(&self) -> Result<RelaxedProblem> {
        let sys = self.system.build()?;
        let spec: LagrangianSpec = lagrangian_by_name(&self.lagrangian)?;
        let p = RelaxedProblem::new(sys, spec, self.x0.clone(), self.x1.clone())?;
        match self.budget {
            Some(s) => p.with_budget(s),
            None => Ok(p),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `(V₁,W₁)`, `(V₂,W₂)`, `(V₃,W₃)`: the unit impulse `(δ, δ)` at `t = 0`
/// resolved as `e₁` then `e₂`, as the diagonal, and as `e₂` then `e₁`.
pub fn c1_controls() -> [GeneralizedControl; 3] {
    let e1 = vec![1.0, 0.0];
    let e2 = vec![0.0, 1.0];
    [
        sequential_impulse(2, &[Impulse::sequential(0.0, vec![e1.clone(), e2.clone()])], 1.0),
        impulse_control(2, &[(0.0, vec![1.0, 1.0])], 1.0),
        sequential_impulse(2, &[Impulse::sequential(0.0, vec![e2, e1])], 1.0),
    ]
    .map(|g| g.expect("valid impulses"))
}

/// The unit circle at `θ = 0` traversed counterclockwise and clockwise from
/// `(1, 0)`, each followed by the same unit time leg; `samples` points on the
/// circle.
pub fn hausdorff_circles(samples: usize) -> [SampledCurve; 2] {
    let m = samples.max(8);
    let build = |sign: f64| {
        let mut pts: Vec<Vec<f64>> = (0..=m)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / m as f64;
                vec![0.0, t.cos(), sign * t.sin()]
            })
            .collect();
        *pts.last_mut().unwrap() = vec![0.0, 1.0, 0.0];
        pts.push(vec![1.0, 1.0, 0.0]);
        SampledCurve::from_points(pts).expect("distinct points")
    };
    [build(1.0), build(-1.0)]
}

/// `u_i = ū_i χ_[0,1/i]` with `ū_i = 1/(1 − e^{−1/i})`, which steers the fuel
/// system from 0 to `e` on `[0, 1]`.
pub fn fuel_needle(i: u32) -> OrdinaryControl {
    let i = f64::from(i.max(1));
    let ubar = 1.0 / (1.0 - (-1.0 / i).exp());
    let times = if i == 1.0 { vec![0.0, 1.0] } else { vec![0.0, 1.0 / i, 1.0] };
    let values = if i == 1.0 { vec![vec![ubar]] } else { vec![vec![ubar], vec![0.0]] };
    OrdinaryControl::new(1.0, times, values).expect("valid needle")
}

/// Unit impulse at `t = 0` for the fuel system.
pub fn fuel_impulse() -> GeneralizedControl {
    impulse_control(1, &[(0.0, vec![1.0])], 1.0).expect("valid impulse")
}

pub const FIXTURE_NAMES: &[&str] = &["example2", "hausdorff", "fuel", "gap1", "gap2", "heisenberg"];

fn problem_json(system: &str, lagrangian: &str, x0: Vec<f64>, x1: Vec<f64>, s: Option<f64>, n: usize) -> Result<Value> {
    Ok(serde_json::to_value(ProblemFile {
        system: SystemRef::Name(system.into()),
        lagrangian: lagrangian.into(),
        x0,
        x1,
        budget: s,
        intervals: Some(n),
    })?)
}

/// Named fixture files: `(file name, JSON)`.
pub fn fixtures(name: &str) -> Result<Vec<(String, Value)>> {
    let mut out = Vec::new();
    match name {
        "example2" => {
            for (i, g) in c1_controls().iter().enumerate() {
                out.push((format!("example2_V{}.json", i + 1), serde_json::to_value(g)?));
            }
        }
        "hausdorff" => {
            let [a, b] = hausdorff_circles(512);
            out.push(("hausdorff_ccw.json".into(), serde_json::to_value(&a)?));
            out.push(("hausdorff_cw.json".into(), serde_json::to_value(&b)?));
        }
        "fuel" => {
            out.push((
                "fuel_problem.json".into(),
                problem_json("fuel", "fuel", vec![0.0], vec![1f64.exp()], Some(3.0), 200)?,
            ));
            for i in [4, 8, 16, 32] {
                out.push((format!("fuel_needle_{i}.json"), serde_json::to_value(fuel_needle(i))?));
            }
            out.push(("fuel_impulse.json".into(), serde_json::to_value(fuel_impulse())?));
        }
        "gap1" => out.push((
            "gap1_problem.json".into(),
            problem_json("gap1", "gap1", vec![0.0, -1.0], vec![0.0, 0.0], None, 200)?,
        )),
        "gap2" => out.push((
            "gap2_problem.json".into(),
            problem_json("gap2", "gap2:2", vec![0.0, -1.0], vec![0.0, 0.0], None, 200)?,
        )),
        "heisenberg" => {
            out.push((
                "heisenberg_linear_problem.json".into(),
                problem_json("heisenberg:linear", "heisenberg", vec![0.0; 3], vec![0.0, 0.0, 30.0], None, 200)?,
            ));
            out.push((
                "heisenberg_constant_problem.json".into(),
                problem_json("heisenberg:constant", "heisenberg", vec![0.0; 3], vec![0.0, 0.0, 1.0], None, 200)?,
            ));
        }
        _ => {
            return Err(Error::UnknownName {
                kind: "example",
                name: name.to_string(),
                available: FIXTURE_NAMES.join(", "),
            })
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_auxiliary, IntegrationOptions};

    #[test]
    fn c1_endpoints() {
        let sys = example2_system();
        let expect = [[1.0, 1.0, 0.0], [1.0, 1.0, 0.5], [1.0, 1.0, 1.0]];
        for (g, e) in c1_controls().iter().zip(expect) {
            let traj = integrate_auxiliary(&sys, g, &[0.0; 3], &IntegrationOptions::default()).unwrap();
            let end = traj.endpoint().unwrap();
            for (a, b) in end.iter().zip(e) {
                assert!((a - b).abs() < 1e-12, "{end:?} vs {e:?}");
            }
        }
    }

    #[test]
    fn names_parse() {
        assert_eq!(problem_by_name("heisenberg:linear:30").unwrap().x1, vec![0.0, 0.0, 30.0]);
        assert_eq!(problem_by_name("gap2:2").unwrap().spec.name(), "gap2:2");
        assert_eq!(problem_by_name("fuel").unwrap().budget, 3.0);
        let drift_free = problem_by_name("gap1-driftless").unwrap();
        assert_eq!(drift_free.sys.drift_at(&[1.0, 1.0]), vec![0.0, 0.0]);
        let err = problem_by_name("nope").unwrap_err().to_string();
        assert!(err.contains("gap1") && err.contains("heisenberg"));
        assert!(problem_by_name("heisenberg:quadratic:3").is_err());
    }

    #[test]
    fn problem_file_round_trip() {
        let text = r#"{"system": {"A": [[1.0]], "B": [[1.0]]}, "lagrangian": "fuel", "x0": [0.0], "x1": [2.718281828459045], "S": 3.0, "N": 200}"#;
        let f = ProblemFile::from_json(text).unwrap();
        assert_eq!(f.intervals, Some(200));
        let p = f.build().unwrap();
        assert_eq!(p.budget, 3.0);
        let again: ProblemFile = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(again, f);
        let named = ProblemFile::from_json(r#"{"system": "gap1", "lagrangian": "gap1", "x0": [0, -1], "x1": [0, 0]}"#).unwrap();
        assert_eq!(named.build().unwrap().budget, 4.0);
    }

    #[test]
    fn needle_reaches_e() {
        for i in [1, 4, 32] {
            let u = fuel_needle(i);
            let traj = crate::dynamics::ordinary_trajectory(&fuel_system(), &u, &[0.0], &IntegrationOptions::default()).unwrap();
            assert!((traj.terminal()[0] - 1f64.exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn fixtures_list() {
        assert_eq!(fixtures("example2").unwrap().len(), 3);
        assert_eq!(fixtures("fuel").unwrap().len(), 6);
        let err = fixtures("nope").unwrap_err().to_string();
        assert!(err.contains("hausdorff"));
    }
}
