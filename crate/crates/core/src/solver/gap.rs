//! Lavrentiev-gap probe: restricted (ordinary, `v ≥ η`) infima with endpoint
//! tolerance `ε` against the relaxed infimum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

use super::{solve_relaxed, solve_restricted, RelaxedProblem, SolverOptions};

/// Default `η` sweep.
pub const DEFAULT_ETAS: &[f64] = &[0.1, 0.05, 0.02, 0.01];
/// Default endpoint tolerances.
pub const DEFAULT_EPSILONS: &[f64] = &[1e-2];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapOptions {
    pub solver: SolverOptions,
    pub gap_tol: f64,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            gap_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCell {
    pub eta: f64,
    pub eps: f64,
    /// `None` when no start met the endpoint tolerance.
    pub cost: Option<f64>,
    pub residual: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub eta_values: Vec<f64>,
    pub eps_values: Vec<f64>,
    pub cells: Vec<GapCell>,
    /// Restricted cost per `η` at the smallest `ε`.
    pub restricted_costs: Vec<Option<f64>>,
    pub generalized_cost: f64,
    pub generalized_residual: f64,
    /// `min_η restricted_cost − generalized_cost`; `None` if every cell at the
    /// smallest `ε` was infeasible.
    pub gap_estimate: Option<f64>,
    pub gap_tol: f64,
    pub gap_detected: bool,
}

impl GapReport {
    /// Fixed-width table of all cells followed by the verdict.
    pub fn table(&self) -> String {
        let mut out = format!("{:>10} {:>10} {:>14} {:>12}\n", "eta", "eps", "cost", "residual");
        for c in &self.cells {
            let cost = c.cost.map_or("infeasible".to_string(), |v| format!("{v:.6}"));
            let res = c.residual.map_or("-".to_string(), |v| format!("{v:.2e}"));
            out.push_str(&format!("{:>10} {:>10} {:>14} {:>12}\n", c.eta, c.eps, cost, res));
        }
        out.push_str(&format!("generalized cost {:.6}\n", self.generalized_cost));
        out.push_str(&self.verdict());
        out.push('\n');
        out
    }

    pub fn verdict(&self) -> String {
        match self.gap_estimate {
            Some(g) if self.gap_detected => format!("GAP detected: ≥ {:.2}", floor2(g)),
            Some(_) => "no gap".to_string(),
            None => "gap undetermined: every restricted solve was infeasible".to_string(),
        }
    }
}

fn floor2(x: f64) -> f64 {
    (x * 100.0).floor() / 100.0
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Runs a restricted solve for every `(η, ε)` and one relaxed solve.
pub fn gap_probe(
    p: &RelaxedProblem,
    eta_list: &[f64],
    eps_list: &[f64],
    intervals: usize,
    opts: &GapOptions,
) -> Result<GapReport> {
    if eta_list.is_empty() || eps_list.is_empty() {
        return Err(Error::InvalidArgument("eta and eps lists must be nonempty".into()));
    }
    if !strictly_decreasing(eta_list) || !strictly_decreasing(eps_list) {
        return Err(Error::InvalidArgument("eta and eps lists must be decreasing".into()));
    }
    if eps_list.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::InvalidArgument("eps values must be nonnegative".into()));
    }
    let relaxed = solve_relaxed(p, intervals, &opts.solver)?;

    let pairs: Vec<(f64, f64)> = eta_list
        .iter()
        .flat_map(|&eta| eps_list.iter().map(move |&eps| (eta, eps)))
        .collect();
    let cells = par::map(opts.solver.execution, pairs, |(eta, eps)| {
        let solver = SolverOptions {
            endpoint_slack: eps,
            ..opts.solver.clone()
        };
        match solve_restricted(p, eta, intervals, &solver) {
            Ok(s) => Ok(GapCell {
                eta,
                eps,
                cost: Some(s.cost),
                residual: Some(s.residual),
                status: "ok".into(),
            }),
            Err(Error::Infeasible { .. }) => Ok(GapCell {
                eta,
                eps,
                cost: None,
                residual: None,
                status: "infeasible".into(),
            }),
            Err(e) => Err(e),
        }
    })
    .into_iter()
    .collect::<Result<Vec<GapCell>>>()?;
    let eps_min = *eps_list.last().unwrap();
    let restricted_costs: Vec<Option<f64>> = eta_list
        .iter()
        .map(|&eta| cells.iter().find(|c| c.eta == eta && c.eps == eps_min).and_then(|c| c.cost))
        .collect();
    let gap_estimate = restricted_costs
        .iter()
        .flatten()
        .copied()
        .reduce(f64::min)
        .map(|m| m - relaxed.cost);
    Ok(GapReport {
        eta_values: eta_list.to_vec(),
        eps_values: eps_list.to_vec(),
        cells,
        restricted_costs,
        generalized_cost: relaxed.cost,
        generalized_residual: relaxed.residual,
        gap_detected: gap_estimate.is_some_and(|g| g > opts.gap_tol),
        gap_estimate,
        gap_tol: opts.gap_tol,
    })
}
