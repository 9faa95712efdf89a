//! Discrete partial Wasserstein solvers.
//!
//! `PW_α(a, b)` minimises `Σ C_ij Π_ij` over nonnegative `Π` with
//! `Π 1 ≤ a`, `Πᵀ 1 ≤ b` and `1ᵀ Π 1 = α`. The exact solver reduces this to
//! a balanced transportation problem with one dummy row and one dummy
//! column; the entropic solver runs Dykstra-corrected KL projections onto the
//! three constraint sets.

mod brute;
mod entropic;
pub mod flow;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use brute::{brute_force_partial_ot, BRUTE_FORCE_MAX_VARIABLES};
pub use entropic::{entropic_partial_ot, EntropicResult};

use crate::error::{invalid, Error, Result};

/// Absolute tolerance used when validating caps and total mass.
pub const PLAN_TOLERANCE: f64 = 1e-9;

/// A feasible partial coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub matrix: Array2<f64>,
    pub row_caps: Vec<f64>,
    pub col_caps: Vec<f64>,
    pub mass: f64,
}

impl TransportPlan {
    /// Build a plan, checking nonnegativity, both caps and the mass within `tol`.
    pub fn new(matrix: Array2<f64>, row_caps: Vec<f64>, col_caps: Vec<f64>, mass: f64, tol: f64) -> Result<Self> {
        let plan = Self { matrix, row_caps, col_caps, mass };
        let violation = plan.max_violation();
        if violation > tol {
            return Err(Error::Solver(format!("plan violates constraints by {violation:e} (tolerance {tol:e})")));
        }
        Ok(plan)
    }

    pub(crate) fn unchecked(matrix: Array2<f64>, row_caps: Vec<f64>, col_caps: Vec<f64>, mass: f64) -> Self {
        Self { matrix, row_caps, col_caps, mass }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.matrix.columns().into_iter().map(|c| c.sum()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.matrix.sum()
    }

    pub fn cost(&self, cost: &Array2<f64>) -> f64 {
        self.matrix.iter().zip(cost.iter()).map(|(p, c)| p * c).sum()
    }

    /// Largest violation of the row caps.
    pub fn row_cap_violation(&self) -> f64 {
        self.row_sums().iter().zip(&self.row_caps).map(|(s, a)| s - a).fold(0.0, f64::max)
    }

    pub fn col_cap_violation(&self) -> f64 {
        self.col_sums().iter().zip(&self.col_caps).map(|(s, b)| s - b).fold(0.0, f64::max)
    }

    pub fn mass_violation(&self) -> f64 {
        (self.total_mass() - self.mass).abs()
    }

    pub fn max_violation(&self) -> f64 {
        let negativity = self.matrix.iter().map(|&p| -p).fold(0.0, f64::max);
        negativity.max(self.row_cap_violation()).max(self.col_cap_violation()).max(self.mass_violation())
    }
}

/// Entropic solver settings. Defaults: `ε = 7.0`, 5000 iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { eps: 7.0, max_iter: 5000, tol: 1e-9 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(invalid("eps", format!("must be positive, got {}", self.eps)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Exact,
    Entropic(SolverConfig),
}

pub(crate) fn validate_problem(a: &[f64], b: &[f64], cost: &Array2<f64>, alpha: f64) -> Result<(f64, f64)> {
    let (m, n) = cost.dim();
    if a.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: a.len() });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if m == 0 || n == 0 {
        return Err(Error::EmptyMeasure);
    }
    for (index, &value) in a.iter().chain(b).enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeMass { index, value });
        }
    }
    for ((row, col), c) in cost.indexed_iter() {
        if !c.is_finite() {
            return Err(Error::NonFiniteCost { row, col });
        }
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    let ta: f64 = a.iter().sum();
    let tb: f64 = b.iter().sum();
    let available = ta.min(tb);
    if alpha > available * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::Infeasible { alpha, available });
    }
    Ok((ta, tb))
}

/// Exact partial OT through the dummy-node reduction.
///
/// A dummy row of mass `Σb − α` and a dummy column of mass `Σa − α` are
/// appended with zero cost to every real node and cost
/// `A = 2(m + n)·max|C| + 1` between themselves.
pub fn exact_partial_ot(a: &[f64], b: &[f64], cost: &Array2<f64>, alpha: f64) -> Result<(TransportPlan, f64)> {
    let (ta, tb) = validate_problem(a, b, cost, alpha)?;
    let alpha = alpha.min(ta.min(tb));
    let (m, n) = cost.dim();
    let cmax = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let prohibitive = 2.0 * (m + n) as f64 * cmax + 1.0;

    let mut extended = Array2::<f64>::zeros((m + 1, n + 1));
    extended.slice_mut(ndarray::s![..m, ..n]).assign(cost);
    extended[[m, n]] = prohibitive;
    let mut supply = a.to_vec();
    supply.push((tb - alpha).max(0.0));
    let mut demand = b.to_vec();
    demand.push((ta - alpha).max(0.0));

    let sol = flow::solve_balanced(&supply, &demand, &extended)?;
    let dummy_flow = sol.flow[[m, n]];
    if dummy_flow > 1e-9 * (ta + tb).max(1.0) {
        return Err(Error::Solver(format!("dummy-dummy cell carries mass {dummy_flow:e}")));
    }
    let matrix = sol.flow.slice(ndarray::s![..m, ..n]).to_owned();
    let tol = PLAN_TOLERANCE * (ta + tb).max(1.0);
    let plan = TransportPlan::new(matrix, a.to_vec(), b.to_vec(), alpha, tol)?;
    let value = plan.cost(cost);
    Ok((plan, value))
}

/// `Σ C_ij Π_ij` of the plan returned by the chosen solver.
pub fn pw_distance(a: &[f64], b: &[f64], cost: &Array2<f64>, alpha: f64, method: Method) -> Result<f64> {
    match method {
        Method::Exact => exact_partial_ot(a, b, cost, alpha).map(|(_, v)| v),
        Method::Entropic(cfg) => entropic_partial_ot(a, b, cost, alpha, &cfg).map(|r| r.plan.cost(cost)),
    }
}
