//! Solver output: best prices, objective, cost decomposition, metrics and trace.

use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{Matrix, PriceMatrix};
use crate::pricing::PricingMode;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub average_discount: f64,
    pub excess_demand: f64,
    pub traffic_variance: f64,
    pub total_user_payoff: f64,
}

/// `H = excess_cost - revenue`. The total cost `excess_cost + discount_loss`
/// equals `H + p0 * sum alpha * x_aft` and is never negative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostBreakdown {
    /// `sum alpha * gamma * max(x_aft - C, 0)`.
    pub excess_cost: f64,
    /// `sum alpha * p * x_aft`.
    pub revenue: f64,
    /// `sum alpha * (p0 - p) * x_aft`.
    pub discount_loss: f64,
}

impl CostBreakdown {
    pub fn total_cost(&self) -> f64 {
        self.excess_cost + self.discount_loss
    }

    pub fn objective(&self) -> f64 {
        self.excess_cost - self.revenue
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceEntry {
    pub iteration: usize,
    /// Value of the point examined at this iteration.
    pub value: f64,
    /// Best value seen so far.
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpgStage {
    pub mu: f64,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    pub best_smoothed_objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum Diagnostics {
    None,
    Spg {
        stages: Vec<SpgStage>,
        /// Projected-gradient norm of the smoothed objective at the reported point,
        /// for the last smoothing level.
        final_projected_gradient_norm: f64,
    },
    Bcd {
        tau: f64,
        escalations: usize,
        rounds: usize,
        complementarity_residual: f64,
        tolerance_met: bool,
        /// Penalty objective after every block solve, one sequence per penalty weight.
        penalty_trace: Vec<Vec<f64>>,
        /// Operator cost of the certified equilibrium the solver selected.
        equilibrium_objective: f64,
    },
    Dycors {
        evaluations: usize,
        regularized_fits: usize,
        final_radius: f64,
        /// Set when some user type is linear, which makes the objective discontinuous.
        discontinuous_objective: bool,
    },
    Grid {
        step: f64,
        points: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    pub solver: String,
    pub mode: PricingMode,
    pub prices: PriceMatrix,
    /// `H` at `prices`.
    pub objective: f64,
    pub load: Matrix,
    pub costs: CostBreakdown,
    pub metrics: Metrics,
    pub trace: Vec<TraceEntry>,
    pub seed: Option<u64>,
    /// Filled in by callers that can measure time.
    pub wall_time_secs: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// Records values and the running minimum.
#[derive(Debug, Clone, Default)]
pub(crate) struct Trace {
    entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn push(&mut self, value: f64) {
        let incumbent = self.entries.last().map_or(value, |e| e.incumbent.min(value));
        self.entries.push(TraceEntry {
            iteration: self.entries.len(),
            value,
            incumbent,
        });
    }

    pub fn into_entries(self) -> Vec<TraceEntry> {
        self.entries
    }
}
