//! Two-stage time and location aware mobile data pricing.
//!
//! Users schedule their demand over a short window in response to announced
//! prices; the operator chooses discounts to minimize excess-capacity cost
//! minus revenue. Three operator-side solvers are provided: smoothing with a
//! spectral projected gradient method (logarithmic utilities), a penalty
//! method with block coordinate descent (linear utilities), and a surrogate
//! assisted coordinate search for any utility mix.
#![no_std]

extern crate alloc;

pub mod bcd;
pub mod dycors;
pub mod error;
pub mod lp;
pub mod model;
pub mod objective;
pub mod pricing;
pub mod report;
pub mod scheduler;
pub mod smoothing;
pub mod spg;

pub use error::{Error, Result};
pub use model::{
    ensure_valid, validate_scenario, ConcaveUtility, LocalMobility, LogShape, Matrix, PriceMatrix, Scenario,
    SchedulingWindow, SquareRoot, UserType, Utility, Violation,
};
pub use objective::{evaluate, evaluate_H, evaluate_operator_preferred, AggregateLoad, EvalOptions, Evaluation};
pub use pricing::PricingMode;
pub use report::{CostBreakdown, Diagnostics, Metrics, SolveReport, TraceEntry};
pub use scheduler::{Schedule, TieBreak};
pub use bcd::{bcd_solve, penalty_escalate, penalty_escalate_mode, BcdConfig};
pub use dycors::{dycors_solve, dycors_solve_mode, DycorsConfig};
pub use spg::{spg_solve, spg_solve_mode, SpgConfig};
