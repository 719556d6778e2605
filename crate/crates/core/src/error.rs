use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::model::Violation;
use crate::report::SolveReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("scenario failed validation with {} violation(s)", .0.len())]
    InvalidScenario(Vec<Violation>),

    #[error("user type {user_type} does not have a logarithmic or general concave utility")]
    NonConcaveUtility { user_type: usize },

    #[error("user type {user_type} does not have a linear utility")]
    NonLinearUtility { user_type: usize },

    #[error("user type {0} does not exist")]
    InvalidUserType(usize),

    #[error("origin (slot {slot}, location {location}) is outside the scenario (1-based)")]
    InvalidOrigin { slot: usize, location: usize },

    #[error("price {value} at (slot {slot}, location {location}) is outside [0, {base_price}]")]
    InvalidPrice {
        slot: usize,
        location: usize,
        value: f64,
        base_price: f64,
    },

    #[error("expected a {expected_rows}x{expected_cols} matrix, got {rows}x{cols}")]
    DimensionMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("multiplier residual has no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("marginal utility target {target} is outside the utility's domain")]
    DomainError { target: f64 },

    #[error("no schedule supplied for origin (user type {user_type}, slot {slot}, location {location})")]
    MissingSchedule {
        user_type: usize,
        slot: usize,
        location: usize,
    },

    #[error("implicit multiplier system is singular at origin (slot {slot}, location {location})")]
    SingularImplicitSystem { slot: usize, location: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("solver is incompatible with the scenario: {0}")]
    Incompatible(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("linear program is infeasible")]
    LpInfeasible,

    #[error("linear program is unbounded")]
    LpUnbounded,

    #[error("simplex stalled after {0} pivots")]
    LpStalled(usize),

    #[error("complementarity residual {residual:e} above tolerance after all penalty escalations")]
    ToleranceNotMet {
        residual: f64,
        report: Box<SolveReport>,
    },
}
