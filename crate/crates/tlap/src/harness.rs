//! Solver orchestration and report assembly.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tlap_core::dycors::{dycors_solve_with, Objective};
use tlap_core::objective::{build_report, initial_traffic_variance};
use tlap_core::{
    evaluate, evaluate_operator_preferred, penalty_escalate_mode, spg_solve_mode, Diagnostics, EvalOptions, Error,
    Evaluation, PriceMatrix, PricingMode, Scenario, SolveReport,
};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::oracle::oracle_grid_with;
use crate::scenario_file::load_scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Spg,
    Bcd,
    Dycors,
    OracleGrid,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Spg => "spg",
            SolverKind::Bcd => "bcd",
            SolverKind::Dycors => "dycors",
            SolverKind::OracleGrid => "oracle-grid",
        }
    }
}

/// How linear users' ties were resolved when the report's `H` was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluationRule {
    Lexicographic,
    OperatorPreferred,
}

impl EvaluationRule {
    pub fn evaluate(self, s: &Scenario, p: &PriceMatrix) -> Result<Evaluation> {
        let opts = EvalOptions::default();
        Ok(match self {
            EvaluationRule::Lexicographic => evaluate(s, p, &opts)?,
            EvaluationRule::OperatorPreferred => evaluate_operator_preferred(s, p, opts.eps)?,
        })
    }

    fn for_run(s: &Scenario, solver: SolverKind, mode: PricingMode) -> Self {
        let linear = s.user_types.iter().any(|u| u.utility.is_linear());
        match (solver, mode) {
            (_, PricingMode::Flat) => EvaluationRule::Lexicographic,
            (SolverKind::Bcd, _) => EvaluationRule::OperatorPreferred,
            (SolverKind::OracleGrid, _) if linear => EvaluationRule::OperatorPreferred,
            _ => EvaluationRule::Lexicographic,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub scenario: PathBuf,
    pub solver: SolverKind,
    pub mode: PricingMode,
    pub config: RunConfig,
    pub out: Option<PathBuf>,
    /// Overrides the DYCORS seed of the config.
    pub seed: Option<u64>,
}

/// Comparison against the flat benchmark `p = p0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub objective_flat: f64,
    pub objective: f64,
    /// `objective_flat - objective`.
    pub objective_decrease: f64,
    /// Excess cost plus discount loss.
    pub total_cost_flat: f64,
    pub total_cost: f64,
    /// `(total_cost_flat - total_cost) / total_cost_flat`, 0 when the flat total cost is 0.
    pub cost_reduction: f64,
    pub user_payoff_flat: f64,
    pub user_payoff: f64,
    pub user_payoff_change: f64,
    pub traffic_variance_initial: f64,
    pub traffic_variance: f64,
    pub average_discount: f64,
    pub excess_demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub solver: SolverKind,
    pub evaluation: EvaluationRule,
    pub summary: Summary,
    pub report: SolveReport,
}

impl ReportFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        std::fs::write(path, text + "\n").map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn check_compatible(s: &Scenario, solver: SolverKind) -> Result<()> {
    let offender = |want: fn(&tlap_core::Utility) -> bool| s.user_types.iter().position(|u| !want(&u.utility));
    let (need, hint, bad) = match solver {
        SolverKind::Spg => ("logarithmic", "use bcd for linear utilities or dycors for any mix", offender(|u| u.is_logarithmic())),
        SolverKind::Bcd => ("linear", "use spg for logarithmic utilities or dycors for any mix", offender(|u| u.is_linear())),
        _ => return Ok(()),
    };
    match bad {
        None => Ok(()),
        Some(a) => Err(HarnessError::Incompatible(format!(
            "{} needs {need} utilities but user type {} is {}; {hint}",
            solver.name(),
            a + 1,
            s.user_types[a].utility.kind()
        ))),
    }
}

struct ParallelObjective<'a> {
    s: &'a Scenario,
    mode: PricingMode,
}

impl Objective for ParallelObjective<'_> {
    fn evaluate(&self, x: &[f64]) -> tlap_core::Result<f64> {
        Ok(evaluate(self.s, &self.mode.expand(self.s, x)?, &EvalOptions::default())?.objective)
    }

    fn evaluate_batch(&self, xs: &[Vec<f64>]) -> tlap_core::Result<Vec<f64>> {
        xs.par_iter().map(|x| Objective::evaluate(self, x)).collect()
    }
}

/// Runs one solver on an in-memory scenario.
pub fn solve(s: &Scenario, solver: SolverKind, mode: PricingMode, config: &RunConfig, seed: Option<u64>) -> Result<SolveReport> {
    check_compatible(s, solver)?;
    if mode == PricingMode::Flat {
        let flat = PriceMatrix::flat(s);
        let e = evaluate(s, &flat, &EvalOptions::default())?;
        let trace = vec![tlap_core::TraceEntry {
            iteration: 0,
            value: e.objective,
            incumbent: e.objective,
        }];
        return Ok(build_report(s, solver.name(), mode, flat, e, trace, seed, Diagnostics::None)?);
    }
    Ok(match solver {
        SolverKind::Spg => spg_solve_mode(s, &PriceMatrix::flat(s), mode, &config.spg)?,
        SolverKind::Bcd => penalty_escalate_mode(s, mode, &config.bcd)?,
        SolverKind::Dycors => {
            let mut dycors = config.dycors.clone();
            if let Some(seed) = seed {
                dycors.seed = seed;
            }
            dycors_solve_with(s, mode, &dycors, &ParallelObjective { s, mode })?
        }
        SolverKind::OracleGrid => {
            let g = oracle_grid_with(s, mode, &config.oracle)?;
            let e = EvaluationRule::for_run(s, solver, mode).evaluate(s, &g.prices)?;
            let trace = vec![tlap_core::TraceEntry {
                iteration: 0,
                value: e.objective,
                incumbent: e.objective,
            }];
            let diagnostics = Diagnostics::Grid {
                step: config.oracle.step,
                points: g.points,
            };
            build_report(s, solver.name(), mode, g.prices, e, trace, None, diagnostics)?
        }
    })
}

/// Compares `report` with the flat benchmark under the same evaluation rule.
pub fn summarize(s: &Scenario, report: &SolveReport, rule: EvaluationRule) -> Result<Summary> {
    let flat = PriceMatrix::flat(s);
    let e = rule.evaluate(s, &flat)?;
    let flat_report = build_report(s, "flat", PricingMode::Flat, flat, e, Vec::new(), None, Diagnostics::None)?;
    let total_cost_flat = flat_report.costs.total_cost();
    let total_cost = report.costs.total_cost();
    Ok(Summary {
        objective_flat: flat_report.objective,
        objective: report.objective,
        objective_decrease: flat_report.objective - report.objective,
        total_cost_flat,
        total_cost,
        cost_reduction: if total_cost_flat > 0.0 { (total_cost_flat - total_cost) / total_cost_flat } else { 0.0 },
        user_payoff_flat: flat_report.metrics.total_user_payoff,
        user_payoff: report.metrics.total_user_payoff,
        user_payoff_change: report.metrics.total_user_payoff - flat_report.metrics.total_user_payoff,
        traffic_variance_initial: initial_traffic_variance(s),
        traffic_variance: report.metrics.traffic_variance,
        average_discount: report.metrics.average_discount,
        excess_demand: report.metrics.excess_demand,
    })
}

/// Solves, times and summarizes an in-memory scenario.
pub fn solve_and_summarize(
    s: &Scenario,
    solver: SolverKind,
    mode: PricingMode,
    config: &RunConfig,
    seed: Option<u64>,
) -> Result<ReportFile> {
    let start = Instant::now();
    let mut report = solve(s, solver, mode, config, seed)?;
    report.wall_time_secs = Some(start.elapsed().as_secs_f64());
    let evaluation = EvaluationRule::for_run(s, solver, mode);
    Ok(ReportFile {
        scenario: None,
        solver,
        evaluation,
        summary: summarize(s, &report, evaluation)?,
        report,
    })
}

/// Loads the scenario, solves, writes the report when an output path is set.
/// A BCD run that misses its complementarity tolerance still writes its report
/// before the error is returned.
pub fn run(spec: &RunSpec) -> Result<ReportFile> {
    let s = load_scenario(&spec.scenario)?;
    let result = solve_and_summarize(&s, spec.solver, spec.mode, &spec.config, spec.seed);
    let (file, error) = match result {
        Ok(file) => (file, None),
        Err(HarnessError::Solver(Error::ToleranceNotMet { residual, report })) => {
            let evaluation = EvaluationRule::for_run(&s, spec.solver, spec.mode);
            let file = ReportFile {
                scenario: None,
                solver: spec.solver,
                evaluation,
                summary: summarize(&s, &report, evaluation)?,
                report: (*report).clone(),
            };
            (file, Some(HarnessError::Solver(Error::ToleranceNotMet { residual, report })))
        }
        Err(e) => return Err(e),
    };
    let file = ReportFile {
        scenario: Some(spec.scenario.display().to_string()),
        ..file
    };
    if let Some(out) = &spec.out {
        file.write(out)?;
    }
    match error {
        Some(e) => Err(e),
        None => Ok(file),
    }
}

/// Runs `solver` under time-location, time-only and flat pricing.
pub fn compare_modes(s: &Scenario, solver: SolverKind, config: &RunConfig, seed: Option<u64>) -> Result<Vec<ReportFile>> {
    [PricingMode::TimeLocation, PricingMode::TimeOnly, PricingMode::Flat]
        .into_iter()
        .map(|mode| solve_and_summarize(s, solver, mode, config, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tlap_core::{LocalMobility, Matrix, UserType, Utility};

    fn two_slot(utility: Utility) -> Scenario {
        let mut beta = LocalMobility::zeros(2, 1, 2);
        beta.set(0, 0, 1, 0, 1.0);
        Scenario {
            horizon: 2,
            locations: 1,
            interval: 2,
            capacity: 1.0,
            gamma: 1.0,
            base_price: 1.0,
            alpha: Matrix::filled(2, 1, 1.0),
            user_types: vec![UserType {
                utility,
                delta: 1.0,
                beta,
                initial_demand: Matrix::filled(2, 1, 1.0),
            }],
        }
    }

    #[test]
    fn incompatible_solvers_explain_themselves() {
        let s = two_slot(Utility::Linear { rho: 1.0 });
        let err = solve(&s, SolverKind::Spg, PricingMode::TimeLocation, &RunConfig::default(), None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("user type 1 is linear"), "{err}");
        let s = two_slot(Utility::Logarithmic { k: 1.0 });
        assert!(solve(&s, SolverKind::Bcd, PricingMode::TimeLocation, &RunConfig::default(), None).is_err());
    }

    #[test]
    fn flat_mode_reports_the_benchmark() {
        let s = two_slot(Utility::Logarithmic { k: 1.0 });
        let f = solve_and_summarize(&s, SolverKind::Dycors, PricingMode::Flat, &RunConfig::default(), Some(1)).unwrap();
        let (h, _) = tlap_core::evaluate_H(&s, &PriceMatrix::flat(&s), tlap_core::TieBreak::Lexicographic).unwrap();
        assert_eq!(f.report.objective, h);
        assert_eq!(f.summary.average_discount, 0.0);
        assert_eq!(f.summary.cost_reduction, 0.0);
        assert_eq!(f.summary.user_payoff_change, 0.0);
    }

    #[test]
    fn linear_oracle_reaches_minus_two() {
        let s = two_slot(Utility::Linear { rho: 1.0 });
        let f = solve_and_summarize(&s, SolverKind::OracleGrid, PricingMode::TimeLocation, &RunConfig::default(), None).unwrap();
        assert!((f.report.objective + 2.0).abs() < 1e-9);
        assert_eq!(f.evaluation, EvaluationRule::OperatorPreferred);
    }
}
