//! Linear-utility operator problem: complementarity penalty with block
//! coordinate descent over two LP blocks, `{p, lambda}` and `{x, x_aft}`.
//!
//! Schedules are carried as beta-weighted masses `y = beta * x` (own cell:
//! `y = x`), so conservation reads `sum y = x_ini` and the load of a cell is
//! the plain sum of the masses routed to it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem};
use crate::model::{PriceMatrix, Scenario, Utility};
use crate::objective::{build_report, evaluate_operator_preferred, excess_cost};
use crate::pricing::PricingMode;
use crate::report::{Diagnostics, SolveReport, Trace};
use crate::scheduler::{window_cells, DEFAULT_EPS};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BcdConfig {
    /// Initial penalty weight; `None` uses `gamma / 10`. Large starting weights
    /// pin the iteration to the flat, no-shift start.
    pub tau0: Option<f64>,
    pub factor: f64,
    pub comp_tol: f64,
    pub max_escalations: usize,
    /// Relative change of the schedule below which a BCD run stops.
    pub eps0: f64,
    /// Round cap per BCD run; one round is one solve of each block.
    pub max_rounds: usize,
}

impl Default for BcdConfig {
    fn default() -> Self {
        Self {
            tau0: None,
            factor: 10.0,
            comp_tol: 1e-6,
            max_escalations: 6,
            eps0: 1e-6,
            max_rounds: 500,
        }
    }
}

impl BcdConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(format!("bcd: {msg}")));
        if let Some(tau) = self.tau0 {
            if !(tau > 0.0 && tau.is_finite()) {
                return fail("tau0 must be positive");
            }
        }
        if !(self.factor > 1.0) {
            return fail("factor must exceed 1");
        }
        if !(self.comp_tol >= 0.0) || !(self.eps0 > 0.0) {
            return fail("tolerances must be positive");
        }
        if self.max_rounds == 0 {
            return fail("max_rounds must be at least 1");
        }
        Ok(())
    }

    pub fn initial_tau(&self, s: &Scenario) -> f64 {
        self.tau0.unwrap_or(0.1 * s.gamma)
    }
}

#[derive(Debug, Clone)]
struct Cell {
    /// Flat index `t * L + l` of the priced cell.
    price_cell: usize,
    weight: f64,
    future_index: Option<usize>,
    /// `delta^d * rho`.
    value: f64,
}

#[derive(Debug, Clone)]
struct Origin {
    user_type: usize,
    slot: usize,
    location: usize,
    demand: f64,
    cells: Vec<Cell>,
    /// Position of this origin's first mass in the flattened mass vector.
    offset: usize,
}

/// Index structure of the penalty problem.
#[derive(Debug, Clone)]
struct Layout {
    origins: Vec<Origin>,
    masses: usize,
}

fn layout(s: &Scenario) -> Result<Layout> {
    let mut origins = Vec::new();
    let mut masses = 0;
    for (a, ut) in s.user_types.iter().enumerate() {
        let Utility::Linear { rho } = ut.utility else {
            return Err(Error::Incompatible(format!(
                "the penalty method requires linear utilities; user type {} is {}",
                a + 1,
                ut.utility.kind()
            )));
        };
        for t in 0..s.horizon {
            for l in 0..s.locations {
                let demand = ut.initial_demand[(t, l)];
                if demand <= 0.0 {
                    continue;
                }
                let cells: Vec<Cell> = window_cells(s, ut, t, l)
                    .iter()
                    .map(|c| Cell {
                        price_cell: c.slot * s.locations + c.location,
                        weight: c.weight,
                        future_index: c.future_index,
                        value: c.discount * rho,
                    })
                    .collect();
                let offset = masses;
                masses += cells.len();
                origins.push(Origin {
                    user_type: a,
                    slot: t,
                    location: l,
                    demand,
                    cells,
                    offset,
                });
            }
        }
    }
    Ok(Layout { origins, masses })
}

/// Iterate of the penalty problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyState {
    pub tau: f64,
    /// Prices, flat index `t * L + l`.
    pub prices: Vec<f64>,
    /// One multiplier per origin with positive demand.
    pub multipliers: Vec<f64>,
    /// Beta-weighted masses per origin and window cell.
    pub masses: Vec<f64>,
    pub penalty: f64,
    /// Sum of the complementarity terms.
    pub residual: f64,
}

struct Problem<'a> {
    s: &'a Scenario,
    mode: PricingMode,
    layout: Layout,
}

impl Problem<'_> {
    fn loads(&self, masses: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.s.cells()];
        for o in &self.layout.origins {
            for (k, c) in o.cells.iter().enumerate() {
                x[c.price_cell] += masses[o.offset + k];
            }
        }
        x
    }

    fn operator_cost(&self, prices: &[f64], masses: &[f64]) -> f64 {
        let s = self.s;
        self.loads(masses)
            .iter()
            .enumerate()
            .map(|(i, &x)| s.alpha.as_slice()[i] * (excess_cost(x, s.capacity, s.gamma) - prices[i] * x))
            .sum()
    }

    fn residual(&self, prices: &[f64], multipliers: &[f64], masses: &[f64]) -> f64 {
        let mut r = 0.0;
        for (o, &lambda) in self.layout.origins.iter().zip(multipliers) {
            for (k, c) in o.cells.iter().enumerate() {
                r += masses[o.offset + k] * (prices[c.price_cell] + lambda - c.value);
            }
        }
        r
    }

    fn score(&self, st: &mut PenaltyState) {
        st.residual = self.residual(&st.prices, &st.multipliers, &st.masses);
        st.penalty = self.operator_cost(&st.prices, &st.masses) + st.tau * st.residual;
    }

    /// Flat prices, no shifting, smallest dual-feasible multipliers.
    fn initial_state(&self, tau: f64) -> PenaltyState {
        let prices = vec![self.s.base_price; self.s.cells()];
        let mut masses = vec![0.0; self.layout.masses];
        let multipliers = self
            .layout
            .origins
            .iter()
            .map(|o| {
                masses[o.offset] = o.demand;
                o.cells
                    .iter()
                    .map(|c| c.value - prices[c.price_cell])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let mut st = PenaltyState {
            tau,
            prices,
            multipliers,
            masses,
            penalty: 0.0,
            residual: 0.0,
        };
        self.score(&mut st);
        st
    }

    fn solve_price_block(&self, st: &PenaltyState) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = self.s;
        let n_cells = s.cells();
        let loads = self.loads(&st.masses);
        let mut lp = LpProblem::new(0);
        for i in 0..n_cells {
            lp.add_var(-s.alpha.as_slice()[i] * loads[i], 0.0, s.base_price);
        }
        match self.mode {
            PricingMode::TimeLocation => {}
            PricingMode::TimeOnly => {
                for t in 0..s.horizon {
                    for l in 1..s.locations {
                        let first = t * s.locations;
                        lp.add_eq(vec![(first + l, 1.0), (first, -1.0)], 0.0);
                    }
                }
            }
            PricingMode::Flat => {
                for i in 0..n_cells {
                    lp.set_bounds(i, s.base_price, s.base_price);
                }
            }
        }
        for o in &self.layout.origins {
            let lambda = lp.add_var(st.tau * o.demand, f64::NEG_INFINITY, f64::INFINITY);
            for (k, c) in o.cells.iter().enumerate() {
                lp.objective[c.price_cell] += st.tau * st.masses[o.offset + k];
                lp.add_ge(vec![(c.price_cell, 1.0), (lambda, 1.0)], c.value);
            }
        }
        let (z, _) = solve_lp(&lp)?.into_optimal()?;
        Ok((z[..n_cells].to_vec(), z[n_cells..].to_vec()))
    }

    fn solve_mass_block(&self, st: &PenaltyState) -> Result<Vec<f64>> {
        let s = self.s;
        let mut lp = LpProblem::new(self.layout.masses);
        let mut inflow: Vec<Vec<usize>> = vec![Vec::new(); s.cells()];
        for (o, &lambda) in self.layout.origins.iter().zip(&st.multipliers) {
            for (k, c) in o.cells.iter().enumerate() {
                let j = o.offset + k;
                let price = st.prices[c.price_cell];
                lp.objective[j] = -s.alpha.as_slice()[c.price_cell] * price + st.tau * (price + lambda - c.value);
                inflow[c.price_cell].push(j);
            }
            lp.add_eq((o.offset..o.offset + o.cells.len()).map(|j| (j, 1.0)).collect(), o.demand);
        }
        for (i, vars) in inflow.iter().enumerate() {
            let alpha = s.alpha.as_slice()[i];
            if alpha == 0.0 || vars.is_empty() {
                continue;
            }
            let e = lp.add_var(alpha * s.gamma, 0.0, f64::INFINITY);
            let mut terms = vec![(e, 1.0)];
            terms.extend(vars.iter().map(|&j| (j, -1.0)));
            lp.add_ge(terms, -s.capacity);
        }
        let (z, _) = solve_lp(&lp)?.into_optimal()?;
        Ok(z[..self.layout.masses].iter().map(|v| v.max(0.0)).collect())
    }

    /// Alternates the two block solves until the schedule settles. Every
    /// accepted block solve is recorded in `penalties`.
    fn run(&self, st: &mut PenaltyState, eps0: f64, max_rounds: usize, penalties: &mut Vec<f64>, costs: &mut Trace) -> Result<usize> {
        let mut rounds = 0;
        while rounds < max_rounds {
            rounds += 1;
            let (prices, multipliers) = self.solve_price_block(st)?;
            let mut trial = PenaltyState {
                prices,
                multipliers,
                ..st.clone()
            };
            self.score(&mut trial);
            // LP round-off may leave a solve marginally worse than its start
            if trial.penalty <= st.penalty {
                *st = trial;
            }
            penalties.push(st.penalty);

            let masses = self.solve_mass_block(st)?;
            let mut trial = PenaltyState { masses, ..st.clone() };
            self.score(&mut trial);
            let previous = st.masses.clone();
            if trial.penalty <= st.penalty {
                *st = trial;
            }
            penalties.push(st.penalty);
            costs.push(self.operator_cost(&st.prices, &st.masses));

            let scale = previous.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let change = st
                .masses
                .iter()
                .zip(&previous)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if change <= eps0 * scale {
                break;
            }
        }
        Ok(rounds)
    }

    fn price_matrix(&self, prices: &[f64]) -> Result<PriceMatrix> {
        PriceMatrix::projected(self.s, prices)
    }
}

struct Outcome {
    state: PenaltyState,
    escalations: usize,
    rounds: usize,
    penalties: Vec<Vec<f64>>,
    costs: Trace,
}

fn escalate(problem: &Problem<'_>, config: &BcdConfig) -> Result<Outcome> {
    let mut state = problem.initial_state(config.initial_tau(problem.s));
    let mut penalties = vec![vec![state.penalty]];
    let mut costs = Trace::default();
    costs.push(problem.operator_cost(&state.prices, &state.masses));
    let mut rounds = 0;
    let mut escalations = 0;
    loop {
        let level = penalties.last_mut().expect("one sequence per penalty level");
        rounds += problem.run(&mut state, config.eps0, config.max_rounds, level, &mut costs)?;
        if state.residual <= config.comp_tol || escalations >= config.max_escalations {
            break;
        }
        escalations += 1;
        state.tau *= config.factor;
        problem.score(&mut state);
        penalties.push(vec![state.penalty]);
    }
    Ok(Outcome {
        state,
        escalations,
        rounds,
        penalties,
        costs,
    })
}

fn report(problem: &Problem<'_>, outcome: Outcome, tolerance_met: bool) -> Result<SolveReport> {
    let s = problem.s;
    let st = &outcome.state;
    let equilibrium_objective = problem.operator_cost(&st.prices, &st.masses);
    let flat = PriceMatrix::flat(s);
    let mut best = (flat.clone(), evaluate_operator_preferred(s, &flat, DEFAULT_EPS)?);
    if tolerance_met {
        let prices = problem.price_matrix(&st.prices)?;
        let e = evaluate_operator_preferred(s, &prices, DEFAULT_EPS)?;
        if e.objective <= best.1.objective {
            best = (prices, e);
        }
    }
    build_report(
        s,
        "bcd",
        problem.mode,
        best.0,
        best.1,
        outcome.costs.into_entries(),
        None,
        Diagnostics::Bcd {
            tau: st.tau,
            escalations: outcome.escalations,
            rounds: outcome.rounds,
            complementarity_residual: st.residual,
            tolerance_met,
            penalty_trace: outcome.penalties,
            equilibrium_objective,
        },
    )
}

/// One BCD run at fixed `tau` from the flat, no-shift start.
pub fn bcd_solve(s: &Scenario, tau: f64, eps0: f64, max_rounds: usize) -> Result<SolveReport> {
    let config = BcdConfig {
        tau0: Some(tau),
        eps0,
        max_rounds,
        max_escalations: 0,
        ..BcdConfig::default()
    };
    config.validate()?;
    let problem = Problem {
        s,
        mode: PricingMode::TimeLocation,
        layout: layout(s)?,
    };
    let outcome = escalate(&problem, &config)?;
    let met = outcome.state.residual <= config.comp_tol;
    report(&problem, outcome, met)
}

/// BCD with geometric penalty escalation until the complementarity residual
/// is at most `comp_tol`. Fails with [`Error::ToleranceNotMet`], carrying the
/// report, when the escalation budget runs out first.
pub fn penalty_escalate(s: &Scenario, config: &BcdConfig) -> Result<SolveReport> {
    penalty_escalate_mode(s, PricingMode::TimeLocation, config)
}

/// [`penalty_escalate`] with prices restricted to the decision set of `mode`.
pub fn penalty_escalate_mode(s: &Scenario, mode: PricingMode, config: &BcdConfig) -> Result<SolveReport> {
    config.validate()?;
    let problem = Problem { s, mode, layout: layout(s)? };
    let outcome = escalate(&problem, config)?;
    let residual = outcome.state.residual;
    let met = residual <= config.comp_tol;
    let report = report(&problem, outcome, met)?;
    if met {
        Ok(report)
    } else {
        Err(Error::ToleranceNotMet {
            residual,
            report: alloc::boxed::Box::new(report),
        })
    }
}

/// Final iterate of the escalation loop, exposed for certification checks.
pub fn penalty_state(s: &Scenario, config: &BcdConfig) -> Result<(PenaltyState, Vec<EquilibriumSchedule>)> {
    config.validate()?;
    let problem = Problem {
        s,
        mode: PricingMode::TimeLocation,
        layout: layout(s)?,
    };
    let outcome = escalate(&problem, config)?;
    let schedules = problem
        .layout
        .origins
        .iter()
        .zip(&outcome.state.multipliers)
        .map(|(o, &lambda)| {
            let window = s.window(o.slot);
            let mut future = vec![0.0; window.future_len(s.locations)];
            let mut own = 0.0;
            for (k, c) in o.cells.iter().enumerate() {
                let x = outcome.state.masses[o.offset + k] / c.weight;
                match c.future_index {
                    None => own = x,
                    Some(i) => future[i] = x,
                }
            }
            EquilibriumSchedule {
                user_type: o.user_type,
                slot: o.slot,
                location: o.location,
                own,
                future,
                multiplier: lambda,
            }
        })
        .collect();
    Ok((outcome.state, schedules))
}

/// Raw schedule of one origin at a BCD iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSchedule {
    pub user_type: usize,
    pub slot: usize,
    pub location: usize,
    pub own: f64,
    pub future: Vec<f64>,
    pub multiplier: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::discontinuity_example;

    #[test]
    fn discontinuity_example_reaches_minus_two() {
        let s = discontinuity_example();
        let r = penalty_escalate(&s, &BcdConfig::default()).unwrap();
        assert!((r.objective + 2.0).abs() <= 1e-6, "{}", r.objective);
        let Diagnostics::Bcd { complementarity_residual, penalty_trace, .. } = &r.diagnostics else {
            panic!()
        };
        assert!(*complementarity_residual <= 1e-6);
        assert!(penalty_trace.iter().all(|level| level.windows(2).all(|w| w[1] <= w[0])));
    }

    #[test]
    fn rejects_log_utilities() {
        let mut s = discontinuity_example();
        s.user_types[0].utility = Utility::Logarithmic { k: 1.0 };
        assert!(matches!(penalty_escalate(&s, &BcdConfig::default()), Err(Error::Incompatible(_))));
    }

    #[test]
    fn ample_capacity_without_patience_needs_no_escalation() {
        let mut s = discontinuity_example();
        s.user_types[0].delta = 0.5;
        s.capacity = 10.0;
        let r = penalty_escalate(&s, &BcdConfig::default()).unwrap();
        let Diagnostics::Bcd { escalations, complementarity_residual, .. } = r.diagnostics else {
            panic!()
        };
        assert_eq!(escalations, 0);
        assert_eq!(complementarity_residual, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(BcdConfig { factor: 1.0, ..BcdConfig::default() }.validate().is_err());
        assert!(BcdConfig { tau0: Some(0.0), ..BcdConfig::default() }.validate().is_err());
        let s = discontinuity_example();
        assert_eq!(BcdConfig::default().initial_tau(&s), 0.1);
    }
}
