//! Operator side: aggregate post-scheduling load, cost `H(p)`, and metrics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem};
use crate::model::{Matrix, PriceMatrix, Scenario, Utility};
use crate::pricing::PricingMode;
use crate::report::{CostBreakdown, Diagnostics, Metrics, SolveReport, TraceEntry};
use crate::scheduler::{
    linear_maximizers, schedule_origin, user_payoff, window_cells, Schedule, TieBreak, DEFAULT_EPS,
};

/// Post-scheduling traffic `x_aft(t, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateLoad {
    pub x_aft: Matrix,
}

impl AggregateLoad {
    /// Load without any shifting: the sum of every type's initial demand.
    pub fn initial(s: &Scenario) -> Self {
        Self {
            x_aft: s.total_initial_demand(),
        }
    }
}

/// `gamma * max(x - C, 0)`.
pub fn excess_cost(x: f64, capacity: f64, gamma: f64) -> f64 {
    gamma * (x - capacity).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Multiplier bisection tolerance.
    pub eps: f64,
    pub tie_break: TieBreak,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            tie_break: TieBreak::Lexicographic,
        }
    }
}

/// Everything computed while evaluating `H` at one price matrix.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    pub load: AggregateLoad,
    pub schedules: Vec<Schedule>,
}

/// Schedules every origin with positive demand; user types ascending, then slots, then locations.
pub fn schedule_all(s: &Scenario, p: &PriceMatrix, opts: &EvalOptions) -> Result<Vec<Schedule>> {
    let mut out = Vec::new();
    for (a, ut) in s.user_types.iter().enumerate() {
        for t in 0..s.horizon {
            for l in 0..s.locations {
                if ut.initial_demand[(t, l)] > 0.0 {
                    out.push(schedule_origin(s, a, t, l, p, opts.eps, opts.tie_break)?);
                }
            }
        }
    }
    Ok(out)
}

fn origin_key(s: &Scenario, a: usize, t: usize, l: usize) -> usize {
    (a * s.horizon + t) * s.locations + l
}

/// Sums own-slot amounts and the beta-weighted amounts shifted in from earlier origins.
pub fn aggregate_load(s: &Scenario, schedules: &[Schedule]) -> Result<AggregateLoad> {
    let mut index: Vec<Option<usize>> = vec![None; s.user_types.len() * s.cells()];
    for (i, x) in schedules.iter().enumerate() {
        s.user_type(x.user_type)?;
        s.check_origin(x.slot, x.location)?;
        index[origin_key(s, x.user_type, x.slot, x.location)] = Some(i);
    }
    for (a, ut) in s.user_types.iter().enumerate() {
        for t in 0..s.horizon {
            for l in 0..s.locations {
                if ut.initial_demand[(t, l)] > 0.0 && index[origin_key(s, a, t, l)].is_none() {
                    return Err(Error::MissingSchedule {
                        user_type: a,
                        slot: t + 1,
                        location: l + 1,
                    });
                }
            }
        }
    }

    let mut x_aft = Matrix::zeros(s.horizon, s.locations);
    for t in 0..s.horizon {
        let first = (t + 1).saturating_sub(s.interval);
        for l in 0..s.locations {
            let mut total = 0.0;
            for (a, ut) in s.user_types.iter().enumerate() {
                if let Some(i) = index[origin_key(s, a, t, l)] {
                    total += schedules[i].own;
                }
                for tpp in first..t {
                    for lpp in 0..s.locations {
                        let beta = ut.beta.get(tpp, lpp, t, l);
                        if beta == 0.0 {
                            continue;
                        }
                        if let Some(i) = index[origin_key(s, a, tpp, lpp)] {
                            total += beta * schedules[i].future_amount(t, l);
                        }
                    }
                }
            }
            x_aft[(t, l)] = total;
        }
    }
    Ok(AggregateLoad { x_aft })
}

/// `H(p) = sum alpha(t,l) [f(x_aft(t,l)) - p(t,l) x_aft(t,l)]`, slot-major.
pub fn operator_objective(s: &Scenario, p: &PriceMatrix, load: &AggregateLoad) -> f64 {
    let mut h = 0.0;
    for t in 0..s.horizon {
        for l in 0..s.locations {
            let x = load.x_aft[(t, l)];
            h += s.alpha[(t, l)] * (excess_cost(x, s.capacity, s.gamma) - p.get(t, l) * x);
        }
    }
    h
}

pub fn cost_breakdown(s: &Scenario, p: &PriceMatrix, load: &AggregateLoad) -> CostBreakdown {
    let mut c = CostBreakdown::default();
    for t in 0..s.horizon {
        for l in 0..s.locations {
            let (alpha, x, price) = (s.alpha[(t, l)], load.x_aft[(t, l)], p.get(t, l));
            c.excess_cost += alpha * excess_cost(x, s.capacity, s.gamma);
            c.revenue += alpha * price * x;
            c.discount_loss += alpha * (s.base_price - price) * x;
        }
    }
    c
}

pub fn evaluate(s: &Scenario, p: &PriceMatrix, opts: &EvalOptions) -> Result<Evaluation> {
    let schedules = schedule_all(s, p, opts)?;
    let load = aggregate_load(s, &schedules)?;
    let objective = operator_objective(s, p, &load);
    if !objective.is_finite() {
        return Err(Error::NonFinite(String::from("operator objective")));
    }
    Ok(Evaluation {
        objective,
        load,
        schedules,
    })
}

/// `H(p)` and the load behind it, with linear ties resolved by `tie_break`.
#[allow(non_snake_case)]
pub fn evaluate_H(s: &Scenario, p: &PriceMatrix, tie_break: TieBreak) -> Result<(f64, AggregateLoad)> {
    let e = evaluate(
        s,
        p,
        &EvalOptions {
            tie_break,
            ..EvalOptions::default()
        },
    )?;
    Ok((e.objective, e.load))
}

/// Exact `H(p)` when the operator may pick among every user-optimal schedule:
/// linear-utility mass on tied cells is allocated by an LP that minimizes the
/// operator cost. Non-linear types are scheduled as usual.
pub fn evaluate_operator_preferred(s: &Scenario, p: &PriceMatrix, eps: f64) -> Result<Evaluation> {
    let base = EvalOptions {
        eps,
        tie_break: TieBreak::Lexicographic,
    };
    let mut schedules = schedule_all(s, p, &base)?;

    struct Tie {
        schedule: usize,
        cells: Vec<(usize, usize, f64, Option<usize>)>,
        vars: Vec<usize>,
    }
    let mut ties = Vec::new();
    let mut lp = LpProblem::new(0);
    for (i, x) in schedules.iter().enumerate() {
        let ut = &s.user_types[x.user_type];
        let Utility::Linear { rho } = ut.utility else {
            continue;
        };
        let cells = window_cells(s, ut, x.slot, x.location);
        let maximizers = linear_maximizers(&cells, p, rho);
        if maximizers.cells.len() < 2 {
            continue;
        }
        let cells: Vec<_> = maximizers
            .cells
            .iter()
            .map(|&c| (cells[c].slot, cells[c].location, cells[c].weight, cells[c].future_index))
            .collect();
        let vars: Vec<usize> = cells.iter().map(|_| lp.add_var(0.0, 0.0, f64::INFINITY)).collect();
        lp.add_eq(
            vars.iter().map(|&v| (v, 1.0)).collect(),
            ut.initial_demand[(x.slot, x.location)],
        );
        ties.push(Tie {
            schedule: i,
            cells,
            vars,
        });
    }

    if !ties.is_empty() {
        // load contributed by everything outside the tie faces
        for tie in &ties {
            let x = &mut schedules[tie.schedule];
            x.own = 0.0;
            x.future.iter_mut().for_each(|v| *v = 0.0);
        }
        let fixed = aggregate_load(s, &schedules)?;
        let mut inflow: Vec<Vec<(usize, f64)>> = vec![Vec::new(); s.cells()];
        for tie in &ties {
            for (&(slot, loc, _, _), &v) in tie.cells.iter().zip(&tie.vars) {
                inflow[slot * s.locations + loc].push((v, 1.0));
            }
        }
        for t in 0..s.horizon {
            for l in 0..s.locations {
                let c = t * s.locations + l;
                let alpha = s.alpha[(t, l)];
                if alpha == 0.0 || inflow[c].is_empty() {
                    continue;
                }
                for &(v, _) in &inflow[c] {
                    lp.objective[v] -= alpha * p.get(t, l);
                }
                let e = lp.add_var(alpha * s.gamma, 0.0, f64::INFINITY);
                let mut terms = vec![(e, 1.0)];
                terms.extend(inflow[c].iter().map(|&(v, a)| (v, -a)));
                lp.add_ge(terms, fixed.x_aft[(t, l)] - s.capacity);
            }
        }
        let (y, _) = solve_lp(&lp)?.into_optimal()?;
        for tie in &ties {
            let x = &mut schedules[tie.schedule];
            for (&(_, _, weight, future), &v) in tie.cells.iter().zip(&tie.vars) {
                let amount = y[v].max(0.0) / weight;
                match future {
                    None => x.own = amount,
                    Some(k) => x.future[k] = amount,
                }
            }
        }
    }

    let load = aggregate_load(s, &schedules)?;
    let objective = operator_objective(s, p, &load);
    Ok(Evaluation {
        objective,
        load,
        schedules,
    })
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Reporting metrics at `p` with the given post-scheduling load and schedules.
pub fn metrics(s: &Scenario, p: &PriceMatrix, load: &AggregateLoad, schedules: &[Schedule]) -> Result<Metrics> {
    let cells = s.cells() as f64;
    let average_discount = p
        .as_slice()
        .iter()
        .map(|&v| (s.base_price - v) / s.base_price)
        .sum::<f64>()
        / cells;
    let excess_demand = load.x_aft.as_slice().iter().map(|&x| (x - s.capacity).max(0.0)).sum();
    let mut total_user_payoff = 0.0;
    for x in schedules {
        total_user_payoff += user_payoff(s, x, p)?;
    }
    Ok(Metrics {
        average_discount,
        excess_demand,
        traffic_variance: population_variance(load.x_aft.as_slice()),
        total_user_payoff,
    })
}

/// Variance of the initial (unshifted) total demand over all cells.
pub fn initial_traffic_variance(s: &Scenario) -> f64 {
    population_variance(s.total_initial_demand().as_slice())
}

/// Assembles a report from an evaluation at the final price matrix.
#[allow(clippy::too_many_arguments)]
pub fn build_report(
    s: &Scenario,
    solver: &str,
    mode: PricingMode,
    prices: PriceMatrix,
    evaluation: Evaluation,
    trace: Vec<TraceEntry>,
    seed: Option<u64>,
    diagnostics: Diagnostics,
) -> Result<SolveReport> {
    let metrics = metrics(s, &prices, &evaluation.load, &evaluation.schedules)?;
    let costs = cost_breakdown(s, &prices, &evaluation.load);
    Ok(SolveReport {
        solver: String::from(solver),
        mode,
        objective: evaluation.objective,
        load: evaluation.load.x_aft,
        costs,
        metrics,
        trace,
        seed,
        wall_time_secs: None,
        diagnostics,
        prices,
    })
}
