//! Stage-II traffic scheduling: each user type active at `(t, l)` splits its
//! initial demand over the scheduling window to maximize utility minus payment.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{ConcaveUtility, PriceMatrix, Scenario, SchedulingWindow, UserType, Utility};

/// Default multiplier bisection tolerance.
pub const DEFAULT_EPS: f64 = 1e-6;
/// Denominators `p + lambda` are floored here while evaluating closed-form demands.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;
/// Linear-utility payoffs within this (relative) distance of the maximum count as ties.
pub const TIE_TOL: f64 = 1e-12;
/// After the `eps` phase, bisection continues until the conservation residual
/// is below this times `max(1, x_ini)`.
pub const CONSERVATION_TOL: f64 = 1e-10;

/// How a linear-utility user picks among several payoff-maximizing cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TieBreak {
    /// Earliest slot, then smallest location. The own cell wins any tie it is part of.
    #[default]
    Lexicographic,
    /// Equal share of the initial demand on every maximizing cell.
    SplitUniform,
}

/// One user type's scheduling decision for an origin `(slot, location)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub user_type: usize,
    pub slot: usize,
    pub location: usize,
    pub window: SchedulingWindow,
    locations: usize,
    /// `x(t, l | t, l)`.
    pub own: f64,
    /// `x(t', l' | t, l)` for `t'` in the future part of the window, slot-major.
    pub future: Vec<f64>,
    /// Multiplier of the conservation constraint, when known.
    pub multiplier: Option<f64>,
}

impl Schedule {
    fn zeros(s: &Scenario, user_type: usize, slot: usize, location: usize) -> Self {
        let window = s.window(slot);
        Self {
            user_type,
            slot,
            location,
            window,
            locations: s.locations,
            own: 0.0,
            future: vec![0.0; window.future_len(s.locations)],
            multiplier: None,
        }
    }

    /// Amount scheduled into future cell `(slot, location)`; 0 outside the window.
    pub fn future_amount(&self, slot: usize, location: usize) -> f64 {
        if slot <= self.window.origin || slot > self.window.last || location >= self.locations {
            return 0.0;
        }
        self.future[self.window.future_index(slot, location, self.locations)]
    }

    /// Iterates `(slot, location, amount)` over every future cell.
    pub fn future_cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let origin = self.window.origin;
        let locations = self.locations;
        self.future
            .iter()
            .enumerate()
            .map(move |(i, &x)| (origin + 1 + i / locations, i % locations, x))
    }

    fn set(&mut self, cell: &WindowCell, amount: f64) {
        match cell.future_index {
            None => self.own = amount,
            Some(i) => self.future[i] = amount,
        }
    }

    /// `x(t,l|t,l) + sum beta x(t',l'|t,l) - x_ini(t,l)`.
    pub fn conservation_residual(&self, s: &Scenario) -> f64 {
        let ut = &s.user_types[self.user_type];
        let scheduled: f64 = self.own
            + self
                .future_cells()
                .map(|(tp, lp, x)| ut.beta.get(self.slot, self.location, tp, lp) * x)
                .sum::<f64>();
        scheduled - ut.initial_demand[(self.slot, self.location)]
    }
}

/// A cell of a scheduling window the user may actually use: the own cell, or a
/// future cell with positive mobility probability.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WindowCell {
    pub slot: usize,
    pub location: usize,
    /// 1 for the own cell, `beta(t', l' | t, l)` otherwise.
    pub weight: f64,
    /// `delta^(t' - t)`.
    pub discount: f64,
    pub future_index: Option<usize>,
}

/// Own cell first, then future cells with `beta > 0` in slot-major order.
pub(crate) fn window_cells(s: &Scenario, ut: &UserType, t: usize, l: usize) -> Vec<WindowCell> {
    let window = s.window(t);
    let mut cells = Vec::with_capacity(window.size(s.locations));
    cells.push(WindowCell {
        slot: t,
        location: l,
        weight: 1.0,
        discount: 1.0,
        future_index: None,
    });
    for tp in window.future_slots() {
        let discount = ut.discount(tp - t);
        for lp in 0..s.locations {
            let weight = ut.beta.get(t, l, tp, lp);
            if weight > 0.0 {
                cells.push(WindowCell {
                    slot: tp,
                    location: lp,
                    weight,
                    discount,
                    future_index: Some(window.future_index(tp, lp, s.locations)),
                });
            }
        }
    }
    cells
}

/// Bisection on a monotonically decreasing scalar function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    /// Stop halving once the bracket is at most this wide.
    pub eps: f64,
    /// Keep halving past `eps` until `|g(mid)|` is at most this (or the bracket
    /// cannot shrink further). `INFINITY` disables the extra phase.
    pub residual_tol: f64,
}

impl Bisection {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            residual_tol: f64::INFINITY,
        }
    }

    pub fn with_residual_tol(mut self, residual_tol: f64) -> Self {
        self.residual_tol = residual_tol;
        self
    }

    /// Finds the root of a decreasing `g` with `g(lo) >= 0 >= g(hi)`. The result
    /// is the midpoint of a bracket no wider than `eps`, so it is within `eps / 2`
    /// of the root.
    pub fn solve<G: FnMut(f64) -> f64>(&self, mut g: G, lo: f64, hi: f64) -> Result<f64> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!("bisection eps must be > 0, got {}", self.eps)));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::NoSignChange { lo, hi });
        }
        let check = |v: f64| {
            if v.is_nan() {
                Err(Error::NonFinite(alloc::format!("multiplier residual is NaN")))
            } else {
                Ok(v)
            }
        };
        let (g_lo, g_hi) = (check(g(lo))?, check(g(hi))?);
        if g_lo < 0.0 || g_hi > 0.0 {
            return Err(Error::NoSignChange { lo, hi });
        }

        let iterations = ((hi - lo) / self.eps).log2().ceil().max(0.0) as usize;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..iterations {
            let mid = 0.5 * (a + b);
            let gm = check(g(mid))?;
            if gm == 0.0 {
                return Ok(mid);
            }
            if gm > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        if self.residual_tol.is_infinite() {
            return Ok(0.5 * (a + b));
        }
        loop {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                return Ok(mid);
            }
            let gm = check(g(mid))?;
            if gm.abs() <= self.residual_tol {
                return Ok(mid);
            }
            if gm > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
    }
}

/// Lower multiplier bound moved down by a few ulps so rounding in its own
/// computation cannot make the residual there slightly negative.
pub(crate) fn guarded_lower_bound(lo: f64) -> f64 {
    lo - 1e-12 * lo.abs().max(1.0)
}

/// Plain bisection: `ceil(log2((hi - lo) / eps))` halvings, early exit on `g = 0`.
pub fn solve_multiplier<G: FnMut(f64) -> f64>(g: G, lo: f64, hi: f64, eps: f64) -> Result<f64> {
    Bisection::new(eps).solve(g, lo, hi)
}

/// Widens `[lo, hi]` by doubling until `g(lo) >= 0 >= g(hi)`.
pub fn expand_bracket<G: FnMut(f64) -> f64>(mut g: G, mut lo: f64, mut hi: f64, max_doublings: usize) -> Result<(f64, f64)> {
    let mut width = (hi - lo).max(1.0);
    for _ in 0..=max_doublings {
        let (g_lo, g_hi) = (g(lo), g(hi));
        if g_lo.is_nan() || g_hi.is_nan() {
            return Err(Error::NonFinite(alloc::format!("multiplier residual is NaN")));
        }
        if g_lo >= 0.0 && g_hi <= 0.0 {
            return Ok((lo, hi));
        }
        if g_lo < 0.0 {
            lo -= width;
        }
        if g_hi > 0.0 {
            hi += width;
        }
        width *= 2.0;
    }
    Err(Error::NoSignChange { lo, hi })
}

fn log_parameter(s: &Scenario, a: usize) -> Result<f64> {
    match s.user_type(a)?.utility {
        Utility::Logarithmic { k } => Ok(k),
        _ => Err(Error::NonConcaveUtility { user_type: a }),
    }
}

/// Smallest multiplier compatible with dual feasibility when every amount is zero.
fn zero_demand_multiplier(cells: &[WindowCell], p: &PriceMatrix, marginal_at_zero: f64) -> f64 {
    cells
        .iter()
        .map(|c| c.discount * marginal_at_zero - p.get(c.slot, c.location))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Closed-form logarithmic demand `max{k delta^d / (p + lambda) - 1, 0}`.
#[inline]
pub(crate) fn log_demand(coefficient: f64, price: f64, lambda: f64) -> f64 {
    (coefficient / (price + lambda).max(DENOMINATOR_FLOOR) - 1.0).max(0.0)
}

/// Logarithmic utility `k log(1 + x)`: closed-form amounts with the multiplier
/// found by bisection on `[k / (x_ini + 1) - p(t, l), k]`.
pub fn schedule_log(s: &Scenario, a: usize, t: usize, l: usize, p: &PriceMatrix, eps: f64) -> Result<Schedule> {
    let k = log_parameter(s, a)?;
    s.check_origin(t, l)?;
    let ut = &s.user_types[a];
    let cells = window_cells(s, ut, t, l);
    let x_ini = ut.initial_demand[(t, l)];
    let mut schedule = Schedule::zeros(s, a, t, l);

    if x_ini <= 0.0 {
        schedule.multiplier = Some(zero_demand_multiplier(&cells, p, k));
        return Ok(schedule);
    }

    let priced: Vec<(f64, f64, f64)> = cells
        .iter()
        .map(|c| (c.weight, k * c.discount, p.get(c.slot, c.location)))
        .collect();
    let residual = |lambda: f64| {
        priced
            .iter()
            .map(|&(w, coef, price)| w * log_demand(coef, price, lambda))
            .sum::<f64>()
            - x_ini
    };
    let lo = guarded_lower_bound(k / (x_ini + 1.0) - p.get(t, l));
    let lambda = Bisection::new(eps)
        .with_residual_tol(CONSERVATION_TOL * x_ini.max(1.0))
        .solve(residual, lo, k)?;

    for (cell, &(_, coef, price)) in cells.iter().zip(&priced) {
        schedule.set(cell, log_demand(coef, price, lambda));
    }
    schedule.multiplier = Some(lambda);
    Ok(schedule)
}

/// Linear utility `rho x`: all demand goes to the cells maximizing
/// `delta^(t'-t) rho - p(t', l')` over the own cell and every future cell with `beta > 0`.
pub fn schedule_linear(
    s: &Scenario,
    a: usize,
    t: usize,
    l: usize,
    p: &PriceMatrix,
    tie_break: TieBreak,
) -> Result<Schedule> {
    let rho = match s.user_type(a)?.utility {
        Utility::Linear { rho } => rho,
        _ => return Err(Error::NonLinearUtility { user_type: a }),
    };
    s.check_origin(t, l)?;
    let ut = &s.user_types[a];
    let cells = window_cells(s, ut, t, l);
    let x_ini = ut.initial_demand[(t, l)];
    let mut schedule = Schedule::zeros(s, a, t, l);

    let maximizers = linear_maximizers(&cells, p, rho);
    schedule.multiplier = Some(maximizers.best_payoff);
    if x_ini <= 0.0 {
        return Ok(schedule);
    }
    match tie_break {
        TieBreak::Lexicographic => {
            let cell = &cells[maximizers.cells[0]];
            schedule.set(cell, x_ini / cell.weight);
        }
        TieBreak::SplitUniform => {
            let share = x_ini / maximizers.cells.len() as f64;
            for &i in &maximizers.cells {
                schedule.set(&cells[i], share / cells[i].weight);
            }
        }
    }
    Ok(schedule)
}

pub(crate) struct LinearMaximizers {
    pub best_payoff: f64,
    /// Indices into the window cell list, in lexicographic order.
    pub cells: Vec<usize>,
}

pub(crate) fn linear_maximizers(cells: &[WindowCell], p: &PriceMatrix, rho: f64) -> LinearMaximizers {
    let payoffs: Vec<f64> = cells
        .iter()
        .map(|c| c.discount * rho - p.get(c.slot, c.location))
        .collect();
    let best_payoff = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOL * best_payoff.abs().max(1.0);
    let cells = payoffs
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= best_payoff - tol)
        .map(|(i, _)| i)
        .collect();
    LinearMaximizers { best_payoff, cells }
}

/// Demand at a marginal-utility target, clamped at zero; `INFINITY` when the
/// target lies outside the range of `u'`.
fn concave_demand(u: &dyn ConcaveUtility, price: f64, discount: f64, lambda: f64) -> f64 {
    if discount <= 0.0 {
        return 0.0;
    }
    let target = (price + lambda) / discount;
    if target <= 0.0 {
        return f64::INFINITY;
    }
    match u.inverse_marginal(target) {
        Some(x) if x.is_finite() => x.max(0.0),
        _ => f64::INFINITY,
    }
}

/// General strictly concave utility: amounts invert the stationarity conditions
/// `u'(x) = (p + lambda) / delta^d`, with the multiplier found by bisection.
pub fn schedule_general(s: &Scenario, a: usize, t: usize, l: usize, p: &PriceMatrix, eps: f64) -> Result<Schedule> {
    let u = match &s.user_type(a)?.utility {
        Utility::GeneralConcave(u) => u.clone(),
        _ => return Err(Error::NonConcaveUtility { user_type: a }),
    };
    s.check_origin(t, l)?;
    let ut = &s.user_types[a];
    let cells = window_cells(s, ut, t, l);
    let x_ini = ut.initial_demand[(t, l)];
    let mut schedule = Schedule::zeros(s, a, t, l);
    let marginal_at_zero = u.marginal(0.0);

    if x_ini <= 0.0 {
        schedule.multiplier = Some(zero_demand_multiplier(&cells, p, marginal_at_zero));
        return Ok(schedule);
    }

    let priced: Vec<(f64, f64, f64)> = cells
        .iter()
        .map(|c| (c.weight, c.discount, p.get(c.slot, c.location)))
        .collect();
    let mut residual = |lambda: f64| {
        priced
            .iter()
            .map(|&(w, disc, price)| w * concave_demand(u.as_ref(), price, disc, lambda))
            .sum::<f64>()
            - x_ini
    };

    let lo = guarded_lower_bound(u.marginal(x_ini) - p.get(t, l));
    let (lo, hi) = if marginal_at_zero.is_finite() && marginal_at_zero >= lo {
        (lo, marginal_at_zero)
    } else {
        (0.0, 1.0)
    };
    let (lo, hi) = expand_bracket(&mut residual, lo, hi, 60)?;
    let lambda = Bisection::new(eps)
        .with_residual_tol(CONSERVATION_TOL * x_ini.max(1.0))
        .solve(&mut residual, lo, hi)?;

    for (cell, &(_, disc, price)) in cells.iter().zip(&priced) {
        let x = concave_demand(u.as_ref(), price, disc, lambda);
        if !x.is_finite() {
            return Err(Error::DomainError {
                target: (price + lambda) / disc,
            });
        }
        schedule.set(cell, x);
    }
    schedule.multiplier = Some(lambda);
    Ok(schedule)
}

/// Schedules one origin with the solver matching the user type's utility.
pub fn schedule_origin(
    s: &Scenario,
    a: usize,
    t: usize,
    l: usize,
    p: &PriceMatrix,
    eps: f64,
    tie_break: TieBreak,
) -> Result<Schedule> {
    match s.user_type(a)?.utility {
        Utility::Logarithmic { .. } => schedule_log(s, a, t, l, p, eps),
        Utility::Linear { .. } => schedule_linear(s, a, t, l, p, tie_break),
        Utility::GeneralConcave(_) => schedule_general(s, a, t, l, p, eps),
    }
}

/// Discounted utility minus expected payment of a schedule.
pub fn user_payoff(s: &Scenario, schedule: &Schedule, p: &PriceMatrix) -> Result<f64> {
    let ut = s.user_type(schedule.user_type)?;
    let (t, l) = (schedule.slot, schedule.location);
    let mut utility = ut.utility.value(schedule.own);
    let mut payment = p.get(t, l) * schedule.own;
    for (tp, lp, x) in schedule.future_cells() {
        let beta = ut.beta.get(t, l, tp, lp);
        if beta == 0.0 {
            continue;
        }
        utility += beta * ut.discount(tp - t) * ut.utility.value(x);
        payment += beta * p.get(tp, lp) * x;
    }
    Ok(utility - payment)
}

/// Violations of the Stage-II optimality conditions at a schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KktResiduals {
    /// Largest violation of `p - delta^d u'(x) + lambda >= 0` (beta-weighted).
    pub dual_infeasibility: f64,
    /// Largest `|x * (p - delta^d u'(x) + lambda)|` (beta-weighted).
    pub complementarity: f64,
    /// `|x(t,l|t,l) + sum beta x - x_ini|`.
    pub conservation: f64,
    /// Largest violation of `x >= 0`.
    pub negativity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.dual_infeasibility
            .max(self.complementarity)
            .max(self.conservation)
            .max(self.negativity)
    }
}

/// Evaluates every optimality condition of the scheduling problem at `schedule`.
pub fn kkt_residuals(s: &Scenario, schedule: &Schedule, p: &PriceMatrix) -> Result<KktResiduals> {
    let ut = s.user_type(schedule.user_type)?;
    let lambda = schedule
        .multiplier
        .ok_or_else(|| Error::InvalidConfig("schedule carries no multiplier".into()))?;
    let (t, l) = (schedule.slot, schedule.location);
    let mut r = KktResiduals {
        conservation: schedule.conservation_residual(s).abs(),
        ..Default::default()
    };
    let mut visit = |weight: f64, discount: f64, price: f64, x: f64| {
        let slack = weight * (price - discount * ut.utility.marginal(x) + lambda);
        r.dual_infeasibility = r.dual_infeasibility.max(-slack);
        r.complementarity = r.complementarity.max((x * slack).abs());
        r.negativity = r.negativity.max(-x);
    };
    visit(1.0, 1.0, p.get(t, l), schedule.own);
    for tp in schedule.window.future_slots() {
        for lp in 0..s.locations {
            let beta = ut.beta.get(t, l, tp, lp);
            visit(beta, ut.discount(tp - t), p.get(tp, lp), schedule.future_amount(tp, lp));
        }
    }
    Ok(r)
}
