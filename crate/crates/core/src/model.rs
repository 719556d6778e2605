//! Scenario data: horizon, locations, mobility profiles, user types and prices.
//!
//! All indices are 0-based in this crate. File formats and reports use 1-based
//! slot and location numbers; the conversion happens at the IO boundary.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Row sums of `alpha` and `beta` must be within this distance of one.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Rows whose sum is off by at most this much are rescaled by [`Scenario::renormalize`].
pub const RENORMALIZE_TOL: f64 = 1e-6;

/// Dense row-major matrix with rows = time slots and columns = locations.
/// Serialized as an array of rows.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>"))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected_rows: rows,
                expected_cols: cols,
                rows: data.len() / cols.max(1),
                cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected_rows: rows.len(),
                    expected_cols: cols,
                    rows: rows.len(),
                    cols: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn has_shape(&self, rows: usize, cols: usize) -> bool {
        self.rows == rows && self.cols == cols
    }

    fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.has_shape(rows, cols) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_rows: rows,
                expected_cols: cols,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// A strictly concave, increasing, smooth utility supplied by the caller.
pub trait ConcaveUtility: Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// First derivative `u'(x)`; must be strictly decreasing.
    fn marginal(&self, x: f64) -> f64;

    /// Solves `u'(x) = y`. The returned `x` may be negative (callers clamp at
    /// zero). Returns `None` when no such `x` exists for this `y`.
    fn inverse_marginal(&self, y: f64) -> Option<f64>;

    fn name(&self) -> &str;
}

/// `u(x) = k log(1 + x)` routed through the general concave machinery.
#[derive(Debug, Clone, Copy)]
pub struct LogShape {
    pub k: f64,
}

impl ConcaveUtility for LogShape {
    fn value(&self, x: f64) -> f64 {
        self.k * x.ln_1p()
    }

    fn marginal(&self, x: f64) -> f64 {
        self.k / (1.0 + x)
    }

    fn inverse_marginal(&self, y: f64) -> Option<f64> {
        (y > 0.0).then(|| self.k / y - 1.0)
    }

    fn name(&self) -> &str {
        "log"
    }
}

/// `u(x) = 2 c sqrt(1 + x)`.
#[derive(Debug, Clone, Copy)]
pub struct SquareRoot {
    pub scale: f64,
}

impl ConcaveUtility for SquareRoot {
    fn value(&self, x: f64) -> f64 {
        2.0 * self.scale * (1.0 + x).sqrt()
    }

    fn marginal(&self, x: f64) -> f64 {
        self.scale / (1.0 + x).sqrt()
    }

    fn inverse_marginal(&self, y: f64) -> Option<f64> {
        (y > 0.0).then(|| {
            let r = self.scale / y;
            r * r - 1.0
        })
    }

    fn name(&self) -> &str {
        "sqrt"
    }
}

#[derive(Clone)]
pub enum Utility {
    /// `u(x) = k log(1 + x)`.
    Logarithmic { k: f64 },
    /// `u(x) = rho x`.
    Linear { rho: f64 },
    GeneralConcave(Arc<dyn ConcaveUtility>),
}

impl Utility {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Utility::Logarithmic { k } => k * x.ln_1p(),
            Utility::Linear { rho } => rho * x,
            Utility::GeneralConcave(u) => u.value(x),
        }
    }

    pub fn marginal(&self, x: f64) -> f64 {
        match self {
            Utility::Logarithmic { k } => k / (1.0 + x),
            Utility::Linear { rho } => *rho,
            Utility::GeneralConcave(u) => u.marginal(x),
        }
    }

    pub fn kind(&self) -> &str {
        match self {
            Utility::Logarithmic { .. } => "log",
            Utility::Linear { .. } => "linear",
            Utility::GeneralConcave(u) => u.name(),
        }
    }

    pub fn is_logarithmic(&self) -> bool {
        matches!(self, Utility::Logarithmic { .. })
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Utility::Linear { .. })
    }
}

impl fmt::Debug for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Utility::Logarithmic { k } => f.debug_struct("Logarithmic").field("k", k).finish(),
            Utility::Linear { rho } => f.debug_struct("Linear").field("rho", rho).finish(),
            Utility::GeneralConcave(u) => f.debug_tuple("GeneralConcave").field(&u.name()).finish(),
        }
    }
}

/// The slots a user active at `origin` may schedule into: `origin..=last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulingWindow {
    pub origin: usize,
    pub last: usize,
}

impl SchedulingWindow {
    pub fn new(origin: usize, horizon: usize, interval: usize) -> Self {
        let last = (origin + interval.max(1) - 1).min(horizon.saturating_sub(1));
        Self { origin, last }
    }

    /// Number of `(slot, location)` cells: the own cell plus every future cell.
    pub fn size(&self, locations: usize) -> usize {
        1 + (self.last - self.origin) * locations
    }

    pub fn future_slots(&self) -> core::ops::RangeInclusive<usize> {
        self.origin + 1..=self.last
    }

    pub fn future_len(&self, locations: usize) -> usize {
        (self.last - self.origin) * locations
    }

    /// Position of the future cell `(slot, location)` in a flat future-amount vector.
    pub fn future_index(&self, slot: usize, location: usize, locations: usize) -> usize {
        debug_assert!(slot > self.origin && slot <= self.last);
        (slot - self.origin - 1) * locations + location
    }
}

/// Local mobility profile `beta(t', l' | t, l)` for one user type, stored densely
/// over every origin and every future cell of its window. Missing entries are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMobility {
    horizon: usize,
    locations: usize,
    interval: usize,
    data: Vec<f64>,
}

impl LocalMobility {
    pub fn zeros(horizon: usize, locations: usize, interval: usize) -> Self {
        let span = interval.saturating_sub(1);
        Self {
            horizon,
            locations,
            interval,
            data: vec![0.0; horizon * locations * span * locations],
        }
    }

    /// `beta(t', l' | t, l) = 1 / L` for every future cell.
    pub fn uniform(horizon: usize, locations: usize, interval: usize) -> Self {
        let mut beta = Self::zeros(horizon, locations, interval);
        let value = 1.0 / locations as f64;
        for t in 0..horizon {
            let window = SchedulingWindow::new(t, horizon, interval);
            for tp in window.future_slots() {
                for l in 0..locations {
                    for lp in 0..locations {
                        beta.set(t, l, tp, lp, value);
                    }
                }
            }
        }
        beta
    }

    /// Every future location keeps the user at the origin location.
    pub fn stationary(horizon: usize, locations: usize, interval: usize) -> Self {
        let mut beta = Self::zeros(horizon, locations, interval);
        for t in 0..horizon {
            let window = SchedulingWindow::new(t, horizon, interval);
            for tp in window.future_slots() {
                for l in 0..locations {
                    beta.set(t, l, tp, l, 1.0);
                }
            }
        }
        beta
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn locations(&self) -> usize {
        self.locations
    }

    pub fn interval(&self) -> usize {
        self.interval
    }

    fn offset(&self, t: usize, l: usize, tp: usize, lp: usize) -> Option<usize> {
        let span = self.interval.saturating_sub(1);
        if t >= self.horizon || l >= self.locations || lp >= self.locations {
            return None;
        }
        if tp <= t || tp - t > span || tp >= self.horizon {
            return None;
        }
        Some(((t * self.locations + l) * span + (tp - t - 1)) * self.locations + lp)
    }

    /// Probability of appearing at `(tp, lp)` given presence at `(t, l)`;
    /// 0 for cells outside the scheduling window.
    pub fn get(&self, t: usize, l: usize, tp: usize, lp: usize) -> f64 {
        self.offset(t, l, tp, lp).map_or(0.0, |i| self.data[i])
    }

    /// Sets an entry. Returns `false` if the cell lies outside the window.
    pub fn set(&mut self, t: usize, l: usize, tp: usize, lp: usize, value: f64) -> bool {
        match self.offset(t, l, tp, lp) {
            Some(i) => {
                self.data[i] = value;
                true
            }
            None => false,
        }
    }

    fn row_sum(&self, t: usize, l: usize, tp: usize) -> f64 {
        (0..self.locations).map(|lp| self.get(t, l, tp, lp)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct UserType {
    pub utility: Utility,
    /// Delay tolerance in `[0, 1]`.
    pub delta: f64,
    pub beta: LocalMobility,
    /// Demand before scheduling, rows = slots, columns = locations.
    pub initial_demand: Matrix,
}

impl UserType {
    /// `delta^d`, with `0^0 = 1`.
    pub fn discount(&self, delay: usize) -> f64 {
        self.delta.powi(delay as i32)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    /// `T0`, number of time slots priced by the operator.
    pub horizon: usize,
    /// `L`, number of locations.
    pub locations: usize,
    /// `T`, scheduling interval in slots.
    pub interval: usize,
    pub capacity: f64,
    /// Cost per unit of traffic above capacity.
    pub gamma: f64,
    /// Flat benchmark price; prices may only be discounted from it.
    pub base_price: f64,
    /// Global mobility profile `alpha(t, l)`.
    pub alpha: Matrix,
    pub user_types: Vec<UserType>,
}

/// A failed scenario invariant, tagged with the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl Scenario {
    pub fn window(&self, origin: usize) -> SchedulingWindow {
        SchedulingWindow::new(origin, self.horizon, self.interval)
    }

    pub fn cells(&self) -> usize {
        self.horizon * self.locations
    }

    pub fn user_type(&self, a: usize) -> Result<&UserType> {
        self.user_types.get(a).ok_or(Error::InvalidUserType(a))
    }

    pub fn check_origin(&self, t: usize, l: usize) -> Result<()> {
        if t < self.horizon && l < self.locations {
            Ok(())
        } else {
            Err(Error::InvalidOrigin {
                slot: t + 1,
                location: l + 1,
            })
        }
    }

    /// Sum over user types of the initial demand matrices.
    pub fn total_initial_demand(&self) -> Matrix {
        let mut total = Matrix::zeros(self.horizon, self.locations);
        for ut in &self.user_types {
            for (acc, x) in total.as_mut_slice().iter_mut().zip(ut.initial_demand.as_slice()) {
                *acc += x;
            }
        }
        total
    }

    pub fn all_logarithmic(&self) -> bool {
        self.user_types.iter().all(|u| u.utility.is_logarithmic())
    }

    pub fn all_linear(&self) -> bool {
        self.user_types.iter().all(|u| u.utility.is_linear())
    }

    /// Rescales `alpha` and `beta` rows whose sum is within [`RENORMALIZE_TOL`]
    /// of one. Rows further off are left for [`validate_scenario`] to reject.
    /// Returns the number of rows rescaled.
    pub fn renormalize(&mut self) -> usize {
        fn needs_rescale(sum: f64) -> bool {
            let dev = (sum - 1.0).abs();
            dev > 0.0 && dev <= RENORMALIZE_TOL && sum > 0.0
        }

        let mut rescaled = 0;
        if self.alpha.has_shape(self.horizon, self.locations) {
            for t in 0..self.horizon {
                let sum: f64 = self.alpha.row(t).iter().sum();
                if needs_rescale(sum) {
                    for l in 0..self.locations {
                        self.alpha[(t, l)] /= sum;
                    }
                    rescaled += 1;
                }
            }
        }
        for ut in &mut self.user_types {
            let beta = &mut ut.beta;
            if beta.horizon != self.horizon || beta.locations != self.locations {
                continue;
            }
            for t in 0..self.horizon {
                let window = SchedulingWindow::new(t, self.horizon, self.interval);
                for l in 0..self.locations {
                    for tp in window.future_slots() {
                        let sum = beta.row_sum(t, l, tp);
                        if needs_rescale(sum) {
                            for lp in 0..self.locations {
                                let v = beta.get(t, l, tp, lp);
                                beta.set(t, l, tp, lp, v / sum);
                            }
                            rescaled += 1;
                        }
                    }
                }
            }
        }
        rescaled
    }
}

/// Checks every scenario invariant and returns the violations found (empty = valid).
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: String, message: String| out.push(Violation { path, message });

    if s.horizon == 0 {
        push("T0".into(), "must be at least 1".into());
    }
    if s.locations == 0 {
        push("L".into(), "must be at least 1".into());
    }
    if s.interval == 0 || s.interval > s.horizon {
        push("T".into(), format!("must satisfy 1 <= T <= T0 = {}, got {}", s.horizon, s.interval));
    }
    if !(s.capacity.is_finite() && s.capacity >= 0.0) {
        push("C".into(), format!("must be finite and >= 0, got {}", s.capacity));
    }
    if !(s.gamma.is_finite() && s.gamma > 0.0) {
        push("gamma".into(), format!("must be finite and > 0, got {}", s.gamma));
    }
    if !(s.base_price.is_finite() && s.base_price > 0.0) {
        push("p0".into(), format!("must be finite and > 0, got {}", s.base_price));
    }

    if !s.alpha.has_shape(s.horizon, s.locations) {
        push(
            "alpha".into(),
            format!(
                "expected {}x{} matrix, got {}x{}",
                s.horizon,
                s.locations,
                s.alpha.rows(),
                s.alpha.cols()
            ),
        );
    } else {
        for t in 0..s.horizon {
            let row = s.alpha.row(t);
            if let Some(l) = row.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                push(format!("alpha[{}][{}]", t + 1, l + 1), format!("must be >= 0, got {}", row[l]));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                push(format!("alpha[{}]", t + 1), format!("row sums to {sum}, expected 1"));
            }
        }
    }

    if s.user_types.is_empty() {
        push("user_types".into(), "at least one user type is required".into());
    }
    for (a, ut) in s.user_types.iter().enumerate() {
        let base = format!("user_types[{}]", a + 1);
        match &ut.utility {
            Utility::Logarithmic { k } if !(k.is_finite() && *k > 0.0) => {
                push(format!("{base}.utility.k"), format!("must be > 0, got {k}"))
            }
            Utility::Linear { rho } if !(rho.is_finite() && *rho > 0.0) => {
                push(format!("{base}.utility.rho"), format!("must be > 0, got {rho}"))
            }
            Utility::GeneralConcave(u) => {
                let (m0, m1) = (u.marginal(0.0), u.marginal(1.0));
                if !(m0 > m1 && m1 > 0.0) {
                    push(
                        format!("{base}.utility"),
                        "marginal utility must be positive and strictly decreasing".into(),
                    );
                }
            }
            _ => {}
        }
        if !(0.0..=1.0).contains(&ut.delta) {
            push(format!("{base}.delta"), format!("must lie in [0, 1], got {}", ut.delta));
        }
        if !ut.initial_demand.has_shape(s.horizon, s.locations) {
            push(
                format!("{base}.x_ini"),
                format!(
                    "expected {}x{} matrix, got {}x{}",
                    s.horizon,
                    s.locations,
                    ut.initial_demand.rows(),
                    ut.initial_demand.cols()
                ),
            );
        } else if let Some(i) = ut
            .initial_demand
            .as_slice()
            .iter()
            .position(|v| !(v.is_finite() && *v >= 0.0))
        {
            push(
                format!("{base}.x_ini[{}][{}]", i / s.locations + 1, i % s.locations + 1),
                format!("must be finite and >= 0, got {}", ut.initial_demand.as_slice()[i]),
            );
        }

        let beta = &ut.beta;
        if beta.horizon != s.horizon || beta.locations != s.locations || beta.interval != s.interval {
            push(
                format!("{base}.beta"),
                "profile dimensions do not match the scenario".into(),
            );
            continue;
        }
        if let Some(v) = beta.data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            push(format!("{base}.beta"), format!("entries must be >= 0, got {v}"));
        }
        for t in 0..s.horizon {
            let window = s.window(t);
            for l in 0..s.locations {
                for tp in window.future_slots() {
                    let sum = beta.row_sum(t, l, tp);
                    if (sum - 1.0).abs() > NORMALIZATION_TOL {
                        push(
                            format!("{base}.beta[t={},l={},t'={}]", t + 1, l + 1, tp + 1),
                            format!("sums to {sum} over l', expected 1"),
                        );
                    }
                }
            }
        }
    }
    out
}

/// Returns `Err(Error::InvalidScenario)` unless the scenario has no violations.
pub fn ensure_valid(s: &Scenario) -> Result<()> {
    let violations = validate_scenario(s);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidScenario(violations))
    }
}

/// Operator prices, one per `(slot, location)`, within `[0, p0]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct PriceMatrix(Matrix);

impl PriceMatrix {
    pub fn new(s: &Scenario, prices: Matrix) -> Result<Self> {
        prices.check_shape(s.horizon, s.locations)?;
        for t in 0..s.horizon {
            for l in 0..s.locations {
                let value = prices[(t, l)];
                if !(0.0..=s.base_price).contains(&value) {
                    return Err(Error::InvalidPrice {
                        slot: t + 1,
                        location: l + 1,
                        value,
                        base_price: s.base_price,
                    });
                }
            }
        }
        Ok(Self(prices))
    }

    /// The time and location independent benchmark `p = p0`.
    pub fn flat(s: &Scenario) -> Self {
        Self::uniform(s, s.base_price)
    }

    /// Every cell priced at `value`, clamped into `[0, p0]`.
    pub fn uniform(s: &Scenario, value: f64) -> Self {
        Self(Matrix::filled(s.horizon, s.locations, value.clamp(0.0, s.base_price)))
    }

    /// Entrywise projection of arbitrary values onto `[0, p0]`.
    pub fn projected(s: &Scenario, values: &[f64]) -> Result<Self> {
        let data = values.iter().map(|v| v.clamp(0.0, s.base_price)).collect();
        Matrix::from_vec(s.horizon, s.locations, data).map(Self)
    }

    pub fn get(&self, t: usize, l: usize) -> f64 {
        self.0[(t, l)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn discontinuity_example_is_valid() {
        assert!(validate_scenario(&discontinuity_example()).is_empty());
    }

    #[test]
    fn alpha_row_off_by_point_two_is_reported() {
        let mut s = discontinuity_example();
        s.alpha[(1, 0)] = 0.8;
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "alpha[2]");
    }

    #[test]
    fn delta_above_one_is_reported() {
        let mut s = discontinuity_example();
        s.user_types[0].delta = 1.5;
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].path.ends_with(".delta"), "{:?}", v);
    }

    #[test]
    fn validation_is_pure() {
        let mut s = discontinuity_example();
        s.alpha[(0, 0)] = 0.5;
        s.user_types[0].delta = -0.1;
        s.gamma = 0.0;
        assert_eq!(validate_scenario(&s), validate_scenario(&s));
        assert_eq!(validate_scenario(&s).len(), 3);
    }

    #[test]
    fn beta_rows_must_sum_to_one() {
        let mut s = discontinuity_example();
        s.user_types[0].beta.set(0, 0, 1, 0, 0.5);
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].path.contains("beta"));
    }

    #[test]
    fn renormalize_fixes_float_noise_only() {
        let mut s = discontinuity_example();
        s.alpha[(0, 0)] = 1.0 + 5e-7;
        s.alpha[(1, 0)] = 1.0 + 1e-3;
        assert_eq!(s.renormalize(), 1);
        assert_eq!(s.alpha[(0, 0)], 1.0);
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "alpha[2]");
    }

    #[test]
    fn window_at_last_slot_has_size_one() {
        let w = SchedulingWindow::new(4, 5, 3);
        assert_eq!(w.last, 4);
        assert_eq!(w.size(3), 1);
        let w = SchedulingWindow::new(0, 5, 3);
        assert_eq!(w.last, 2);
        assert_eq!(w.size(3), 7);
        assert_eq!(w.future_index(2, 1, 3), 4);
    }

    #[test]
    fn beta_outside_window_reads_zero() {
        let beta = LocalMobility::uniform(4, 2, 2);
        assert_eq!(beta.get(0, 0, 1, 1), 0.5);
        assert_eq!(beta.get(0, 0, 2, 1), 0.0);
        assert_eq!(beta.get(3, 0, 4, 0), 0.0);
        assert_eq!(beta.get(1, 0, 1, 0), 0.0);
    }

    #[test]
    fn price_matrix_rejects_values_above_base_price() {
        let s = discontinuity_example();
        let err = PriceMatrix::new(&s, Matrix::from_vec(2, 1, vec![1.0, 1.2]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidPrice { slot: 2, location: 1, .. }));
        assert!(PriceMatrix::new(&s, Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap()).is_ok());
    }
}
