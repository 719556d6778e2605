//! Exhaustive grid search over prices, used as a verification oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tlap_core::{evaluate, evaluate_operator_preferred, EvalOptions, PriceMatrix, PricingMode, Scenario};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub step: f64,
    /// Zoom levels after the full grid; each searches a 21-point-per-axis box
    /// of a tenth of the previous step around the incumbent.
    pub refine: usize,
    /// Largest number of points the full grid may have.
    pub max_points: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            step: 0.01,
            refine: 0,
            max_points: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub prices: PriceMatrix,
    /// Decision vector of the pricing mode.
    pub decision: Vec<f64>,
    pub objective: f64,
    pub points: usize,
}

/// `H` as the oracle scores it: operator-preferred tie resolution when any
/// user type is linear, the unique user response otherwise.
pub fn oracle_objective(s: &Scenario, p: &PriceMatrix) -> Result<f64> {
    let eval = if s.user_types.iter().any(|u| u.utility.is_linear()) {
        evaluate_operator_preferred(s, p, EvalOptions::default().eps)?
    } else {
        evaluate(s, p, &EvalOptions::default())?
    };
    Ok(eval.objective)
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if hi - v[n] > 1e-9 * step.max(1.0) {
        v.push(hi);
    } else {
        v[n] = hi;
    }
    v
}

/// Best point of the product grid `axes[0] x axes[1] x ...`; ties go to the
/// first point in row-major order.
fn search(s: &Scenario, mode: PricingMode, axes: &[Vec<f64>]) -> Result<(Vec<f64>, f64, usize)> {
    let total: usize = axes.iter().map(Vec::len).product();
    let decode = |mut idx: usize| -> Vec<f64> {
        let mut z = vec![0.0; axes.len()];
        for d in (0..axes.len()).rev() {
            z[d] = axes[d][idx % axes[d].len()];
            idx /= axes[d].len();
        }
        z
    };
    let best = (0..total)
        .into_par_iter()
        .map(|idx| -> Result<(f64, usize)> {
            let p = mode.expand(s, &decode(idx))?;
            Ok((oracle_objective(s, &p)?, idx))
        })
        .try_reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| Ok(if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
        )?;
    Ok((decode(best.1), best.0, total))
}

/// Minimizes `H` over `{0, step, ..., p0}^dim` (with `p0` always on the grid),
/// then refines around the incumbent as configured.
pub fn oracle_grid(s: &Scenario, step: f64, mode: PricingMode) -> Result<GridOptimum> {
    oracle_grid_with(
        s,
        mode,
        &OracleConfig {
            step,
            ..OracleConfig::default()
        },
    )
}

pub fn oracle_grid_with(s: &Scenario, mode: PricingMode, config: &OracleConfig) -> Result<GridOptimum> {
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(HarnessError::Incompatible(format!("grid step must be positive, got {}", config.step)));
    }
    let dim = mode.dimension(s);
    let upper = s.base_price;
    let full = axis(0.0, upper, config.step);
    let points = (full.len() as f64).powi(dim as i32);
    if points > config.max_points as f64 {
        return Err(HarnessError::GridTooLarge(format!(
            "{dim} {} prices with step {} give {points:.3e} points, above the limit of {}; use a coarser step or time-only mode",
            mode.name(),
            config.step,
            config.max_points
        )));
    }
    let (mut decision, mut objective, mut evaluated) = search(s, mode, &vec![full; dim])?;
    let mut step = config.step;
    for _ in 0..config.refine {
        step /= 10.0;
        let axes: Vec<Vec<f64>> = decision
            .iter()
            .map(|&z| axis((z - 10.0 * step).max(0.0), (z + 10.0 * step).min(upper), step))
            .collect();
        let (z, h, n) = search(s, mode, &axes)?;
        evaluated += n;
        if h < objective {
            decision = z;
            objective = h;
        }
    }
    Ok(GridOptimum {
        prices: mode.expand(s, &decision)?,
        decision,
        objective,
        points: evaluated,
    })
}
