//! Nonmonotone spectral projected gradient on the smoothed objective, with
//! continuation over a decreasing sequence of smoothing parameters.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{PriceMatrix, Scenario};
use crate::objective::{build_report, evaluate, EvalOptions};
use crate::pricing::PricingMode;
use crate::report::{Diagnostics, SolveReport, SpgStage, Trace};
use crate::scheduler::DEFAULT_EPS;
use crate::smoothing::{smoothed_H, smoothed_gradient};

/// Slack added to the sufficient-decrease test, relative to `max(1, |reference|)`.
pub const ROUNDING_ALLOWANCE: f64 = 16.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SpgConfig {
    pub alpha0: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Nonmonotone memory length `M`.
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub xi: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Stop a stage once the infinity norm of `Proj(p - grad) - p` is at most this.
    pub eps_pg: f64,
    pub mu_schedule: Vec<f64>,
    /// Iteration cap per smoothing level.
    pub max_iters: usize,
    /// Multiplier bisection tolerance.
    pub eps: f64,
}

impl Default for SpgConfig {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            alpha_min: 1e-10,
            alpha_max: 1e10,
            memory: 10,
            xi: 1e-4,
            sigma1: 0.1,
            sigma2: 0.9,
            eps_pg: 1e-6,
            mu_schedule: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
            max_iters: 2000,
            eps: DEFAULT_EPS,
        }
    }
}

impl SpgConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(format!("spg: {msg}")));
        if !(0.0 < self.alpha_min && self.alpha_min <= self.alpha0 && self.alpha0 <= self.alpha_max) {
            return fail("need 0 < alpha_min <= alpha0 <= alpha_max");
        }
        if !(0.0 < self.sigma1 && self.sigma1 < self.sigma2 && self.sigma2 < 1.0) {
            return fail("need 0 < sigma1 < sigma2 < 1");
        }
        if !(0.0 < self.xi && self.xi < 1.0) {
            return fail("need 0 < xi < 1");
        }
        if self.memory == 0 {
            return fail("memory must be at least 1");
        }
        if !(self.eps_pg > 0.0) || !(self.eps > 0.0) {
            return fail("tolerances must be positive");
        }
        if self.mu_schedule.is_empty()
            || self.mu_schedule.iter().any(|&m| !(m > 0.0 && m.is_finite()))
            || self.mu_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return fail("mu_schedule must be positive and strictly decreasing");
        }
        Ok(())
    }
}

fn project(z: &mut [f64], upper: f64) {
    for v in z {
        *v = v.clamp(0.0, upper);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Infinity norm of `Proj(z - g) - z`.
pub fn projected_gradient_norm(z: &[f64], g: &[f64], upper: f64) -> f64 {
    z.iter()
        .zip(g)
        .map(|(&zi, &gi)| ((zi - gi).clamp(0.0, upper) - zi).abs())
        .fold(0.0, f64::max)
}

struct Smoothed<'a> {
    s: &'a Scenario,
    mode: PricingMode,
    mu: f64,
    eps: f64,
}

impl Smoothed<'_> {
    fn value_and_gradient(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = self.mode.expand(self.s, z)?;
        let e = smoothed_H(self.s, &p, self.mu, self.eps)?;
        let g = smoothed_gradient(self.s, &p, self.mu, &e)?;
        Ok((e.objective, self.mode.reduce_gradient(self.s, &g)))
    }
}

/// SPG over every (slot, location) price.
pub fn spg_solve(s: &Scenario, p_init: &PriceMatrix, config: &SpgConfig) -> Result<SolveReport> {
    spg_solve_mode(s, p_init, PricingMode::TimeLocation, config)
}

/// SPG over the decision vector of `mode`, started from the projection of `p_init`.
pub fn spg_solve_mode(s: &Scenario, p_init: &PriceMatrix, mode: PricingMode, config: &SpgConfig) -> Result<SolveReport> {
    config.validate()?;
    let upper = s.base_price;
    let exact = EvalOptions {
        eps: config.eps,
        ..EvalOptions::default()
    };
    let exact_value = |z: &[f64]| -> Result<f64> { Ok(evaluate(s, &mode.expand(s, z)?, &exact)?.objective) };

    let mut z = mode.reduce(s, p_init);
    let mut best_z = z.clone();
    let mut best_h = exact_value(&z)?;
    let mut trace = Trace::default();
    trace.push(best_h);
    let mut stages = Vec::with_capacity(config.mu_schedule.len());
    let mut final_pg = 0.0;

    for &mu in &config.mu_schedule {
        let f = Smoothed {
            s,
            mode,
            mu,
            eps: config.eps,
        };
        let (mut fz, mut g) = f.value_and_gradient(&z)?;
        let mut alpha = config.alpha0;
        let mut history = vec![fz];
        let mut stage_best = (z.clone(), fz, projected_gradient_norm(&z, &g, upper));
        let mut iterations = 0;
        let mut converged = false;

        while iterations < config.max_iters {
            let pg = projected_gradient_norm(&z, &g, upper);
            if pg <= config.eps_pg {
                converged = true;
                break;
            }
            iterations += 1;

            let mut d: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - alpha * gi).collect();
            project(&mut d, upper);
            for (di, zi) in d.iter_mut().zip(&z) {
                *di -= zi;
            }
            let gd = dot(&g, &d);
            let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // decreases below the rounding noise of the objective cannot be detected
            let noise = ROUNDING_ALLOWANCE * reference.abs().max(1.0);

            let mut eta = 1.0;
            let d_norm = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let (z_new, f_new, g_new) = loop {
                let mut trial: Vec<f64> = z.iter().zip(&d).map(|(zi, di)| zi + eta * di).collect();
                project(&mut trial, upper);
                let (f_trial, g_trial) = f.value_and_gradient(&trial)?;
                if f_trial <= reference + config.xi * eta * gd + noise {
                    break (trial, f_trial, g_trial);
                }
                if eta * d_norm < 1e-16 {
                    break (z.clone(), fz, g.clone());
                }
                let denom = 2.0 * (f_trial - fz - eta * gd);
                let interpolated = if denom > 0.0 { -gd * eta * eta / denom } else { f64::NAN };
                eta = if interpolated.is_finite() {
                    interpolated.clamp(config.sigma1 * eta, config.sigma2 * eta)
                } else {
                    0.5 * eta
                };
            };
            if z_new == z {
                // no acceptable step left at floating-point resolution
                break;
            }
            debug_assert!(f_new <= reference + config.xi * eta * gd + noise);

            let step: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
            let change: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&step, &change);
            alpha = if sy <= 0.0 {
                config.alpha_max
            } else {
                (dot(&step, &step) / sy).clamp(config.alpha_min, config.alpha_max)
            };

            z = z_new;
            fz = f_new;
            g = g_new;
            history.push(fz);
            if history.len() > config.memory {
                history.remove(0);
            }
            if fz < stage_best.1 {
                stage_best = (z.clone(), fz, projected_gradient_norm(&z, &g, upper));
            }
            let h = exact_value(&z)?;
            trace.push(h);
            if h < best_h {
                best_h = h;
                best_z.clone_from(&z);
            }
        }

        let pg = projected_gradient_norm(&z, &g, upper);
        final_pg = pg;
        stages.push(SpgStage {
            mu,
            iterations,
            projected_gradient_norm: pg,
            best_smoothed_objective: stage_best.1,
            converged,
        });
        // warm start the next level from the best smoothed point
        if stage_best.1 < fz {
            z = stage_best.0;
        }
    }

    let prices = mode.expand(s, &best_z)?;
    let evaluation = evaluate(s, &prices, &exact)?;
    build_report(
        s,
        "spg",
        mode,
        prices,
        evaluation,
        trace.into_entries(),
        None,
        Diagnostics::Spg {
            stages,
            final_projected_gradient_norm: final_pg,
        },
    )
}
