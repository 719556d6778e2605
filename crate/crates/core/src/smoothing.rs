//! Smoothed operator objective for logarithmic utilities and its gradient.
//!
//! Every `max(., 0)` in the closed-form schedules and in the excess cost is
//! replaced by `smooth_max(., mu)`. The multiplier of each origin then depends
//! smoothly on prices, and its derivative follows from differentiating the
//! smoothed conservation equation.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{Matrix, PriceMatrix, Scenario, Utility};
use crate::scheduler::{expand_bracket, guarded_lower_bound, window_cells, Bisection, WindowCell, DENOMINATOR_FLOOR};

/// `(x + sqrt(x^2 + mu)) / 2`, evaluated without cancellation for negative `x`.
pub fn smooth_max(x: f64, mu: f64) -> f64 {
    let r = (x * x + mu).sqrt();
    if x >= 0.0 {
        0.5 * (x + r)
    } else if mu == 0.0 {
        0.0
    } else {
        0.5 * mu / (r - x)
    }
}

/// Derivative of [`smooth_max`] in `x`; requires `mu > 0`.
pub fn smooth_max_derivative(x: f64, mu: f64) -> f64 {
    let r = (x * x + mu).sqrt();
    if x >= 0.0 {
        0.5 * (1.0 + x / r)
    } else {
        0.5 * mu / (r * (r - x))
    }
}

/// Smoothed schedule of one origin.
#[derive(Debug, Clone)]
pub struct SmoothedOrigin {
    pub user_type: usize,
    pub slot: usize,
    pub location: usize,
    pub multiplier: f64,
    cells: Vec<WindowCell>,
    /// `k delta^d` per window cell.
    coefficients: Vec<f64>,
    amounts: Vec<f64>,
}

impl SmoothedOrigin {
    /// `(slot, location, amount)` for the own cell and every future cell with `beta > 0`.
    pub fn amounts(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells.iter().zip(&self.amounts).map(|(c, &x)| (c.slot, c.location, x))
    }
}

#[derive(Debug, Clone)]
pub struct SmoothedEvaluation {
    pub objective: f64,
    /// Smoothed post-scheduling load.
    pub load: Matrix,
    pub origins: Vec<SmoothedOrigin>,
}

fn smoothed_argument(coefficient: f64, price: f64, lambda: f64) -> f64 {
    coefficient / (price + lambda).max(DENOMINATOR_FLOOR) - 1.0
}

fn log_parameters(s: &Scenario) -> Result<Vec<f64>> {
    s.user_types
        .iter()
        .enumerate()
        .map(|(a, ut)| match ut.utility {
            Utility::Logarithmic { k } => Ok(k),
            _ => Err(Error::Incompatible(format!(
                "smoothing requires logarithmic utilities; user type {} is {}",
                a + 1,
                ut.utility.kind()
            ))),
        })
        .collect()
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("smoothing parameter must be positive, got {mu}")))
    }
}

fn solve_origin(s: &Scenario, k: f64, a: usize, t: usize, l: usize, p: &PriceMatrix, mu: f64, eps: f64) -> Result<SmoothedOrigin> {
    let ut = &s.user_types[a];
    let x_ini = ut.initial_demand[(t, l)];
    let cells = window_cells(s, ut, t, l);
    let coefficients: Vec<f64> = cells.iter().map(|c| k * c.discount).collect();
    let prices: Vec<f64> = cells.iter().map(|c| p.get(c.slot, c.location)).collect();
    let mut residual = |lambda: f64| {
        cells
            .iter()
            .zip(&coefficients)
            .zip(&prices)
            .map(|((c, &coef), &price)| c.weight * smooth_max(smoothed_argument(coef, price, lambda), mu))
            .sum::<f64>()
            - x_ini
    };
    // the smoothed demand is positive everywhere, so the upper end may need widening
    let (lo, hi) = expand_bracket(&mut residual, guarded_lower_bound(k / (x_ini + 1.0) - p.get(t, l)), k, 60)?;
    let lambda = Bisection::new(eps).with_residual_tol(0.0).solve(&mut residual, lo, hi)?;
    let amounts = coefficients
        .iter()
        .zip(&prices)
        .map(|(&coef, &price)| smooth_max(smoothed_argument(coef, price, lambda), mu))
        .collect();
    Ok(SmoothedOrigin {
        user_type: a,
        slot: t,
        location: l,
        multiplier: lambda,
        cells,
        coefficients,
        amounts,
    })
}

/// Smoothed objective `H~(p; mu)`. Origins without initial demand carry no traffic.
#[allow(non_snake_case)]
pub fn smoothed_H(s: &Scenario, p: &PriceMatrix, mu: f64, eps: f64) -> Result<SmoothedEvaluation> {
    check_mu(mu)?;
    let ks = log_parameters(s)?;
    let mut origins = Vec::new();
    let mut load = Matrix::zeros(s.horizon, s.locations);
    for (a, ut) in s.user_types.iter().enumerate() {
        for t in 0..s.horizon {
            for l in 0..s.locations {
                if ut.initial_demand[(t, l)] <= 0.0 {
                    continue;
                }
                let origin = solve_origin(s, ks[a], a, t, l, p, mu, eps)?;
                for (c, &x) in origin.cells.iter().zip(&origin.amounts) {
                    load[(c.slot, c.location)] += c.weight * x;
                }
                origins.push(origin);
            }
        }
    }
    let mut objective = 0.0;
    for t in 0..s.horizon {
        for l in 0..s.locations {
            let x = load[(t, l)];
            objective += s.alpha[(t, l)] * (s.gamma * smooth_max(x - s.capacity, mu) - p.get(t, l) * x);
        }
    }
    if !objective.is_finite() {
        return Err(Error::NonFinite(format!("smoothed objective at mu = {mu}")));
    }
    Ok(SmoothedEvaluation {
        objective,
        load,
        origins,
    })
}

/// Gradient of `H~` at the point of a previous [`smoothed_H`] evaluation.
pub fn smoothed_gradient(s: &Scenario, p: &PriceMatrix, mu: f64, eval: &SmoothedEvaluation) -> Result<Matrix> {
    check_mu(mu)?;
    let mut grad = Matrix::zeros(s.horizon, s.locations);
    // d H~ / d x_aft(i), and the direct -x_aft term from differentiating p * x_aft
    let mut load_sensitivity = Matrix::zeros(s.horizon, s.locations);
    for t in 0..s.horizon {
        for l in 0..s.locations {
            let x = eval.load[(t, l)];
            let alpha = s.alpha[(t, l)];
            load_sensitivity[(t, l)] = alpha * (s.gamma * smooth_max_derivative(x - s.capacity, mu) - p.get(t, l));
            grad[(t, l)] = -alpha * x;
        }
    }

    let mut q = Vec::new();
    let mut r = Vec::new();
    for origin in &eval.origins {
        q.clear();
        r.clear();
        let lambda = origin.multiplier;
        for (c, &coef) in origin.cells.iter().zip(&origin.coefficients) {
            let denom = p.get(c.slot, c.location) + lambda;
            // -dx~/dp of this cell; zero where the denominator floor is active
            let qc = if denom > DENOMINATOR_FLOOR {
                smooth_max_derivative(coef / denom - 1.0, mu) * coef / (denom * denom)
            } else {
                0.0
            };
            q.push(qc);
            r.push(load_sensitivity[(c.slot, c.location)] * c.weight);
        }
        let total: f64 = origin.cells.iter().zip(&q).map(|(c, &qc)| c.weight * qc).sum();
        if !(total > 0.0) {
            return Err(Error::SingularImplicitSystem {
                slot: origin.slot + 1,
                location: origin.location + 1,
            });
        }
        let spread: f64 = r.iter().zip(&q).map(|(rc, qc)| rc * qc).sum();
        for (i, c) in origin.cells.iter().enumerate() {
            grad[(c.slot, c.location)] += -r[i] * q[i] + spread * c.weight * q[i] / total;
        }
    }
    if grad.as_slice().iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("smoothed gradient at mu = {mu}")));
    }
    Ok(grad)
}

#[allow(non_snake_case)]
pub fn grad_smoothed_H(s: &Scenario, p: &PriceMatrix, mu: f64, eps: f64) -> Result<Matrix> {
    let eval = smoothed_H(s, p, mu, eps)?;
    smoothed_gradient(s, p, mu, &eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::single_location;
    use crate::objective::evaluate_H;
    use crate::scheduler::TieBreak;

    #[test]
    fn smooth_max_examples() {
        assert!((smooth_max(0.0, 1e-4) - 0.005).abs() < 1e-15);
        assert_eq!(smooth_max(3.0, 0.0), 3.0);
        let v = smooth_max(-5.0, 1e-4);
        assert!(v > 0.0 && v <= 0.005);
        assert_eq!(smooth_max(-5.0, 0.0), 0.0);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for &(x, mu) in &[(-3.0, 1e-2), (0.0, 1e-4), (0.7, 1e-3), (-1e-3, 1e-6)] {
            let h = 1e-7;
            let fd = (smooth_max(x + h, mu) - smooth_max(x - h, mu)) / (2.0 * h);
            assert!((fd - smooth_max_derivative(x, mu)).abs() < 1e-6, "{x} {mu}");
        }
    }

    #[test]
    fn symmetric_instance_multiplier_and_gradient() {
        let s = single_location(2, 2, Utility::Logarithmic { k: 1.0 }, 1.0, &[2.0, 0.0]);
        let p = PriceMatrix::uniform(&s, 0.3);
        let e = smoothed_H(&s, &p, 1e-10, 1e-6).unwrap();
        assert!((e.origins[0].multiplier - 0.2).abs() <= 1e-6);
        let g = smoothed_gradient(&s, &p, 1e-10, &e).unwrap();
        assert!((g[(0, 0)] - g[(1, 0)]).abs() < 1e-9);
    }

    #[test]
    fn interior_instance_approaches_exact_objective() {
        let s = single_location(2, 2, Utility::Logarithmic { k: 2.0 }, 0.8, &[1.0, 0.5]);
        let p = PriceMatrix::new(&s, Matrix::from_vec(2, 1, alloc::vec![0.9, 0.6]).unwrap()).unwrap();
        let exact = evaluate_H(&s, &p, TieBreak::Lexicographic).unwrap().0;
        let smooth = smoothed_H(&s, &p, 1e-8, 1e-6).unwrap().objective;
        assert!((exact - smooth).abs() < 1e-4, "{exact} {smooth}");
    }

    #[test]
    fn rejects_linear_utilities_and_bad_mu() {
        let s = single_location(1, 1, Utility::Linear { rho: 1.0 }, 1.0, &[1.0]);
        let p = PriceMatrix::flat(&s);
        assert!(matches!(smoothed_H(&s, &p, 1e-3, 1e-6), Err(Error::Incompatible(_))));
        let s = single_location(1, 1, Utility::Logarithmic { k: 1.0 }, 1.0, &[1.0]);
        assert!(matches!(smoothed_H(&s, &p, 0.0, 1e-6), Err(Error::InvalidConfig(_))));
    }
}
