#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlap_core::{LocalMobility, Matrix, PriceMatrix, Scenario, UserType, Utility};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize, min_weight: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(min_weight..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

pub fn random_alpha(rng: &mut ChaCha8Rng, t0: usize, l: usize) -> Matrix {
    let mut alpha = Matrix::zeros(t0, l);
    for t in 0..t0 {
        for (j, v) in random_distribution(rng, l, 0.1).into_iter().enumerate() {
            alpha[(t, j)] = v;
        }
    }
    alpha
}

/// Random local mobility; some future cells get probability zero when `sparse`.
pub fn random_beta(rng: &mut ChaCha8Rng, t0: usize, l: usize, interval: usize, sparse: bool) -> LocalMobility {
    let mut beta = LocalMobility::zeros(t0, l, interval);
    for t in 0..t0 {
        for o in 0..l {
            for tp in t + 1..(t + interval).min(t0) {
                let mut w = random_distribution(rng, l, 0.0);
                if sparse && l > 1 && rng.random_bool(0.3) {
                    let drop = rng.random_range(0..l);
                    let keep = w[drop];
                    w[drop] = 0.0;
                    let rest = 1.0 - keep;
                    for v in &mut w {
                        *v /= rest;
                    }
                }
                for (lp, v) in w.into_iter().enumerate() {
                    beta.set(t, o, tp, lp, v);
                }
            }
        }
    }
    beta
}

pub fn random_demand(rng: &mut ChaCha8Rng, t0: usize, l: usize, max: f64, zero_prob: f64) -> Matrix {
    let mut x = Matrix::zeros(t0, l);
    for v in x.as_mut_slice() {
        *v = if rng.random_bool(zero_prob) { 0.0 } else { rng.random_range(0.0..max) };
    }
    x
}

pub fn random_scenario(rng: &mut ChaCha8Rng, t0: usize, l: usize, interval: usize, utility: Utility) -> Scenario {
    Scenario {
        horizon: t0,
        locations: l,
        interval,
        capacity: 1.5,
        gamma: rng.random_range(1.0..10.0),
        base_price: 1.0,
        alpha: random_alpha(rng, t0, l),
        user_types: vec![UserType {
            utility,
            delta: rng.random_range(0.3..1.0),
            beta: random_beta(rng, t0, l, interval, false),
            initial_demand: random_demand(rng, t0, l, 3.0, 0.0),
        }],
    }
}

pub fn random_log(rng: &mut ChaCha8Rng, t0: usize, l: usize, interval: usize) -> Scenario {
    let k = rng.random_range(0.5..2.0);
    random_scenario(rng, t0, l, interval, Utility::Logarithmic { k })
}

pub fn random_linear(rng: &mut ChaCha8Rng, t0: usize, l: usize, interval: usize) -> Scenario {
    let rho = rng.random_range(0.5..2.0);
    random_scenario(rng, t0, l, interval, Utility::Linear { rho })
}

pub fn random_prices(rng: &mut ChaCha8Rng, s: &Scenario) -> PriceMatrix {
    let v: Vec<f64> = (0..s.cells()).map(|_| rng.random_range(0.0..=s.base_price)).collect();
    PriceMatrix::projected(s, &v).unwrap()
}

/// Every window cell of origin `(t, l)`: `(slot, location, weight, discount)`,
/// own cell first, cells with zero mobility skipped.
pub fn window(s: &Scenario, a: usize, t: usize, l: usize) -> Vec<(usize, usize, f64, f64)> {
    let ut = &s.user_types[a];
    let last = (t + s.interval - 1).min(s.horizon - 1);
    let mut cells = vec![(t, l, 1.0, 1.0)];
    for tp in t + 1..=last {
        for lp in 0..s.locations {
            let b = ut.beta.get(t, l, tp, lp);
            if b > 0.0 {
                cells.push((tp, lp, b, ut.delta.powi((tp - t) as i32)));
            }
        }
    }
    cells
}

/// Conservation residual of the log closed form as a function of the multiplier.
pub fn log_residual(s: &Scenario, a: usize, t: usize, l: usize, p: &PriceMatrix, k: f64, lambda: f64) -> f64 {
    window(s, a, t, l)
        .iter()
        // demand is unbounded as p + lambda drops to zero
        .map(|&(tp, lp, w, d)| w * (k * d / (p.get(tp, lp) + lambda).max(1e-12) - 1.0).max(0.0))
        .sum::<f64>()
        - s.user_types[a].initial_demand[(t, l)]
}

/// Sign change of a decreasing function located on a grid of spacing `step`
/// over `[lo, hi]`, refined level by level (each level scans 1000 points).
pub fn grid_sign_change<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, step: f64) -> f64 {
    loop {
        let h = ((hi - lo) / 1000.0).max(step);
        let mut x = lo;
        while x + h <= hi && f(x + h) > 0.0 {
            x += h;
        }
        lo = x;
        hi = (x + h).min(hi);
        if h <= step {
            return 0.5 * (lo + hi);
        }
    }
}
