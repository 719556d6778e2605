//! Surrogate-assisted derivative-free search over the price box.
//!
//! A cubic radial basis function with a linear tail is fitted to every
//! evaluated point. Each iteration perturbs a random subset of coordinates of
//! the incumbent, shrinking the subset as the budget is spent, and evaluates
//! the candidate that best balances surrogate value and distance from
//! previously evaluated points.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{PriceMatrix, Scenario};
use crate::objective::{build_report, evaluate, EvalOptions};
use crate::pricing::PricingMode;
use crate::report::{Diagnostics, SolveReport, Trace};

/// Surrogate weights cycled through by successive iterations.
pub const SCORE_WEIGHTS: [f64; 4] = [0.3, 0.5, 0.8, 0.95];
/// Diagonal shift used when the interpolation system is singular.
pub const RBF_REGULARIZATION: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DycorsConfig {
    /// Initial design size; `None` uses `2 * (dim + 1)`.
    pub n0: Option<usize>,
    /// Candidates per iteration; `None` uses `min(100 * dim, 1000)`.
    pub m: Option<usize>,
    /// Evaluation budget, including the initial design and the flat point.
    pub max_evaluations: usize,
    /// Initial coordinate perturbation probability; `None` uses `min(20 / dim, 1)`.
    pub phi0: Option<f64>,
    /// Initial perturbation radius as a fraction of the base price.
    pub sigma0: f64,
    pub failure_tolerance: usize,
    pub success_tolerance: usize,
    pub seed: u64,
}

impl Default for DycorsConfig {
    fn default() -> Self {
        Self {
            n0: None,
            m: None,
            max_evaluations: 300,
            phi0: None,
            sigma0: 0.2,
            failure_tolerance: 3,
            success_tolerance: 3,
            seed: 0,
        }
    }
}

/// Configuration with every default resolved for a given dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedDycors {
    pub dim: usize,
    pub n0: usize,
    pub m: usize,
    pub max_evaluations: usize,
    pub phi0: f64,
    /// Absolute initial radius.
    pub sigma0: f64,
    pub failure_tolerance: usize,
    pub success_tolerance: usize,
    pub seed: u64,
}

impl DycorsConfig {
    pub fn resolve(&self, dim: usize, upper: f64) -> Result<ResolvedDycors> {
        let fail = |msg: alloc::string::String| Err(Error::InvalidConfig(format!("dycors: {msg}")));
        if dim == 0 {
            return fail("nothing to optimize".into());
        }
        let n0 = self.n0.unwrap_or(2 * (dim + 1));
        let m = self.m.unwrap_or((100 * dim).min(1000));
        let phi0 = self.phi0.unwrap_or((20.0 / dim as f64).min(1.0));
        if n0 < dim + 1 {
            return fail(format!("n0 = {n0} is below dim + 1 = {}", dim + 1));
        }
        if m == 0 {
            return fail("m must be at least 1".into());
        }
        // initial design, flat point, and at least one adaptive evaluation
        if self.max_evaluations < n0 + 2 {
            return fail(format!("budget {} leaves no iteration after {} initial points", self.max_evaluations, n0 + 1));
        }
        if !(phi0 > 0.0 && phi0 <= 1.0) {
            return fail(format!("phi0 = {phi0} outside (0, 1]"));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return fail("sigma0 must be positive".into());
        }
        if self.failure_tolerance == 0 || self.success_tolerance == 0 {
            return fail("tolerances must be at least 1".into());
        }
        Ok(ResolvedDycors {
            dim,
            n0,
            m,
            max_evaluations: self.max_evaluations,
            phi0,
            sigma0: self.sigma0 * upper,
            failure_tolerance: self.failure_tolerance,
            success_tolerance: self.success_tolerance,
            seed: self.seed,
        })
    }
}

/// Cubic RBF interpolant with a linear polynomial tail.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfSurrogate {
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// Constant term followed by one coefficient per coordinate.
    tail: Vec<f64>,
    /// True when the interpolation system needed a diagonal shift.
    pub regularized: bool,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn solve_system(mut a: DMatrix<f64>, b: &DVector<f64>, shift: f64, n: usize) -> Option<DVector<f64>> {
    for i in 0..n {
        a[(i, i)] += shift;
    }
    let x = a.lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Fits the interpolant; needs at least `dim + 1` points.
pub fn rbf_fit(points: &[Vec<f64>], values: &[f64]) -> Result<RbfSurrogate> {
    let n = points.len();
    let dim = points.first().map_or(0, Vec::len);
    if n != values.len() || n < dim + 1 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidConfig(format!(
            "rbf fit needs at least dim + 1 = {} points of equal dimension and one value each",
            dim + 1
        )));
    }
    let size = n + dim + 1;
    let mut a = DMatrix::<f64>::zeros(size, size);
    for i in 0..n {
        for j in 0..i {
            let r = distance(&points[i], &points[j]);
            let phi = r * r * r;
            a[(i, j)] = phi;
            a[(j, i)] = phi;
        }
        a[(i, n)] = 1.0;
        a[(n, i)] = 1.0;
        for k in 0..dim {
            a[(i, n + 1 + k)] = points[i][k];
            a[(n + 1 + k, i)] = points[i][k];
        }
    }
    let mut b = DVector::<f64>::zeros(size);
    for (i, &v) in values.iter().enumerate() {
        b[i] = v;
    }
    let (x, regularized) = match solve_system(a.clone(), &b, 0.0, n) {
        Some(x) => (x, false),
        None => match solve_system(a, &b, RBF_REGULARIZATION, n) {
            Some(x) => (x, true),
            None => return Err(Error::NonFinite("rbf interpolation system is singular".into())),
        },
    };
    Ok(RbfSurrogate {
        centers: points.to_vec(),
        weights: x.as_slice()[..n].to_vec(),
        tail: x.as_slice()[n..].to_vec(),
        regularized,
    })
}

impl RbfSurrogate {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut v = self.tail[0];
        for (k, xi) in x.iter().enumerate() {
            v += self.tail[k + 1] * xi;
        }
        for (c, w) in self.centers.iter().zip(&self.weights) {
            let r = distance(c, x);
            v += w * r * r * r;
        }
        v
    }
}

/// Objective evaluated by the search. The batch hook lets callers evaluate
/// the initial design concurrently.
pub trait Objective {
    fn evaluate(&self, x: &[f64]) -> Result<f64>;

    fn evaluate_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.evaluate(x)).collect()
    }
}

impl<F: Fn(&[f64]) -> Result<f64>> Objective for F {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self(x)
    }
}

#[derive(Debug, Clone)]
pub struct DycorsOutcome {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub regularized_fits: usize,
    pub final_radius: f64,
}

/// Symmetric Latin hypercube with `n` points in `[0, upper]^dim`.
pub fn symmetric_latin_hypercube<R: Rng>(rng: &mut R, n: usize, dim: usize, upper: f64) -> Vec<Vec<f64>> {
    let half = n / 2;
    let mut levels = vec![vec![0usize; dim]; n];
    for j in 0..dim {
        let mut perm: Vec<usize> = (1..=half).collect();
        perm.shuffle(rng);
        for i in 0..half {
            let (v, mirrored) = if rng.random_bool(0.5) {
                (perm[i], n + 1 - perm[i])
            } else {
                (n + 1 - perm[i], perm[i])
            };
            levels[i][j] = v;
            levels[n - 1 - i][j] = mirrored;
        }
        if n % 2 == 1 {
            levels[half][j] = half + 1;
        }
    }
    let scale = if n > 1 { upper / (n - 1) as f64 } else { 0.0 };
    levels
        .into_iter()
        .map(|row| row.into_iter().map(|v| (v - 1) as f64 * scale).collect())
        .collect()
}

fn affinely_independent(points: &[Vec<f64>], dim: usize) -> bool {
    let m = DMatrix::from_fn(points.len(), dim + 1, |i, j| if j == 0 { 1.0 } else { points[i][j - 1] });
    m.rank(1e-10) == dim + 1
}

/// Perturbation probability after `n` evaluations.
pub fn perturbation_probability(phi0: f64, n: usize, n0: usize, budget: usize) -> f64 {
    if budget <= n0 + 1 {
        return phi0;
    }
    let progress = ((n + 1).saturating_sub(n0) as f64).ln() / ((budget - n0) as f64).ln();
    (phi0 * (1.0 - progress)).max(0.0)
}

/// Minimizes `f` over `[0, upper]^dim`. `forced` points are evaluated along
/// with the initial design.
pub fn dycors_minimize<F: Objective>(f: &F, upper: f64, config: &ResolvedDycors, forced: &[Vec<f64>]) -> Result<DycorsOutcome> {
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut design = symmetric_latin_hypercube(&mut rng, config.n0, dim, upper);
    for _ in 0..100 {
        if affinely_independent(&design, dim) {
            break;
        }
        design = symmetric_latin_hypercube(&mut rng, config.n0, dim, upper);
    }
    for x in forced {
        if !design.contains(x) {
            design.push(x.clone());
        }
    }
    design.truncate(config.max_evaluations);
    let mut values = f.evaluate_batch(&design)?;
    let mut points = design;
    let initial = points.len();

    let argmin = |values: &[f64]| {
        values
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v < values[best] { i } else { best })
    };
    let mut best = argmin(&values);
    let sigma_min = config.sigma0 / 64.0;
    let sigma_max = upper;
    let mut sigma = config.sigma0;
    let (mut successes, mut failures) = (0usize, 0usize);
    let mut regularized_fits = 0;
    let mut iteration = 0usize;

    while points.len() < config.max_evaluations {
        let surrogate = rbf_fit(&points, &values)?;
        regularized_fits += surrogate.regularized as usize;
        let phi = perturbation_probability(config.phi0, points.len(), initial, config.max_evaluations);
        let incumbent = points[best].clone();

        let mut candidates = Vec::with_capacity(config.m);
        for _ in 0..config.m {
            let mut mask: Vec<bool> = (0..dim).map(|_| rng.random_bool(phi.clamp(0.0, 1.0))).collect();
            if !mask.iter().any(|&b| b) {
                mask[rng.random_range(0..dim)] = true;
            }
            let candidate: Vec<f64> = incumbent
                .iter()
                .zip(&mask)
                .map(|(&x, &perturb)| {
                    if perturb {
                        let z: f64 = rng.sample(StandardNormal);
                        (x + sigma * z).clamp(0.0, upper)
                    } else {
                        x
                    }
                })
                .collect();
            candidates.push(candidate);
        }

        let predicted: Vec<f64> = candidates.iter().map(|c| surrogate.evaluate(c)).collect();
        let spacing: Vec<f64> = candidates
            .iter()
            .map(|c| points.iter().map(|p| distance(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let weight = SCORE_WEIGHTS[iteration % SCORE_WEIGHTS.len()];
        let chosen = select_candidate(&predicted, &spacing, weight, 1e-12 * upper.max(1.0));
        let x = candidates.swap_remove(chosen);
        let value = f.evaluate(&x)?;
        points.push(x);
        values.push(value);
        iteration += 1;

        if value < values[best] {
            best = values.len() - 1;
            successes += 1;
            failures = 0;
        } else {
            failures += 1;
            successes = 0;
        }
        if successes >= config.success_tolerance {
            sigma = (2.0 * sigma).min(sigma_max);
            successes = 0;
        }
        if failures >= config.failure_tolerance {
            sigma = (0.5 * sigma).max(sigma_min);
            failures = 0;
        }
    }

    Ok(DycorsOutcome {
        best: points[best].clone(),
        best_value: values[best],
        points,
        values,
        regularized_fits,
        final_radius: sigma,
    })
}

/// Weighted score of normalized surrogate value and normalized closeness to
/// evaluated points; lower is better. Candidates closer than `min_spacing`
/// to an evaluated point are only taken if nothing else is available.
fn select_candidate(predicted: &[f64], spacing: &[f64], weight: f64, min_spacing: f64) -> usize {
    let range = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    };
    let (v_lo, v_hi) = range(predicted);
    let (d_lo, d_hi) = range(spacing);
    let mut best = (0, f64::INFINITY);
    for i in 0..predicted.len() {
        let v = if v_hi > v_lo { (predicted[i] - v_lo) / (v_hi - v_lo) } else { 1.0 };
        let d = if d_hi > d_lo { (d_hi - spacing[i]) / (d_hi - d_lo) } else { 1.0 };
        let mut score = weight * v + (1.0 - weight) * d;
        if spacing[i] < min_spacing {
            score += 2.0;
        }
        if score < best.1 {
            best = (i, score);
        }
    }
    best.0
}

struct PriceObjective<'a> {
    s: &'a Scenario,
    mode: PricingMode,
}

impl Objective for PriceObjective<'_> {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(evaluate(self.s, &self.mode.expand(self.s, x)?, &EvalOptions::default())?.objective)
    }
}

/// DYCORS over every (slot, location) price.
pub fn dycors_solve(s: &Scenario, config: &DycorsConfig) -> Result<SolveReport> {
    dycors_solve_with(s, PricingMode::TimeLocation, config, &PriceObjective { s, mode: PricingMode::TimeLocation })
}

pub fn dycors_solve_mode(s: &Scenario, mode: PricingMode, config: &DycorsConfig) -> Result<SolveReport> {
    dycors_solve_with(s, mode, config, &PriceObjective { s, mode })
}

/// DYCORS with a caller-supplied objective, which must compute `H` of
/// `mode.expand(x)` (the hook exists for concurrent batch evaluation).
pub fn dycors_solve_with<F: Objective>(s: &Scenario, mode: PricingMode, config: &DycorsConfig, f: &F) -> Result<SolveReport> {
    let dim = mode.dimension(s);
    let resolved = config.resolve(dim, s.base_price)?;
    let flat = vec![s.base_price; dim];
    let outcome = dycors_minimize(f, s.base_price, &resolved, &[flat])?;
    let mut trace = Trace::default();
    for &v in &outcome.values {
        trace.push(v);
    }
    let prices: PriceMatrix = mode.expand(s, &outcome.best)?;
    let evaluation = evaluate(s, &prices, &EvalOptions::default())?;
    build_report(
        s,
        "dycors",
        mode,
        prices,
        evaluation,
        trace.into_entries(),
        Some(config.seed),
        Diagnostics::Dycors {
            evaluations: outcome.values.len(),
            regularized_fits: outcome.regularized_fits,
            final_radius: outcome.final_radius,
            discontinuous_objective: s.user_types.iter().any(|u| u.utility.is_linear()),
        },
    )
}
