//! Dense two-phase simplex with Bland's rule.
//!
//! Problems are stated as `min c'z  s.t.  A z = b,  G z <= h,  lower <= z <= upper`
//! and converted to standard form internally.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-10;
pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const MAX_PIVOTS: usize = 1_000_000;

/// A sparse constraint row `sum coef * z[index] (= or <=) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub equalities: Vec<LpRow>,
    pub inequalities: Vec<LpRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// `n` variables with zero cost and bounds `[0, inf)`.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends a variable and returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(LpRow { terms, rhs });
    }

    pub fn add_le(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.inequalities.push(LpRow { terms, rhs });
    }

    pub fn add_ge(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        let terms = terms.into_iter().map(|(j, a)| (j, -a)).collect();
        self.inequalities.push(LpRow { terms, rhs: -rhs });
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, z)| c * z).sum()
    }

    /// Largest violation of any constraint or bound at `z`.
    pub fn infeasibility(&self, z: &[f64]) -> f64 {
        let dot = |row: &LpRow| row.terms.iter().map(|&(j, a)| a * z[j]).sum::<f64>();
        let mut worst: f64 = 0.0;
        for row in &self.equalities {
            worst = worst.max((dot(row) - row.rhs).abs());
        }
        for row in &self.inequalities {
            worst = worst.max(dot(row) - row.rhs);
        }
        for (j, &v) in z.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidConfig("bound vectors do not match the variable count".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("LP objective".into()));
        }
        for row in self.equalities.iter().chain(&self.inequalities) {
            if !row.rhs.is_finite() || row.terms.iter().any(|&(j, a)| j >= n || !a.is_finite()) {
                return Err(Error::InvalidConfig("LP row references a missing variable or a non-finite value".into()));
            }
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidConfig(alloc::format!("variable {j} has invalid bounds")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point in the original variables; empty unless optimal.
    pub primal: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Returns the primal point, mapping infeasible/unbounded to errors.
    pub fn into_optimal(self) -> Result<(Vec<f64>, f64)> {
        match self.status {
            LpStatus::Optimal => Ok((self.primal, self.objective)),
            LpStatus::Infeasible => Err(Error::LpInfeasible),
            LpStatus::Unbounded => Err(Error::LpUnbounded),
        }
    }
}

/// How an original variable is expressed through nonnegative standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `z = offset + s[col]`
    Shifted { col: usize, offset: f64 },
    /// `z = offset - s[col]`
    Mirrored { col: usize, offset: f64 },
    /// `z = s[pos] - s[neg]`
    Free { pos: usize, neg: usize },
    /// `lower == upper`
    Fixed(f64),
}

struct StandardForm {
    /// Dense rows over structural + slack columns.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    /// For each row, a slack column usable as an initial basic variable.
    slack_basis: Vec<Option<usize>>,
    maps: Vec<VarMap>,
}

fn standard_form(p: &LpProblem) -> StandardForm {
    let n = p.num_vars();
    let mut maps = Vec::with_capacity(n);
    let mut structural = 0usize;
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (p.lower[j], p.upper[j]);
        let map = if lo == hi {
            VarMap::Fixed(lo)
        } else if lo.is_finite() {
            let col = structural;
            structural += 1;
            if hi.is_finite() {
                upper_rows.push((col, hi - lo));
            }
            VarMap::Shifted { col, offset: lo }
        } else if hi.is_finite() {
            let col = structural;
            structural += 1;
            VarMap::Mirrored { col, offset: hi }
        } else {
            let pos = structural;
            structural += 2;
            VarMap::Free { pos, neg: pos + 1 }
        };
        maps.push(map);
    }

    let num_le = p.inequalities.len() + upper_rows.len();
    let width = structural + num_le;
    let mut cost = vec![0.0; width];
    for (j, map) in maps.iter().enumerate() {
        let c = p.objective[j];
        match *map {
            VarMap::Shifted { col, .. } => {
                cost[col] += c;
            }
            VarMap::Mirrored { col, .. } => {
                cost[col] -= c;
            }
            VarMap::Free { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
            VarMap::Fixed(_) => {}
        }
    }

    let expand = |row: &LpRow| {
        let mut dense = vec![0.0; width];
        let mut rhs = row.rhs;
        for &(j, a) in &row.terms {
            match maps[j] {
                VarMap::Shifted { col, offset } => {
                    dense[col] += a;
                    rhs -= a * offset;
                }
                VarMap::Mirrored { col, offset } => {
                    dense[col] -= a;
                    rhs -= a * offset;
                }
                VarMap::Free { pos, neg } => {
                    dense[pos] += a;
                    dense[neg] -= a;
                }
                VarMap::Fixed(v) => rhs -= a * v,
            }
        }
        (dense, rhs)
    };

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut slack_basis = Vec::new();
    for row in &p.equalities {
        let (dense, b) = expand(row);
        rows.push(dense);
        rhs.push(b);
        slack_basis.push(None);
    }
    let mut slack = structural;
    let le_rows = p.inequalities.iter().map(|r| expand(r)).chain(upper_rows.iter().map(|&(col, ub)| {
        let mut dense = vec![0.0; width];
        dense[col] = 1.0;
        (dense, ub)
    }));
    for (mut dense, b) in le_rows {
        dense[slack] = 1.0;
        rows.push(dense);
        rhs.push(b);
        slack_basis.push(Some(slack));
        slack += 1;
    }
    for i in 0..rows.len() {
        if rhs[i] < 0.0 {
            rhs[i] = -rhs[i];
            for v in rows[i].iter_mut() {
                *v = -*v;
            }
            slack_basis[i] = None;
        }
    }
    StandardForm {
        rows,
        rhs,
        cost,
        slack_basis,
        maps,
    }
}

/// Simplex tableau over `width` columns; the last entry of each row is the rhs.
struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) -> Result<()> {
        self.pivots += 1;
        if self.pivots > MAX_PIVOTS {
            return Err(Error::LpStalled(self.pivots));
        }
        let inv = 1.0 / self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v *= inv;
        }
        self.rows[r][c] = 1.0;
        let pivot_row = core::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.rows[r] = pivot_row;
        self.basis[r] = c;
        Ok(())
    }

    /// Minimizes `cost' s` over columns `< active`, Bland's rule throughout.
    fn optimize(&mut self, cost: &[f64], active: usize) -> Result<Outcome> {
        loop {
            // reduced costs c_j - c_B' B^-1 a_j, entering = smallest index with d_j < 0
            let mut reduced = cost[..active].to_vec();
            for (row, &b) in self.rows.iter().zip(&self.basis) {
                let cb = cost[b];
                if cb != 0.0 {
                    for (d, &a) in reduced.iter_mut().zip(row) {
                        *d -= cb * a;
                    }
                }
            }
            for &b in &self.basis {
                if b < active {
                    reduced[b] = 0.0;
                }
            }
            let entering = reduced.iter().position(|&d| d < -PIVOT_TOL);
            let Some(c) = entering else {
                return Ok(Outcome::Optimal);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    leaving = match leaving {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best || (ratio == best && self.basis[i] < self.basis[k]) {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leaving else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(r, c)?;
        }
    }
}

/// Solves `prob` to optimality, or reports infeasibility/unboundedness.
pub fn solve_lp(prob: &LpProblem) -> Result<LpSolution> {
    prob.check()?;
    let sf = standard_form(prob);
    let m = sf.rows.len();
    let structural = sf.cost.len();

    // artificial columns for rows lacking a usable slack
    let artificial_rows: Vec<usize> = (0..m).filter(|&i| sf.slack_basis[i].is_none()).collect();
    let width = structural + artificial_rows.len();
    let mut rows = Vec::with_capacity(m);
    let mut basis = vec![0usize; m];
    for i in 0..m {
        let mut row = vec![0.0; width + 1];
        row[..structural].copy_from_slice(&sf.rows[i]);
        row[width] = sf.rhs[i];
        rows.push(row);
        if let Some(s) = sf.slack_basis[i] {
            basis[i] = s;
        }
    }
    for (k, &i) in artificial_rows.iter().enumerate() {
        rows[i][structural + k] = 1.0;
        basis[i] = structural + k;
    }
    let mut tab = Tableau {
        rows,
        basis,
        width,
        pivots: 0,
    };

    if !artificial_rows.is_empty() {
        let mut phase1 = vec![0.0; width];
        for v in &mut phase1[structural..] {
            *v = 1.0;
        }
        tab.optimize(&phase1, width)?;
        let infeasibility: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= structural)
            .map(|i| tab.rhs(i))
            .sum();
        let scale = sf.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        if infeasibility > FEASIBILITY_TOL * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                primal: Vec::new(),
                objective: f64::NAN,
                iterations: tab.pivots,
            });
        }
        // drive remaining artificials out; rows where that is impossible are redundant
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= structural {
                let col = (0..structural).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL);
                match col {
                    Some(j) => {
                        tab.pivot(i, j)?;
                        i += 1;
                    }
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    let mut phase2 = sf.cost.clone();
    phase2.resize(width, 0.0);
    if let Outcome::Unbounded = tab.optimize(&phase2, structural)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            primal: Vec::new(),
            objective: f64::NEG_INFINITY,
            iterations: tab.pivots,
        });
    }

    let mut s = vec![0.0; structural];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < structural {
            s[b] = tab.rhs(i).max(0.0);
        }
    }
    let primal: Vec<f64> = sf
        .maps
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { col, offset } => offset + s[col],
            VarMap::Mirrored { col, offset } => offset - s[col],
            VarMap::Free { pos, neg } => s[pos] - s[neg],
            VarMap::Fixed(v) => v,
        })
        .collect();
    let objective = prob.objective_value(&primal);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        primal,
        objective,
        iterations: tab.pivots,
    })
}
