use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tlap_core::lp::LpProblem;

/// Random LP with up to six boxed variables, a few inequalities and equalities.
pub fn random_bounded_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.random_range(1..=6);
    let mut lp = LpProblem::new(n);
    for j in 0..n {
        lp.objective[j] = rng.random_range(-1.0..1.0);
        lp.set_bounds(j, rng.random_range(-2.0..0.0), rng.random_range(0.5..3.0));
    }
    let center: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let row = |rng: &mut ChaCha8Rng| -> Vec<(usize, f64)> { (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect() };
    let at = |terms: &[(usize, f64)]| terms.iter().map(|&(j, a)| a * center[j]).sum::<f64>();
    for _ in 0..rng.random_range(0..5) {
        let terms = row(rng);
        let rhs = at(&terms) + rng.random_range(-0.3..1.0);
        lp.add_le(terms, rhs);
    }
    for _ in 0..rng.random_range(0..n.min(3)) {
        let terms = row(rng);
        let rhs = at(&terms);
        lp.add_eq(terms, rhs);
    }
    lp
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// Minimum over every basic feasible point of a bounded LP; `None` when infeasible.
pub fn vertex_oracle(lp: &LpProblem) -> Option<f64> {
    let n = lp.num_vars();
    let dense = |terms: &[(usize, f64)]| {
        let mut r = vec![0.0; n];
        for &(j, a) in terms {
            r[j] += a;
        }
        r
    };
    let eqs: Vec<(Vec<f64>, f64)> = lp.equalities.iter().map(|r| (dense(&r.terms), r.rhs)).collect();
    let mut ineqs: Vec<(Vec<f64>, f64)> = lp.inequalities.iter().map(|r| (dense(&r.terms), r.rhs)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        ineqs.push((e.clone(), lp.upper[j]));
        e[j] = -1.0;
        ineqs.push((e, -lp.lower[j]));
    }
    if eqs.len() > n {
        return None;
    }
    let mut best: Option<f64> = None;
    for active in combinations(ineqs.len(), n - eqs.len()) {
        let rows: Vec<&(Vec<f64>, f64)> = eqs.iter().chain(active.iter().map(|&i| &ineqs[i])).collect();
        let Some(z) = solve_dense(rows.iter().map(|r| r.0.clone()).collect(), rows.iter().map(|r| r.1).collect()) else {
            continue;
        };
        if lp.infeasibility(&z) <= 1e-9 {
            let v = lp.objective_value(&z);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}
