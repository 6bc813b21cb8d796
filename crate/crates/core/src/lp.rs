//! Minimal dense phase-one/phase-two simplex solver. The linear programs in
//! this crate have at most `2n + 2` variables and a handful of constraints,
//! so a textbook tableau with Bland's rule is plenty.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Constraint {
            coeffs,
            relation,
            rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

const PIVOT_EPS: f64 = 1e-10;
const FEAS_EPS: f64 = 1e-8;

/// Maximizes `objective . x` subject to `constraints` and `x >= 0`.
pub fn maximize(objective: &[f64], constraints: &[Constraint]) -> LpResult {
    let n = objective.len();
    let m = constraints.len();

    // Normalize to nonnegative right-hand sides.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = constraints
        .iter()
        .map(|c| {
            assert_eq!(c.coeffs.len(), n, "constraint arity mismatch");
            if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();

    let n_slack = rows
        .iter()
        .filter(|r| matches!(r.1, Relation::Le | Relation::Ge))
        .count();
    let n_art = rows
        .iter()
        .filter(|r| matches!(r.1, Relation::Ge | Relation::Eq))
        .count();
    let total = n + n_slack + n_art;

    // tableau[i] = row of length total + 1, last entry rhs
    let mut tableau = vec![vec![0.0; total + 1]; m];
    let mut basis = vec![usize::MAX; m];
    let art_start = n + n_slack;
    let mut slack_idx = n;
    let mut art_idx = art_start;

    for (i, (coeffs, relation, rhs)) in rows.drain(..).enumerate() {
        tableau[i][..n].copy_from_slice(&coeffs);
        tableau[i][total] = rhs;
        match relation {
            Relation::Le => {
                tableau[i][slack_idx] = 1.0;
                basis[i] = slack_idx;
                slack_idx += 1;
            }
            Relation::Ge => {
                tableau[i][slack_idx] = -1.0;
                slack_idx += 1;
                tableau[i][art_idx] = 1.0;
                basis[i] = art_idx;
                art_idx += 1;
            }
            Relation::Eq => {
                tableau[i][art_idx] = 1.0;
                basis[i] = art_idx;
                art_idx += 1;
            }
        }
    }

    if n_art > 0 {
        // Phase 1: maximize -(sum of artificials).
        let mut phase1_cost = vec![0.0; total];
        for c in phase1_cost.iter_mut().skip(art_start) {
            *c = -1.0;
        }
        let feasible = run_simplex(&mut tableau, &mut basis, &phase1_cost, total, None);
        match feasible {
            SimplexOutcome::Optimal(obj) => {
                if obj < -FEAS_EPS {
                    return LpResult::Infeasible;
                }
            }
            SimplexOutcome::Unbounded => unreachable!("phase 1 objective is bounded"),
        }
        // Drive remaining artificials out of the basis where possible.
        for i in 0..m {
            if basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| tableau[i][j].abs() > PIVOT_EPS) {
                    pivot(&mut tableau, &mut basis, i, j);
                }
                // otherwise the row is redundant; the artificial stays basic at 0
            }
        }
    }

    // Phase 2 over the original objective, artificial columns barred.
    let mut cost = vec![0.0; total];
    cost[..n].copy_from_slice(objective);
    match run_simplex(&mut tableau, &mut basis, &cost, art_start, None) {
        SimplexOutcome::Optimal(obj) => {
            let mut x = vec![0.0; n];
            for (i, &b) in basis.iter().enumerate() {
                if b < n {
                    x[b] = tableau[i][total];
                }
            }
            LpResult::Optimal { x, objective: obj }
        }
        SimplexOutcome::Unbounded => LpResult::Unbounded,
    }
}

enum SimplexOutcome {
    Optimal(f64),
    Unbounded,
}

/// Runs simplex iterations in place. Columns `>= enter_limit` never enter the
/// basis. Returns the objective value of the final basic solution.
fn run_simplex(
    tableau: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    enter_limit: usize,
    max_iters: Option<usize>,
) -> SimplexOutcome {
    let m = tableau.len();
    let total = cost.len();
    let rhs_col = total;
    let limit = max_iters.unwrap_or(10_000);

    for _ in 0..limit {
        // reduced costs: r_j = c_j - sum_i c_{basis i} T_ij
        let mut entering = None;
        for j in 0..enter_limit {
            if basis.contains(&j) {
                continue;
            }
            let mut r = cost[j];
            for i in 0..m {
                let cb = cost[basis[i]];
                if cb != 0.0 {
                    r -= cb * tableau[i][j];
                }
            }
            if r > PIVOT_EPS {
                entering = Some(j); // Bland: first improving index
                break;
            }
        }
        let Some(j) = entering else {
            let mut obj = 0.0;
            for i in 0..m {
                obj += cost[basis[i]] * tableau[i][rhs_col];
            }
            return SimplexOutcome::Optimal(obj);
        };

        // ratio test, Bland tie-break on the leaving basic variable
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = tableau[i][j];
            if a > PIVOT_EPS {
                let ratio = tableau[i][rhs_col] / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_EPS
                            || (ratio < lr + PIVOT_EPS && basis[i] < basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((i, _)) = leave else {
            return SimplexOutcome::Unbounded;
        };
        pivot(tableau, basis, i, j);
    }
    // Bland's rule precludes cycling; hitting the cap means something is off.
    panic!("simplex iteration limit exceeded");
}

fn pivot(tableau: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let m = tableau.len();
    let width = tableau[0].len();
    let p = tableau[row][col];
    for v in tableau[row].iter_mut() {
        *v /= p;
    }
    for i in 0..m {
        if i != row {
            let f = tableau[i][col];
            if f != 0.0 {
                for j in 0..width {
                    let t = tableau[row][j];
                    tableau[i][j] -= f * t;
                }
            }
        }
    }
    basis[row] = col;
}
