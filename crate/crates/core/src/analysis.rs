//! Static game analysis: equalizer sets, Nash equilibria, conditional
//! definiteness, the noise-balance condition and its Dirichlet invariant
//! distributions, domination, and separation certificates.
//!
//! Tolerances are stated for payoff matrices pre-scaled so that the largest
//! absolute entry lies in `[1, 10)`; every routine here applies that scaling
//! internally and reports results in the original scale.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Game, ModifiedGame, SimplexPoint};
use crate::linalg::{distance_to_affine, projected_symmetric_eigenvalues, scale_of, solve_affine};
use crate::lp::{maximize, Constraint, LpResult, Relation};

/// Default tolerance for linear-system residuals, LP optima, and strict
/// inequalities, applied after payoff pre-scaling.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimplexLocation {
    Interior,
    Boundary,
    Outside,
}

/// Solution structure of `{y : (Atilde y)_1 = ... = (Atilde y)_n, sum y_i = 1}`.
/// Points may have negative coordinates; `location` classifies the unique
/// solution against the simplex.
#[derive(Debug, Clone, PartialEq)]
pub enum EqualizerSet {
    Empty,
    UniquePoint {
        point: DVector<f64>,
        location: SimplexLocation,
    },
    AffineSubspace {
        point: DVector<f64>,
        basis: Vec<DVector<f64>>,
    },
}

impl EqualizerSet {
    pub fn is_empty(&self) -> bool {
        matches!(self, EqualizerSet::Empty)
    }

    /// Maximum over the solution set of the smallest coordinate, with a point
    /// attaining it. Positive means the set meets the open simplex, zero or
    /// slightly negative means it only touches the boundary, clearly negative
    /// means it misses the simplex entirely. `None` for an empty set.
    pub fn max_min_coordinate(&self) -> Option<(f64, DVector<f64>)> {
        match self {
            EqualizerSet::Empty => None,
            EqualizerSet::UniquePoint { point, .. } => Some((point.min(), point.clone())),
            EqualizerSet::AffineSubspace { point, basis } => {
                let n = point.len();
                let m = basis.len();
                // vars: t+ (m), t- (m), d+, d-; maximize d+ - d-
                // constraints: point_i + sum_k (t+_k - t-_k) basis_k[i] >= d
                let nv = 2 * m + 2;
                let mut objective = vec![0.0; nv];
                objective[2 * m] = 1.0;
                objective[2 * m + 1] = -1.0;
                let mut constraints = Vec::with_capacity(n);
                for i in 0..n {
                    let mut coeffs = vec![0.0; nv];
                    for (k, b) in basis.iter().enumerate() {
                        coeffs[k] = b[i];
                        coeffs[m + k] = -b[i];
                    }
                    coeffs[2 * m] = -1.0;
                    coeffs[2 * m + 1] = 1.0;
                    constraints.push(Constraint::new(coeffs, Relation::Ge, -point[i]));
                }
                match maximize(&objective, &constraints) {
                    LpResult::Optimal { x, objective } => {
                        let mut y = point.clone();
                        for (k, b) in basis.iter().enumerate() {
                            y += b * (x[k] - x[m + k]);
                        }
                        Some((objective, y))
                    }
                    // the min coordinate is bounded above by 1/n, so the LP
                    // cannot be unbounded, and it is trivially feasible
                    _ => unreachable!("max-min-coordinate LP is feasible and bounded"),
                }
            }
        }
    }

    /// Whether the solution set meets the (closed) simplex.
    pub fn intersects_simplex(&self, tol: f64) -> bool {
        match self.max_min_coordinate() {
            None => false,
            Some((delta, _)) => delta >= -tol,
        }
    }

    /// A solution in the open simplex, if one exists.
    pub fn interior_point(&self, tol: f64) -> Option<DVector<f64>> {
        match self.max_min_coordinate() {
            Some((delta, y)) if delta > tol => Some(y),
            _ => None,
        }
    }

    /// A solution that is not a vertex of the simplex, if one exists.
    pub fn non_vertex_solution(&self, tol: f64) -> Option<DVector<f64>> {
        fn near_vertex(y: &DVector<f64>, tol: f64) -> bool {
            let n = y.len();
            (0..n).any(|k| {
                (0..n).all(|i| {
                    let target = if i == k { 1.0 } else { 0.0 };
                    (y[i] - target).abs() <= tol
                })
            })
        }
        match self {
            EqualizerSet::Empty => None,
            EqualizerSet::UniquePoint { point, .. } => {
                (!near_vertex(point, tol)).then(|| point.clone())
            }
            EqualizerSet::AffineSubspace { point, basis } => {
                if !near_vertex(point, tol) {
                    return Some(point.clone());
                }
                // walk along the first direction until off every vertex
                for denominator in 2..(point.len() + 4) {
                    let candidate = point + &basis[0] * (1.0 / denominator as f64);
                    if !near_vertex(&candidate, tol) {
                        return Some(candidate);
                    }
                }
                None
            }
        }
    }

    /// Euclidean distance from `y` to the solution set.
    pub fn distance_from(&self, y: &DVector<f64>) -> Option<f64> {
        match self {
            EqualizerSet::Empty => None,
            EqualizerSet::UniquePoint { point, .. } => Some((y - point).norm()),
            EqualizerSet::AffineSubspace { point, basis } => {
                Some(distance_to_affine(y, point, basis))
            }
        }
    }
}

/// Solves `{(Atilde y)_i = (Atilde y)_n, sum y_i = 1}` and classifies the
/// solution set. Rank decisions use singular values with a relative cutoff.
pub fn equalizer_set(mg: &ModifiedGame, tol: f64) -> EqualizerSet {
    let n = mg.n();
    let scale = scale_of(mg.atilde());
    let at = mg.atilde() / scale;

    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        for j in 0..n {
            a[(i, j)] = at[(i, j)] - at[(n - 1, j)];
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;

    let sol = solve_affine(&a, &b, tol);
    if sol.residual > tol * 100.0 {
        return EqualizerSet::Empty;
    }
    if sol.nullspace.is_empty() {
        let point = sol.particular;
        let min = point.min();
        let location = if min > tol {
            SimplexLocation::Interior
        } else if min < -tol {
            SimplexLocation::Outside
        } else {
            SimplexLocation::Boundary
        };
        EqualizerSet::UniquePoint { point, location }
    } else {
        EqualizerSet::AffineSubspace {
            point: sol.particular,
            basis: sol.nullspace,
        }
    }
}

/// Interior Nash equilibrium of the modified game, when one exists. Any
/// interior equalizer is an interior Nash equilibrium and conversely, so this
/// is the equalizer point when it is unique and interior; `unique` is false
/// when a whole affine piece of equalizers meets the open simplex.
#[derive(Debug, Clone)]
pub struct InteriorNash {
    pub point: SimplexPoint,
    pub unique: bool,
}

pub fn interior_nash(mg: &ModifiedGame, tol: f64) -> Option<InteriorNash> {
    let eq = equalizer_set(mg, tol);
    match &eq {
        EqualizerSet::Empty => None,
        EqualizerSet::UniquePoint { point, location } => {
            if *location == SimplexLocation::Interior {
                Some(InteriorNash {
                    point: normalize_onto_simplex(point),
                    unique: true,
                })
            } else {
                None
            }
        }
        EqualizerSet::AffineSubspace { .. } => eq.interior_point(tol).map(|y| InteriorNash {
            point: normalize_onto_simplex(&y),
            unique: false,
        }),
    }
}

fn normalize_onto_simplex(y: &DVector<f64>) -> SimplexPoint {
    let sum: f64 = y.iter().sum();
    SimplexPoint::new(y / sum).expect("interior solution normalizes onto the simplex")
}

/// Nash test via vertex inequalities: `p' Atilde p >= (Atilde p)_j - tol` for
/// every vertex `j` (payoffs are affine in the opponent mix, so vertices
/// suffice).
pub fn is_nash(mg: &ModifiedGame, p: &SimplexPoint, tol: f64) -> bool {
    let tol_s = tol * scale_of(mg.atilde());
    let ap = mg.atilde() * p.coords();
    let own = p.coords().dot(&ap);
    ap.iter().all(|&v| own >= v - tol_s)
}

/// Vertices that are Nash equilibria of the modified game.
pub fn pure_nash(mg: &ModifiedGame, tol: f64) -> Vec<usize> {
    (0..mg.n())
        .filter(|&k| is_nash(mg, &SimplexPoint::vertex(mg.n(), k), tol))
        .collect()
}

/// Strategies `k` with `atilde_kk > atilde_jk` for every `j != k` (strict pure
/// Nash equilibria of the modified game).
pub fn strict_pure_nash(mg: &ModifiedGame, tol: f64) -> Vec<usize> {
    let at = mg.atilde();
    let tol_s = tol * scale_of(at);
    (0..mg.n())
        .filter(|&k| (0..mg.n()).all(|j| j == k || at[(k, k)] > at[(j, k)] + tol_s))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefinitenessKind {
    CondPositiveDefinite,
    CondNegativeDefinite,
    CondSemidefinite,
    CondIndefinite,
}

/// Sign of the quadratic form `y' M y` restricted to the zero-sum hyperplane,
/// labelled from the `n-1` eigenvalues of the projected symmetric part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessLabel {
    pub kind: DefinitenessKind,
    pub eigenvalues: Vec<f64>,
}

pub fn conditional_definiteness(m: &DMatrix<f64>, tol: f64) -> DefinitenessLabel {
    let eigenvalues = projected_symmetric_eigenvalues(m);
    let threshold = tol * scale_of(m);
    let all_pos = eigenvalues.iter().all(|&e| e > threshold);
    let all_neg = eigenvalues.iter().all(|&e| e < -threshold);
    let any_pos = eigenvalues.iter().any(|&e| e > threshold);
    let any_neg = eigenvalues.iter().any(|&e| e < -threshold);
    let kind = if all_pos {
        DefinitenessKind::CondPositiveDefinite
    } else if all_neg {
        DefinitenessKind::CondNegativeDefinite
    } else if any_pos && any_neg {
        DefinitenessKind::CondIndefinite
    } else {
        DefinitenessKind::CondSemidefinite
    };
    DefinitenessLabel { kind, eigenvalues }
}

/// Common ratio `gamma` with
/// `a_ij + a_ji - a_ii - a_jj = (gamma/2)(sigma_i^2 + sigma_j^2)` over all
/// pairs, or `None` when the pairwise ratios disagree. For `n = 2` there is a
/// single pair, so a value is always returned. The ratios are identical for
/// the effective and the modified payoff matrix.
pub fn gamma_balance(game: &Game, tol: f64) -> Option<f64> {
    let a = game.effective_payoff();
    let s = game.sigma();
    let n = game.n();
    let mut gammas = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let excess = a[(i, j)] + a[(j, i)] - a[(i, i)] - a[(j, j)];
            gammas.push(2.0 * excess / (s[i] * s[i] + s[j] * s[j]));
        }
    }
    let mean = gammas.iter().sum::<f64>() / gammas.len() as f64;
    if n == 2 {
        return Some(mean);
    }
    let spread = gammas.iter().cloned().fold(f64::MIN, f64::max)
        - gammas.iter().cloned().fold(f64::MAX, f64::min);
    (spread <= tol * (1.0 + mean.abs())).then_some(mean)
}

#[derive(Debug, Error)]
#[error("alpha_i > 0 for all i: alpha_{index} is {value}")]
pub struct DirichletParamsError {
    pub index: usize,
    pub value: f64,
}

/// Dirichlet parameter vector `alpha` with concentration `gamma = sum alpha_i`.
/// The density `prod x_i^(alpha_i - 1)` is integrable iff every `alpha_i > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    alpha: Vec<f64>,
    gamma: f64,
}

impl DirichletParams {
    pub fn new(alpha: DVector<f64>) -> Result<Self, DirichletParamsError> {
        for (index, &value) in alpha.iter().enumerate() {
            if !(value > 0.0) {
                return Err(DirichletParamsError { index, value });
            }
        }
        let gamma = alpha.iter().sum();
        Ok(DirichletParams {
            alpha: alpha.iter().copied().collect(),
            gamma,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `E U_i = alpha_i / gamma`.
    pub fn mean(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a / self.gamma).collect()
    }

    /// `Var U_i = alpha_i (gamma - alpha_i) / (gamma^2 (gamma + 1))`.
    pub fn variance(&self) -> Vec<f64> {
        let g = self.gamma;
        self.alpha
            .iter()
            .map(|a| a * (g - a) / (g * g * (g + 1.0)))
            .collect()
    }
}

/// Invariant Dirichlet distribution of the replicator process: exists iff the
/// balance condition holds with `gamma > 0` and the modified game has an
/// interior Nash equilibrium `p`; then `alpha = gamma p`.
pub fn dirichlet_invariant(game: &Game, tol: f64) -> Option<DirichletParams> {
    let gamma = gamma_balance(game, tol)?;
    if gamma <= tol {
        return None;
    }
    let nash = interior_nash(&game.modified(), tol)?;
    DirichletParams::new(nash.point.coords() * gamma).ok()
}

/// Which clause certifies `prod x_i^(alpha_i - 1)` as an invariant density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityClause {
    /// Balance with `gamma = sum alpha_i != -1` and `Atilde alpha`
    /// proportional to the all-ones vector (plus an anchoring identity when
    /// `gamma = 0`).
    EqualizedAlpha,
    /// `gamma = -1` with the per-strategy identity
    /// `sigma_k^2/2 + (1/2) sum sigma_i^2 alpha_i^2 + alpha_k sigma_k^2
    ///  - atilde_kk - sum_i alpha_i atilde_ik = 0`.
    NegativeUnitMass,
}

/// Certifies whether `prod x_i^(alpha_i - 1)` is an invariant density for the
/// process (the density need not be integrable; `alpha` may have nonpositive
/// entries). Returns the clause that fired.
pub fn invariant_density_certificate(
    game: &Game,
    alpha: &DVector<f64>,
    tol: f64,
) -> Option<DensityClause> {
    let mg = game.modified();
    let at = mg.atilde();
    let s = game.sigma();
    let n = game.n();
    let gamma: f64 = alpha.iter().sum();
    let scale = scale_of(at);
    let alpha_scale = 1.0 + alpha.amax();
    let tol_r = tol * scale.max(1.0) * alpha_scale;

    if (gamma + 1.0).abs() > tol {
        // equalized-alpha clause
        let balance = gamma_balance(game, tol)?;
        if (balance - gamma).abs() > tol * (1.0 + gamma.abs()) {
            return None;
        }
        let a_alpha = at * alpha;
        let spread = a_alpha.max() - a_alpha.min();
        if spread > tol_r {
            return None;
        }
        if gamma.abs() <= tol {
            let mut anchor = 0.0;
            for i in 0..n {
                anchor += at[(i, i)] * alpha[i] - 0.5 * s[i] * s[i] * alpha[i] * alpha[i];
            }
            if (a_alpha[0] - anchor).abs() > tol_r {
                return None;
            }
        }
        Some(DensityClause::EqualizedAlpha)
    } else {
        let quad: f64 = (0..n).map(|i| s[i] * s[i] * alpha[i] * alpha[i]).sum();
        for k in 0..n {
            let col: f64 = (0..n).map(|i| alpha[i] * at[(i, k)]).sum();
            let lhs = 0.5 * s[k] * s[k] + 0.5 * quad + alpha[k] * s[k] * s[k] - at[(k, k)] - col;
            if lhs.abs() > tol_r {
                return None;
            }
        }
        Some(DensityClause::NegativeUnitMass)
    }
}

/// Outcome of the reciprocal-density analysis: whether
/// `a_ij + a_ji - a_ii - a_jj = 0` for all pairs (so `prod x_i^(-1)` is
/// invariant), and if so whether a zero-sum direction `beta` yields a second,
/// non-proportional power density — which certifies transience.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondDensityReport {
    pub balanced: bool,
    pub beta: Option<Vec<f64>>,
    pub second_alpha: Option<Vec<f64>>,
    pub transient: bool,
}

pub fn second_density_analysis(game: &Game, tol: f64) -> SecondDensityReport {
    let a = game.effective_payoff();
    let n = game.n();
    let scale = scale_of(&a);
    let tol_s = tol * scale.max(1.0);

    let balanced = (0..n).all(|i| {
        (i + 1..n).all(|j| (a[(i, j)] + a[(j, i)] - a[(i, i)] - a[(j, j)]).abs() <= tol_s)
    });
    if !balanced {
        return SecondDensityReport {
            balanced: false,
            beta: None,
            second_alpha: None,
            transient: false,
        };
    }

    let mg = game.modified();
    let at = mg.atilde() / scale_of(mg.atilde());
    // homogeneous system: sum beta_i = 0, (Atilde beta)_i - (Atilde beta)_n = 0
    let mut sys = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        for j in 0..n {
            sys[(i, j)] = at[(i, j)] - at[(n - 1, j)];
        }
    }
    for j in 0..n {
        sys[(n - 1, j)] = 1.0;
    }
    let sol = solve_affine(&sys, &DVector::zeros(n), tol);

    let atilde = mg.atilde();
    let s = mg.sigma();
    for beta in &sol.nullspace {
        let left = atilde.transpose() * beta; // beta' Atilde
        if left.amax() > tol * scale_of(atilde).max(1.0) * 10.0 {
            let denom: f64 = (0..n).map(|i| s[i] * s[i] * beta[i] * beta[i]).sum();
            let c = 2.0 * left[0] / denom;
            let alpha = beta * c;
            return SecondDensityReport {
                balanced: true,
                beta: Some(beta.iter().copied().collect()),
                second_alpha: Some(alpha.iter().copied().collect()),
                transient: true,
            };
        }
    }
    SecondDensityReport {
        balanced: true,
        beta: None,
        second_alpha: None,
        transient: false,
    }
}

/// A mixed strategy that strictly dominates strategy `k`, with the optimal
/// worst-column margin, found by the small LP
/// `max delta : sum q = 1, q >= 0, (q' Atilde)_j >= atilde_kj + delta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominatingMix {
    pub mix: Vec<f64>,
    pub margin: f64,
}

pub fn strictly_dominated(mg: &ModifiedGame, k: usize, tol: f64) -> Option<DominatingMix> {
    let n = mg.n();
    assert!(k < n, "strategy index out of range");
    let scale = scale_of(mg.atilde());
    let at = mg.atilde() / scale;

    // vars: q_1..q_n, d+, d-
    let nv = n + 2;
    let mut objective = vec![0.0; nv];
    objective[n] = 1.0;
    objective[n + 1] = -1.0;
    let mut constraints = Vec::with_capacity(n + 1);
    constraints.push(Constraint::new(
        {
            let mut c = vec![0.0; nv];
            c[..n].fill(1.0);
            c
        },
        Relation::Eq,
        1.0,
    ));
    for j in 0..n {
        let mut c = vec![0.0; nv];
        for i in 0..n {
            c[i] = at[(i, j)];
        }
        c[n] = -1.0;
        c[n + 1] = 1.0;
        constraints.push(Constraint::new(c, Relation::Ge, at[(k, j)]));
    }
    match maximize(&objective, &constraints) {
        LpResult::Optimal { x, objective } => (objective > tol).then(|| DominatingMix {
            mix: x[..n].to_vec(),
            margin: objective * scale,
        }),
        // q = e_k is always feasible with delta = 0, and delta is bounded
        _ => unreachable!("domination LP is feasible and bounded"),
    }
}

/// A zero-sum direction `c` with `c' Atilde x > 0` on the whole simplex — a
/// transience witness. Exists iff the equalizer set misses the simplex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparatingDirection {
    pub direction: Vec<f64>,
    pub min_payoff: f64,
}

pub fn separating_direction(mg: &ModifiedGame, tol: f64) -> Option<SeparatingDirection> {
    let n = mg.n();
    let scale = scale_of(mg.atilde());
    let at = mg.atilde() / scale;

    // vars: u_1..u_n, v_1..v_n, d+, d- with c = u - v, |c_i| <= 1
    let nv = 2 * n + 2;
    let mut objective = vec![0.0; nv];
    objective[2 * n] = 1.0;
    objective[2 * n + 1] = -1.0;
    let mut constraints = Vec::with_capacity(3 * n + 1);
    let mut sum_row = vec![0.0; nv];
    for i in 0..n {
        sum_row[i] = 1.0;
        sum_row[n + i] = -1.0;
    }
    constraints.push(Constraint::new(sum_row, Relation::Eq, 0.0));
    for i in 0..n {
        let mut c = vec![0.0; nv];
        c[i] = 1.0;
        constraints.push(Constraint::new(c, Relation::Le, 1.0));
        let mut c = vec![0.0; nv];
        c[n + i] = 1.0;
        constraints.push(Constraint::new(c, Relation::Le, 1.0));
    }
    for j in 0..n {
        let mut c = vec![0.0; nv];
        for i in 0..n {
            c[i] = at[(i, j)];
            c[n + i] = -at[(i, j)];
        }
        c[2 * n] = -1.0;
        c[2 * n + 1] = 1.0;
        constraints.push(Constraint::new(c, Relation::Ge, 0.0));
    }
    match maximize(&objective, &constraints) {
        LpResult::Optimal { x, objective } => (objective > tol).then(|| {
            let direction: Vec<f64> = (0..n).map(|i| x[i] - x[n + i]).collect();
            SeparatingDirection {
                direction,
                min_payoff: objective * scale,
            }
        }),
        // c = 0 is feasible with delta = 0; the box bounds delta
        _ => unreachable!("separation LP is feasible and bounded"),
    }
}
