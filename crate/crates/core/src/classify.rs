//! Long-run classification of the replicator process, with an explicit
//! machine-checkable certificate for every label.
//!
//! The rules run in a fixed precedence: exact separation and second-density
//! certificates first, then conditional definiteness, then the noise-balance
//! branch with its Dirichlet invariant, then the special two-strategy and
//! cyclic patterns. Rules that only *exclude* positive recurrence leave a
//! pending label that later, sharper patterns may refine (boundary ties are
//! null recurrent, the symmetric cyclic game is conjectured null recurrent).

use serde::{Deserialize, Serialize};

use crate::analysis::{
    conditional_definiteness, dirichlet_invariant, equalizer_set, gamma_balance, interior_nash,
    second_density_analysis, separating_direction, strict_pure_nash, strictly_dominated,
    DefinitenessKind, DefinitenessLabel, EqualizerSet, SimplexLocation,
};
use crate::game::Game;
use crate::linalg::scale_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    PositiveRecurrent,
    NullRecurrent,
    ConjecturedNullRecurrent,
    Transient,
    NotPositiveRecurrent,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// No equalizer strategy anywhere in the simplex; a zero-sum direction
    /// earns strictly positive modified payoff against every opponent.
    NoEqualizerInSimplex,
    /// Reciprocal density plus a second, non-proportional power density.
    SecondInvariantDensity,
    /// Conditionally positive definite with a non-vertex equalizer solution.
    PositiveDefiniteEqualizer,
    /// Conditionally positive definite with at most three strategies.
    PositiveDefiniteLowDim,
    /// Balance condition with gamma > 0 and an interior equilibrium: the
    /// invariant law is Dirichlet.
    DirichletInvariant,
    /// Balance condition with gamma < 0 and at most three strategies.
    NegativeGammaLowDim,
    /// Balance condition with gamma < 0 and a non-vertex equalizer in the
    /// simplex.
    NegativeGammaEqualizer,
    /// Balance condition holds but positive recurrence needs an interior
    /// equilibrium and gamma > 0.
    GammaBalanceExcludesPositive,
    /// The modified game is zero-sum (skew-symmetric).
    ZeroSum,
    /// An affine piece of equalizers crosses the open simplex.
    LineOfEquilibria,
    /// Two strategies, each earning more against the other than against
    /// itself.
    CoexistencePair,
    /// Two strategies, each a strict equilibrium.
    BistablePair,
    /// Two strategies, one strictly dominant.
    DominancePair,
    /// Two strategies with a tied column and a strict gap in the other.
    BoundaryTiePair,
    /// Symmetric cyclic three-strategy game with equal noise intensities.
    CyclicSymmetricConjecture,
    /// A column of the modified game is proportional to the all-ones vector.
    ConstantColumn,
    NoRule,
}

/// Witness data backing a certificate; only the fields relevant to the rule
/// are populated.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equalizer_point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separating_direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub definiteness_eigenvalues: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirichlet_alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub rule: Rule,
    pub witness: Witness,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqualizerSummary {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<SimplexLocation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<f64>>>,
}

impl EqualizerSummary {
    pub fn from_set(eq: &EqualizerSet) -> Self {
        match eq {
            EqualizerSet::Empty => EqualizerSummary {
                kind: "empty".into(),
                point: None,
                location: None,
                basis: None,
            },
            EqualizerSet::UniquePoint { point, location } => EqualizerSummary {
                kind: "unique_point".into(),
                point: Some(point.iter().copied().collect()),
                location: Some(*location),
                basis: None,
            },
            EqualizerSet::AffineSubspace { point, basis } => EqualizerSummary {
                kind: "affine_subspace".into(),
                point: Some(point.iter().copied().collect()),
                location: None,
                basis: Some(basis.iter().map(|b| b.iter().copied().collect()).collect()),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominatedSummary {
    /// 1-based strategy index
    pub strategy: usize,
    pub dominator: Vec<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirichletSummary {
    pub alpha: Vec<f64>,
    pub gamma: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Everything the classifier computed along the way, attached to every
/// report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub equalizer: EqualizerSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interior_nash: Option<Vec<f64>>,
    pub interior_nash_unique: Option<bool>,
    pub definiteness: DefinitenessLabel,
    pub skew_symmetric: bool,
    /// 1-based indices of modified-game columns proportional to the all-ones
    /// vector
    pub constant_columns: Vec<usize>,
    pub second_density: crate::analysis::SecondDensityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separating_direction: Option<Vec<f64>>,
    pub dominated: Vec<DominatedSummary>,
    /// 1-based indices of strict pure equilibria of the modified game
    pub strict_pure_nash: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<DirichletSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub label: Label,
    pub certificate: Certificate,
    /// 1-based indices of stochastically asymptotically stable vertices
    pub stable_vertices: Vec<usize>,
    /// 1-based indices of strategies driven to zero almost surely
    pub vanishing_strategies: Vec<usize>,
    pub diagnostics: Diagnostics,
}

/// Applies the classification battery. See the module documentation for the
/// precedence.
pub fn classify(game: &Game, tol: f64) -> ClassificationReport {
    let n = game.n();
    let mg = game.modified();
    let a_eff = game.effective_payoff();
    let at = mg.atilde();
    let tol_s = tol * scale_of(at).max(1.0);

    let eq = equalizer_set(&mg, tol);
    let sep = separating_direction(&mg, tol);
    let second = second_density_analysis(game, tol);
    let definiteness = conditional_definiteness(&a_eff, tol);
    let gamma = gamma_balance(game, tol);
    let nash = interior_nash(&mg, tol);
    let dirichlet = dirichlet_invariant(game, tol);

    let skew_symmetric = (0..n).all(|i| (0..n).all(|j| (at[(i, j)] + at[(j, i)]).abs() <= tol_s));
    let constant_columns: Vec<usize> = (0..n)
        .filter(|&j| (0..n).all(|i| (at[(i, j)] - at[(0, j)]).abs() <= tol_s))
        .map(|j| j + 1)
        .collect();

    let strict = strict_pure_nash(&mg, tol);
    let dominated: Vec<DominatedSummary> = (0..n)
        .filter_map(|k| {
            strictly_dominated(&mg, k, tol).map(|d| DominatedSummary {
                strategy: k + 1,
                dominator: d.mix,
                margin: d.margin,
            })
        })
        .collect();

    let diagnostics = Diagnostics {
        gamma,
        equalizer: EqualizerSummary::from_set(&eq),
        interior_nash: nash.as_ref().map(|x| x.point.as_slice().to_vec()),
        interior_nash_unique: nash.as_ref().map(|x| x.unique),
        definiteness: definiteness.clone(),
        skew_symmetric,
        constant_columns: constant_columns.clone(),
        second_density: second.clone(),
        separating_direction: sep.as_ref().map(|s| s.direction.clone()),
        dominated: dominated.clone(),
        strict_pure_nash: strict.iter().map(|&k| k + 1).collect(),
        dirichlet: dirichlet.as_ref().map(|p| DirichletSummary {
            alpha: p.alpha().to_vec(),
            gamma: p.gamma(),
            mean: p.mean(),
            variance: p.variance(),
        }),
    };
    let stable_vertices: Vec<usize> = strict.iter().map(|&k| k + 1).collect();
    let vanishing_strategies: Vec<usize> = dominated.iter().map(|d| d.strategy).collect();

    let report = |label: Label, rule: Rule, witness: Witness| ClassificationReport {
        label,
        certificate: Certificate { rule, witness },
        stable_vertices: stable_vertices.clone(),
        vanishing_strategies: vanishing_strategies.clone(),
        diagnostics: diagnostics.clone(),
    };

    // 1. no equalizer strategy in the simplex: exclusion principle
    if !eq.intersects_simplex(tol) {
        if let Some(s) = &sep {
            return report(
                Label::Transient,
                Rule::NoEqualizerInSimplex,
                Witness {
                    separating_direction: Some(s.direction.clone()),
                    separation_margin: Some(s.min_payoff),
                    ..Witness::default()
                },
            );
        }
    }

    // 2. reciprocal density with a second power density
    if second.balanced && second.transient {
        return report(
            Label::Transient,
            Rule::SecondInvariantDensity,
            Witness {
                beta: second.beta.clone(),
                second_alpha: second.second_alpha.clone(),
                ..Witness::default()
            },
        );
    }

    // 3. conditional positive definiteness
    if definiteness.kind == DefinitenessKind::CondPositiveDefinite {
        if let Some(p) = eq.non_vertex_solution(tol) {
            return report(
                Label::Transient,
                Rule::PositiveDefiniteEqualizer,
                Witness {
                    equalizer_point: Some(p.iter().copied().collect()),
                    definiteness_eigenvalues: Some(definiteness.eigenvalues.clone()),
                    ..Witness::default()
                },
            );
        }
        if n <= 3 {
            return report(
                Label::Transient,
                Rule::PositiveDefiniteLowDim,
                Witness {
                    definiteness_eigenvalues: Some(definiteness.eigenvalues.clone()),
                    ..Witness::default()
                },
            );
        }
    }

    // 4. the noise-balance branch
    let mut pending: Option<(Rule, Witness)> = None;
    if let Some(g) = gamma {
        match (&nash, &dirichlet) {
            (Some(inash), Some(params)) if inash.unique && g > tol => {
                return report(
                    Label::PositiveRecurrent,
                    Rule::DirichletInvariant,
                    Witness {
                        gamma: Some(g),
                        equalizer_point: Some(inash.point.as_slice().to_vec()),
                        dirichlet_alpha: Some(params.alpha().to_vec()),
                        ..Witness::default()
                    },
                );
            }
            _ => {}
        }
        if g < -tol {
            if n <= 3 {
                return report(
                    Label::Transient,
                    Rule::NegativeGammaLowDim,
                    Witness {
                        gamma: Some(g),
                        definiteness_eigenvalues: Some(definiteness.eigenvalues.clone()),
                        ..Witness::default()
                    },
                );
            }
            if let Some(p) = eq.non_vertex_solution(tol) {
                if p.min() >= -tol {
                    return report(
                        Label::Transient,
                        Rule::NegativeGammaEqualizer,
                        Witness {
                            gamma: Some(g),
                            equalizer_point: Some(p.iter().copied().collect()),
                            ..Witness::default()
                        },
                    );
                }
            }
        }
        let why = match &nash {
            Some(inash) if !inash.unique => "a line of equilibria crosses the interior",
            Some(_) => "gamma is not positive",
            None => "no interior equilibrium",
        };
        pending = Some((
            Rule::GammaBalanceExcludesPositive,
            Witness {
                gamma: Some(g),
                note: Some(why.into()),
                ..Witness::default()
            },
        ));
    }

    // a line of interior equilibria rules out positive recurrence on its own
    if let Some(inash) = &nash {
        if !inash.unique && pending.is_none() {
            pending = Some((
                Rule::LineOfEquilibria,
                Witness {
                    equalizer_point: Some(inash.point.as_slice().to_vec()),
                    ..Witness::default()
                },
            ));
        }
    }

    // 5. zero-sum modified game (more specific certificate, same exclusion)
    if skew_symmetric {
        pending = Some((Rule::ZeroSum, Witness::default()));
    }

    // 6. the complete two-strategy table
    if n == 2 {
        if let Some((label, rule)) = two_strategy_table_inner(at, tol_s) {
            let witness = match rule {
                Rule::CoexistencePair => Witness {
                    gamma,
                    equalizer_point: nash.as_ref().map(|x| x.point.as_slice().to_vec()),
                    dirichlet_alpha: dirichlet.as_ref().map(|p| p.alpha().to_vec()),
                    ..Witness::default()
                },
                Rule::DominancePair => Witness {
                    separating_direction: sep.as_ref().map(|s| s.direction.clone()),
                    separation_margin: sep.as_ref().map(|s| s.min_payoff),
                    ..Witness::default()
                },
                Rule::BistablePair => Witness {
                    definiteness_eigenvalues: Some(definiteness.eigenvalues.clone()),
                    ..Witness::default()
                },
                _ => Witness {
                    note: Some("tied column with a strict gap in the other".into()),
                    ..Witness::default()
                },
            };
            return report(label, rule, witness);
        }
    }

    // 7. symmetric cyclic pattern with equal noise
    if let Some(witness) = cyclic_symmetric_pattern(game, &second, tol) {
        return report(
            Label::ConjecturedNullRecurrent,
            Rule::CyclicSymmetricConjecture,
            witness,
        );
    }

    // 8. a constant column of the modified game excludes positive recurrence
    if !constant_columns.is_empty() && pending.is_none() {
        pending = Some((
            Rule::ConstantColumn,
            Witness {
                note: Some(format!(
                    "column {} of the modified game is proportional to the all-ones vector",
                    constant_columns[0]
                )),
                ..Witness::default()
            },
        ));
    }

    match pending {
        Some((rule, witness)) => report(Label::NotPositiveRecurrent, rule, witness),
        None => report(Label::Unknown, Rule::NoRule, Witness::default()),
    }
}

/// Sign table for two-strategy games on the column gaps
/// `d1 = atilde_11 - atilde_21` and `d2 = atilde_22 - atilde_12`.
/// Generic games hit exactly one branch; ties fall through to the
/// constant-column rule.
pub fn two_strategy_table(game: &Game, tol: f64) -> Option<(Label, Rule)> {
    let mg = game.modified();
    let at = mg.atilde();
    let tol_s = tol * scale_of(at).max(1.0);
    two_strategy_table_inner(at, tol_s)
}

fn two_strategy_table_inner(at: &nalgebra::DMatrix<f64>, tol_s: f64) -> Option<(Label, Rule)> {
    let d1 = at[(0, 0)] - at[(1, 0)];
    let d2 = at[(1, 1)] - at[(0, 1)];
    if d1 < -tol_s && d2 < -tol_s {
        return Some((Label::PositiveRecurrent, Rule::CoexistencePair));
    }
    if d1 > tol_s && d2 > tol_s {
        return Some((Label::Transient, Rule::BistablePair));
    }
    if (d1 > tol_s && d2 < -tol_s) || (d1 < -tol_s && d2 > tol_s) {
        return Some((Label::Transient, Rule::DominancePair));
    }
    if (d1.abs() <= tol_s && d2 < -tol_s) || (d2.abs() <= tol_s && d1 < -tol_s) {
        return Some((Label::NullRecurrent, Rule::BoundaryTiePair));
    }
    None
}

/// Detects the symmetric cyclic three-strategy family (equal gains and
/// losses, equal noise) up to column shifts and relabeling: subtracting the
/// diagonal from each column must leave a skew-symmetric matrix with equal
/// cyclic entries.
fn cyclic_symmetric_pattern(
    game: &Game,
    second: &crate::analysis::SecondDensityReport,
    tol: f64,
) -> Option<Witness> {
    if game.n() != 3 || !second.balanced {
        return None;
    }
    let s = game.sigma();
    let s2max = s.iter().map(|v| v * v).fold(0.0f64, f64::max);
    let sigma_equal =
        (0..3).all(|i| (0..3).all(|j| (s[i] * s[i] - s[j] * s[j]).abs() <= tol * (1.0 + s2max)));
    if !sigma_equal {
        return None;
    }
    let mg = game.modified();
    let at = mg.atilde();
    let tol_s = tol * scale_of(at).max(1.0) * 10.0;
    // canonical column shift: m_ij = atilde_ij - atilde_jj
    let m = |i: usize, j: usize| at[(i, j)] - at[(j, j)];
    for i in 0..3 {
        for j in 0..3 {
            if (m(i, j) + m(j, i)).abs() > tol_s {
                return None;
            }
        }
    }
    let cyc = [m(0, 1), m(1, 2), m(2, 0)];
    if (cyc[0] - cyc[1]).abs() > tol_s || (cyc[1] - cyc[2]).abs() > tol_s {
        return None;
    }
    if cyc[0].abs() <= tol_s {
        return None;
    }
    Some(Witness {
        note: Some("symmetric cyclic game with equal noise: both power densities coincide".into()),
        ..Witness::default()
    })
}

/// Stability of the vertex `e_k` (0-based `k`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VertexStability {
    /// Strict equilibrium of the modified game: stochastically
    /// asymptotically stable.
    StrictNashStable,
    /// Not an equilibrium of the modified game: convergence to the vertex
    /// has probability zero.
    NotNashUnstable,
    /// Ties within tolerance.
    BoundaryCase {
        /// a tied row beats the vertex row weakly everywhere, so convergence
        /// to the vertex has probability zero
        convergence_impossible: bool,
        /// for two strategies a tie already rules out stability
        two_strategy_tie_unstable: bool,
    },
}

pub fn stability_of_vertex(game: &Game, k: usize, tol: f64) -> VertexStability {
    let mg = game.modified();
    let at = mg.atilde();
    let n = mg.n();
    assert!(k < n, "strategy index out of range");
    let tol_s = tol * scale_of(at).max(1.0);

    let gaps: Vec<f64> = (0..n)
        .filter(|&j| j != k)
        .map(|j| at[(k, k)] - at[(j, k)])
        .collect();
    if gaps.iter().all(|&g| g > tol_s) {
        return VertexStability::StrictNashStable;
    }
    if gaps.iter().any(|&g| g < -tol_s) {
        return VertexStability::NotNashUnstable;
    }
    // some tie: check whether a tied row dominates the vertex row weakly
    let mut convergence_impossible = false;
    for i in 0..n {
        if i == k {
            continue;
        }
        if (at[(i, k)] - at[(k, k)]).abs() <= tol_s {
            let beaten_somewhere = (0..n).any(|j| at[(i, j)] < at[(k, j)] - tol_s);
            if !beaten_somewhere {
                convergence_impossible = true;
            }
        }
    }
    VertexStability::BoundaryCase {
        convergence_impossible,
        two_strategy_tie_unstable: n == 2,
    }
}
