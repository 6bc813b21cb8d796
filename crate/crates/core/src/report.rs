//! The static analysis report: everything the `analyze` command emits.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, conditional_definiteness, dirichlet_invariant, equalizer_set, gamma_balance,
    interior_nash, pure_nash, second_density_analysis, separating_direction, strict_pure_nash,
    strictly_dominated, SecondDensityReport,
};
use crate::classify::{stability_of_vertex, DominatedSummary, EqualizerSummary, VertexStability};
use crate::game::{matrix_rows, Game};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirichletReport {
    pub alpha: Vec<f64>,
    pub gamma: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationReport {
    pub direction: Vec<f64>,
    pub min_payoff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexStabilityReport {
    /// 1-based strategy index
    pub strategy: usize,
    #[serde(flatten)]
    pub stability: VertexStability,
}

/// Static analysis of one game: the modified matrix, equilibria, definiteness,
/// the balance constant, the Dirichlet invariant when it exists, domination,
/// and separation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n: usize,
    pub interpretation: crate::game::Interpretation,
    pub effective_payoff: Vec<Vec<f64>>,
    pub modified_payoff: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub equalizer: EqualizerSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interior_nash: Option<Vec<f64>>,
    pub interior_nash_unique: Option<bool>,
    /// 1-based indices of vertices that are Nash equilibria
    pub pure_nash: Vec<usize>,
    /// 1-based indices of strict pure equilibria
    pub strict_pure_nash: Vec<usize>,
    pub definiteness: analysis::DefinitenessLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<DirichletReport>,
    pub second_density: SecondDensityReport,
    pub dominated: Vec<DominatedSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separating_direction: Option<SeparationReport>,
    pub vertex_stability: Vec<VertexStabilityReport>,
}

pub fn analysis_report(game: &Game, tol: f64) -> AnalysisReport {
    let n = game.n();
    let mg = game.modified();
    let eq = equalizer_set(&mg, tol);
    let nash = interior_nash(&mg, tol);
    let dirichlet = dirichlet_invariant(game, tol);
    let dominated = (0..n)
        .filter_map(|k| {
            strictly_dominated(&mg, k, tol).map(|d| DominatedSummary {
                strategy: k + 1,
                dominator: d.mix,
                margin: d.margin,
            })
        })
        .collect();
    AnalysisReport {
        n,
        interpretation: game.interpretation(),
        effective_payoff: matrix_rows(&game.effective_payoff()),
        modified_payoff: matrix_rows(mg.atilde()),
        sigma: game.sigma().iter().copied().collect(),
        equalizer: EqualizerSummary::from_set(&eq),
        interior_nash: nash.as_ref().map(|x| x.point.as_slice().to_vec()),
        interior_nash_unique: nash.as_ref().map(|x| x.unique),
        pure_nash: pure_nash(&mg, tol).iter().map(|&k| k + 1).collect(),
        strict_pure_nash: strict_pure_nash(&mg, tol).iter().map(|&k| k + 1).collect(),
        definiteness: conditional_definiteness(&game.effective_payoff(), tol),
        gamma: gamma_balance(game, tol),
        dirichlet: dirichlet.map(|p| DirichletReport {
            alpha: p.alpha().to_vec(),
            gamma: p.gamma(),
            mean: p.mean(),
            variance: p.variance(),
        }),
        second_density: second_density_analysis(game, tol),
        dominated,
        separating_direction: separating_direction(&mg, tol).map(|s| SeparationReport {
            direction: s.direction,
            min_payoff: s.min_payoff,
        }),
        vertex_stability: (0..n)
            .map(|k| VertexStabilityReport {
                strategy: k + 1,
                stability: stability_of_vertex(game, k, tol),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Interpretation;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matching_report_carries_the_closed_form_quantities() {
        let g = Game::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            DVector::from_row_slice(&[1.0, 1.0]),
            Interpretation::Ito,
        )
        .unwrap();
        let r = analysis_report(&g, crate::analysis::DEFAULT_TOL);
        assert!((r.gamma.unwrap() - 2.0).abs() < 1e-12);
        let d = r.dirichlet.as_ref().unwrap();
        assert!((d.alpha[0] - 1.0).abs() < 1e-12);
        assert!((d.mean[0] - 0.5).abs() < 1e-12);
        let nash = r.interior_nash.as_ref().unwrap();
        assert!((nash[0] - 0.5).abs() < 1e-12);
        assert!(r.pure_nash.is_empty());
        // JSON round trip
        let text = serde_json::to_string(&r).unwrap();
        let back: AnalysisReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.n, 2);
    }
}
