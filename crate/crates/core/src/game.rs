//! Symmetric two-player games with Gaussian payoff noise and the coefficients
//! of the induced replicator diffusion on the probability simplex.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stochastic-integral convention for the payoff noise.
///
/// A Stratonovich-interpreted game is equivalent to the Ito game whose payoff
/// matrix carries an extra `sigma_i^2/2` in every entry of row `i`. That shift
/// is applied once, in [`Game::effective_payoff`], so everything downstream
/// sees a single Ito-form game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpretation {
    #[default]
    Ito,
    Stratonovich,
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("payoff is square with side n: got {rows} rows and {cols} columns")]
    NonSquarePayoff { rows: usize, cols: usize },
    #[error("strategy count n must be at least 2: got {0}")]
    TooFewStrategies(usize),
    #[error("sigma has length n: payoff side is {n}, sigma length is {len}")]
    SigmaLength { n: usize, len: usize },
    #[error("all entries of payoff are finite: entry ({i},{j}) is {value}")]
    NonFinitePayoff { i: usize, j: usize, value: f64 },
    #[error("sigma_i > 0 for every i: sigma_{i} is {value}")]
    NonPositiveSigma { i: usize, value: f64 },
    #[error("x_i >= 0 for all i: coordinate {i} is {value}")]
    NegativeCoordinate { i: usize, value: f64 },
    #[error("|sum x_i - 1| <= 4n*eps: coordinates sum to {sum}")]
    NotNormalized { sum: f64 },
    #[error("column index {j} out of range for n = {n}")]
    ColumnOutOfRange { j: usize, n: usize },
    #[error("game JSON does not parse: {0}")]
    Parse(String),
}

/// Wire format for game files: `{"payoff": [[...]], "sigma": [...],
/// "interpretation": "ito" | "stratonovich"}` with `interpretation`
/// defaulting to `"ito"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub payoff: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub interpretation: Interpretation,
}

/// A symmetric two-player game under aggregate shocks: payoff matrix `A`
/// (`a_ij` = payoff to an `i`-player against a `j`-player), per-strategy noise
/// intensities `sigma_i > 0`, and the stochastic-integral convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    payoff: DMatrix<f64>,
    sigma: DVector<f64>,
    interpretation: Interpretation,
}

impl Game {
    pub fn new(
        payoff: DMatrix<f64>,
        sigma: DVector<f64>,
        interpretation: Interpretation,
    ) -> Result<Self, GameError> {
        let (rows, cols) = payoff.shape();
        if rows != cols {
            return Err(GameError::NonSquarePayoff { rows, cols });
        }
        if rows < 2 {
            return Err(GameError::TooFewStrategies(rows));
        }
        if sigma.len() != rows {
            return Err(GameError::SigmaLength {
                n: rows,
                len: sigma.len(),
            });
        }
        for i in 0..rows {
            for j in 0..cols {
                let value = payoff[(i, j)];
                if !value.is_finite() {
                    return Err(GameError::NonFinitePayoff { i, j, value });
                }
            }
        }
        for (i, &value) in sigma.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GameError::NonPositiveSigma { i, value });
            }
        }
        Ok(Game {
            payoff,
            sigma,
            interpretation,
        })
    }

    pub fn from_spec(spec: &GameSpec) -> Result<Self, GameError> {
        let rows = spec.payoff.len();
        let cols = spec.payoff.first().map_or(0, |r| r.len());
        for row in &spec.payoff {
            if row.len() != cols {
                return Err(GameError::NonSquarePayoff {
                    rows,
                    cols: row.len(),
                });
            }
        }
        let flat: Vec<f64> = spec.payoff.iter().flatten().copied().collect();
        let payoff = DMatrix::from_row_slice(rows, cols.max(1), &flat);
        let sigma = DVector::from_vec(spec.sigma.clone());
        Game::new(payoff, sigma, spec.interpretation)
    }

    pub fn from_json(text: &str) -> Result<Self, GameError> {
        let spec: GameSpec =
            serde_json::from_str(text).map_err(|e| GameError::Parse(e.to_string()))?;
        Game::from_spec(&spec)
    }

    pub fn to_spec(&self) -> GameSpec {
        GameSpec {
            payoff: matrix_rows(&self.payoff),
            sigma: self.sigma.iter().copied().collect(),
            interpretation: self.interpretation,
        }
    }

    pub fn n(&self) -> usize {
        self.payoff.nrows()
    }

    pub fn payoff(&self) -> &DMatrix<f64> {
        &self.payoff
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn interpretation(&self) -> Interpretation {
        self.interpretation
    }

    /// Payoff matrix in Ito form. The identity for an Ito game; for a
    /// Stratonovich game, row `i` is shifted by `sigma_i^2/2`.
    pub fn effective_payoff(&self) -> DMatrix<f64> {
        let mut a = self.payoff.clone();
        if self.interpretation == Interpretation::Stratonovich {
            for i in 0..self.n() {
                let shift = 0.5 * self.sigma[i] * self.sigma[i];
                for j in 0..self.n() {
                    a[(i, j)] += shift;
                }
            }
        }
        a
    }

    /// The modified game `atilde_ij = a_ij - sigma_i^2/2` (applied to the
    /// effective payoff), which governs the long-run behavior.
    pub fn modified(&self) -> ModifiedGame {
        let mut atilde = self.effective_payoff();
        for i in 0..self.n() {
            let shift = 0.5 * self.sigma[i] * self.sigma[i];
            for j in 0..self.n() {
                atilde[(i, j)] -= shift;
            }
        }
        ModifiedGame {
            atilde,
            sigma: self.sigma.clone(),
        }
    }

    /// Drift `b(x) = [diag(x) - x x^T][A - diag(sigma^2)] x` of the replicator
    /// diffusion. Components sum to zero and the drift vanishes at vertices.
    pub fn drift(&self, x: &SimplexPoint) -> DVector<f64> {
        let n = self.n();
        let xv = x.coords();
        let mut m = self.effective_payoff();
        for i in 0..n {
            m[(i, i)] -= self.sigma[i] * self.sigma[i];
        }
        let proj = DMatrix::from_diagonal(xv) - xv * xv.transpose();
        proj * (m * xv)
    }

    /// Diffusion matrix `C(x) = [diag(x) - x x^T] diag(sigma)`. Every column
    /// sums to zero and `C` vanishes at vertices.
    pub fn diffusion_matrix(&self, x: &SimplexPoint) -> DMatrix<f64> {
        let xv = x.coords();
        let proj = DMatrix::from_diagonal(xv) - xv * xv.transpose();
        proj * DMatrix::from_diagonal(&self.sigma)
    }

    /// Adds `c` to every entry of column `j`. The replicator process (drift,
    /// diffusion, classification) is invariant under this shift.
    pub fn shift_column(&self, j: usize, c: f64) -> Result<Game, GameError> {
        let n = self.n();
        if j >= n {
            return Err(GameError::ColumnOutOfRange { j, n });
        }
        let mut payoff = self.payoff.clone();
        for i in 0..n {
            payoff[(i, j)] += c;
        }
        Ok(Game {
            payoff,
            sigma: self.sigma.clone(),
            interpretation: self.interpretation,
        })
    }
}

/// The modified payoff matrix together with the noise intensities it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedGame {
    atilde: DMatrix<f64>,
    sigma: DVector<f64>,
}

impl ModifiedGame {
    pub fn new(atilde: DMatrix<f64>, sigma: DVector<f64>) -> Self {
        assert_eq!(atilde.nrows(), atilde.ncols());
        assert_eq!(atilde.nrows(), sigma.len());
        ModifiedGame { atilde, sigma }
    }

    pub fn n(&self) -> usize {
        self.atilde.nrows()
    }

    pub fn atilde(&self) -> &DMatrix<f64> {
        &self.atilde
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }
}

/// A point of the probability simplex: nonnegative coordinates summing to 1
/// within `4n * machine epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint(DVector<f64>);

impl SimplexPoint {
    pub fn new(x: DVector<f64>) -> Result<Self, GameError> {
        for (i, &value) in x.iter().enumerate() {
            if !(value >= 0.0) {
                return Err(GameError::NegativeCoordinate { i, value });
            }
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > simplex_sum_tol(x.len()) {
            return Err(GameError::NotNormalized { sum });
        }
        Ok(SimplexPoint(x))
    }

    pub fn from_slice(x: &[f64]) -> Result<Self, GameError> {
        SimplexPoint::new(DVector::from_row_slice(x))
    }

    /// Normalizes strictly positive weights onto the simplex.
    pub fn from_weights(weights: &[f64]) -> Result<Self, GameError> {
        for (i, &value) in weights.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GameError::NegativeCoordinate { i, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        Ok(SimplexPoint(DVector::from_iterator(
            weights.len(),
            weights.iter().map(|w| w / sum),
        )))
    }

    pub fn barycenter(n: usize) -> Self {
        SimplexPoint(DVector::from_element(n, 1.0 / n as f64))
    }

    pub fn vertex(n: usize, k: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[k] = 1.0;
        SimplexPoint(v)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }
}

pub fn simplex_sum_tol(n: usize) -> f64 {
    4.0 * n as f64 * f64::EPSILON
}

/// Matrix as a row-major list of rows, the shape used in every JSON report.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
