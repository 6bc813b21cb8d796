//! Python bindings: a `Game` class wrapping construction, static analysis,
//! classification, and simulation, plus a `Trajectory` class with the
//! estimators. Reports cross the boundary as JSON strings; states and
//! matrices as plain lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use srd_core::analysis::dirichlet_invariant;
use srd_core::classify::classify;
use srd_core::estimators;
use srd_core::game::{matrix_rows, Interpretation, SimplexPoint};
use srd_core::report::analysis_report;
use srd_core::sim::{self, SimConfig, SimError};
use srd_core::DEFAULT_TOL;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::NonFinite { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(value_err)
}

/// A symmetric two-player game under Gaussian payoff noise.
#[pyclass]
struct Game {
    inner: srd_core::Game,
}

#[pymethods]
impl Game {
    /// Game from a payoff matrix (list of rows), noise intensities, and an
    /// optional interpretation ("ito" | "stratonovich", default "ito").
    #[new]
    #[pyo3(signature = (payoff, sigma, interpretation=None))]
    fn new(payoff: Vec<Vec<f64>>, sigma: Vec<f64>, interpretation: Option<&str>) -> PyResult<Self> {
        let interp = match interpretation.unwrap_or("ito") {
            "ito" => Interpretation::Ito,
            "stratonovich" => Interpretation::Stratonovich,
            other => {
                return Err(PyValueError::new_err(format!(
                    "interpretation must be \"ito\" or \"stratonovich\", got {other:?}"
                )))
            }
        };
        let spec = srd_core::GameSpec {
            payoff,
            sigma,
            interpretation: interp,
        };
        Ok(Game {
            inner: srd_core::Game::from_spec(&spec).map_err(value_err)?,
        })
    }

    /// Game from the JSON wire format
    /// `{"payoff": [[...]], "sigma": [...], "interpretation": "ito"}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Game {
            inner: srd_core::Game::from_json(text).map_err(value_err)?,
        })
    }

    fn n(&self) -> usize {
        self.inner.n()
    }

    fn payoff(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.payoff())
    }

    fn sigma(&self) -> Vec<f64> {
        self.inner.sigma().iter().copied().collect()
    }

    fn interpretation(&self) -> &'static str {
        match self.inner.interpretation() {
            Interpretation::Ito => "ito",
            Interpretation::Stratonovich => "stratonovich",
        }
    }

    /// Payoff matrix in Ito form (Stratonovich rows shifted by sigma_i^2/2).
    fn effective_payoff(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.inner.effective_payoff())
    }

    /// The modified matrix `a_ij - sigma_i^2/2` governing long-run behavior.
    fn modified_payoff(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.modified().atilde())
    }

    fn drift(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = SimplexPoint::from_slice(&x).map_err(value_err)?;
        Ok(self.inner.drift(&p).iter().copied().collect())
    }

    fn diffusion_matrix(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let p = SimplexPoint::from_slice(&x).map_err(value_err)?;
        Ok(matrix_rows(&self.inner.diffusion_matrix(&p)))
    }

    /// New game with `c` added to every entry of column `j` (0-based); the
    /// process and its classification are invariant.
    fn shift_column(&self, j: usize, c: f64) -> PyResult<Game> {
        Ok(Game {
            inner: self.inner.shift_column(j, c).map_err(value_err)?,
        })
    }

    /// Long-run label: "PositiveRecurrent", "NullRecurrent",
    /// "ConjecturedNullRecurrent", "Transient", "NotPositiveRecurrent", or
    /// "Unknown".
    #[pyo3(signature = (tol=None))]
    fn label(&self, tol: Option<f64>) -> PyResult<String> {
        let report = classify(&self.inner, tol.unwrap_or(DEFAULT_TOL));
        Ok(format!("{:?}", report.label))
    }

    /// Full classification report (label, certificate, diagnostics) as JSON.
    #[pyo3(signature = (tol=None))]
    fn classify_json(&self, tol: Option<f64>) -> PyResult<String> {
        to_json(&classify(&self.inner, tol.unwrap_or(DEFAULT_TOL)))
    }

    /// Static analysis report as JSON.
    #[pyo3(signature = (tol=None))]
    fn analyze_json(&self, tol: Option<f64>) -> PyResult<String> {
        to_json(&analysis_report(&self.inner, tol.unwrap_or(DEFAULT_TOL)))
    }

    /// Dirichlet parameter of the invariant distribution, when one exists.
    #[pyo3(signature = (tol=None))]
    fn dirichlet_alpha(&self, tol: Option<f64>) -> Option<Vec<f64>> {
        dirichlet_invariant(&self.inner, tol.unwrap_or(DEFAULT_TOL)).map(|p| p.alpha().to_vec())
    }

    /// Euler-Maruyama sample path in log coordinates; deterministic given the
    /// seed.
    #[pyo3(signature = (t_final, dt=1e-3, seed=1, x0=None, stride=None))]
    fn simulate(
        &self,
        t_final: f64,
        dt: f64,
        seed: u64,
        x0: Option<Vec<f64>>,
        stride: Option<usize>,
    ) -> PyResult<Trajectory> {
        let x0 = match x0 {
            Some(v) => SimplexPoint::from_weights(&v).map_err(value_err)?,
            None => SimplexPoint::barycenter(self.inner.n()),
        };
        let mut cfg = SimConfig::new(dt, t_final, seed, x0).map_err(sim_err)?;
        if let Some(s) = stride {
            cfg = cfg.with_stride(s).map_err(sim_err)?;
        }
        Ok(Trajectory {
            inner: sim::simulate(&self.inner, &cfg).map_err(sim_err)?,
        })
    }

    /// Runge-Kutta path of the noise-free replicator flow.
    #[pyo3(signature = (t_final, dt=1e-3, x0=None))]
    fn simulate_deterministic(
        &self,
        t_final: f64,
        dt: f64,
        x0: Option<Vec<f64>>,
    ) -> PyResult<Trajectory> {
        let x0 = match x0 {
            Some(v) => SimplexPoint::from_weights(&v).map_err(value_err)?,
            None => SimplexPoint::barycenter(self.inner.n()),
        };
        Ok(Trajectory {
            inner: sim::simulate_deterministic(&self.inner, &x0, t_final, dt).map_err(sim_err)?,
        })
    }

    /// Estimator report (time average, co-occurrence, residuals, boundary
    /// diagnostics, moment check) for a trajectory of this game, as JSON.
    #[pyo3(signature = (trajectory, burn_in=0.0, thin=1, tol=None))]
    fn estimator_report_json(
        &self,
        trajectory: &Trajectory,
        burn_in: f64,
        thin: usize,
        tol: Option<f64>,
    ) -> PyResult<String> {
        let dirichlet = dirichlet_invariant(&self.inner, tol.unwrap_or(DEFAULT_TOL));
        let report = estimators::estimator_report(
            &self.inner.modified(),
            &trajectory.inner,
            burn_in,
            thin,
            dirichlet.as_ref(),
        )
        .map_err(value_err)?;
        to_json(&report)
    }

    fn __repr__(&self) -> String {
        format!(
            "Game(n={}, interpretation={:?})",
            self.inner.n(),
            self.interpretation()
        )
    }
}

/// Recorded sample path of the replicator process.
#[pyclass]
struct Trajectory {
    inner: sim::Trajectory,
}

#[pymethods]
impl Trajectory {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn n(&self) -> usize {
        self.inner.n()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    fn states(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len())
            .map(|k| self.inner.state(k).to_vec())
            .collect()
    }

    fn final_state(&self) -> Vec<f64> {
        self.inner.final_state().to_vec()
    }

    #[pyo3(signature = (burn_in=0.0))]
    fn time_average(&self, burn_in: f64) -> PyResult<Vec<f64>> {
        Ok(estimators::time_average(&self.inner, burn_in)
            .map_err(value_err)?
            .as_slice()
            .to_vec())
    }

    #[pyo3(signature = (burn_in=0.0))]
    fn cooccurrence(&self, burn_in: f64) -> PyResult<Vec<Vec<f64>>> {
        let cm = estimators::cooccurrence(&self.inner, burn_in).map_err(value_err)?;
        Ok(matrix_rows(&cm.p))
    }

    fn min_final(&self) -> f64 {
        self.inner
            .final_state()
            .iter()
            .cloned()
            .fold(f64::MAX, f64::min)
    }

    /// CSV text with header `t,x1,...,xn` at full double precision.
    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(n={}, points={}, t_final={})",
            self.inner.n(),
            self.inner.len(),
            self.inner.time(self.inner.len() - 1)
        )
    }
}

#[pymodule]
fn srd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Game>()?;
    m.add_class::<Trajectory>()?;
    Ok(())
}
