//! Analysis and simulation of evolutionary game dynamics under aggregate
//! payoff shocks: the stochastic replicator process on the probability
//! simplex.
//!
//! - [`game`]: game model, the modified payoff matrix, and the drift and
//!   diffusion coefficients of the simplex diffusion
//! - [`analysis`]: equalizer sets, Nash equilibria, conditional definiteness,
//!   the noise-balance condition, Dirichlet invariant distributions,
//!   domination, and separation certificates
//! - [`sim`]: Euler-Maruyama integration in log-population coordinates plus a
//!   deterministic Runge-Kutta oracle
//! - [`estimators`]: time averages, co-occurrence matrices, best-response
//!   residuals, boundary diagnostics, invariant-moment checks
//! - [`classify`]: the rule battery that labels long-run behavior with a
//!   machine-checkable certificate
//! - [`report`]: the static analysis report emitted by the command line tool

pub mod analysis;
pub mod classify;
pub mod estimators;
pub mod game;
pub mod linalg;
pub mod lp;
pub mod report;
pub mod rng;
pub mod sim;

pub use analysis::DEFAULT_TOL;
pub use game::{Game, GameError, GameSpec, Interpretation, ModifiedGame, SimplexPoint};
