//! Numerical integration of the stochastic replicator process.
//!
//! The integrator works in log-population coordinates, where the noise term
//! has constant coefficients and is therefore exact under Euler-Maruyama:
//!
//! `L_i <- L_i + [(A x)_i - sigma_i^2/2] dt + sigma_i sqrt(dt) xi_i`
//!
//! followed by subtraction of `max_i L_i` (a pure renormalization of the
//! common population factor) and `x = exp(L) / sum exp(L)`. The simplex
//! constraint holds by construction and coordinates can underflow to tiny
//! positive values but never reach exact zero.

use rayon::prelude::*;
use std::io::Write;

use crate::estimators::{self, CooccurrenceMatrix};
use crate::game::{Game, SimplexPoint};
use crate::rng::{derive_seed, CounterRng};
use thiserror::Error;

pub const DEFAULT_DT: f64 = 1e-3;
/// Default recording stride keeps at most this many points per trajectory.
pub const MAX_DEFAULT_RECORDED: usize = 1_000_000;
/// Default burn-in as a fraction of the horizon.
pub const DEFAULT_BURN_IN_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("time step must satisfy 0 < dt <= t_final: dt = {dt}, t_final = {t_final}")]
    BadTimeGrid { dt: f64, t_final: f64 },
    #[error("record_stride must be at least 1")]
    BadStride,
    #[error("initial state must be interior to the simplex")]
    NotInterior,
    #[error("initial state has {got} coordinates but the game has {expected} strategies")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("non-finite state at step {step}")]
    NonFinite { step: u64 },
    #[error("trajectory summary failed: {0}")]
    Summary(String),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    pub record_stride: usize,
    pub x0: SimplexPoint,
}

impl SimConfig {
    /// Config with the default recording stride (at most
    /// [`MAX_DEFAULT_RECORDED`] points retained).
    pub fn new(dt: f64, t_final: f64, seed: u64, x0: SimplexPoint) -> Result<Self, SimError> {
        if !(dt > 0.0) || !(dt <= t_final) || !t_final.is_finite() {
            return Err(SimError::BadTimeGrid { dt, t_final });
        }
        let steps = (t_final / dt).round().max(1.0);
        let stride = (steps / MAX_DEFAULT_RECORDED as f64).ceil().max(1.0) as usize;
        let cfg = SimConfig {
            dt,
            t_final,
            seed,
            record_stride: stride,
            x0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_stride(mut self, record_stride: usize) -> Result<Self, SimError> {
        self.record_stride = record_stride;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0) || !(self.dt <= self.t_final) || !self.t_final.is_finite() {
            return Err(SimError::BadTimeGrid {
                dt: self.dt,
                t_final: self.t_final,
            });
        }
        if self.record_stride < 1 {
            return Err(SimError::BadStride);
        }
        if !self.x0.is_interior() {
            return Err(SimError::NotInterior);
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_final / self.dt).round().max(1.0) as u64
    }
}

/// Recorded states of one run: times, simplex states, and log-population
/// coordinates up to a common additive constant.
#[derive(Debug, Clone)]
pub struct Trajectory {
    n: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    log_pop: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(n: usize, cap: usize) -> Self {
        Trajectory {
            n,
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap * n),
            log_pop: Vec::with_capacity(cap * n),
        }
    }

    fn push(&mut self, t: f64, state: &[f64], log_pop: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(state);
        self.log_pop.extend_from_slice(log_pop);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.n..(i + 1) * self.n]
    }

    pub fn log_pop(&self, i: usize) -> &[f64] {
        &self.log_pop[i * self.n..(i + 1) * self.n]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// CSV with header `t,x1,...,xn`, one row per recorded step, full double
    /// precision.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for i in 1..=self.n {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        for k in 0..self.len() {
            write!(w, "{:.16e}", self.times[k])?;
            for v in self.state(k) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Euler-Maruyama in log coordinates on the effective (Ito-form) payoff
/// matrix. Deterministic given the seed: the Gaussian increment for
/// `(step, coordinate)` is a pure function of the counter generator key.
pub fn simulate(game: &Game, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let n = game.n();
    if cfg.x0.n() != n {
        return Err(SimError::DimensionMismatch {
            got: cfg.x0.n(),
            expected: n,
        });
    }

    let a_eff = game.effective_payoff();
    let mut a = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            a.push(a_eff[(i, j)]);
        }
    }
    let dt = cfg.dt;
    let sqrt_dt = dt.sqrt();
    let half_sigma2: Vec<f64> = game.sigma().iter().map(|s| 0.5 * s * s).collect();
    let sigma_sqrt_dt: Vec<f64> = game.sigma().iter().map(|s| s * sqrt_dt).collect();
    let rng = CounterRng::new(cfg.seed);

    let n_steps = cfg.n_steps();
    let stride = cfg.record_stride as u64;
    let cap = (n_steps / stride) as usize + 2;

    let mut logs: Vec<f64> = cfg.x0.as_slice().iter().map(|&v| v.ln()).collect();
    let mut x: Vec<f64> = cfg.x0.as_slice().to_vec();
    let mut u = vec![0.0; n];
    renormalize(&mut logs, &mut x).ok_or(SimError::NonFinite { step: 0 })?;

    let mut traj = Trajectory::with_capacity(n, cap);
    traj.push(0.0, &x, &logs);

    for step in 0..n_steps {
        for i in 0..n {
            let row = &a[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * x[j];
            }
            u[i] = acc;
        }
        for i in 0..n {
            logs[i] += (u[i] - half_sigma2[i]) * dt + sigma_sqrt_dt[i] * rng.normal(step, i as u64);
        }
        renormalize(&mut logs, &mut x).ok_or(SimError::NonFinite { step: step + 1 })?;
        if (step + 1) % stride == 0 || step + 1 == n_steps {
            traj.push((step + 1) as f64 * dt, &x, &logs);
        }
    }
    Ok(traj)
}

/// Subtracts the running maximum from the log coordinates and refreshes the
/// simplex state. Returns `None` on non-finite values.
fn renormalize(logs: &mut [f64], x: &mut [f64]) -> Option<()> {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let mut sum = 0.0;
    for (l, xi) in logs.iter_mut().zip(x.iter_mut()) {
        *l -= m;
        *xi = l.exp();
        sum += *xi;
    }
    if !(sum > 0.0) || !sum.is_finite() {
        return None;
    }
    for xi in x.iter_mut() {
        // exp underflows for log ratios below ~-745; floor at the smallest
        // positive double so recorded states stay strictly positive
        *xi = (*xi / sum).max(f64::MIN_POSITIVE);
    }
    Some(())
}

/// Classical fourth-order Runge-Kutta for the deterministic replicator
/// equation `xdot_i = x_i [(A x)_i - x' A x]` on the effective payoff, with
/// renormalization each step. Used as the small-noise oracle.
pub fn simulate_deterministic(
    game: &Game,
    x0: &SimplexPoint,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory, SimError> {
    if !(dt > 0.0) || !(dt <= t_final) || !t_final.is_finite() {
        return Err(SimError::BadTimeGrid { dt, t_final });
    }
    if !x0.is_interior() {
        return Err(SimError::NotInterior);
    }
    let n = game.n();
    if x0.n() != n {
        return Err(SimError::DimensionMismatch {
            got: x0.n(),
            expected: n,
        });
    }
    let a_eff = game.effective_payoff();
    let mut a = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            a.push(a_eff[(i, j)]);
        }
    }

    let field = |x: &[f64], out: &mut [f64]| {
        let mut avg = 0.0;
        for i in 0..n {
            let row = &a[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * x[j];
            }
            out[i] = acc;
            avg += x[i] * acc;
        }
        for i in 0..n {
            out[i] = x[i] * (out[i] - avg);
        }
    };

    let n_steps = (t_final / dt).round().max(1.0) as u64;
    let stride = ((n_steps as f64 / MAX_DEFAULT_RECORDED as f64)
        .ceil()
        .max(1.0)) as u64;
    let mut x = x0.as_slice().to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    let mut traj = Trajectory::with_capacity(n, (n_steps / stride) as usize + 2);
    let log_of = |x: &[f64]| -> Vec<f64> {
        let mut l: Vec<f64> = x.iter().map(|&v| v.ln()).collect();
        let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in &mut l {
            *v -= m;
        }
        l
    };
    traj.push(0.0, &x, &log_of(&x));

    for step in 0..n_steps {
        field(&x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        field(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        field(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        field(&tmp, &mut k4);
        let mut sum = 0.0;
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            x[i] = x[i].max(f64::MIN_POSITIVE);
            sum += x[i];
        }
        if !sum.is_finite() || !(sum > 0.0) {
            return Err(SimError::NonFinite { step: step + 1 });
        }
        for xi in &mut x {
            *xi /= sum;
        }
        if (step + 1) % stride == 0 || step + 1 == n_steps {
            traj.push((step + 1) as f64 * dt, &x, &log_of(&x));
        }
    }
    Ok(traj)
}

/// Per-run summary for batch simulation: final state, burn-in-adjusted time
/// average and co-occurrence, and the smallest final coordinate.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub final_state: Vec<f64>,
    pub min_final: f64,
    pub time_average: SimplexPoint,
    pub cooccurrence: CooccurrenceMatrix,
}

/// Runs `n_runs` independent simulations with seeds split from `seed_base`.
/// Runs may execute on any number of workers; summaries come back in run
/// order and are bit-identical regardless of scheduling.
pub fn batch_simulate(
    game: &Game,
    cfg: &SimConfig,
    n_runs: usize,
    seed_base: u64,
) -> Result<Vec<RunSummary>, SimError> {
    let burn_in = DEFAULT_BURN_IN_FRACTION * cfg.t_final;
    (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let seed = derive_seed(seed_base, run as u64);
            let run_cfg = SimConfig {
                seed,
                ..cfg.clone()
            };
            let traj = simulate(game, &run_cfg)?;
            let time_average = estimators::time_average(&traj, burn_in)
                .map_err(|e| SimError::Summary(e.to_string()))?;
            let cooccurrence = estimators::cooccurrence(&traj, burn_in)
                .map_err(|e| SimError::Summary(e.to_string()))?;
            let final_state = traj.final_state().to_vec();
            let min_final = final_state.iter().cloned().fold(f64::MAX, f64::min);
            Ok(RunSummary {
                run,
                seed,
                final_state,
                min_final,
                time_average,
                cooccurrence,
            })
        })
        .collect()
}
