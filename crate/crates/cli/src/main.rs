//! `srd` — analyze, classify, simulate, and verify stochastic replicator
//! dynamics for symmetric two-player games under Gaussian payoff noise.
//!
//! Exit codes: 0 success / verification passed, 1 verification failed,
//! 2 input error, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use srd_core::analysis::dirichlet_invariant;
use srd_core::classify::{classify, Label};
use srd_core::estimators::{estimator_report, hannan_residuals, pooled_cooccurrence};
use srd_core::game::{Game, SimplexPoint};
use srd_core::report::analysis_report;
use srd_core::rng::{derive_seed, CounterRng};
use srd_core::sim::{batch_simulate, simulate, SimConfig, SimError};
use srd_core::DEFAULT_TOL;

#[derive(Parser)]
#[command(
    name = "srd",
    version,
    about = "Stochastic replicator dynamics: game analysis, simulation, and long-run verification"
)]
struct Cli {
    /// Multiplies every default tolerance and verification threshold
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    /// Suppress informational messages on stderr
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Static analysis: modified game, equilibria, definiteness, Dirichlet
    /// invariant, domination, separation
    Analyze {
        game_file: PathBuf,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-run classification with a machine-checkable certificate
    Classify {
        game_file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one trajectory; emit the trajectory CSV and an estimator
    /// report
    Simulate {
        game_file: PathBuf,
        #[arg(long, default_value_t = 1e4)]
        t_final: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Initial state as comma-separated positive weights (normalized);
        /// default: barycenter
        #[arg(long)]
        x0: Option<String>,
        /// Record every k-th step (default keeps at most 10^6 points)
        #[arg(long)]
        stride: Option<usize>,
        /// Output prefix: writes PREFIX.csv, PREFIX.report.json, and
        /// PREFIX.manifest.json. Without it the report goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classification-conditional Monte Carlo battery; exit 0 iff all checks
    /// pass
    Verify {
        game_file: PathBuf,
        /// Number of independent runs (default depends on the label)
        #[arg(long)]
        runs: Option<usize>,
        /// Horizon (default depends on the label)
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        seed_base: u64,
        /// Write the JSON battery report here as well
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

fn input_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn sim_err(e: SimError) -> CliError {
    match e {
        SimError::NonFinite { .. } => CliError::Numerical(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    command: String,
    game_file: String,
    tol_scale: f64,
    config: serde_json::Value,
    seeds: Vec<u64>,
    timestamp: String,
}

impl Manifest {
    fn new(
        command: &str,
        game_file: &Path,
        tol_scale: f64,
        config: serde_json::Value,
        seeds: Vec<u64>,
    ) -> Self {
        Manifest {
            tool: "srd".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            game_file: game_file.display().to_string(),
            tol_scale,
            config,
            seeds,
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_game(path: &Path) -> Result<Game, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Game::from_json(&text).map_err(input_err)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(input_err)?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn emit_report<T: Serialize>(
    value: &T,
    out: Option<&Path>,
    manifest: &Manifest,
    quiet: bool,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            write_json(path, value)?;
            let sidecar = manifest_path(path);
            write_json(&sidecar, manifest)?;
            if !quiet {
                eprintln!("wrote {} (+ {})", path.display(), sidecar.display());
            }
        }
        None => {
            let text = serde_json::to_string_pretty(value).map_err(input_err)?;
            println!("{text}");
        }
    }
    Ok(())
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if !(cli.tol_scale > 0.0) || !cli.tol_scale.is_finite() {
        return Err(CliError::Input(format!(
            "--tol-scale must be a positive number, got {}",
            cli.tol_scale
        )));
    }
    let tol = DEFAULT_TOL * cli.tol_scale;
    match cli.command {
        Command::Analyze { game_file, out } => {
            let game = load_game(&game_file)?;
            let report = analysis_report(&game, tol);
            let manifest = Manifest::new(
                "analyze",
                &game_file,
                cli.tol_scale,
                serde_json::json!({}),
                vec![],
            );
            emit_report(&report, out.as_deref(), &manifest, cli.quiet)?;
            Ok(0)
        }
        Command::Classify { game_file, out } => {
            let game = load_game(&game_file)?;
            let report = classify(&game, tol);
            let manifest = Manifest::new(
                "classify",
                &game_file,
                cli.tol_scale,
                serde_json::json!({}),
                vec![],
            );
            emit_report(&report, out.as_deref(), &manifest, cli.quiet)?;
            Ok(0)
        }
        Command::Simulate {
            game_file,
            t_final,
            dt,
            seed,
            x0,
            stride,
            out,
        } => cmd_simulate(
            &game_file,
            t_final,
            dt,
            seed,
            x0,
            stride,
            out,
            tol,
            cli.tol_scale,
            cli.quiet,
        ),
        Command::Verify {
            game_file,
            runs,
            t_final,
            seed_base,
            out,
        } => cmd_verify(
            &game_file,
            runs,
            t_final,
            seed_base,
            out,
            tol,
            cli.tol_scale,
            cli.quiet,
        ),
    }
}

fn parse_x0(text: &str, n: usize) -> Result<SimplexPoint, CliError> {
    let weights: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Input(format!("cannot parse --x0: {e}")))?;
    if weights.len() != n {
        return Err(CliError::Input(format!(
            "--x0 has {} coordinates but the game has {} strategies",
            weights.len(),
            n
        )));
    }
    SimplexPoint::from_weights(&weights).map_err(input_err)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    game_file: &Path,
    t_final: f64,
    dt: f64,
    seed: u64,
    x0: Option<String>,
    stride: Option<usize>,
    out: Option<PathBuf>,
    tol: f64,
    tol_scale: f64,
    quiet: bool,
) -> Result<u8, CliError> {
    let game = load_game(game_file)?;
    let n = game.n();
    let x0 = match x0 {
        Some(text) => parse_x0(&text, n)?,
        None => SimplexPoint::barycenter(n),
    };
    let mut cfg = SimConfig::new(dt, t_final, seed, x0).map_err(sim_err)?;
    if let Some(s) = stride {
        cfg = cfg.with_stride(s).map_err(sim_err)?;
    }

    let traj = simulate(&game, &cfg).map_err(sim_err)?;
    let burn_in = srd_core::sim::DEFAULT_BURN_IN_FRACTION * t_final;
    let thin = (traj.len() / 50_000).max(1);
    let dirichlet = dirichlet_invariant(&game, tol);
    let report = estimator_report(&game.modified(), &traj, burn_in, thin, dirichlet.as_ref())
        .map_err(input_err)?;

    let manifest = Manifest::new(
        "simulate",
        game_file,
        tol_scale,
        serde_json::json!({
            "t_final": t_final,
            "dt": dt,
            "x0": cfg.x0.as_slice(),
            "record_stride": cfg.record_stride,
            "burn_in": burn_in,
            "thin": thin,
        }),
        vec![seed],
    );

    match out {
        Some(prefix) => {
            let csv_path = prefix.with_extension("csv");
            let report_path = prefix.with_extension("report.json");
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)
                .map_err(|e| CliError::Input(format!("cannot serialize trajectory: {e}")))?;
            fs::write(&csv_path, buf).map_err(|e| {
                CliError::Input(format!("cannot write {}: {e}", csv_path.display()))
            })?;
            write_json(&report_path, &report)?;
            let sidecar = manifest_path(&prefix);
            write_json(&sidecar, &manifest)?;
            if !quiet {
                eprintln!(
                    "wrote {}, {} (+ {})",
                    csv_path.display(),
                    report_path.display(),
                    sidecar.display()
                );
            }
        }
        None => {
            let text = serde_json::to_string_pretty(&report).map_err(input_err)?;
            println!("{text}");
        }
    }
    Ok(0)
}

#[derive(Serialize, Deserialize)]
struct VerifyCheck {
    name: String,
    target: String,
    observed: String,
    pass: bool,
}

#[derive(Serialize, Deserialize)]
struct VerifyReport {
    label: Label,
    runs: usize,
    t_final: f64,
    seed_base: u64,
    checks: Vec<VerifyCheck>,
    pass: bool,
}

struct Thresholds {
    time_average: f64,
    hannan: f64,
    mean_abs: f64,
    var_rel: f64,
    cooccurrence: f64,
    extinction: f64,
    boundary_fraction: f64,
    vertex_fraction: f64,
    vertex_stay: f64,
    vertex_converge: f64,
}

impl Thresholds {
    fn scaled(tol_scale: f64) -> Self {
        Thresholds {
            time_average: 0.02 * tol_scale,
            hannan: 0.02 * tol_scale,
            mean_abs: 0.02 * tol_scale,
            var_rel: 0.15 * tol_scale,
            cooccurrence: 0.01 * tol_scale,
            extinction: 1e-6 * tol_scale,
            boundary_fraction: 0.9,
            vertex_fraction: 0.9,
            vertex_stay: 0.2 * tol_scale,
            vertex_converge: 1e-4 * tol_scale,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    game_file: &Path,
    runs: Option<usize>,
    t_final: Option<f64>,
    seed_base: u64,
    out: Option<PathBuf>,
    tol: f64,
    tol_scale: f64,
    quiet: bool,
) -> Result<u8, CliError> {
    let game = load_game(game_file)?;
    let n = game.n();
    let classification = classify(&game, tol);
    let label = classification.label;
    let thresholds = Thresholds::scaled(tol_scale);

    let (default_runs, default_t) = match label {
        Label::PositiveRecurrent => (8, 1e4),
        Label::Transient => (20, 5000.0),
        _ => (8, 5000.0),
    };
    let runs = runs.unwrap_or(default_runs).max(1);
    let t_final = t_final.unwrap_or(default_t);
    let dt = srd_core::sim::DEFAULT_DT;

    if !quiet {
        eprintln!("verify: label {label:?}, {runs} runs, horizon {t_final}, seed base {seed_base}");
    }

    let mut checks: Vec<VerifyCheck> = Vec::new();

    match label {
        Label::PositiveRecurrent => {
            let cfg =
                SimConfig::new(dt, t_final, 0, SimplexPoint::barycenter(n)).map_err(sim_err)?;
            let summaries = batch_simulate(&game, &cfg, runs, seed_base).map_err(sim_err)?;
            let nash: Vec<f64> = classification
                .certificate
                .witness
                .equalizer_point
                .clone()
                .unwrap_or_else(|| vec![1.0 / n as f64; n]);

            let mean_ta: Vec<f64> = (0..n)
                .map(|i| {
                    summaries
                        .iter()
                        .map(|s| s.time_average.coords()[i])
                        .sum::<f64>()
                        / runs as f64
                })
                .collect();
            let ta_dev = mean_ta
                .iter()
                .zip(&nash)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            checks.push(VerifyCheck {
                name: "time average vs interior equilibrium".into(),
                target: format!("<= {:.4}", thresholds.time_average),
                observed: format!("{ta_dev:.4}"),
                pass: ta_dev <= thresholds.time_average,
            });

            let cm = pooled_cooccurrence(&summaries);
            let r = hannan_residuals(&game.modified(), &cm);
            let min_r = r.iter().cloned().fold(f64::MAX, f64::min);
            let min_abs = r.iter().map(|v| v.abs()).fold(f64::MAX, f64::min);
            checks.push(VerifyCheck {
                name: "best-response residuals nonnegative".into(),
                target: format!(">= -{:.4}", thresholds.hannan),
                observed: format!("{min_r:.4}"),
                pass: min_r >= -thresholds.hannan,
            });
            checks.push(VerifyCheck {
                name: "smallest residual vanishes".into(),
                target: format!("<= {:.4}", thresholds.hannan),
                observed: format!("{min_abs:.4}"),
                pass: min_abs <= thresholds.hannan,
            });

            if let Some(d) = &classification.diagnostics.dirichlet {
                let mean_dev = (0..n)
                    .map(|i| (cm.marginals[i] - d.mean[i]).abs())
                    .fold(0.0f64, f64::max);
                checks.push(VerifyCheck {
                    name: "invariant mean".into(),
                    target: format!("<= {:.4}", thresholds.mean_abs),
                    observed: format!("{mean_dev:.4}"),
                    pass: mean_dev <= thresholds.mean_abs,
                });
                let var_rel = (0..n)
                    .map(|i| {
                        let var = cm.p[(i, i)] - cm.marginals[i] * cm.marginals[i];
                        (var - d.variance[i]).abs() / d.variance[i]
                    })
                    .fold(0.0f64, f64::max);
                checks.push(VerifyCheck {
                    name: "invariant variance (relative)".into(),
                    target: format!("<= {:.3}", thresholds.var_rel),
                    observed: format!("{var_rel:.3}"),
                    pass: var_rel <= thresholds.var_rel,
                });
            }

            if n == 2 {
                // closed-form co-occurrence for two-strategy positive
                // recurrence: equality in the best-response bound pins p12
                let at = game.modified().atilde().clone();
                let s = game.sigma();
                let p = &nash;
                let ap1 = at[(0, 0)] * p[0] + at[(0, 1)] * p[1];
                let denom = at[(0, 1)] + at[(1, 0)] - at[(0, 0)] - at[(1, 1)]
                    + 0.5 * (s[0] * s[0] + s[1] * s[1]);
                let p12 = (ap1 - at[(0, 0)] * p[0] - at[(1, 1)] * p[1]) / denom;
                let dev = (cm.p[(0, 1)] - p12).abs();
                checks.push(VerifyCheck {
                    name: format!("co-occurrence p12 vs closed form {p12:.5}"),
                    target: format!("<= {:.4}", thresholds.cooccurrence),
                    observed: format!("{dev:.4}"),
                    pass: dev <= thresholds.cooccurrence,
                });
            }
        }
        Label::Transient => {
            let cfg =
                SimConfig::new(dt, t_final, 0, SimplexPoint::barycenter(n)).map_err(sim_err)?;
            let summaries = batch_simulate(&game, &cfg, runs, seed_base).map_err(sim_err)?;
            let absorbed = summaries
                .iter()
                .filter(|s| s.min_final < thresholds.extinction)
                .count();
            let fraction = absorbed as f64 / runs as f64;
            checks.push(VerifyCheck {
                name: format!(
                    "boundary approach: min_i X_i(T) < {:.0e}",
                    thresholds.extinction
                ),
                target: format!(">= {:.0}%", thresholds.boundary_fraction * 100.0),
                observed: format!("{absorbed}/{runs}"),
                pass: fraction >= thresholds.boundary_fraction,
            });
        }
        _ => {}
    }

    // local stability of every certified stable vertex, any label
    for &vertex in &classification.stable_vertices {
        let k = vertex - 1;
        let vertex_runs = 50;
        let mut good = 0;
        let rng = CounterRng::new(derive_seed(seed_base, 0xfe + vertex as u64));
        for run in 0..vertex_runs {
            let mut direction: Vec<f64> =
                (0..n).map(|i| 0.05 + rng.uniform(run, i as u64)).collect();
            direction[k] = 0.0;
            let total: f64 = direction.iter().sum();
            let mut x0 = vec![0.0; n];
            let mut norm = 0.0;
            for i in 0..n {
                let d = if i == k { -1.0 } else { direction[i] / total };
                norm += d * d;
            }
            let norm = norm.sqrt();
            for (i, v) in x0.iter_mut().enumerate() {
                let d = if i == k { -1.0 } else { direction[i] / total };
                *v = (if i == k { 1.0 } else { 0.0 }) + 0.05 * d / norm;
            }
            let x0 = SimplexPoint::from_slice(&x0).map_err(input_err)?;
            let cfg = SimConfig::new(dt, 500.0, derive_seed(seed_base, 0x1000 + run), x0)
                .map_err(sim_err)?
                .with_stride(10)
                .map_err(sim_err)?;
            let traj = simulate(&game, &cfg).map_err(sim_err)?;
            let dist = |state: &[f64]| {
                let mut d2 = 0.0;
                for (i, &v) in state.iter().enumerate() {
                    let t = v - if i == k { 1.0 } else { 0.0 };
                    d2 += t * t;
                }
                d2.sqrt()
            };
            let stayed = (0..traj.len()).all(|m| dist(traj.state(m)) <= thresholds.vertex_stay);
            let converged = dist(traj.final_state()) < thresholds.vertex_converge;
            if stayed && converged {
                good += 1;
            }
        }
        let fraction = good as f64 / vertex_runs as f64;
        checks.push(VerifyCheck {
            name: format!(
                "stable vertex {vertex}: stay within {} and converge",
                thresholds.vertex_stay
            ),
            target: format!(">= {:.0}%", thresholds.vertex_fraction * 100.0),
            observed: format!("{good}/{vertex_runs}"),
            pass: fraction >= thresholds.vertex_fraction,
        });
    }

    let pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        label,
        runs,
        t_final,
        seed_base,
        checks,
        pass,
    };

    println!(
        "{:<55} {:>12} {:>12} {:>7}",
        "check", "target", "observed", "status"
    );
    for c in &report.checks {
        println!(
            "{:<55} {:>12} {:>12} {:>7}",
            c.name,
            c.target,
            c.observed,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    if report.checks.is_empty() {
        println!("(no applicable checks for label {label:?})");
    }
    println!(
        "verify: {} ({}/{} checks)",
        if pass { "PASS" } else { "FAIL" },
        report.checks.iter().filter(|c| c.pass).count(),
        report.checks.len()
    );

    if let Some(path) = out {
        let seeds: Vec<u64> = (0..runs)
            .map(|r| derive_seed(seed_base, r as u64))
            .collect();
        let manifest = Manifest::new(
            "verify",
            game_file,
            tol_scale,
            serde_json::json!({
                "runs": runs,
                "t_final": t_final,
                "dt": dt,
                "vertex_runs": 50,
                "vertex_t_final": 500.0,
                "vertex_start_distance": 0.05,
            }),
            seeds,
        );
        write_json(&path, &report)?;
        let sidecar = manifest_path(&path);
        write_json(&sidecar, &manifest)?;
        if !quiet {
            eprintln!("wrote {} (+ {})", path.display(), sidecar.display());
        }
    }

    Ok(if pass { 0 } else { 1 })
}
