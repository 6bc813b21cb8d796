//! Acceptance battery. Each test prints one pass/fail line (visible with
//! `cargo test --test acceptance -- --nocapture`) and asserts the stated
//! tolerance.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use srd_core::analysis::{
    conditional_definiteness, dirichlet_invariant, equalizer_set, gamma_balance,
    separating_direction, strict_pure_nash, strictly_dominated, DefinitenessKind,
};
use srd_core::classify::{classify, Label, Rule};
use srd_core::estimators::{hannan_residuals, pooled_cooccurrence};
use srd_core::game::{Game, Interpretation, ModifiedGame, SimplexPoint};
use srd_core::rng::CounterRng;
use srd_core::sim::{batch_simulate, simulate, simulate_deterministic, SimConfig};
use srd_core::DEFAULT_TOL;

fn game(payoff: &[f64], n: usize, sigma: &[f64], interp: Interpretation) -> Game {
    Game::new(
        DMatrix::from_row_slice(n, n, payoff),
        DVector::from_row_slice(sigma),
        interp,
    )
    .unwrap()
}

fn matching(sigma: f64) -> Game {
    game(
        &[0.0, 1.0, 1.0, 0.0],
        2,
        &[sigma, sigma],
        Interpretation::Ito,
    )
}

fn rsp(a1: f64, a2: f64, sigma: f64) -> Game {
    game(
        &[0.0, -a1, a2, a2, 0.0, -a1, -a1, a2, 0.0],
        3,
        &[sigma, sigma, sigma],
        Interpretation::Ito,
    )
}

fn verdict(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:2} [{name}]: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_01_matching_game_closed_form() {
    let start = Instant::now();
    let g = matching(1.0);
    let gamma = gamma_balance(&g, DEFAULT_TOL).unwrap();
    let alpha = dirichlet_invariant(&g, DEFAULT_TOL).unwrap();
    let analysis_ok =
        (gamma - 2.0).abs() < 1e-12 && alpha.alpha().iter().all(|a| (a - 1.0).abs() < 1e-12);

    let cfg = SimConfig::new(1e-3, 1e4, 0, SimplexPoint::barycenter(2)).unwrap();
    let summaries = batch_simulate(&g, &cfg, 8, 0x0c01).unwrap();
    let mean_ta: Vec<f64> = (0..2)
        .map(|i| {
            summaries
                .iter()
                .map(|s| s.time_average.coords()[i])
                .sum::<f64>()
                / summaries.len() as f64
        })
        .collect();
    let ta_dev = mean_ta
        .iter()
        .map(|v| (v - 0.5).abs())
        .fold(0.0f64, f64::max);

    let cm = pooled_cooccurrence(&summaries);
    let p12_dev = (cm.p[(0, 1)] - 1.0 / 6.0).abs();
    let p11_dev = (cm.p[(0, 0)] - 1.0 / 3.0).abs();
    let var = cm.p[(0, 0)] - cm.marginals[0] * cm.marginals[0];
    let var_rel = (var - 1.0 / 12.0).abs() / (1.0 / 12.0);
    let elapsed = start.elapsed().as_secs_f64();

    let pass = analysis_ok
        && ta_dev <= 0.02
        && p12_dev <= 0.01
        && p11_dev <= 0.01
        && var_rel <= 0.15
        && elapsed < 60.0;
    verdict(
        1,
        "matching game closed form",
        pass,
        &format!(
            "gamma={gamma:.12}, alpha=(1,1), |ta-1/2|={ta_dev:.4}, |p12-1/6|={p12_dev:.4}, \
             |p11-1/3|={p11_dev:.4}, var rel err={var_rel:.3}, elapsed={elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_02_recurrent_cyclic_game() {
    let g = rsp(1.0, 2.0, 0.5);
    let report = classify(&g, DEFAULT_TOL);
    let alpha_ok = report
        .certificate
        .witness
        .dirichlet_alpha
        .as_ref()
        .map(|a| a.iter().all(|v| (v - 4.0 / 3.0).abs() < 1e-12))
        .unwrap_or(false);
    let label_ok = report.label == Label::PositiveRecurrent;

    let cfg = SimConfig::new(1e-3, 1e4, 0, SimplexPoint::barycenter(3)).unwrap();
    let summaries = batch_simulate(&g, &cfg, 8, 0x0c02).unwrap();
    let mean_ta: Vec<f64> = (0..3)
        .map(|i| {
            summaries
                .iter()
                .map(|s| s.time_average.coords()[i])
                .sum::<f64>()
                / summaries.len() as f64
        })
        .collect();
    let ta_dev = mean_ta
        .iter()
        .map(|v| (v - 1.0 / 3.0).abs())
        .fold(0.0f64, f64::max);
    let cm = pooled_cooccurrence(&summaries);
    let target = 2.0 / 45.0;
    let var_rel = (0..3)
        .map(|i| {
            let var = cm.p[(i, i)] - cm.marginals[i] * cm.marginals[i];
            (var - target).abs() / target
        })
        .fold(0.0f64, f64::max);

    let pass = label_ok && alpha_ok && ta_dev <= 0.02 && var_rel <= 0.15;
    verdict(
        2,
        "recurrent cyclic game",
        pass,
        &format!(
            "label={:?}, alpha=(4/3,4/3,4/3), |ta-1/3|={ta_dev:.4}, max var rel err={var_rel:.3}",
            report.label
        ),
    );
}

#[test]
fn criterion_03_transient_cyclic_game() {
    let g = rsp(2.0, 1.0, 0.5);
    let report = classify(&g, DEFAULT_TOL);
    let label_ok = report.label == Label::Transient;
    let eig_ok = report
        .certificate
        .witness
        .definiteness_eigenvalues
        .as_ref()
        .map(|e| e.iter().all(|v| (v - 0.5).abs() < 1e-9))
        .unwrap_or(false);

    let cfg = SimConfig::new(1e-3, 5000.0, 0, SimplexPoint::barycenter(3)).unwrap();
    let summaries = batch_simulate(&g, &cfg, 20, 0x0c03).unwrap();
    let absorbed = summaries.iter().filter(|s| s.min_final < 1e-6).count();

    let pass = label_ok && eig_ok && absorbed >= 18;
    verdict(
        3,
        "transient cyclic game",
        pass,
        &format!(
            "label={:?}, projected eigenvalues=0.5, boundary-absorbed {absorbed}/20",
            report.label
        ),
    );
}

#[test]
fn criterion_04_stable_vertex_attraction() {
    // atilde_11 - atilde_21 = atilde_22 - atilde_12 = 1 with sigma = 0.5
    let g = game(&[1.0, 0.0, 0.0, 1.0], 2, &[0.5, 0.5], Interpretation::Ito);
    let strict = strict_pure_nash(&g.modified(), DEFAULT_TOL);
    assert!(strict.contains(&0));

    let delta = 0.05 / 2.0f64.sqrt(); // Euclidean distance 0.05 from e1
    let x0 = SimplexPoint::new(DVector::from_row_slice(&[1.0 - delta, delta])).unwrap();
    let runs = 50;
    let mut good = 0;
    for run in 0..runs {
        let cfg = SimConfig::new(
            1e-3,
            500.0,
            srd_core::rng::derive_seed(0x0c04, run),
            x0.clone(),
        )
        .unwrap()
        .with_stride(10)
        .unwrap();
        let traj = simulate(&g, &cfg).unwrap();
        let dist = |state: &[f64]| {
            let d0 = state[0] - 1.0;
            let d1 = state[1];
            (d0 * d0 + d1 * d1).sqrt()
        };
        let stayed = (0..traj.len()).all(|k| dist(traj.state(k)) <= 0.2);
        let converged = dist(traj.final_state()) < 1e-4;
        if stayed && converged {
            good += 1;
        }
    }
    let pass = good * 10 >= runs as usize * 9;
    verdict(
        4,
        "stable vertex attraction",
        pass,
        &format!("{good}/{runs} runs stayed within 0.2 and reached 1e-4 by T=500"),
    );
}

#[test]
fn criterion_05_dominated_strategy_extinction() {
    // strategy 3 is dominated only by the even mix of strategies 1 and 2
    let g = game(
        &[4.0, 0.0, 2.0, 0.0, 4.0, 2.0, 1.0, 1.0, 0.0],
        3,
        &[0.5, 0.5, 0.5],
        Interpretation::Ito,
    );
    let dom = strictly_dominated(&g.modified(), 2, DEFAULT_TOL);
    let lp_ok = dom.as_ref().map(|d| d.margin > 0.0).unwrap_or(false);

    let cfg = SimConfig::new(1e-3, 2000.0, 0, SimplexPoint::barycenter(3)).unwrap();
    let summaries = batch_simulate(&g, &cfg, 20, 0x0c05).unwrap();
    let extinct = summaries.iter().filter(|s| s.final_state[2] < 1e-6).count();

    let pass = lp_ok && extinct >= 18;
    verdict(
        5,
        "dominated strategy extinction",
        pass,
        &format!(
            "LP margin {:.3}, X3(2000) < 1e-6 in {extinct}/20 runs",
            dom.map(|d| d.margin).unwrap_or(f64::NAN)
        ),
    );
}

#[test]
fn criterion_06_best_response_residuals() {
    let mut details = Vec::new();
    let mut pass = true;
    for (name, g) in [("matching", matching(1.0)), ("cyclic", rsp(1.0, 2.0, 0.5))] {
        let n = g.n();
        let cfg = SimConfig::new(1e-3, 1e4, 0, SimplexPoint::barycenter(n)).unwrap();
        let summaries = batch_simulate(&g, &cfg, 8, 0x0c06).unwrap();
        let cm = pooled_cooccurrence(&summaries);
        let r = hannan_residuals(&g.modified(), &cm);
        let min_r = r.min();
        let min_abs = r.iter().map(|v| v.abs()).fold(f64::MAX, f64::min);
        pass &= min_r >= -0.02 && min_abs <= 0.02;
        details.push(format!("{name}: min r={min_r:.4}, min |r|={min_abs:.4}"));
    }
    verdict(6, "best-response residuals", pass, &details.join("; "));
}

#[test]
fn criterion_07_oracle_equivalence() {
    let rng = CounterRng::new(0x0c07);
    // definiteness vs brute-force sign sampling on 200 matrices
    let mut def_ok = true;
    for trial in 0..200u64 {
        let n = 2 + (rng.uniform(trial, 0) * 4.0) as usize;
        let kind = trial % 4;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = 6.0 * rng.uniform(trial, (10 + i * n + j) as u64) - 3.0;
            }
        }
        if kind == 1 || kind == 2 {
            // random conditionally definite matrix: +/- Gram plus shifts that
            // vanish on the zero-sum hyperplane
            let mut gram = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    gram[(i, j)] = 2.0 * rng.uniform(trial, (100 + i * n + j) as u64) - 1.0;
                }
            }
            let sign = if kind == 1 { 1.0 } else { -1.0 };
            m = (&gram * gram.transpose()) * sign + DMatrix::identity(n, n) * (0.2 * sign);
            for j in 0..n {
                let shift = 2.0 * rng.uniform(trial, (300 + j) as u64) - 1.0;
                for i in 0..n {
                    m[(i, j)] += shift;
                }
            }
        }
        let label = conditional_definiteness(&m, DEFAULT_TOL);
        let mut saw_pos = false;
        let mut saw_neg = false;
        for s in 0..10_000u64 {
            let mut y: Vec<f64> = (0..n)
                .map(|i| rng.normal(trial * 20_000 + s, i as u64))
                .collect();
            let mean = y.iter().sum::<f64>() / n as f64;
            for v in &mut y {
                *v -= mean;
            }
            let norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-9 {
                continue;
            }
            let mut q = 0.0;
            for i in 0..n {
                for j in 0..n {
                    q += y[i] * m[(i, j)] * y[j];
                }
            }
            if q > 0.0 {
                saw_pos = true;
            } else if q < 0.0 {
                saw_neg = true;
            }
        }
        match label.kind {
            DefinitenessKind::CondPositiveDefinite => def_ok &= saw_pos && !saw_neg,
            DefinitenessKind::CondNegativeDefinite => def_ok &= saw_neg && !saw_pos,
            _ => {}
        }
    }

    // separation/equalizer duality on 200 random modified games
    let mut dual_ok = true;
    for trial in 1000..1200u64 {
        let n = 2 + (rng.uniform(trial, 0) * 4.0) as usize;
        let entries: Vec<f64> = (0..n * n)
            .map(|k| 8.0 * rng.uniform(trial, 10 + k as u64) - 4.0)
            .collect();
        let sigma: Vec<f64> = (0..n)
            .map(|k| 0.2 + rng.uniform(trial, 700 + k as u64))
            .collect();
        let mg = ModifiedGame::new(
            DMatrix::from_row_slice(n, n, &entries),
            DVector::from_row_slice(&sigma),
        );
        let eq = equalizer_set(&mg, DEFAULT_TOL);
        let witness = separating_direction(&mg, DEFAULT_TOL);
        dual_ok &= witness.is_some() == !eq.intersects_simplex(DEFAULT_TOL);
    }

    // drift against the elementwise formula on 100 random pairs
    let mut drift_ok = true;
    for trial in 2000..2100u64 {
        let n = 2 + (rng.uniform(trial, 0) * 4.0) as usize;
        let entries: Vec<f64> = (0..n * n)
            .map(|k| 10.0 * rng.uniform(trial, 10 + k as u64) - 5.0)
            .collect();
        let sigma: Vec<f64> = (0..n)
            .map(|k| 0.2 + 2.0 * rng.uniform(trial, 60 + k as u64))
            .collect();
        let g = game(&entries, n, &sigma, Interpretation::Ito);
        let w: Vec<f64> = (0..n)
            .map(|i| 0.05 + rng.uniform(trial, 900 + i as u64))
            .collect();
        let x = SimplexPoint::from_weights(&w).unwrap();
        let b = g.drift(&x);
        let mut m = g.effective_payoff();
        for i in 0..n {
            m[(i, i)] -= sigma[i] * sigma[i];
        }
        let u = &m * x.coords();
        let avg = x.coords().dot(&u);
        for i in 0..n {
            drift_ok &= (b[i] - x.coords()[i] * (u[i] - avg)).abs() < 1e-12;
        }
    }

    let pass = def_ok && dual_ok && drift_ok;
    verdict(
        7,
        "oracle equivalence",
        pass,
        &format!("definiteness={def_ok}, duality={dual_ok}, drift={drift_ok}"),
    );
}

#[test]
fn criterion_08_small_noise_limit() {
    let g = rsp(1.0, 2.0, 1e-4);
    let x0 = SimplexPoint::from_weights(&[0.5, 0.3, 0.2]).unwrap();
    let dt = 2e-4;
    let cfg = SimConfig::new(dt, 10.0, 0x0c08, x0.clone())
        .unwrap()
        .with_stride(1)
        .unwrap();
    let noisy = simulate(&g, &cfg).unwrap();
    let det = simulate_deterministic(&g, &x0, 10.0, dt).unwrap();
    assert_eq!(noisy.len(), det.len());
    let mut sup: f64 = 0.0;
    for k in 0..noisy.len() {
        for i in 0..3 {
            sup = sup.max((noisy.state(k)[i] - det.state(k)[i]).abs());
        }
    }
    verdict(
        8,
        "small-noise limit",
        sup < 1e-2,
        &format!("sup-norm deviation {sup:.2e} over T=10"),
    );
}

#[test]
fn criterion_09_classifier_regression() {
    let suite: Vec<(&str, Game, Label)> = vec![
        ("matching", matching(1.0), Label::PositiveRecurrent),
        (
            "recurrent cyclic",
            rsp(1.0, 2.0, 0.5),
            Label::PositiveRecurrent,
        ),
        ("transient cyclic", rsp(2.0, 1.0, 0.5), Label::Transient),
        (
            "equal-gain cyclic",
            rsp(1.5, 1.5, 0.5),
            Label::ConjecturedNullRecurrent,
        ),
        (
            "boundary tie",
            game(&[1.0, 2.0, 1.0, 0.0], 2, &[1.0, 1.0], Interpretation::Ito),
            Label::NullRecurrent,
        ),
        (
            "bistable",
            game(&[1.0, 0.0, 0.0, 1.0], 2, &[0.5, 0.5], Interpretation::Ito),
            Label::Transient,
        ),
        (
            "two-strategy dominance",
            game(&[2.0, 2.0, 0.0, 0.0], 2, &[1.0, 1.0], Interpretation::Ito),
            Label::Transient,
        ),
        (
            "zero-sum modified with second density",
            game(&[0.5, 1.5, -0.5, 0.5], 2, &[1.0, 1.0], Interpretation::Ito),
            Label::Transient,
        ),
        (
            "constant modified column",
            game(
                &[0.5, 2.0, 0.0, 0.5, 0.0, 3.0, 0.5, 1.0, 1.0],
                3,
                &[1.0, 1.0, 1.0],
                Interpretation::Ito,
            ),
            Label::NotPositiveRecurrent,
        ),
    ];
    let mut pass = true;
    let mut bad = Vec::new();
    for (name, g, expect) in &suite {
        let got = classify(g, DEFAULT_TOL).label;
        if got != *expect {
            pass = false;
            bad.push(format!("{name}: expected {expect:?}, got {got:?}"));
        }
    }
    let detail = if bad.is_empty() {
        "all nine labels as derived".to_string()
    } else {
        bad.join("; ")
    };
    verdict(9, "classifier regression", pass, &detail);
}

#[test]
fn criterion_10_stratonovich_bridge() {
    // the Stratonovich matching game classifies identically to the Ito game
    // with every row shifted by sigma_i^2 / 2
    let strat = game(
        &[0.0, 1.0, 1.0, 0.0],
        2,
        &[1.0, 1.0],
        Interpretation::Stratonovich,
    );
    let ito_shifted = game(&[0.5, 1.5, 1.5, 0.5], 2, &[1.0, 1.0], Interpretation::Ito);
    let r1 = classify(&strat, DEFAULT_TOL);
    let r2 = classify(&ito_shifted, DEFAULT_TOL);
    let reports_equal = serde_json::to_string(&r1).unwrap() == serde_json::to_string(&r2).unwrap();

    // through the bridge, vertex stability reduces to a_kk > max_{j != k} a_jk
    let rng = CounterRng::new(0x0c10);
    let mut bridge_ok = true;
    for trial in 0..50u64 {
        let n = 2 + (rng.uniform(trial, 0) * 3.0) as usize;
        let payoff: Vec<f64> = (0..n * n)
            .map(|k| 4.0 * rng.uniform(trial, 10 + k as u64) - 2.0)
            .collect();
        let sigma: Vec<f64> = (0..n)
            .map(|k| 0.2 + 1.5 * rng.uniform(trial, 400 + k as u64))
            .collect();
        let g = game(&payoff, n, &sigma, Interpretation::Stratonovich);
        let strict = strict_pure_nash(&g.modified(), DEFAULT_TOL);
        let expected: Vec<usize> = (0..n)
            .filter(|&k| (0..n).all(|j| j == k || payoff[k * n + k] > payoff[j * n + k] + 1e-9))
            .collect();
        bridge_ok &= strict == expected;
    }

    let pass = reports_equal && r1.label == Label::PositiveRecurrent && bridge_ok;
    verdict(
        10,
        "stochastic-integral bridge",
        pass,
        &format!(
            "reports equal={reports_equal}, label={:?}, strict-equilibrium reduction on 50 games={bridge_ok}",
            r1.label
        ),
    );
}

#[test]
fn certificate_rules_are_the_expected_ones() {
    // companion to criterion 9: the certificates fire on the intended rules
    let r = classify(&matching(1.0), DEFAULT_TOL);
    assert_eq!(r.certificate.rule, Rule::DirichletInvariant);
    let r = classify(&rsp(2.0, 1.0, 0.5), DEFAULT_TOL);
    assert_eq!(r.certificate.rule, Rule::PositiveDefiniteEqualizer);
    let r = classify(&rsp(1.5, 1.5, 0.5), DEFAULT_TOL);
    assert_eq!(r.certificate.rule, Rule::CyclicSymmetricConjecture);
    let r = classify(
        &game(&[1.0, 2.0, 1.0, 0.0], 2, &[1.0, 1.0], Interpretation::Ito),
        DEFAULT_TOL,
    );
    assert_eq!(r.certificate.rule, Rule::BoundaryTiePair);
}
