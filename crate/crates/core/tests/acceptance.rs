//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the output; exits non-zero if any
//! criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use mdiqkd::bessel::bessel_i0;
use mdiqkd::decoy::{single_photon_error_gain_upper, single_photon_yield_bounds, BasisEstimate, SinglePhotonEstimates};
use mdiqkd::finitekey::{chernoff_interval, finite_key_rate, point_table, synthesize_counts, FiniteKeyConfig};
use mdiqkd::model::{pair_observables, BasisPair, ChannelParams, IntensityPair, MisalignmentAngle};
use mdiqkd::optimizer::{optimize_parameters, Objective, OptimizerSettings, ParameterBounds};
use mdiqkd::oracle::{coverage_check, i0_by_quadrature, synthetic_decoy_fixture, YieldGrid};
use mdiqkd::pipeline::{asymptotic_key_rate, model_key_rate, Mode};
use mdiqkd::protocol::{IntensitySettings, Prefactors, ProtocolConfig, Sampling, Variant};
use mdiqkd::security::c_quantity;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn estimates_from_uppers(e: [f64; 4]) -> SinglePhotonEstimates {
    let bases: BTreeMap<_, _> = BasisPair::CORRELATION_SET
        .iter()
        .zip(e)
        .map(|(&basis, e)| {
            let est = BasisEstimate {
                basis,
                flipped: false,
                s11_lower: 0.0,
                s11_upper: 0.0,
                s11_lower_printed_t1: 0.0,
                es11_lower: 0.0,
                es11_upper: 0.0,
                e11_lower: None,
                e11_upper: Some(e),
            };
            (basis, est)
        })
        .collect();
    SinglePhotonEstimates {
        variant: Variant::Rfi,
        s_zz_11_lower: 0.0,
        s_zz_11_upper: 0.0,
        es_zz_11_upper: 0.0,
        e_zz_11_upper: None,
        bases,
        choices: Vec::new(),
    }
}

/// `C` from tabulated single-photon error-rate upper bounds.
fn ac1_c_fixtures() -> Outcome {
    let rows: [(&str, [f64; 4], f64, f64); 4] = [
        ("asymptotic 0 deg", [0.052, 0.035, 0.534, 0.527], 1.668, 5e-4),
        ("asymptotic 25 deg", [0.174, 0.225, 0.176, 0.166], 1.594, 0.002),
        ("finite 0 deg", [0.262, 0.212, 0.683, 0.631], 0.558, 0.01),
        ("finite 25 deg", [0.348, 0.350, 0.319, 0.316], 0.449, 0.01),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, e, want, tol) in rows {
        let c = c_quantity(&estimates_from_uppers(e)).map_err(|e| e.to_string())?;
        ok &= (c - want).abs() <= tol;
        parts.push(format!("{name}: C = {c:.4} (target {want} ± {tol})"));
    }
    check(ok, parts.join("; "))
}

fn channel_strategy() -> impl Strategy<Value = ChannelParams> {
    (0.05..0.9f64, -8.0..-4.0f64, 0.0..0.1f64, 0.15..0.25f64, 0.0..150.0f64, 0.0..150.0f64).prop_map(
        |(eta_d, log_pd, e_d, alpha, dist_a, dist_b)| ChannelParams {
            eta_d,
            p_d: 10f64.powf(log_pd),
            e_d,
            alpha,
            dist_a,
            dist_b,
            ..ChannelParams::reference(0.0)
        },
    )
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Symmetries of the gains and error rates in β.
fn ac2_model_symmetries() -> Outcome {
    const TOL: f64 = 1e-12;
    let config = Config { cases: 1000, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let strategy = (channel_strategy(), 0.0..90.0f64, 1e-3..1.5f64, 1e-3..1.5f64);
    let result = runner.run(&strategy, |(ch, beta, la, lb)| {
        let pair = IntensityPair::new(la, lb);
        let obs = |deg: f64, basis| pair_observables(&ch, MisalignmentAngle::from_degrees(deg), &pair, basis).unwrap();
        let err = |deg: f64, basis| obs(deg, basis).error_rate().unwrap();
        let xx = obs(beta, BasisPair::XX);
        let xx_mirror = obs(90.0 - beta, BasisPair::XX);
        prop_assert!(rel_close(xx.q, xx_mirror.q, TOL), "Q_XX {} vs {}", xx.q, xx_mirror.q);
        let sum = err(beta, BasisPair::XX) + err(90.0 - beta, BasisPair::XX);
        prop_assert!((sum - 1.0).abs() <= TOL, "E_XX sum {sum}");
        let xy = obs(beta, BasisPair::XY);
        let xx_shift = obs(45.0 - beta, BasisPair::XX);
        prop_assert!(rel_close(xy.q, xx_shift.q, TOL), "Q_XY {} vs Q_XX(45-b) {}", xy.q, xx_shift.q);
        prop_assert!((err(0.0, BasisPair::XY) - 0.5).abs() <= TOL);
        prop_assert!((err(45.0, BasisPair::XX) - 0.5).abs() <= TOL);
        Ok(())
    });
    match result {
        Ok(()) => Ok("1000 randomized (channel, beta, intensity) tuples, 0 violations at 1e-12".into()),
        Err(e) => Err(format!("violation: {e}")),
    }
}

/// Decoy bounds contain the true single-photon quantities of random
/// photon-number mixtures.
fn ac3_decoy_sandwich() -> Outcome {
    const FIXTURES: usize = 240;
    const TOL: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a4d);
    let mut violations = Vec::new();
    for i in 0..FIXTURES {
        let settings = if i % 2 == 0 {
            let mu = rng.random_range(0.05..1.0);
            IntensitySettings::Symmetric { mu, nu: rng.random_range(0.001..0.9) * mu }
        } else {
            let mu_x = rng.random_range(0.05..1.0);
            IntensitySettings::Biased {
                mu_z: rng.random_range(0.05..1.0),
                mu_x,
                nu_x: rng.random_range(0.001..0.9) * mu_x,
            }
        };
        let grid = YieldGrid::from_fn(|_, _| (rng.random::<f64>(), rng.random::<f64>()));
        let (y11, e11) = (grid.yields[1][1], grid.errors[1][1]);
        let table = synthetic_decoy_fixture(&grid, &settings).map_err(|e| e.to_string())?;
        let yb = single_photon_yield_bounds(&table, BasisPair::XX, &settings).map_err(|e| e.to_string())?;
        if yb.lower > y11 + TOL || yb.upper < y11 - TOL {
            violations.push(format!("#{i}: Y11 {y11} outside [{}, {}]", yb.lower, yb.upper));
        }
        for (basis, signal_only) in [(BasisPair::XX, false), (BasisPair::ZZ, true)] {
            let es =
                single_photon_error_gain_upper(&table, basis, &settings, signal_only).map_err(|e| e.to_string())?;
            if es < y11 * e11 - TOL {
                violations.push(format!("#{i}: {basis} es11 upper {es} below {}", y11 * e11));
            }
        }
    }
    check(
        violations.is_empty(),
        format!("{FIXTURES} fixtures, {} violations {}", violations.len(), violations.join("; ")),
    )
}

/// Series against trapezoidal quadrature.
fn ac4_bessel() -> Outcome {
    const POINTS: usize = 10_000;
    let mut worst: (f64, f64) = (0.0, 0.0);
    for k in 0..POINTS {
        let z = 30.0 * k as f64 / (POINTS - 1) as f64;
        let series = bessel_i0(z).map_err(|e| e.to_string())?;
        let quad = i0_by_quadrature(z);
        let rel = (series - quad).abs() / quad;
        if rel > worst.0 {
            worst = (rel, z);
        }
    }
    check(
        worst.0 <= 1e-9,
        format!("{POINTS} points on [0, 30], worst relative error {:.2e} at z = {}", worst.0, worst.1),
    )
}

fn optimized_rate(
    protocol: ProtocolConfig,
    params: &ChannelParams,
    mode: Mode,
    bounds: &ParameterBounds,
) -> Result<f64, String> {
    let objective = Objective { protocol, params: *params, mode };
    optimize_parameters(&objective, bounds, &OptimizerSettings::default())
        .map(|r| r.best_rate)
        .map_err(|e| e.to_string())
}

fn symmetric(variant: Variant, beta: f64, mu: f64, nu: f64) -> ProtocolConfig {
    ProtocolConfig {
        variant,
        intensities: IntensitySettings::Symmetric { mu, nu },
        beta: MisalignmentAngle::from_degrees(beta),
        ..ProtocolConfig::default()
    }
}

/// Asymptotic β-robustness of the RFI rate and its advantage over the
/// original protocol at 80 km per arm.
fn ac5_asymptotic_behavior() -> Outcome {
    let params = ChannelParams::reference(80.0);
    let bounds = ParameterBounds::default();
    let mut rates = Vec::new();
    for beta in (0..=45).step_by(5) {
        rates.push(optimized_rate(
            symmetric(Variant::Rfi, beta as f64, 0.67, 0.01),
            &params,
            Mode::Asymptotic,
            &bounds,
        )?);
    }
    let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let variation = (max - min) / max;

    let rfi = optimized_rate(symmetric(Variant::Rfi, 25.0, 0.67, 0.01), &params, Mode::Asymptotic, &bounds)?;
    let original = optimized_rate(symmetric(Variant::Original, 25.0, 0.35, 0.01), &params, Mode::Asymptotic, &bounds)?;
    let ratio = rfi / original;
    // Measured operating points, reported alongside: RFI at (0.67, 0.01), original at (0.35, 0.01).
    let at = |v, mu| model_key_rate(&symmetric(v, 25.0, mu, 0.01), &params, &Mode::Asymptotic).map(|r| r.rate);
    let fixed_ratio =
        at(Variant::Rfi, 0.67).map_err(|e| e.to_string())? / at(Variant::Original, 0.35).map_err(|e| e.to_string())?;

    check(
        variation < 0.05 && ratio >= 10.0,
        format!(
            "optimized RFI rate over beta 0..45 deg varies {:.2}% (< 5% required); \
             RFI/original at 25 deg = {ratio:.2} ({rfi:.3e} / {original:.3e}, >= 10 required); \
             at measured operating points {fixed_ratio:.2}",
            100.0 * variation
        ),
    )
}

fn biased_finite(beta: f64) -> ProtocolConfig {
    ProtocolConfig {
        intensities: IntensitySettings::Biased { mu_z: 0.324, mu_x: 0.33, nu_x: 0.074 },
        sampling: Sampling::default(),
        prefactors: Prefactors::Sampling,
        beta: MisalignmentAngle::from_degrees(beta),
        ..ProtocolConfig::default()
    }
}

/// The optimiser is at least as good as re-optimising around quoted `μ_z` optima.
fn ac6_optimizer_targets() -> Outcome {
    let params = ChannelParams::reference(50.0);
    let mode = Mode::Finite(FiniteKeyConfig { n_pairs: 3_000_000_000_000, epsilon: 1e-10 });
    let mut ok = true;
    let mut parts = Vec::new();
    for (beta, mu_z) in [(0.0, 0.4407), (25.0, 0.2648)] {
        let free = optimized_rate(biased_finite(beta), &params, mode, &ParameterBounds::default())?;
        let pinned_bounds = ParameterBounds::default().fix("mu_z", mu_z).map_err(|e| e.to_string())?;
        let pinned = optimized_rate(biased_finite(beta), &params, mode, &pinned_bounds)?;
        let ratio = free / pinned;
        ok &= pinned > 0.0 && ratio >= 0.98;
        parts.push(format!("beta {beta} deg: {free:.4e} vs {pinned:.4e} at mu_z = {mu_z} (ratio {ratio:.4})"));
    }
    check(ok, parts.join("; "))
}

fn random_protocol(rng: &mut ChaCha8Rng) -> ProtocolConfig {
    let variant = if rng.random_bool(0.5) { Variant::Rfi } else { Variant::Original };
    let intensities = if rng.random_bool(0.5) {
        let mu = rng.random_range(0.1..0.9);
        IntensitySettings::Symmetric { mu, nu: rng.random_range(0.01..0.5) * mu }
    } else {
        let mu_x = rng.random_range(0.1..0.9);
        IntensitySettings::Biased { mu_z: rng.random_range(0.1..0.9), mu_x, nu_x: rng.random_range(0.01..0.5) * mu_x }
    };
    let p_x = rng.random_range(0.05..0.3);
    ProtocolConfig {
        variant,
        intensities,
        sampling: Sampling {
            p_z: rng.random_range(0.1..(0.95 - 2.0 * p_x)),
            p_x,
            p_x_signal: rng.random_range(0.1..0.9),
        },
        prefactors: if rng.random_bool(0.5) { Prefactors::Unit } else { Prefactors::Sampling },
        beta: MisalignmentAngle::from_degrees(rng.random_range(0.0..45.0)),
        ..ProtocolConfig::default()
    }
}

/// Fluctuation bounds never raise the rate, and Chernoff intervals cover
/// at the nominal level.
fn ac7_finite_key_sanity() -> Outcome {
    const CONFIGS: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1);
    let mut violations = Vec::new();
    let mut positive = 0;
    for i in 0..CONFIGS {
        let protocol = random_protocol(&mut rng);
        let params = ChannelParams::reference(rng.random_range(0.0..40.0));
        let finite = FiniteKeyConfig {
            n_pairs: 10f64.powf(rng.random_range(12.0..15.0)) as u64,
            epsilon: 10f64.powf(rng.random_range(-12.0..-4.0)),
        };
        let counts = synthesize_counts(&protocol, &params, finite.n_pairs).map_err(|e| format!("config {i}: {e}"))?;
        let fin = finite_key_rate(&counts, &finite, &protocol, &params).map_err(|e| format!("config {i}: {e}"))?;
        let table = point_table(&counts, &protocol).map_err(|e| e.to_string())?;
        let asym = asymptotic_key_rate(&table, &protocol, &params).map_err(|e| format!("config {i}: {e}"))?;
        if fin.rate > 0.0 {
            positive += 1;
        }
        if fin.rate > asym.rate || fin.rate_unclamped > asym.rate_unclamped {
            violations
                .push(format!("config {i}: finite {:e} > asymptotic {:e}", fin.rate_unclamped, asym.rate_unclamped));
        }
    }

    const TRIALS: u64 = 100_000;
    const EPSILON: f64 = 1e-2;
    let mut worst: f64 = 0.0;
    for (n, p) in [(1_000, 0.01), (10_000, 0.003), (100_000, 0.2), (50, 0.3)] {
        let miss = coverage_check(chernoff_interval, TRIALS, n, p, EPSILON, 7).map_err(|e| e.to_string())?;
        worst = worst.max(miss);
    }
    check(
        violations.is_empty() && worst <= 1.2 * EPSILON,
        format!(
            "{CONFIGS} configs ({positive} with positive finite rate), {} finite > asymptotic {}; \
             worst Chernoff miss rate {worst:.2e} over {TRIALS} trials at eps = {EPSILON}",
            violations.len(),
            violations.join("; ")
        ),
    )
}

/// Positive finite-key rates at the experimental `μ_z` settings, with the
/// parameters not fixed by them optimised.
fn ac8_positive_finite_rates() -> Outcome {
    let finite = FiniteKeyConfig { n_pairs: 3_000_000_000_000, epsilon: 1e-10 };
    let mut ok = true;
    let mut parts = Vec::new();
    for (dist, beta, mu_z) in [(50.0, 25.0, 0.265), (60.0, 0.0, 0.324)] {
        let params = ChannelParams::reference(dist);
        let bounds = ParameterBounds::default().fix("mu_z", mu_z).map_err(|e| e.to_string())?;
        let objective = Objective { protocol: biased_finite(beta), params, mode: Mode::Finite(finite) };
        let opt = optimize_parameters(&objective, &bounds, &OptimizerSettings::default()).map_err(|e| e.to_string())?;
        let report = objective.evaluate(&opt.best).map_err(|e| e.to_string())?;
        let audit = report.finite.as_ref().ok_or("finite audit missing")?;
        ok &= report.rate > 0.0;
        parts.push(format!(
            "{dist} km/arm, beta {beta} deg, mu_z {mu_z}: rate {:.3e}, C {:.3}, I_E {:.3}, e_zz {:.4}, \
             {} intervals, total failure probability {:.1e}",
            report.rate,
            report.c_value.unwrap_or(f64::NAN),
            report.i_e,
            report.e_zz,
            audit.bounds_used,
            audit.total_failure_probability
        ));
    }
    check(ok, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("AC1 C from tabulated error bounds", ac1_c_fixtures),
        ("AC2 model symmetries", ac2_model_symmetries),
        ("AC3 decoy sandwich", ac3_decoy_sandwich),
        ("AC4 Bessel cross-check", ac4_bessel),
        ("AC5 asymptotic beta robustness and advantage", ac5_asymptotic_behavior),
        ("AC6 optimizer targets", ac6_optimizer_targets),
        ("AC7 finite-key sanity", ac7_finite_key_sanity),
        ("AC8 positive finite rates", ac8_positive_finite_rates),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.2} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.2} s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
