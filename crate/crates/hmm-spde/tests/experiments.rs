use hmm_core::averaging::{averaged_trajectory, ZeroCoefficient};
use hmm_core::coefficients::CoefficientSpec;
use hmm_core::hmm::{run_hmm, EstimatorNoise, HmmParams};
use hmm_core::spectral::SpectralField;
use hmm_core::SlowFastSystem;
use hmm_spde::experiments::*;
use hmm_spde::functional::TestFunctional;
use hmm_spde::stats::{mix_seed, summarize};

#[test]
fn small_strong_sweep_is_reproducible() {
    let cfg = StrongMConfig { modes: 7, replicas: vec![1, 4], seeds: 4, t_final: 0.05, ..Default::default() };
    let a = strong_m(&cfg).unwrap();
    let b = strong_m(&cfg).unwrap();
    assert_eq!(a.rows, b.rows);
    assert!(a.rows.iter().all(|r| r.error > 0.0 && r.n_samples == 4));
}

#[test]
fn odd_reaction_has_no_weak_bias() {
    // F = sin(y), G ≡ 0: F̄ ≡ 0 and the linear functional ⟨X, e_1⟩ has no bias.
    let spec = CoefficientSpec::new(|_, _, y: f64| y.sin(), 1.0);
    let sys = SlowFastSystem::laplacian(spec, 15).unwrap();
    let x0 = SpectralField::basis(15, 1);
    let params = HmmParams::new(1.0, 0.05, 0.05, 0.5, 1, 1, 5).unwrap();
    let phi = TestFunctional::ModeProjection(1);
    let values: Vec<f64> = (0..64)
        .map(|s| {
            let run = run_hmm(&sys, &x0, &SpectralField::zeros(15), &params, &EstimatorNoise::new(mix_seed(9, s, 0))).unwrap();
            phi.eval(run.final_x())
        })
        .collect();
    let xbar = averaged_trajectory(&x0, &ZeroCoefficient { modes: 15 }, &sys.op_a, 0.05, 10).unwrap();
    let s = summarize(&values);
    assert!((s.mean - phi.eval(xbar.last().unwrap())).abs() < 4.0 * s.stderr, "{s:?}");
}

#[test]
fn trace_error_is_positive_and_monotone() {
    let taus = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let errs: Vec<f64> = taus.iter().map(|&t| invariant_trace_error(255, t).unwrap()).collect();
    assert!(errs.iter().all(|&e| e > 0.0));
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn macro_order_one_step_is_finite() {
    let report = macro_order(&MacroOrderConfig { modes: 15, divisions: vec![1, 2, 4], fine_factor: 256, ..Default::default() }).unwrap();
    assert!(report.extra["one_step_error"].is_finite());
    assert!(report.rows.iter().all(|r| r.error.is_finite()));
    assert!(report.extra["closed_form_max_deviation"] <= 1e-12);
}

#[test]
fn weak_tau_oracle_series_shrinks_with_tau() {
    let cfg = WeakTauConfig { modes: 15, taus: vec![0.04, 0.01], seeds: 2, t_final: 0.1, warmup_time: 0.2, window_time: 0.2, ..Default::default() };
    let report = weak_tau(&cfg).unwrap();
    let oracle: Vec<f64> = report.rows_of("oracle").map(|r| r.error).collect();
    assert_eq!(oracle.len(), 2);
    assert!(oracle[1] < oracle[0]);
}

#[test]
fn averaging_refined_step_is_stable() {
    // Fixed ε, halved dt/ε: the strong error estimates agree within noise.
    let base = AveragingConfig { epsilons: vec![0.05], seeds: 32, ..Default::default() };
    let a = averaging(&base).unwrap();
    let b = averaging(&AveragingConfig { dt_over_eps: 0.005, ..base }).unwrap();
    let ra = a.rows_of("strong").next().unwrap();
    let rb = b.rows_of("strong").next().unwrap();
    assert!((ra.error - rb.error).abs() < 4.0 * (ra.mc_stderr.powi(2) + rb.mc_stderr.powi(2)).sqrt());
}

#[test]
fn experiment_names_round_trip() {
    for e in Experiment::ALL {
        assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
    }
}
