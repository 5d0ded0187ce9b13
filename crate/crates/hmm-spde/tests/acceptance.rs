//! Acceptance suite: one pass/fail line per criterion. Exits non-zero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hmm_spde::experiments::{
    averaging, invariant_tau, macro_order, strong_m, warmup_bias, AveragingConfig, InvariantTauConfig, MacroOrderConfig,
    StrongMConfig, WarmupConfig,
};
use hmm_spde::stats::LineFit;
use hmm_spde::validation::{
    collapse_deviation, cost_accounting, fbar_oracle, invariant_variance, pathwise_contraction, ContractionConfig,
    FbarCheckConfig, InvariantVarianceConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn ci(fit: &LineFit) -> String {
    match fit.ci95 {
        Some((lo, hi)) => format!("95% CI [{lo:.3}, {hi:.3}]"),
        None => "no CI".to_owned(),
    }
}

fn ac1() -> anyhow::Result<Outcome> {
    let modes = invariant_variance(&InvariantVarianceConfig::default())?;
    let worst = modes.iter().map(|m| m.z.abs()).fold(0.0, f64::max);
    let detail = modes
        .iter()
        .map(|m| format!("k={} z={:+.2}", m.mode, m.z))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome { pass: worst < 4.0, detail: format!("{detail}; max |z| {worst:.2} < 4") })
}

fn ac2() -> anyhow::Result<Outcome> {
    let cfg = ContractionConfig::default();
    let out = pathwise_contraction(&cfg)?;
    let violations: u64 = out.iter().map(|o| o.violations).sum();
    let worst = out.iter().map(|o| o.max_ratio).fold(0.0, f64::max);
    Ok(Outcome {
        pass: violations == 0 && out.len() as u64 == cfg.pairs * cfg.taus.len() as u64,
        detail: format!(
            "{} chain pairs x {} steps, violations {violations}, max |r_m|^2/(rho^m |r_0|^2) {worst:.3}",
            out.len(),
            cfg.steps
        ),
    })
}

fn ac3() -> anyhow::Result<Outcome> {
    let report = invariant_tau(&InvariantTauConfig::default())?;
    let fit = report.fit("trace").ok_or_else(|| anyhow::anyhow!("no fit"))?;
    Ok(Outcome {
        pass: (fit.slope - 0.5).abs() <= 0.05,
        detail: format!("slope {:.4} in 0.5 +- 0.05, {}", fit.slope, ci(fit)),
    })
}

fn ac4() -> anyhow::Result<Outcome> {
    let report = macro_order(&MacroOrderConfig::default())?;
    let fit = report.fit("p1").ok_or_else(|| anyhow::anyhow!("no fit"))?;
    let gap = report.extra["closed_form_max_deviation"];
    let one_step = report.extra["one_step_error"];
    Ok(Outcome {
        pass: fit.slope >= 0.9 && gap <= 1e-12 && one_step.is_finite(),
        detail: format!(
            "slope {:.3} >= 0.9 ({}), zero-F closed form deviation {gap:.1e} <= 1e-12, one-step error {one_step:.3e}",
            fit.slope,
            ci(fit)
        ),
    })
}

fn ac5() -> anyhow::Result<Outcome> {
    let report = strong_m(&StrongMConfig::default())?;
    let fit = report.fit("strong").ok_or_else(|| anyhow::anyhow!("no fit"))?;
    Ok(Outcome {
        pass: (fit.slope + 0.5).abs() <= 0.15 && fit.points == 4,
        detail: format!("slope {:.3} in -0.5 +- 0.15 over {} points, {}", fit.slope, fit.points, ci(fit)),
    })
}

fn ac6() -> anyhow::Result<Outcome> {
    let report = warmup_bias(&WarmupConfig::default())?;
    let fit = report.fit("bias").ok_or_else(|| anyhow::anyhow!("no fit"))?;
    let reference = report.extra["reference_rate"];
    let rate = -fit.slope;
    let deviation = (rate - reference).abs() / reference;
    Ok(Outcome {
        pass: deviation <= 0.25 && fit.points >= 3,
        detail: format!(
            "rate {rate:.4} vs -2 ln a_1 = {reference:.4}, deviation {:.1}% <= 25% over {} points, {}",
            100.0 * deviation,
            fit.points,
            fit.ci95.map_or("no CI".to_owned(), |(lo, hi)| format!("95% CI [{:.3}, {:.3}]", -hi, -lo))
        ),
    })
}

fn ac7() -> anyhow::Result<Outcome> {
    let c = fbar_oracle(&FbarCheckConfig::default())?;
    let gap = (c.quadrature - c.closed_form).abs();
    Ok(Outcome {
        pass: gap <= 1e-6 && c.z.abs() <= 4.0,
        detail: format!(
            "|quadrature - exp(-sigma^2/2)| {gap:.1e} <= 1e-6; sampled {:.5} +- {:.5} vs scheme-law quadrature {:.5}, z {:+.2} (gap to nu-law value {:.4})",
            c.sampled, c.sampled_stderr, c.scheme_quadrature, c.z, c.nu_gap
        ),
    })
}

fn ac8() -> anyhow::Result<Outcome> {
    let combos = [(1, 1, 1), (1, 4, 3), (5, 1, 2), (3, 2, 10), (8, 3, 1)];
    let dev = collapse_deviation(63, &combos, 1)?;
    Ok(Outcome { pass: dev <= 1e-12, detail: format!("max |X_n - Xbar_n| {dev:.1e} <= 1e-12 over {} (N, M, n_T)", combos.len()) })
}

fn ac9() -> anyhow::Result<Outcome> {
    let report = averaging(&AveragingConfig::default())?;
    let fit = report.fit("strong").ok_or_else(|| anyhow::anyhow!("no fit"))?;
    let weak = report.slope("weak").map_or("weak: noise-dominated, no fit".to_owned(), |s| format!("weak slope {s:.3}"));
    Ok(Outcome {
        pass: fit.slope >= 0.3 && fit.points == 3,
        detail: format!("strong slope {:.3} >= 0.3, {}; {weak}", fit.slope, ci(fit)),
    })
}

fn ac10() -> anyhow::Result<Outcome> {
    let c = cost_accounting(1)?;
    let halving = c.max_halving_error();
    Ok(Outcome {
        pass: c.mismatches == 0 && halving <= 1e-12,
        detail: format!(
            "{} runs, {} counter mismatches; ratio(eps/2)/ratio(eps) off 0.5 by {halving:.1e} over {} requests",
            c.runs,
            c.mismatches,
            c.halving.len()
        ),
    })
}

type Check = fn() -> anyhow::Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(&str, &str, Duration, Check); 10] = [
        ("AC1", "linear-fast invariant law", Duration::from_secs(60), ac1),
        ("AC2", "pathwise contraction", Duration::from_secs(60), ac2),
        ("AC3", "invariant-law tau order", Duration::from_secs(1), ac3),
        ("AC4", "deterministic macrosolver order", Duration::from_secs(10), ac4),
        ("AC5", "HMM fluctuation scaling in M", Duration::from_secs(600), ac5),
        ("AC6", "warm-up bias decay", Duration::from_secs(300), ac6),
        ("AC7", "averaged-coefficient oracle", Duration::from_secs(120), ac7),
        ("AC8", "collapse identity", Duration::from_secs(1), ac8),
        ("AC9", "averaging principle trend", Duration::from_secs(900), ac9),
        ("AC10", "cost model", Duration::from_secs(1), ac10),
    ];
    let mut failures = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= budget, o.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] {id} {name}: {detail} [{:.2}s / {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failures} failed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
