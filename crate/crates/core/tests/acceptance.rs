//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any fails. All tolerances are pinned below.

use std::process::ExitCode;

use nalgebra::{DVector, Matrix2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stale_momentum::engine::{expected_iterates_exact, recurrence_iterates, StepParams};
use stale_momentum::objective::linear_spectrum;
use stale_momentum::queueing::{simulate, time_per_step, QueueConfig, WorkTime};
use stale_momentum::rates::{
    convergence_rate, default_mu_s_grid, efficiency_metrics, eigen_rate, linear_grid, log_grid,
    strategy_compare, tune, TuningAxes, TuningGrid,
};
use stale_momentum::staleness::StalenessDistribution;
use stale_momentum::verify::{
    monte_carlo_consistency, theorem1_gaps, theorem2_gaps, theorem2_monte_carlo, theorem4_gaps,
    verify_theorem3, MonteCarloOptions,
};
use stale_momentum::{Exec, Objective, QuadraticObjective};

const QUEUE_WORKERS: [u32; 4] = [2, 4, 8, 16];
const QUEUE_WRITES: u64 = 100_000;
const QUEUE_SEED: u64 = 2024;

const LATTICE_MU_S: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 0.9];
const LATTICE_MU_L: [f64; 4] = [-0.5, 0.0, 0.3, 0.6];
const LATTICE_STEPS: usize = 200;
const LATTICE_BURN_IN: usize = 2;
const LATTICE_TOL: f64 = 1e-9;

const MC_RUNS: usize = 10_000;
const MC_SIGMA: f64 = 0.01;
const MC_MU_S: f64 = 0.5;
const MC_ALPHA: f64 = 0.1;
const MC_SEED: u64 = 7;

const REDUCTION_TOL: f64 = 1e-10;
const FINE_MU_L_STEP: f64 = 0.01;

const FIT_DRAWS: usize = 20;
const FIT_RANGE: (usize, usize) = (50, 200);
const FIT_REL_TOL: f64 = 0.02;
const FIT_SEED: u64 = 11;

const SPEEDUP_RANGE: (f64, f64) = (1.2, 2.0);

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn queueing_law() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for m in QUEUE_WORKERS {
        let r = verify_theorem3(m, 1.0, QUEUE_WRITES, QUEUE_SEED + u64::from(m), WorkTime::Exponential)
            .expect("simulation");
        let chi = r.check("chi-square vs geometric").unwrap();
        let mean = r.check("mean staleness").unwrap();
        passed &= r.passed();
        parts.push(format!(
            "M={m}: chi2={:.1}/{:.1} |z|={:.2}",
            chi.max_discrepancy, chi.tolerance, mean.max_discrepancy
        ));
    }
    outcome(passed, parts.join("; "))
}

fn negative_control() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for m in QUEUE_WORKERS {
        let r = verify_theorem3(m, 1.0, QUEUE_WRITES, QUEUE_SEED, WorkTime::Constant).expect("simulation");
        let chi = r.check("chi-square vs geometric").unwrap();
        passed &= !chi.passed;
        parts.push(format!("M={m}: chi2={:.3e}", chi.max_discrepancy));
    }
    outcome(passed, format!("geometric fit rejected for constant work ({})", parts.join("; ")))
}

fn max_gap(series: &[(usize, f64)]) -> f64 {
    series.iter().map(|(_, g)| *g).fold(0.0, f64::max)
}

fn oracle_lattice() -> Outcome {
    let cases = [
        (QuadraticObjective::from_spectrum(&[1.0], DVector::zeros(1)).unwrap(), 0.1),
        (
            QuadraticObjective::from_spectrum(&linear_spectrum(10, 10.0), DVector::from_element(10, 0.5))
                .unwrap(),
            0.01,
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (obj, alpha) in &cases {
        let w0 = obj.w_star() + DVector::from_element(obj.dim(), 1.0);
        for mu_s in LATTICE_MU_S {
            let dist = StalenessDistribution::geometric(mu_s).unwrap();
            for mu_l in LATTICE_MU_L {
                let params = StepParams::new(*alpha, mu_l).unwrap();
                let dp = expected_iterates_exact(obj, params, &dist, LATTICE_STEPS, &w0).unwrap();
                let rec = recurrence_iterates(obj, params, mu_s, LATTICE_STEPS, &w0).unwrap();
                let rec_gap = (LATTICE_BURN_IN..=LATTICE_STEPS)
                    .map(|t| (&dp.iterates[t] - &rec.iterates[t]).amax())
                    .fold(0.0, f64::max);
                let id4 = theorem4_gaps(obj, *alpha, mu_s, mu_l, &dp, LATTICE_BURN_IN).unwrap();
                worst = worst.max(rec_gap).max(max_gap(&id4));
                count += 2;
                if mu_l == 0.0 {
                    let id1 = theorem1_gaps(obj, *alpha, &dist, &dp, LATTICE_BURN_IN).unwrap();
                    let id2 = theorem2_gaps(obj, *alpha, mu_s, &dp, LATTICE_BURN_IN).unwrap();
                    worst = worst.max(max_gap(&id1)).max(max_gap(&id2));
                    count += 2;
                }
            }
        }
    }
    outcome(
        worst < LATTICE_TOL,
        format!("{count} comparisons on 1-D and 10-D, max gap {worst:.2e} < {LATTICE_TOL:e}"),
    )
}

fn monte_carlo() -> Outcome {
    let obj = QuadraticObjective::from_spectrum(&[1.0], DVector::zeros(1)).unwrap();
    let w0 = DVector::from_element(1, 1.0);
    let dist = StalenessDistribution::geometric(MC_MU_S).unwrap();
    let steps: Vec<usize> = (1..=10).map(|k| 10 * k).collect();
    let mc = MonteCarloOptions::new(MC_RUNS, MC_SIGMA, MC_SEED, steps);
    let params = StepParams::new(MC_ALPHA, 0.0).unwrap();
    let mean = monte_carlo_consistency(&obj, params, &dist, &w0, &mc).unwrap();
    let identity = theorem2_monte_carlo(&obj, MC_ALPHA, MC_MU_S, &w0, &mc).unwrap();
    outcome(
        mean.passed && identity.passed,
        format!(
            "{MC_RUNS} runs, max |z| {:.2} (mean) and {:.2} (identity) vs Bonferroni {:.2}",
            mean.max_discrepancy, identity.max_discrepancy, mean.tolerance
        ),
    )
}

fn heavy_ball_rate(alpha: f64, mu_l: f64, lambda: f64) -> f64 {
    // r^2 - (1 + mu_l - alpha lambda) r + mu_l
    let b = 1.0 + mu_l - alpha * lambda;
    let disc = Complex64::new(b * b - 4.0 * mu_l, 0.0).sqrt();
    let r1 = (Complex64::new(b, 0.0) + disc) / 2.0;
    let r2 = (Complex64::new(b, 0.0) - disc) / 2.0;
    r1.norm().max(r2.norm())
}

fn companion_rate(alpha: f64, mu_l: f64, lambda: f64) -> f64 {
    let m = Matrix2::new(1.0 + mu_l - alpha * lambda, -mu_l, 1.0, 0.0);
    m.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn rate_reductions() -> Outcome {
    let mut worst_a: f64 = 0.0;
    for alpha in [0.01, 0.1, 0.5, 1.5] {
        for lambda in [0.5, 1.0, 3.0] {
            let g = convergence_rate(&[lambda], 0.0, 0.0, alpha).unwrap().gamma;
            worst_a = worst_a.max((g - (1.0 - alpha * lambda).abs()).abs());
        }
    }
    let mut worst_b: f64 = 0.0;
    for alpha in [0.01, 0.1, 0.4] {
        for mu_l in [-0.5, 0.2, 0.6, 0.9] {
            for lambda in [0.5, 1.0, 4.0] {
                let g = eigen_rate(0.0, mu_l, alpha, lambda).unwrap().rate;
                let closed = heavy_ball_rate(alpha, mu_l, lambda);
                let companion = companion_rate(alpha, mu_l, lambda);
                worst_b = worst_b.max((g - closed).abs()).max((g - companion).abs());
            }
        }
    }
    let mut worst_c: f64 = 0.0;
    for q in [2.0, 5.0, 10.0, 20.0, 100.0] {
        let g = convergence_rate(&[1.0, q], 0.0, 0.0, 2.0 / (1.0 + q)).unwrap().gamma;
        worst_c = worst_c.max((g - (q - 1.0) / (q + 1.0)).abs());
    }
    let axes = fine_axes();
    let index = |m: f64| ((m - axes.mu_l[0]) / FINE_MU_L_STEP).round() as i64;
    let mut worst_d = 0;
    let mut gaps = Vec::new();
    for q in [5.0_f64, 10.0, 20.0] {
        let tuned = tune(&[1.0, q], 0.0, &axes, Exec::default()).unwrap();
        let theory = ((q.sqrt() - 1.0) / (q.sqrt() + 1.0)).powi(2);
        worst_d = worst_d.max((index(tuned.mu_l) - index(theory)).abs());
        gaps.push(format!("{:.2} vs {theory:.4}", tuned.mu_l));
    }
    outcome(
        worst_a < REDUCTION_TOL && worst_b < REDUCTION_TOL && worst_c < REDUCTION_TOL && worst_d <= 1,
        format!(
            "(a) {worst_a:.1e} (b) {worst_b:.1e} (c) {worst_c:.1e} < {REDUCTION_TOL:e}; (d) mu_l* {} within one {FINE_MU_L_STEP} grid step",
            gaps.join(", ")
        ),
    )
}

/// `mu_l` in steps of 0.01 on `[-0.9, 0.9]`, 301 log-spaced `alpha` on `[1e-3, 1]`.
fn fine_axes() -> TuningAxes {
    TuningAxes {
        mu_l: linear_grid(-0.9, 0.9, 181),
        alpha: log_grid(1e-3, 1.0, 301),
    }
}

fn optimal_momentum_curve() -> Outcome {
    let axes = TuningAxes::default();
    let step = axes.mu_l[1] - axes.mu_l[0];
    let mut passed = true;
    let mut parts = Vec::new();
    for q in [5.0, 20.0] {
        let grid = TuningGrid::sweep(&[1.0, q], &default_mu_s_grid(), &axes, false, Exec::default()).unwrap();
        let curve = grid.optimal_mu_l();
        let rise = curve
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::NEG_INFINITY, f64::max);
        let negative_high = curve.iter().any(|&(ms, ml)| ms >= 0.7 - 1e-12 && ml < 0.0);
        let at_high = curve.iter().rev().find(|(ms, _)| *ms >= 0.7).map(|c| c.1).unwrap();
        passed &= rise <= step + 1e-12 && negative_high;
        parts.push(format!(
            "Q={q}: mu_l* {:.3} -> {:.3}, max rise {rise:.3}",
            curve[0].1, at_high
        ));
    }
    outcome(passed, format!("{} (resolution {step:.3})", parts.join("; ")))
}

fn distance_comparison() -> Outcome {
    let mu_s: Vec<f64> = default_mu_s_grid().into_iter().filter(|m| *m > 0.3).collect();
    let rows = strategy_compare(&[1.0, 10.0], &mu_s, 10, &fine_axes(), Exec::default()).unwrap();
    let dominated = rows.iter().all(|r| r.distance_tuned < r.distance_zero);
    let best = rows
        .iter()
        .max_by(|a, b| a.speedup_over_zero.total_cmp(&b.speedup_over_zero))
        .unwrap();
    let in_range = rows
        .iter()
        .any(|r| (SPEEDUP_RANGE.0..=SPEEDUP_RANGE.1).contains(&r.speedup_over_zero));
    outcome(
        dominated && in_range,
        format!(
            "tuned proxy below mu_l=0 proxy for all {} mu_s > 0.3; best iteration ratio {:.3} at mu_s={:.2}",
            rows.len(),
            best.speedup_over_zero,
            best.mu_s
        ),
    )
}

/// Least-squares slope of `ln d_t` against `t`, fitted through the local
/// maxima of the sequence when it oscillates and through every point
/// otherwise.
fn fitted_rate(distances: &[f64], range: (usize, usize)) -> f64 {
    let logs: Vec<(f64, f64)> = (range.0..=range.1).map(|t| (t as f64, distances[t].ln())).collect();
    let peaks: Vec<(f64, f64)> = (1..logs.len() - 1)
        .filter(|&i| logs[i].1 >= logs[i - 1].1 && logs[i].1 >= logs[i + 1].1)
        .map(|i| logs[i])
        .collect();
    let pts = if peaks.len() >= 3 { peaks } else { logs };
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx).exp()
}

fn empirical_rate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(FIT_SEED);
    let mut worst: f64 = 0.0;
    let mut accepted = 0;
    let mut tried = 0;
    while accepted < FIT_DRAWS {
        tried += 1;
        let mu_s = rng.random_range(0.0..0.9);
        let mu_l = rng.random_range(-0.5..0.7);
        let lambda = rng.random_range(0.5..5.0);
        let alpha = 10f64.powf(rng.random_range(-3.0..0.0));
        let e = eigen_rate(mu_s, mu_l, alpha, lambda).unwrap();
        // decay visible over the window, and at least three oscillation
        // periods inside it when the dominant root is complex
        let theta = e.root.map_or(0.0, |t| t.arg().abs());
        let oscillating = theta > 1e-9 && theta < std::f64::consts::PI - 1e-9;
        if !(0.5..0.98).contains(&e.rate) || (oscillating && theta < 2.0 * std::f64::consts::PI / 50.0) {
            continue;
        }
        accepted += 1;
        let obj = QuadraticObjective::from_spectrum(&[lambda], DVector::zeros(1)).unwrap();
        let params = StepParams::new(alpha, mu_l).unwrap();
        let rec = recurrence_iterates(&obj, params, mu_s, FIT_RANGE.1, &DVector::from_element(1, 1.0)).unwrap();
        let fit = fitted_rate(&rec.distances(obj.w_star()), FIT_RANGE);
        worst = worst.max((fit / e.rate - 1.0).abs());
    }
    outcome(
        worst <= FIT_REL_TOL,
        format!("{FIT_DRAWS} stable draws ({tried} tried), max relative error {worst:.4} <= {FIT_REL_TOL}"),
    )
}

fn efficiency() -> Outcome {
    let n = QUEUE_WRITES;
    let base = time_per_step(&simulate(&QueueConfig::new(1, 1.0, n, QUEUE_SEED)).unwrap()).unwrap();
    let mut worst_z: f64 = 0.0;
    for m in QUEUE_WORKERS {
        let t = time_per_step(&simulate(&QueueConfig::new(m, 1.0, n, QUEUE_SEED + 1)).unwrap()).unwrap();
        let ratio = t / base;
        let expected = 1.0 / f64::from(m);
        // delta method: both times are means of n exponentials
        let sigma = expected * (2.0 / n as f64).sqrt();
        worst_z = worst_z.max((ratio - expected).abs() / sigma);
    }

    let workers = [1, 2, 4, 8, 16];
    let gammas = [0.9, 0.93, 0.95, 0.98, 0.995];
    let target: f64 = 1e-3;
    let rows = efficiency_metrics(&workers, &gammas, target).unwrap();
    let iters = |g: f64| (target.ln() / g.ln()).ceil();
    let exact = rows.iter().zip(gammas).all(|(r, g)| {
        r.iterations == Some(iters(g) as u64) && r.statistical_efficiency == Some(iters(g) / iters(gammas[0]))
    });
    outcome(
        worst_z <= 3.0 && exact,
        format!("hardware efficiency max |z| {worst_z:.2} <= 3; statistical efficiency exact: {exact}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("queueing law", queueing_law),
        ("negative control", negative_control),
        ("oracle equivalence lattice", oracle_lattice),
        ("Monte-Carlo consistency", monte_carlo),
        ("rate reductions", rate_reductions),
        ("optimal explicit momentum", optimal_momentum_curve),
        ("distance comparison", distance_comparison),
        ("empirical vs analytic rate", empirical_rate),
        ("efficiency identities", efficiency),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.passed {
            failures += 1;
        }
        println!(
            "acceptance {} [{}] {name}: {}",
            i + 1,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
