//! Executable checks of the expected-update identities and of the queueing
//! law for staleness.
//!
//! Exact-mode checks evaluate both sides of an identity on the
//! exact-expectation trajectory from [`expected_iterates_exact`]. Under the
//! clamped-read convention the identities hold from `t = 2` on, so the
//! default burn-in is 2; the only error sources are rounding and the
//! truncated geometric tail, and the recorded tolerance is computed from
//! both.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::engine::{
    ensemble_async, expected_iterates_exact, recurrence_iterates, NoiseModel, StepParams,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::objective::{Objective, QuadraticObjective};
use crate::queueing::{self, QueueConfig, StalenessTrace, WorkTime};
use crate::staleness::StalenessDistribution;

/// Default first step at which expectation identities are checked.
pub const DEFAULT_BURN_IN: usize = 2;

/// Rounding allowance per unit of iterate scale in exact mode.
const ROUNDING_TOLERANCE: f64 = 1e-10;

/// Family-wise error level of a two-sided 3-sigma interval.
pub const THREE_SIGMA_LEVEL: f64 = 0.0027;

pub const CHI_SQUARE_SIGNIFICANCE: f64 = 0.001;

/// Below this many post-warm-up writes the queueing check is inconclusive.
pub const MIN_QUEUE_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    /// Exit code: 0 pass, 1 fail, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }

    /// Worst status of a collection; failures dominate inconclusive results.
    pub fn combine(statuses: impl IntoIterator<Item = Status>) -> Status {
        statuses.into_iter().fold(Status::Pass, |acc, s| match (acc, s) {
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            (Status::Inconclusive, _) | (_, Status::Inconclusive) => Status::Inconclusive,
            _ => Status::Pass,
        })
    }
}

/// One named comparison: a discrepancy series, its maximum, and the
/// tolerance it must stay within.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub oracle: String,
    /// `(t, discrepancy)` pairs.
    pub series: Vec<(usize, f64)>,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        oracle: impl Into<String>,
        series: Vec<(usize, f64)>,
        tolerance: f64,
    ) -> Self {
        let max_discrepancy = series
            .iter()
            .map(|(_, d)| if d.is_nan() { f64::INFINITY } else { *d })
            .fold(0.0, f64::max);
        Self {
            name: name.into(),
            oracle: oracle.into(),
            series,
            max_discrepancy,
            tolerance,
            passed: max_discrepancy <= tolerance,
        }
    }

    fn scalar(name: &str, oracle: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, oracle, vec![(0, value)], tolerance)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theorem: u8,
    pub parameters: serde_json::Value,
    pub checks: Vec<Check>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VerificationReport {
    fn from_checks(theorem: u8, parameters: serde_json::Value, checks: Vec<Check>) -> Self {
        let status = if checks.iter().all(|c| c.passed) {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            theorem,
            parameters,
            checks,
            status,
            note: None,
        }
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.max_discrepancy)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Options shared by the exact-mode expectation checks.
#[derive(Clone, Debug)]
pub struct ExactOptions {
    pub steps: usize,
    pub burn_in: usize,
    pub w0: Option<DVector<f64>>,
}

impl ExactOptions {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            burn_in: DEFAULT_BURN_IN,
            w0: None,
        }
    }

    fn w0(&self, obj: &QuadraticObjective) -> DVector<f64> {
        self.w0
            .clone()
            .unwrap_or_else(|| obj.w_star() + DVector::from_element(obj.dim(), 1.0))
    }
}

fn scale(traj: &Trajectory, w_star: &DVector<f64>) -> f64 {
    traj.iterates
        .iter()
        .map(|w| (w - w_star).amax())
        .fold(1.0, f64::max)
}

/// Rounding allowance plus the worst effect of the tail mass dropped by
/// truncation on one step: `alpha * lambda_max * 2 * scale * P(tau > L)`.
pub fn exact_tolerance(
    obj: &QuadraticObjective,
    alpha: f64,
    staleness: &StalenessDistribution,
    traj: &Trajectory,
) -> f64 {
    let s = scale(traj, obj.w_star());
    let dropped = if traj.steps() > staleness.truncation_level() + 1 {
        staleness.tail(staleness.truncation_level() + 1)
    } else {
        0.0
    };
    ROUNDING_TOLERANCE * s + 4.0 * alpha * obj.max_eigenvalue() * s * dropped
}

fn gradients(obj: &QuadraticObjective, traj: &Trajectory) -> Result<Vec<DVector<f64>>> {
    traj.iterates.iter().map(|w| obj.gradient(w)).collect()
}

/// Gaps `|E[w_{t+1}-w_t] - RHS_t|_inf` of the memory identity
///
/// `E[w_{t+1}-w_t] = E[w_t-w_{t-1}] - alpha q_0 grad_t
///                   + alpha sum_l (q_l - q_{l+1}) grad_{t-l-1}`
///
/// with reads older than `w_0` clamped to `w_0`, which telescopes the
/// remainder of the series into `alpha q_{t-1} grad_0`.
pub fn theorem1_gaps(
    obj: &QuadraticObjective,
    alpha: f64,
    staleness: &StalenessDistribution,
    traj: &Trajectory,
    burn_in: usize,
) -> Result<Vec<(usize, f64)>> {
    let w = &traj.iterates;
    let g = gradients(obj, traj)?;
    let mut gaps = Vec::new();
    for t in burn_in.max(1)..traj.steps() {
        let lhs = &w[t + 1] - &w[t];
        let mut rhs = (&w[t] - &w[t - 1]) - &g[t] * (alpha * staleness.pmf(0));
        for l in 0..t.saturating_sub(1) {
            let dq = staleness.pmf(l) - staleness.pmf(l + 1);
            if dq != 0.0 {
                rhs.axpy(alpha * dq, &g[t - l - 1], 1.0);
            }
        }
        rhs.axpy(alpha * staleness.pmf(t - 1), &g[0], 1.0);
        gaps.push((t, (lhs - rhs).amax()));
    }
    Ok(gaps)
}

/// Gaps of `E[w_{t+1}-w_t] = mu_s E[w_t-w_{t-1}] - (1-mu_s) alpha grad_t`
/// evaluated with a claimed `mu_s`.
pub fn theorem2_gaps(
    obj: &QuadraticObjective,
    alpha: f64,
    mu_s: f64,
    traj: &Trajectory,
    burn_in: usize,
) -> Result<Vec<(usize, f64)>> {
    theorem4_gaps(obj, alpha, mu_s, 0.0, traj, burn_in)
}

/// Gaps of the two-lag identity
///
/// `E[w_{t+1}-w_t] = (mu_l+mu_s) E[w_t-w_{t-1}] - mu_l mu_s E[w_{t-1}-w_{t-2}]
///                   - (1-mu_s) alpha grad_t`.
pub fn theorem4_gaps(
    obj: &QuadraticObjective,
    alpha: f64,
    mu_s: f64,
    mu_l: f64,
    traj: &Trajectory,
    burn_in: usize,
) -> Result<Vec<(usize, f64)>> {
    let w = &traj.iterates;
    let at = |s: isize| &w[s.max(0) as usize];
    let mut gaps = Vec::new();
    for t in burn_in.max(1)..traj.steps() {
        let ti = t as isize;
        let lhs = &w[t + 1] - &w[t];
        let rhs = (at(ti) - at(ti - 1)) * (mu_l + mu_s) - (at(ti - 1) - at(ti - 2)) * (mu_l * mu_s)
            - obj.gradient(&w[t])? * ((1.0 - mu_s) * alpha);
        gaps.push((t, (lhs - rhs).amax()));
    }
    Ok(gaps)
}

fn exact_params(obj: &QuadraticObjective, staleness: &StalenessDistribution, alpha: f64, mu_l: f64, opts: &ExactOptions) -> serde_json::Value {
    json!({
        "alpha": alpha,
        "mu_l": mu_l,
        "staleness": staleness,
        "eigenvalues": obj.eigenvalues(),
        "steps": opts.steps,
        "burn_in": opts.burn_in,
    })
}

/// Memory-from-asynchrony identity for an arbitrary staleness law, without
/// explicit momentum.
pub fn verify_theorem1(
    obj: &QuadraticObjective,
    alpha: f64,
    staleness: &StalenessDistribution,
    opts: &ExactOptions,
) -> Result<VerificationReport> {
    let params = StepParams::new(alpha, 0.0)?;
    let traj = expected_iterates_exact(obj, params, staleness, opts.steps, &opts.w0(obj))?;
    let tol = exact_tolerance(obj, alpha, staleness, &traj);
    let gaps = theorem1_gaps(obj, alpha, staleness, &traj, opts.burn_in)?;
    Ok(VerificationReport::from_checks(
        1,
        exact_params(obj, staleness, alpha, 0.0, opts),
        vec![Check::new(
            "memory identity",
            "exact-expectation dynamic program",
            gaps,
            tol,
        )],
    ))
}

/// Momentum-from-geometric-staleness identity in exact mode.
pub fn verify_theorem2(
    obj: &QuadraticObjective,
    alpha: f64,
    mu_s: f64,
    opts: &ExactOptions,
) -> Result<VerificationReport> {
    let staleness = StalenessDistribution::geometric(mu_s)?;
    let params = StepParams::new(alpha, 0.0)?;
    let traj = expected_iterates_exact(obj, params, &staleness, opts.steps, &opts.w0(obj))?;
    let tol = exact_tolerance(obj, alpha, &staleness, &traj);
    let gaps = theorem2_gaps(obj, alpha, mu_s, &traj, opts.burn_in)?;
    Ok(VerificationReport::from_checks(
        2,
        exact_params(obj, &staleness, alpha, 0.0, opts),
        vec![Check::new(
            "geometric momentum identity",
            "exact-expectation dynamic program",
            gaps,
            tol,
        )],
    ))
}

/// Monte-Carlo settings for ensemble checks.
#[derive(Clone, Debug)]
pub struct MonteCarloOptions {
    pub runs: usize,
    pub noise: NoiseModel,
    pub seed: u64,
    /// Steps at which the ensemble is compared.
    pub check_steps: Vec<usize>,
    /// Family-wise error level, split across all checked coordinates.
    pub level: f64,
    pub exec: Exec,
}

impl MonteCarloOptions {
    pub fn new(runs: usize, sigma: f64, seed: u64, check_steps: Vec<usize>) -> Self {
        Self {
            runs,
            noise: NoiseModel::AdditiveGaussian { sigma },
            seed,
            check_steps,
            level: THREE_SIGMA_LEVEL,
            exec: Exec::Parallel,
        }
    }
}

/// Two-sided Bonferroni critical value for `comparisons` tests at
/// family-wise `level`.
pub fn bonferroni_z(level: f64, comparisons: usize) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(1.0 - level / (2.0 * comparisons.max(1) as f64))
}

/// Ensemble mean of asynchronous runs against the exact expected
/// trajectory. The discrepancy at each checked step is the largest
/// standardised coordinate error `|mean - E w_t| / se`; a zero standard
/// error demands agreement to rounding.
pub fn monte_carlo_consistency(
    obj: &QuadraticObjective,
    params: StepParams,
    staleness: &StalenessDistribution,
    w0: &DVector<f64>,
    mc: &MonteCarloOptions,
) -> Result<Check> {
    let steps = mc.check_steps.iter().copied().max().unwrap_or(0).max(1);
    let exact = expected_iterates_exact(obj, params, staleness, steps, w0)?;
    let stats = ensemble_async(
        obj, params, staleness, steps, w0, mc.noise, mc.runs, mc.seed, mc.exec,
    )?;
    let z = bonferroni_z(mc.level, mc.check_steps.len() * obj.dim());
    let series = mc
        .check_steps
        .iter()
        .map(|&t| {
            let se = stats.standard_error(t);
            let diff = &stats.mean[t] - &exact.iterates[t];
            let worst = diff
                .iter()
                .zip(se.iter())
                .map(|(d, s)| {
                    if *s > 0.0 {
                        d.abs() / s
                    } else if d.abs() <= 1e-12 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(0.0, f64::max);
            (t, worst)
        })
        .collect();
    Ok(Check::new(
        "ensemble mean vs exact expectation",
        format!("{} seeded runs, Bonferroni z = {z:.4}", mc.runs),
        series,
        z,
    ))
}

/// Monte-Carlo form of the geometric momentum identity: per run the
/// residual `w_{t+1}-w_t - mu_s (w_t-w_{t-1}) + (1-mu_s) alpha grad f(w_t)`
/// has zero mean, and its ensemble mean is tested against the CI.
pub fn theorem2_monte_carlo(
    obj: &QuadraticObjective,
    alpha: f64,
    mu_s: f64,
    w0: &DVector<f64>,
    mc: &MonteCarloOptions,
) -> Result<Check> {
    let staleness = StalenessDistribution::geometric(mu_s)?;
    let params = StepParams::new(alpha, 0.0)?;
    let steps = mc.check_steps.iter().copied().max().unwrap_or(1) + 1;
    if mc.runs < 2 {
        return Err(Error::domain("an ensemble needs at least two runs"));
    }
    let (hessian, w_star) = (obj.hessian(), obj.w_star());
    // residuals are linear in the iterates, so their moments follow from a
    // per-run pass; runs are independent and merged in index order
    let residuals: Vec<Result<Vec<DVector<f64>>>> = mc.exec.map_range(mc.runs, |i| {
        let traj = crate::engine::run_async_sgd(
            obj,
            params,
            crate::engine::StalenessSource::Distribution(&staleness),
            steps,
            w0,
            mc.noise,
            crate::engine::ensemble_seed(mc.seed, i as u64),
        )?;
        let w = &traj.iterates;
        Ok(mc
            .check_steps
            .iter()
            .map(|&t| {
                let prev = &w[t.saturating_sub(1)];
                (&w[t + 1] - &w[t]) - (&w[t] - prev) * mu_s
                    + (hessian * (&w[t] - w_star)) * ((1.0 - mu_s) * alpha)
            })
            .collect())
    });
    let k = mc.check_steps.len();
    let d = obj.dim();
    let mut sum = vec![DVector::<f64>::zeros(d); k];
    let mut sum_sq = vec![DVector::<f64>::zeros(d); k];
    for run in residuals {
        for (j, r) in run?.into_iter().enumerate() {
            sum[j] += &r;
            sum_sq[j] += r.component_mul(&r);
        }
    }
    let n = mc.runs as f64;
    let z = bonferroni_z(mc.level, k * d);
    let series = mc
        .check_steps
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let worst = (0..d)
                .map(|c| {
                    let mean = sum[j][c] / n;
                    let var = ((sum_sq[j][c] - n * mean * mean) / (n - 1.0)).max(0.0);
                    let se = (var / n).sqrt();
                    if se > 0.0 {
                        mean.abs() / se
                    } else if mean.abs() <= 1e-12 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(0.0, f64::max);
            (t, worst)
        })
        .collect();
    Ok(Check::new(
        "geometric momentum identity (Monte Carlo)",
        format!("{} seeded runs, Bonferroni z = {z:.4}", mc.runs),
        series,
        z,
    ))
}

/// Implicit-plus-explicit momentum: the two-lag identity on the exact DP,
/// and agreement of the three-term recurrence with the DP.
pub fn verify_theorem4(
    obj: &QuadraticObjective,
    alpha: f64,
    mu_s: f64,
    mu_l: f64,
    opts: &ExactOptions,
) -> Result<VerificationReport> {
    let staleness = StalenessDistribution::geometric(mu_s)?;
    let params = StepParams::new(alpha, mu_l)?;
    let w0 = opts.w0(obj);
    let traj = expected_iterates_exact(obj, params, &staleness, opts.steps, &w0)?;
    let rec = recurrence_iterates(obj, params, mu_s, opts.steps, &w0)?;
    let tol = exact_tolerance(obj, alpha, &staleness, &traj);
    let identity = theorem4_gaps(obj, alpha, mu_s, mu_l, &traj, opts.burn_in)?;
    let recurrence: Vec<(usize, f64)> = (opts.burn_in..=opts.steps)
        .map(|t| (t, (&traj.iterates[t] - &rec.iterates[t]).amax()))
        .collect();
    Ok(VerificationReport::from_checks(
        4,
        exact_params(obj, &staleness, alpha, mu_l, opts),
        vec![
            Check::new(
                "two-lag momentum identity",
                "exact-expectation dynamic program",
                identity,
                tol,
            ),
            Check::new(
                "three-term recurrence",
                "exact-expectation dynamic program",
                recurrence,
                tol,
            ),
        ],
    ))
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub critical_value: f64,
    /// `(first lag, observed, expected)` per bin; the last bin is open.
    pub bins: Vec<(usize, u64, f64)>,
}

/// Chi-square test of observed counts against `model`. Lags are binned one
/// by one while both the bin and the remaining tail expect at least five
/// observations; everything beyond goes into a final open bin.
pub fn chi_square_test(
    counts: &[u64],
    model: &StalenessDistribution,
    significance: f64,
) -> Result<ChiSquareTest> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptyTrace);
    }
    let nf = n as f64;
    let mut bins = Vec::new();
    let mut lag = 0;
    loop {
        let here = nf * model.pmf(lag);
        let rest = nf * model.tail(lag + 1);
        if here >= 5.0 && rest >= 5.0 {
            bins.push((lag, counts.get(lag).copied().unwrap_or(0), here));
            lag += 1;
        } else {
            let observed: u64 = counts.iter().skip(lag).sum();
            bins.push((lag, observed, nf * model.tail(lag)));
            break;
        }
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(_, o, e)| {
            let o = o as f64;
            if e > 0.0 {
                (o - e).powi(2) / e
            } else if o > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    let df = bins.len() - 1;
    let (p_value, critical_value) = if df == 0 {
        (if statistic == 0.0 { 1.0 } else { 0.0 }, 0.0)
    } else {
        let chi = ChiSquared::new(df as f64).map_err(|e| Error::domain(e.to_string()))?;
        let p = if statistic.is_finite() { chi.sf(statistic) } else { 0.0 };
        (p, chi.inverse_cdf(1.0 - significance))
    };
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom: df,
        p_value,
        critical_value,
        bins,
    })
}

/// Queueing law: post-warm-up staleness of `M` workers with `Exp(lambda)`
/// work is geometric with `mu_s = 1 - 1/M` and mean `M - 1`.
///
/// `num_writes` counts the writes kept after the warm-up. The report holds
/// a chi-square check (statistic against the critical value at
/// significance 0.001) and a mean check (standardised error against 3).
pub fn verify_theorem3(
    workers: u32,
    rate: f64,
    num_writes: u64,
    seed: u64,
    work: WorkTime,
) -> Result<VerificationReport> {
    let cfg = QueueConfig::new(workers, rate, num_writes.saturating_add(u64::from(workers)), seed)
        .with_work(work);
    let trace = queueing::simulate(&cfg)?;
    let mut report = theorem3_report(&trace, workers)?;
    report.parameters = json!({
        "workers": workers,
        "rate": rate,
        "num_writes": num_writes,
        "seed": seed,
        "work": work,
    });
    Ok(report)
}

/// Queueing-law checks on an existing trace.
pub fn theorem3_report(trace: &StalenessTrace, workers: u32) -> Result<VerificationReport> {
    let model = StalenessDistribution::from_worker_count(workers)?;
    let empirical = queueing::stationary_histogram(trace)?;
    let counts = empirical.counts().expect("histograms keep counts");
    let n = empirical.sample_size().unwrap_or(0);
    let chi = chi_square_test(counts, &model, CHI_SQUARE_SIGNIFICANCE)?;

    let mean = empirical.mean();
    let se = (model.variance() / n as f64).sqrt();
    let mean_z = if se > 0.0 {
        (mean - model.mean()).abs() / se
    } else if mean == model.mean() {
        0.0
    } else {
        f64::INFINITY
    };

    let chi_check = Check::scalar(
        "chi-square vs geometric",
        &format!(
            "Geometric(1 - 1/{workers}), {} bins, p = {:.4e}",
            chi.bins.len(),
            chi.p_value
        ),
        chi.statistic,
        chi.critical_value,
    );
    let mean_check = Check::scalar("mean staleness", &format!("E tau = {}", workers - 1), mean_z, 3.0);
    let mut report = VerificationReport::from_checks(3, json!({ "workers": workers }), vec![chi_check, mean_check]);
    if (n as usize) < MIN_QUEUE_SAMPLES {
        report.status = Status::Inconclusive;
        report.note = Some(format!(
            "only {n} post-warm-up writes; at least {MIN_QUEUE_SAMPLES} are needed"
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(lambda: f64) -> QuadraticObjective {
        QuadraticObjective::from_spectrum(&[lambda], DVector::zeros(1)).unwrap()
    }

    #[test]
    fn status_combination() {
        use Status::*;
        assert_eq!(Status::combine([Pass, Pass]), Pass);
        assert_eq!(Status::combine([Pass, Inconclusive]), Inconclusive);
        assert_eq!(Status::combine([Inconclusive, Fail]), Fail);
        assert_eq!(Fail.exit_code(), 1);
    }

    #[test]
    fn theorem1_examples() {
        let obj = scalar(1.0);
        let opts = ExactOptions::new(60);
        let r = verify_theorem1(&obj, 0.1, &StalenessDistribution::degenerate(0), &opts).unwrap();
        assert!(r.passed());
        assert!(r.max_discrepancy() < 1e-15);
        let two_point = StalenessDistribution::empirical(vec![0.5, 0.5]).unwrap();
        let r = verify_theorem1(&obj, 0.1, &two_point, &opts).unwrap();
        assert!(r.passed() && r.max_discrepancy() < 1e-10);
        let g = StalenessDistribution::geometric(0.5).unwrap();
        let r = verify_theorem1(&obj, 0.1, &g, &opts).unwrap();
        assert!(r.passed() && r.max_discrepancy() < 1e-9);
    }

    #[test]
    fn theorem2_examples() {
        let obj = scalar(1.0);
        let opts = ExactOptions::new(80);
        for mu_s in [0.0, 0.5] {
            let r = verify_theorem2(&obj, 0.1, mu_s, &opts).unwrap();
            assert!(r.passed() && r.max_discrepancy() < 1e-9, "{r:?}");
        }
        assert!(verify_theorem2(&obj, 0.1, 1.0, &opts).is_err());
    }

    #[test]
    fn wrong_implicit_momentum_is_detected() {
        let obj = scalar(1.0);
        let g = StalenessDistribution::geometric(0.5).unwrap();
        let params = StepParams::new(0.1, 0.0).unwrap();
        let w0 = DVector::from_element(1, 1.0);
        let traj = expected_iterates_exact(&obj, params, &g, 100, &w0).unwrap();
        let tol = exact_tolerance(&obj, 0.1, &g, &traj);
        let gaps = theorem2_gaps(&obj, 0.1, 0.6, &traj, DEFAULT_BURN_IN).unwrap();
        let worst = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
        assert!(worst > 10.0 * tol, "worst {worst}, tol {tol}");
    }

    #[test]
    fn theorem4_examples() {
        let obj = scalar(1.0);
        let opts = ExactOptions::new(50);
        let r = verify_theorem4(&obj, 0.1, 0.5, 0.3, &opts).unwrap();
        assert!(r.passed());
        assert!(r.max_discrepancy() < 1e-9);
        // reductions
        let r0 = verify_theorem4(&obj, 0.1, 0.5, 0.0, &opts).unwrap();
        let r2 = verify_theorem2(&obj, 0.1, 0.5, &opts).unwrap();
        assert_eq!(r0.checks[0].series, r2.checks[0].series);
        assert!(verify_theorem4(&obj, 0.1, 0.0, 0.6, &opts).unwrap().passed());
    }

    #[test]
    fn chi_square_binning() {
        let model = StalenessDistribution::geometric(0.5).unwrap();
        let n = 1000u64;
        let counts: Vec<u64> = (0..12).map(|l| (n as f64 * model.pmf(l)).round() as u64).collect();
        let test = chi_square_test(&counts, &model, 0.001).unwrap();
        assert!(test.bins.iter().all(|b| b.2 >= 5.0));
        assert!(test.p_value > 0.5);
        let total: u64 = test.bins.iter().map(|b| b.1).sum();
        assert_eq!(total, counts.iter().sum::<u64>());
    }

    #[test]
    fn single_worker_passes_trivially() {
        let r = verify_theorem3(1, 1.0, 20_000, 0, WorkTime::Exponential).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn few_samples_are_inconclusive() {
        let r = verify_theorem3(2, 1.0, 500, 0, WorkTime::Exponential).unwrap();
        assert_eq!(r.status, Status::Inconclusive);
    }

    #[test]
    fn bonferroni_critical_values() {
        // a single comparison at 0.0027 is the 3-sigma band
        assert!((bonferroni_z(THREE_SIGMA_LEVEL, 1) - 3.0).abs() < 1e-3);
        assert!(bonferroni_z(THREE_SIGMA_LEVEL, 10) > 3.0);
    }
}
