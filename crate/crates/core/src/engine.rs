//! Sequential, momentum and staleness-driven asynchronous SGD, plus the
//! exact expected-iterate computations for objectives with linear gradients.
//!
//! Conventions shared by every routine here:
//!
//! * zero initial velocity, `w_{-1} := w_0`;
//! * a read with delay `tau` at step `t` returns `w_{max(t - tau, 0)}`, and the
//!   exact oracle puts the mass `P(tau >= t)` on `w_0` accordingly;
//! * explicit momentum acts on the global iterates:
//!   `w_{t+1} = w_t + mu_l (w_t - w_{t-1}) - alpha (grad f(v_t) + xi_t)`.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`: stream 0 draws
//! staleness, stream 1 draws gradient noise. A synchronous run and an
//! asynchronous run with zero delay therefore see the same noise.

use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::objective::Objective;
use crate::queueing::StalenessTrace;
use crate::staleness::StalenessDistribution;

/// Any iterate component above this magnitude counts as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    None,
    AdditiveGaussian { sigma: f64 },
}

impl NoiseModel {
    pub fn sigma(self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::AdditiveGaussian { sigma } => sigma,
        }
    }

    fn validate(self) -> Result<()> {
        let sigma = self.sigma();
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::domain(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(())
    }
}

/// Step size and explicit momentum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub alpha: f64,
    pub mu_l: f64,
}

impl StepParams {
    pub fn new(alpha: f64, mu_l: f64) -> Result<Self> {
        let p = Self { alpha, mu_l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::domain(format!("step size must be positive, got {}", self.alpha)));
        }
        if !(self.mu_l > -1.0 && self.mu_l < 1.0) {
            return Err(Error::domain(format!(
                "explicit momentum must lie in (-1, 1), got {}",
                self.mu_l
            )));
        }
        Ok(())
    }
}

/// Where the delays of an asynchronous run come from.
#[derive(Clone, Copy, Debug)]
pub enum StalenessSource<'a> {
    Distribution(&'a StalenessDistribution),
    /// Delay of step `t` is the staleness of trace record `t`.
    Trace(&'a StalenessTrace),
}

impl StalenessSource<'_> {
    fn describe(&self) -> String {
        match self {
            StalenessSource::Distribution(d) => d.describe(),
            StalenessSource::Trace(t) => format!("trace({} writes)", t.len()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunSeed {
    Seed(u64),
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub iterates: Vec<DVector<f64>>,
    pub alpha: f64,
    pub mu_l: f64,
    pub staleness: String,
    pub seed: RunSeed,
}

impl Trajectory {
    /// Number of steps `T`; there are `T + 1` iterates.
    pub fn steps(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.iterates.first().map_or(0, |w| w.len())
    }

    /// `|w_t - w_star|_2` for every `t`.
    pub fn distances(&self, w_star: &DVector<f64>) -> Vec<f64> {
        self.iterates.iter().map(|w| (w - w_star).norm()).collect()
    }

    /// Largest componentwise gap to another trajectory over `range`.
    pub fn max_gap(&self, other: &Trajectory, range: std::ops::Range<usize>) -> f64 {
        range
            .filter_map(|t| Some((self.iterates.get(t)?, other.iterates.get(t)?)))
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t, w_0 .. w_{d-1}, f`.
    pub fn write_csv<W: Write, O: Objective + ?Sized>(&self, objective: &O, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim()).map(|i| format!("w{i}")));
        header.push("f".into());
        w.write_record(&header)?;
        for (t, it) in self.iterates.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(it.iter().map(|x| format!("{x:?}")));
            row.push(format!("{:?}", objective.value(it)?));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_inputs<O: Objective + ?Sized>(
    objective: &O,
    params: &StepParams,
    steps: usize,
    w0: &DVector<f64>,
) -> Result<()> {
    params.validate()?;
    if steps == 0 {
        return Err(Error::domain("at least one step is required"));
    }
    if w0.len() != objective.dim() {
        return Err(Error::Dimension {
            expected: objective.dim(),
            got: w0.len(),
        });
    }
    Ok(())
}

fn check_finite(w: &DVector<f64>, step: usize) -> Result<()> {
    if w.iter().all(|x| x.is_finite() && x.abs() <= DIVERGENCE_THRESHOLD) {
        Ok(())
    } else {
        Err(Error::Diverged {
            step,
            last_finite: step - 1,
        })
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn add_noise(g: &mut DVector<f64>, noise: NoiseModel, rng: &mut ChaCha8Rng) {
    if let NoiseModel::AdditiveGaussian { sigma } = noise {
        for x in g.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *x += sigma * z;
        }
    }
}

/// Heavy-ball SGD: `w_{t+1} = w_t + mu_l (w_t - w_{t-1}) - alpha grad f(w_t)`.
pub fn run_momentum_sgd<O: Objective + ?Sized>(
    objective: &O,
    params: StepParams,
    steps: usize,
    w0: &DVector<f64>,
    noise: NoiseModel,
    seed: u64,
) -> Result<Trajectory> {
    let degenerate = StalenessDistribution::degenerate(0);
    let mut traj = run_async_sgd(
        objective,
        params,
        StalenessSource::Distribution(&degenerate),
        steps,
        w0,
        noise,
        seed,
    )?;
    traj.staleness = "none".into();
    Ok(traj)
}

/// Asynchronous SGD with consistent reads `v_t = w_{max(t - tau_t, 0)}`.
pub fn run_async_sgd<O: Objective + ?Sized>(
    objective: &O,
    params: StepParams,
    source: StalenessSource<'_>,
    steps: usize,
    w0: &DVector<f64>,
    noise: NoiseModel,
    seed: u64,
) -> Result<Trajectory> {
    check_inputs(objective, &params, steps, w0)?;
    noise.validate()?;
    if let StalenessSource::Trace(trace) = source {
        if trace.len() < steps {
            return Err(Error::TraceTooShort {
                needed: steps,
                available: trace.len(),
            });
        }
    }
    let mut delay_rng = rng_stream(seed, 0);
    let mut noise_rng = rng_stream(seed, 1);

    let mut iterates = Vec::with_capacity(steps + 1);
    iterates.push(w0.clone());
    for t in 0..steps {
        let delay = match source {
            StalenessSource::Distribution(d) => d.sample(&mut delay_rng),
            StalenessSource::Trace(trace) => {
                usize::try_from(trace.records[t].staleness).unwrap_or(usize::MAX)
            }
        };
        let read = t.saturating_sub(delay);
        let mut g = objective.gradient(&iterates[read])?;
        add_noise(&mut g, noise, &mut noise_rng);
        let current = &iterates[t];
        let previous = &iterates[t.saturating_sub(1)];
        let next = current + (current - previous) * params.mu_l - g * params.alpha;
        check_finite(&next, t + 1)?;
        iterates.push(next);
    }
    Ok(Trajectory {
        iterates,
        alpha: params.alpha,
        mu_l: params.mu_l,
        staleness: source.describe(),
        seed: RunSeed::Seed(seed),
    })
}

/// Exact expected iterates under the staleness law, by dynamic programming:
///
/// `E w_{t+1} = E w_t + mu_l (E w_t - E w_{t-1}) - alpha sum_l q~_l H (E w_{t-l} - w_star)`
///
/// where `q~` is `q` with the mass of reads older than `w_0` moved onto
/// `w_0`. Lags beyond the truncation level `L` are folded onto `w_{t-L-1}`;
/// the error this introduces is bounded by `P(tau > L)`.
pub fn expected_iterates_exact<O: Objective + ?Sized>(
    objective: &O,
    params: StepParams,
    staleness: &StalenessDistribution,
    steps: usize,
    w0: &DVector<f64>,
) -> Result<Trajectory> {
    check_inputs(objective, &params, steps, w0)?;
    let (hessian, w_star) = objective.linear_gradient().ok_or_else(|| {
        Error::Unsupported("exact expectations need an objective with a linear gradient".into())
    })?;
    let level = staleness.truncation_level();
    let weights: Vec<f64> = (0..=level.min(steps)).map(|l| staleness.pmf(l)).collect();

    let mut iterates = Vec::with_capacity(steps + 1);
    let mut gradients: Vec<DVector<f64>> = Vec::with_capacity(steps + 1);
    iterates.push(w0.clone());
    gradients.push(hessian * (w0 - w_star));
    for t in 0..steps {
        let direct = t.min(level + 1);
        let mut mean_grad = DVector::zeros(w0.len());
        for (l, q) in weights.iter().take(direct).enumerate() {
            if *q != 0.0 {
                mean_grad.axpy(*q, &gradients[t - l], 1.0);
            }
        }
        let folded = staleness.tail(direct);
        if folded != 0.0 {
            mean_grad.axpy(folded, &gradients[t - direct], 1.0);
        }
        let current = &iterates[t];
        let previous = &iterates[t.saturating_sub(1)];
        let next = current + (current - previous) * params.mu_l - mean_grad * params.alpha;
        check_finite(&next, t + 1)?;
        gradients.push(hessian * (&next - w_star));
        iterates.push(next);
    }
    Ok(Trajectory {
        iterates,
        alpha: params.alpha,
        mu_l: params.mu_l,
        staleness: staleness.describe(),
        seed: RunSeed::Exact,
    })
}

/// Expected iterates under geometric staleness from the three-term
/// recurrence
///
/// `E w_{t+1} = (1 + mu_s + mu_l) E w_t - alpha (1 - mu_s) H (E w_t - w_star)
///             - (mu_s + mu_l + mu_s mu_l) E w_{t-1} + mu_s mu_l E w_{t-2}`,
///
/// seeded with the first three iterates of [`expected_iterates_exact`].
pub fn recurrence_iterates<O: Objective + ?Sized>(
    objective: &O,
    params: StepParams,
    mu_s: f64,
    steps: usize,
    w0: &DVector<f64>,
) -> Result<Trajectory> {
    let staleness = StalenessDistribution::geometric(mu_s)?;
    let seed = expected_iterates_exact(objective, params, &staleness, steps.min(2), w0)?;
    let (hessian, w_star) = objective
        .linear_gradient()
        .expect("checked by expected_iterates_exact");
    let StepParams { alpha, mu_l } = params;
    let c0 = 1.0 + mu_s + mu_l;
    let c1 = mu_s + mu_l + mu_s * mu_l;
    let c2 = mu_s * mu_l;
    let step = alpha * (1.0 - mu_s);

    let mut iterates = seed.iterates;
    for t in 2..steps {
        let w = &iterates[t];
        let next = w * c0 - (hessian * (w - w_star)) * step - &iterates[t - 1] * c1
            + &iterates[t - 2] * c2;
        check_finite(&next, t + 1)?;
        iterates.push(next);
    }
    Ok(Trajectory {
        iterates,
        alpha,
        mu_l,
        staleness: format!("recurrence(mu_s={mu_s})"),
        seed: RunSeed::Exact,
    })
}

/// Per-step sample mean and variance of an ensemble of runs.
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub runs: usize,
    pub mean: Vec<DVector<f64>>,
    /// Unbiased sample variance, per coordinate.
    pub variance: Vec<DVector<f64>>,
}

impl EnsembleStats {
    /// Standard error of the mean at step `t`, per coordinate.
    pub fn standard_error(&self, t: usize) -> DVector<f64> {
        self.variance[t].map(|v| (v / self.runs as f64).sqrt())
    }
}

#[derive(Clone, Debug)]
struct Moments {
    n: usize,
    mean: Vec<DVector<f64>>,
    m2: Vec<DVector<f64>>,
}

impl Moments {
    fn from_run(iterates: Vec<DVector<f64>>) -> Self {
        let m2 = iterates.iter().map(|w| DVector::zeros(w.len())).collect();
        Self {
            n: 1,
            mean: iterates,
            m2,
        }
    }

    // Chan et al. pairwise update
    fn merge(mut self, other: Moments) -> Self {
        let n = self.n + other.n;
        let wa = self.n as f64;
        let wb = other.n as f64;
        for t in 0..self.mean.len() {
            let delta = &other.mean[t] - &self.mean[t];
            self.m2[t] += &other.m2[t] + delta.component_mul(&delta) * (wa * wb / n as f64);
            self.mean[t] += delta * (wb / n as f64);
        }
        self.n = n;
        self
    }
}

/// Seed of run `index` in an ensemble rooted at `base`.
pub fn ensemble_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ENSEMBLE_CHUNK: usize = 64;

/// Runs `runs` independent asynchronous trajectories and returns per-step
/// moments. Runs are grouped into fixed chunks that are merged in index
/// order, so the result does not depend on the execution policy.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_async<O: Objective + ?Sized>(
    objective: &O,
    params: StepParams,
    staleness: &StalenessDistribution,
    steps: usize,
    w0: &DVector<f64>,
    noise: NoiseModel,
    runs: usize,
    base_seed: u64,
    exec: Exec,
) -> Result<EnsembleStats> {
    if runs < 2 {
        return Err(Error::domain("an ensemble needs at least two runs"));
    }
    let chunks = runs.div_ceil(ENSEMBLE_CHUNK);
    let partial: Vec<Result<Moments>> = exec.map_range(chunks, |c| {
        let start = c * ENSEMBLE_CHUNK;
        let end = (start + ENSEMBLE_CHUNK).min(runs);
        let mut acc: Option<Moments> = None;
        for i in start..end {
            let traj = run_async_sgd(
                objective,
                params,
                StalenessSource::Distribution(staleness),
                steps,
                w0,
                noise,
                ensemble_seed(base_seed, i as u64),
            )?;
            let m = Moments::from_run(traj.iterates);
            acc = Some(match acc {
                None => m,
                Some(a) => a.merge(m),
            });
        }
        Ok(acc.expect("chunks are nonempty"))
    });
    let mut total: Option<Moments> = None;
    for m in partial {
        let m = m?;
        total = Some(match total {
            None => m,
            Some(t) => t.merge(m),
        });
    }
    let total = total.expect("at least one chunk");
    let denom = (total.n - 1) as f64;
    Ok(EnsembleStats {
        runs: total.n,
        mean: total.mean,
        variance: total.m2.into_iter().map(|m| m / denom).collect(),
    })
}
