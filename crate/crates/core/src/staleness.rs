//! Staleness distributions `Q = (q_l)` over nonnegative integer delays.
//!
//! A distribution is one of three kinds: geometric with implicit momentum
//! `mu_s` (`q_l = (1 - mu_s) mu_s^l`), an empirical pmf with finite support,
//! or a point mass at a fixed lag. Every distribution exposes its pmf, its
//! survival function `P(tau >= l)` and a truncation level used by series
//! evaluations. The survival function is exact for every kind (analytic for
//! the geometric tail), so truncated sums can account for the mass they drop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tail mass below which geometric series are truncated by default.
pub const DEFAULT_TAIL_MASS: f64 = 1e-12;

/// Tolerance on `sum(pmf) == 1` for user supplied pmfs.
const PMF_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StalenessKind {
    Geometric {
        mu_s: f64,
    },
    Empirical {
        pmf: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        counts: Option<Vec<u64>>,
    },
    Degenerate {
        lag: usize,
    },
}

/// A staleness distribution together with the truncation level used when a
/// series over lags has to be cut off.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct StalenessDistribution {
    kind: StalenessKind,
    truncation_override: Option<usize>,
    // Exact mean for geometric laws built from a worker count; `mu/(1-mu)`
    // loses the last ulp for most M.
    exact_mean: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    #[serde(flatten)]
    kind: StalenessKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation_level: Option<usize>,
}

impl TryFrom<RawDistribution> for StalenessDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        let dist = match raw.kind {
            StalenessKind::Geometric { mu_s } => Self::geometric(mu_s)?,
            StalenessKind::Empirical { pmf, counts } => match counts {
                Some(counts) => Self::from_counts(&counts)?,
                None => Self::empirical(pmf)?,
            },
            StalenessKind::Degenerate { lag } => Self::degenerate(lag),
        };
        Ok(match raw.truncation_level {
            Some(level) => dist.with_truncation_level(level),
            None => dist,
        })
    }
}

impl From<StalenessDistribution> for RawDistribution {
    fn from(d: StalenessDistribution) -> Self {
        RawDistribution {
            kind: d.kind,
            truncation_level: d.truncation_override,
        }
    }
}

impl PartialEq for StalenessDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.truncation_level() == other.truncation_level()
    }
}

impl StalenessDistribution {
    fn from_kind(kind: StalenessKind) -> Self {
        Self {
            kind,
            truncation_override: None,
            exact_mean: None,
        }
    }

    /// Geometric staleness `q_l = (1 - mu_s) mu_s^l`, `0 <= mu_s < 1`.
    pub fn geometric(mu_s: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&mu_s) {
            return Err(Error::domain(format!(
                "implicit momentum mu_s must lie in [0, 1), got {mu_s}"
            )));
        }
        Ok(Self::from_kind(StalenessKind::Geometric { mu_s }))
    }

    /// The law induced by `workers` asynchronous workers with exponential
    /// work times: geometric with `mu_s = 1 - 1/M`, mean `M - 1`.
    pub fn from_worker_count(workers: u32) -> Result<Self> {
        if workers == 0 {
            return Err(Error::domain("worker count must be at least 1"));
        }
        let mu_s = 1.0 - 1.0 / f64::from(workers);
        let mut dist = Self::geometric(mu_s)?;
        dist.exact_mean = Some(f64::from(workers - 1));
        Ok(dist)
    }

    /// Point mass at `lag`.
    pub fn degenerate(lag: usize) -> Self {
        Self::from_kind(StalenessKind::Degenerate { lag })
    }

    /// Empirical pmf. Entries must be finite, nonnegative and sum to one.
    /// Trailing zeros are dropped.
    pub fn empirical(mut pmf: Vec<f64>) -> Result<Self> {
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::domain("pmf entries must be finite and nonnegative"));
        }
        while pmf.len() > 1 && pmf.last() == Some(&0.0) {
            pmf.pop();
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(Error::domain(format!("pmf must sum to 1, sums to {total}")));
        }
        Ok(Self::from_kind(StalenessKind::Empirical { pmf, counts: None }))
    }

    /// Empirical distribution from raw counts per lag; keeps the counts for
    /// later goodness-of-fit tests.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::domain("cannot build a distribution from zero counts"));
        }
        let mut counts = counts.to_vec();
        while counts.len() > 1 && counts.last() == Some(&0) {
            counts.pop();
        }
        let pmf = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self::from_kind(StalenessKind::Empirical {
            pmf,
            counts: Some(counts),
        }))
    }

    pub fn with_truncation_level(mut self, level: usize) -> Self {
        self.truncation_override = Some(level);
        self
    }

    pub fn kind(&self) -> &StalenessKind {
        &self.kind
    }

    /// Raw counts, for empirical distributions built from observations.
    pub fn counts(&self) -> Option<&[u64]> {
        match &self.kind {
            StalenessKind::Empirical { counts, .. } => counts.as_deref(),
            _ => None,
        }
    }

    /// Total number of observations behind an empirical distribution.
    pub fn sample_size(&self) -> Option<u64> {
        self.counts().map(|c| c.iter().sum())
    }

    /// Implicit momentum of a geometric law, `None` for the other kinds.
    /// `Degenerate(0)` is reported as `Some(0.0)` since it equals
    /// `Geometric(0)`.
    pub fn implicit_momentum(&self) -> Option<f64> {
        match &self.kind {
            StalenessKind::Geometric { mu_s } => Some(*mu_s),
            StalenessKind::Degenerate { lag: 0 } => Some(0.0),
            _ => None,
        }
    }

    /// Largest lag with nonzero mass, if the support is finite.
    pub fn max_lag(&self) -> Option<usize> {
        match &self.kind {
            StalenessKind::Geometric { mu_s } if *mu_s == 0.0 => Some(0),
            StalenessKind::Geometric { .. } => None,
            StalenessKind::Empirical { pmf, .. } => Some(pmf.len().saturating_sub(1)),
            StalenessKind::Degenerate { lag } => Some(*lag),
        }
    }

    /// Lag beyond which series are cut off. For geometric laws this is the
    /// smallest `L` with `mu_s^L < 1e-12`; for finite support it is the
    /// largest lag.
    pub fn truncation_level(&self) -> usize {
        if let Some(level) = self.truncation_override {
            return level;
        }
        match &self.kind {
            StalenessKind::Geometric { mu_s } => geometric_horizon(*mu_s, DEFAULT_TAIL_MASS),
            _ => self.max_lag().unwrap_or(0),
        }
    }

    /// `q_l`.
    pub fn pmf(&self, lag: usize) -> f64 {
        match &self.kind {
            StalenessKind::Geometric { mu_s } => {
                if *mu_s == 0.0 {
                    if lag == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (1.0 - mu_s) * mu_s.powi(saturating_i32(lag))
                }
            }
            StalenessKind::Empirical { pmf, .. } => pmf.get(lag).copied().unwrap_or(0.0),
            StalenessKind::Degenerate { lag: l } => {
                if lag == *l {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Survival function `P(tau >= lag)`.
    pub fn tail(&self, lag: usize) -> f64 {
        if lag == 0 {
            return 1.0;
        }
        match &self.kind {
            StalenessKind::Geometric { mu_s } => mu_s.powi(saturating_i32(lag)),
            StalenessKind::Empirical { pmf, .. } => {
                if lag >= pmf.len() {
                    0.0
                } else {
                    pmf[lag..].iter().sum()
                }
            }
            StalenessKind::Degenerate { lag: l } => {
                if lag <= *l {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `E[tau]`.
    pub fn mean(&self) -> f64 {
        if let Some(mean) = self.exact_mean {
            return mean;
        }
        match &self.kind {
            StalenessKind::Geometric { mu_s } => mu_s / (1.0 - mu_s),
            StalenessKind::Empirical { pmf, .. } => {
                pmf.iter().enumerate().map(|(l, p)| l as f64 * p).sum()
            }
            StalenessKind::Degenerate { lag } => *lag as f64,
        }
    }

    /// `Var[tau]`.
    pub fn variance(&self) -> f64 {
        match &self.kind {
            StalenessKind::Geometric { mu_s } => mu_s / ((1.0 - mu_s) * (1.0 - mu_s)),
            StalenessKind::Empirical { pmf, .. } => {
                let mean = self.mean();
                pmf.iter()
                    .enumerate()
                    .map(|(l, p)| (l as f64 - mean).powi(2) * p)
                    .sum()
            }
            StalenessKind::Degenerate { .. } => 0.0,
        }
    }

    /// Draws one delay. Geometric draws use the inverse CDF
    /// `floor(ln u / ln mu_s)` with `u` uniform on `(0, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.kind {
            StalenessKind::Geometric { mu_s } => {
                if *mu_s == 0.0 {
                    return 0;
                }
                let u = 1.0 - rng.random::<f64>();
                let draw = (u.ln() / mu_s.ln()).floor();
                if draw >= usize::MAX as f64 {
                    usize::MAX
                } else {
                    draw as usize
                }
            }
            StalenessKind::Empirical { pmf, .. } => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for (lag, p) in pmf.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return lag;
                    }
                }
                // rounding left u above the accumulated mass
                pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
            }
            StalenessKind::Degenerate { lag } => *lag,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            StalenessKind::Geometric { mu_s } => format!("geometric(mu_s={mu_s})"),
            StalenessKind::Empirical { pmf, .. } => format!("empirical({} lags)", pmf.len()),
            StalenessKind::Degenerate { lag } => format!("degenerate({lag})"),
        }
    }
}

/// Total variation distance `1/2 sum_l |q_l - q'_l|`.
///
/// Lags up to the larger truncation level are summed directly. Beyond that
/// level the two pmfs are ordered (a finite support has ended, or two
/// geometric pmfs have crossed), so the remainder equals half the absolute
/// difference of the survival functions.
pub fn total_variation(a: &StalenessDistribution, b: &StalenessDistribution) -> f64 {
    let horizon = a.truncation_level().max(b.truncation_level());
    let head: f64 = (0..=horizon).map(|l| (a.pmf(l) - b.pmf(l)).abs()).sum();
    let rest = (a.tail(horizon + 1) - b.tail(horizon + 1)).abs();
    (0.5 * (head + rest)).clamp(0.0, 1.0)
}

/// Smallest `L` with `mu^L < tail_mass`.
pub fn geometric_horizon(mu_s: f64, tail_mass: f64) -> usize {
    if mu_s <= 0.0 {
        return 1;
    }
    let mut level = (tail_mass.ln() / mu_s.ln()).floor().max(0.0) as usize;
    while mu_s.powi(saturating_i32(level)) >= tail_mass {
        level += 1;
    }
    while level > 0 && mu_s.powi(saturating_i32(level - 1)) < tail_mass {
        level -= 1;
    }
    level
}

fn saturating_i32(n: usize) -> i32 {
    i32::try_from(n).unwrap_or(i32::MAX)
}
