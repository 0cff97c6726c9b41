//! Convergence rates of the expected iterates on quadratics.
//!
//! Along eigendirection `i` the expected iterates follow a three-term linear
//! recurrence whose growth polynomial is
//!
//! ```text
//! g_i(t) = mu_s mu_l t^3 - (mu_s + mu_l + mu_s mu_l) t^2 + z_i t - 1,
//! z_i    = 1 + mu_s + mu_l - alpha (1 - mu_s) lambda_i.
//! ```
//!
//! The per-direction rate is `1 / |t_i*|` for the root `t_i*` of smallest
//! magnitude, and the overall rate is `gamma = max_i 1 / |t_i*|`.
//!
//! Roots are computed as eigenvalues of the companion matrix of the
//! reciprocal polynomial `r^d g(1/r) / g(0)`, which is monic because
//! `g(0) = -1`. Its eigenvalues are the `1 / t` values, so the smallest
//! magnitude root of `g` is the reciprocal of the dominant eigenvalue, and
//! a vanishing leading coefficient simply lowers the matrix size.

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPolynomial {
    pub mu_s: f64,
    pub mu_l: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub z: f64,
    /// Coefficients of `t^0, t^1, t^2, t^3`.
    pub coefficients: [f64; 4],
}

fn check_momenta(mu_s: f64, mu_l: f64) -> Result<()> {
    if !(0.0..1.0).contains(&mu_s) {
        return Err(Error::domain(format!("mu_s must lie in [0, 1), got {mu_s}")));
    }
    if !(mu_l > -1.0 && mu_l < 1.0) {
        return Err(Error::domain(format!("mu_l must lie in (-1, 1), got {mu_l}")));
    }
    Ok(())
}

pub fn growth_polynomial(mu_s: f64, mu_l: f64, alpha: f64, lambda: f64) -> Result<GrowthPolynomial> {
    check_momenta(mu_s, mu_l)?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain(format!("eigenvalue must be positive, got {lambda}")));
    }
    let z = 1.0 + mu_s + mu_l - alpha * (1.0 - mu_s) * lambda;
    Ok(GrowthPolynomial {
        mu_s,
        mu_l,
        alpha,
        lambda,
        z,
        coefficients: [-1.0, z, -(mu_s + mu_l + mu_s * mu_l), mu_s * mu_l],
    })
}

impl GrowthPolynomial {
    pub fn degree(&self) -> usize {
        self.coefficients
            .iter()
            .rposition(|c| *c != 0.0)
            .unwrap_or(0)
    }

    pub fn eval(&self, t: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * t + c)
    }

    pub fn max_coefficient(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Roots of the monic reciprocal polynomial, i.e. `1 / t` for every
    /// root `t` of `g`.
    pub fn inverse_roots(&self) -> Result<Vec<Complex64>> {
        // r^d - a1 r^{d-1} - a2 r^{d-2} - a3, using a0 = -1
        let [a0, a1, a2, a3] = self.coefficients;
        debug_assert_eq!(a0, -1.0);
        let roots = match self.degree() {
            0 => return Err(Error::DegreeZero),
            1 => vec![Complex64::new(a1, 0.0)],
            2 => Matrix2::new(a1, a2, 1.0, 0.0)
                .complex_eigenvalues()
                .iter()
                .copied()
                .collect(),
            _ => Matrix3::new(a1, a2, a3, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
                .complex_eigenvalues()
                .iter()
                .copied()
                .collect(),
        };
        Ok(roots)
    }

    fn reciprocal_eval(&self, r: Complex64) -> (Complex64, Complex64) {
        let d = self.degree();
        // monic coefficients, highest power first
        let c: Vec<f64> = (0..=d)
            .map(|k| if k == 0 { 1.0 } else { -self.coefficients[k] })
            .collect();
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for ck in c {
            dp = dp * r + p;
            p = p * r + ck;
        }
        (p, dp)
    }

    fn polish(&self, mut r: Complex64) -> Complex64 {
        let (mut p, mut dp) = self.reciprocal_eval(r);
        for _ in 0..3 {
            if dp.norm() == 0.0 || p.norm() == 0.0 {
                break;
            }
            let candidate = r - p / dp;
            let (cp, cdp) = self.reciprocal_eval(candidate);
            if cp.norm() >= p.norm() {
                break;
            }
            r = candidate;
            p = cp;
            dp = cdp;
        }
        r
    }

    /// Dominant eigenvalue of the reciprocal companion matrix, polished
    /// with a few guarded Newton steps.
    pub fn dominant_inverse_root(&self) -> Result<Complex64> {
        let roots = self.inverse_roots()?;
        let r = roots
            .into_iter()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .expect("degree >= 1");
        Ok(self.polish(r))
    }
}

/// Root of `g` with the smallest magnitude. Conjugate pairs tie; either may
/// be returned.
pub fn smallest_magnitude_root(p: &GrowthPolynomial) -> Result<Complex64> {
    let r = p.dominant_inverse_root()?;
    if r.norm() == 0.0 {
        // only possible when every nonconstant coefficient cancels
        return Err(Error::DegreeZero);
    }
    Ok(r.inv())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRate {
    pub lambda: f64,
    /// Smallest-magnitude root; `None` when `g` is constant, in which case
    /// the direction is solved exactly after finitely many steps.
    pub root: Option<Complex64>,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub mu_s: f64,
    pub mu_l: f64,
    pub alpha: f64,
    pub per_eigenvalue: Vec<EigenRate>,
    pub gamma: f64,
    pub stable: bool,
}

/// Rate of a single eigendirection, `1 / |t*|`.
pub fn eigen_rate(mu_s: f64, mu_l: f64, alpha: f64, lambda: f64) -> Result<EigenRate> {
    let p = growth_polynomial(mu_s, mu_l, alpha, lambda)?;
    if p.degree() == 0 {
        return Ok(EigenRate {
            lambda,
            root: None,
            rate: 0.0,
        });
    }
    let r = p.dominant_inverse_root()?;
    Ok(EigenRate {
        lambda,
        root: (r.norm() > 0.0).then(|| r.inv()),
        rate: r.norm(),
    })
}

pub fn convergence_rate(eigenvalues: &[f64], mu_s: f64, mu_l: f64, alpha: f64) -> Result<RateReport> {
    if eigenvalues.is_empty() {
        return Err(Error::domain("at least one eigenvalue is required"));
    }
    let per_eigenvalue = eigenvalues
        .iter()
        .map(|&l| eigen_rate(mu_s, mu_l, alpha, l))
        .collect::<Result<Vec<_>>>()?;
    let gamma = per_eigenvalue.iter().fold(0.0f64, |g, e| g.max(e.rate));
    Ok(RateReport {
        mu_s,
        mu_l,
        alpha,
        per_eigenvalue,
        gamma,
        stable: gamma < 1.0,
    })
}

/// `gamma` only, skipping the report allocation. Grid sweeps call this.
pub fn gamma(eigenvalues: &[f64], mu_s: f64, mu_l: f64, alpha: f64) -> Result<f64> {
    eigenvalues.iter().try_fold(0.0f64, |g, &l| {
        Ok(g.max(eigen_rate(mu_s, mu_l, alpha, l)?.rate))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningAxes {
    pub mu_l: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// `{-0.9, -0.675, ..., 0.675, 0.9}`.
pub fn default_mu_l_grid() -> Vec<f64> {
    linear_grid(-0.9, 0.9, 9)
}

/// 61 log-spaced step sizes on `[1e-3, 1]`.
pub fn default_alpha_grid() -> Vec<f64> {
    log_grid(1e-3, 1.0, 61)
}

/// `{0, 0.05, ..., 0.95}`.
pub fn default_mu_s_grid() -> Vec<f64> {
    (0..20).map(|i| f64::from(i) * 0.05).collect()
}

impl Default for TuningAxes {
    fn default() -> Self {
        Self {
            mu_l: default_mu_l_grid(),
            alpha: default_alpha_grid(),
        }
    }
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` log-spaced points on `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linear_grid(lo.ln(), hi.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub mu_l: f64,
    pub alpha: f64,
    pub gamma: f64,
}

/// Tuning outcome for one implicit momentum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub mu_s: f64,
    pub mu_l: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub stable: bool,
    /// Every evaluated cell, `mu_l` major then `alpha`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<GridCell>,
}

fn better(a: &GridCell, b: &GridCell) -> bool {
    let key = |c: &GridCell| {
        let g = if c.gamma.is_finite() { c.gamma } else { f64::INFINITY };
        (g, c.mu_l.abs(), c.alpha)
    };
    let (ga, ma, aa) = key(a);
    let (gb, mb, ab) = key(b);
    ga.total_cmp(&gb)
        .then(ma.total_cmp(&mb))
        .then(aa.total_cmp(&ab))
        .is_lt()
}

/// Grid search over `(mu_l, alpha)` minimising `gamma`; ties go to the
/// smaller `|mu_l|`, then the smaller `alpha`. Invalid `mu_l` values are
/// skipped. An all-unstable grid returns its least unstable cell with
/// `stable == false`.
pub fn tune(eigenvalues: &[f64], mu_s: f64, axes: &TuningAxes, exec: Exec) -> Result<TuneResult> {
    if axes.mu_l.is_empty() || axes.alpha.is_empty() {
        return Err(Error::domain("tuning grids must be nonempty"));
    }
    if eigenvalues.is_empty() {
        return Err(Error::domain("at least one eigenvalue is required"));
    }
    check_momenta(mu_s, 0.0)?;
    let rows: Vec<Result<Vec<GridCell>>> = exec.map(&axes.mu_l, |&mu_l| {
        axes.alpha
            .iter()
            .map(|&alpha| {
                Ok(GridCell {
                    mu_l,
                    alpha,
                    gamma: gamma(eigenvalues, mu_s, mu_l, alpha)?,
                })
            })
            .collect()
    });
    let mut cells = Vec::with_capacity(axes.mu_l.len() * axes.alpha.len());
    for row in rows {
        cells.extend(row?);
    }
    let best = cells
        .iter()
        .copied()
        .reduce(|best, c| if better(&c, &best) { c } else { best })
        .expect("nonempty grid");
    Ok(TuneResult {
        mu_s,
        mu_l: best.mu_l,
        alpha: best.alpha,
        gamma: best.gamma,
        stable: best.gamma < 1.0,
        cells,
    })
}

/// Tuning results for several implicit momenta over the same axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub eigenvalues: Vec<f64>,
    pub mu_s: Vec<f64>,
    pub axes: TuningAxes,
    pub entries: Vec<TuneResult>,
}

impl TuningGrid {
    pub fn sweep(
        eigenvalues: &[f64],
        mu_s: &[f64],
        axes: &TuningAxes,
        keep_cells: bool,
        exec: Exec,
    ) -> Result<Self> {
        let entries = mu_s
            .iter()
            .map(|&m| {
                let mut r = tune(eigenvalues, m, axes, exec)?;
                if !keep_cells {
                    r.cells.clear();
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            eigenvalues: eigenvalues.to_vec(),
            mu_s: mu_s.to_vec(),
            axes: axes.clone(),
            entries,
        })
    }

    /// Optimal explicit momentum per implicit momentum.
    pub fn optimal_mu_l(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|e| (e.mu_s, e.mu_l)).collect()
    }
}

/// Distance proxies `gamma^k` of three tuning strategies at one `mu_s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub mu_s: f64,
    /// (a) tune `mu_l` (negatives included) and `alpha`.
    pub tuned: TuneResult,
    /// (b) `mu_l = 0`, tune `alpha`.
    pub zero_momentum: TuneResult,
    /// (c) `mu_l = 0.5`, tune `alpha`.
    pub half_momentum: TuneResult,
    pub distance_tuned: f64,
    pub distance_zero: f64,
    pub distance_half: f64,
    /// Iterations needed with `mu_l = 0` over iterations needed when
    /// momentum is tuned, `ln gamma_a / ln gamma_b`.
    pub speedup_over_zero: f64,
}

pub fn strategy_compare(
    eigenvalues: &[f64],
    mu_s: &[f64],
    steps: u32,
    axes: &TuningAxes,
    exec: Exec,
) -> Result<Vec<StrategyRow>> {
    if steps == 0 {
        return Err(Error::domain("steps must be at least 1"));
    }
    let k = i32::try_from(steps).unwrap_or(i32::MAX);
    let fixed = |mu_l: f64| TuningAxes {
        mu_l: vec![mu_l],
        alpha: axes.alpha.clone(),
    };
    mu_s.iter()
        .map(|&m| {
            let strip = |mut r: TuneResult| {
                r.cells.clear();
                r
            };
            let tuned = strip(tune(eigenvalues, m, axes, exec)?);
            let zero_momentum = strip(tune(eigenvalues, m, &fixed(0.0), exec)?);
            let half_momentum = strip(tune(eigenvalues, m, &fixed(0.5), exec)?);
            Ok(StrategyRow {
                mu_s: m,
                distance_tuned: tuned.gamma.powi(k),
                distance_zero: zero_momentum.gamma.powi(k),
                distance_half: half_momentum.gamma.powi(k),
                speedup_over_zero: tuned.gamma.ln() / zero_momentum.gamma.ln(),
                tuned,
                zero_momentum,
                half_momentum,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub workers: u32,
    pub gamma: f64,
    /// Time per step relative to one worker, `T_M / T_1 = 1 / M`.
    pub hardware_efficiency: f64,
    /// `ceil(ln(target) / ln gamma)`; `None` when `gamma >= 1`.
    pub iterations: Option<u64>,
    /// `I_M / I_1`.
    pub statistical_efficiency: Option<f64>,
    /// Product of both, a normalised wall-clock proxy.
    pub wall_clock: Option<f64>,
}

/// Iterations to shrink the distance by `target_ratio`, or `None` when the
/// iteration does not converge.
pub fn iterations_to_target(gamma: f64, target_ratio: f64) -> Option<u64> {
    if gamma.is_nan() || gamma >= 1.0 {
        return None;
    }
    if gamma <= 0.0 {
        return Some(1);
    }
    Some((target_ratio.ln() / gamma.ln()).ceil().max(0.0) as u64)
}

/// Hardware and statistical efficiency per worker count. The baseline
/// `I_1` comes from the entry with `workers == 1`.
pub fn efficiency_metrics(
    workers: &[u32],
    gammas: &[f64],
    target_ratio: f64,
) -> Result<Vec<EfficiencyRow>> {
    if workers.len() != gammas.len() {
        return Err(Error::Dimension {
            expected: workers.len(),
            got: gammas.len(),
        });
    }
    if !(target_ratio > 0.0 && target_ratio < 1.0) {
        return Err(Error::domain(format!(
            "target loss ratio must lie in (0, 1), got {target_ratio}"
        )));
    }
    if workers.contains(&0) {
        return Err(Error::domain("worker counts must be positive"));
    }
    if gammas.iter().any(|g| !(g.is_finite() || *g == f64::INFINITY) || *g < 0.0) {
        return Err(Error::domain("rates must be nonnegative"));
    }
    let base = workers
        .iter()
        .position(|&m| m == 1)
        .ok_or_else(|| Error::domain("efficiencies are relative to M = 1, which is missing"))?;
    let base_iters = iterations_to_target(gammas[base], target_ratio);
    Ok(workers
        .iter()
        .zip(gammas)
        .map(|(&m, &g)| {
            let hardware = 1.0 / f64::from(m);
            let iterations = iterations_to_target(g, target_ratio);
            let statistical = match (iterations, base_iters) {
                (Some(i), Some(b)) if b > 0 => Some(i as f64 / b as f64),
                (Some(0), Some(0)) => Some(1.0),
                _ => None,
            };
            EfficiencyRow {
                workers: m,
                gamma: g,
                hardware_efficiency: hardware,
                iterations,
                statistical_efficiency: statistical,
                wall_clock: statistical.map(|s| s * hardware),
            }
        })
        .collect())
}
