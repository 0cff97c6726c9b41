use clap::{Args, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use stale_momentum::engine::{
    expected_iterates_exact, recurrence_iterates, run_async_sgd, run_momentum_sgd, NoiseModel,
    StalenessSource, StepParams, Trajectory,
};
use stale_momentum::export;
use stale_momentum::objective::{linear_spectrum, log_spectrum, ObjectiveSpec};
use stale_momentum::queueing::{self, stationary_histogram, QueueConfig, WorkTime};
use stale_momentum::rates::{
    convergence_rate, default_mu_s_grid, efficiency_metrics, linear_grid, log_grid,
    strategy_compare, tune, TuningAxes, TuningGrid,
};
use stale_momentum::staleness::{total_variation, StalenessDistribution};
use stale_momentum::verify::{
    chi_square_test, monte_carlo_consistency, theorem2_monte_carlo,
    verify_theorem1, verify_theorem2, verify_theorem4, verify_theorem3, ExactOptions,
    MonteCarloOptions, Status, VerificationReport, CHI_SQUARE_SIGNIFICANCE,
};
use stale_momentum::{Exec, Objective, QuadraticObjective};

use crate::config::{CliError, CliResult};
use crate::output::Sink;

pub struct Context {
    pub seed: u64,
    pub sink: Sink,
    pub exec: Exec,
}

impl Context {
    /// Resolved parameters as embedded in every output.
    fn resolved<P: Serialize>(&self, command: &str, params: &P) -> CliResult<Value> {
        let mut map = Map::new();
        map.insert("command".into(), command.into());
        map.insert("seed".into(), self.seed.into());
        if let Value::Object(p) = serde_json::to_value(params)? {
            map.extend(p);
        }
        Ok(Value::Object(map))
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn domain(msg: impl Into<String>) -> CliError {
    CliError::Domain(format!("domain error: {}", msg.into()))
}

// ---------------------------------------------------------------- objectives

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    /// Eigenvalues `{1, Q}`.
    #[default]
    TwoPoint,
    /// `dim` eigenvalues evenly spaced on `[1, Q]`.
    Linear,
    /// `dim` eigenvalues log-spaced on `[1, Q]`.
    Log,
}

fn spectrum(kind: SpectrumKind, dim: usize, condition: f64) -> CliResult<Vec<f64>> {
    if !(condition.is_finite() && condition >= 1.0) {
        return Err(domain(format!("condition number must be at least 1, got {condition}")));
    }
    if dim == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    Ok(match kind {
        SpectrumKind::TwoPoint => vec![1.0, condition],
        SpectrumKind::Linear => linear_spectrum(dim, condition),
        SpectrumKind::Log => log_spectrum(dim, condition),
    })
}

/// Explicit objective from the config, else a diagonal quadratic with
/// `dim` eigenvalues evenly spaced on `[1, condition]` and `w_star = 0`.
fn objective(spec: &Option<ObjectiveSpec>, dim: usize, condition: f64) -> CliResult<QuadraticObjective> {
    match spec {
        Some(s) => Ok(s.build()?),
        None => {
            let eigs = spectrum(SpectrumKind::Linear, dim, condition)?;
            Ok(QuadraticObjective::from_spectrum(&eigs, DVector::zeros(dim))?)
        }
    }
}

fn start_point(w0: &Option<Vec<f64>>, obj: &QuadraticObjective) -> CliResult<DVector<f64>> {
    match w0 {
        Some(w) if w.len() != obj.dim() => Err(domain(format!(
            "w0 has {} coordinates, the objective has {}",
            w.len(),
            obj.dim()
        ))),
        Some(w) => Ok(DVector::from_column_slice(w)),
        None => Ok(obj.w_star() + DVector::from_element(obj.dim(), 1.0)),
    }
}

// ---------------------------------------------------------------- grids

#[derive(Args, Debug, Serialize)]
pub struct GridFlags {
    /// Smallest explicit momentum on the tuning grid.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_l_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_l_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_l_count: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_count: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GridParams {
    pub mu_l_min: f64,
    pub mu_l_max: f64,
    pub mu_l_count: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_count: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            mu_l_min: -0.9,
            mu_l_max: 0.9,
            mu_l_count: 9,
            alpha_min: 1e-3,
            alpha_max: 1.0,
            alpha_count: 61,
        }
    }
}

impl GridParams {
    fn axes(&self) -> CliResult<TuningAxes> {
        if self.mu_l_count == 0 || self.alpha_count == 0 {
            return Err(domain("grid sizes must be positive"));
        }
        if !(self.alpha_min > 0.0 && self.alpha_max >= self.alpha_min) {
            return Err(domain("alpha range must satisfy 0 < alpha_min <= alpha_max"));
        }
        if !(self.mu_l_min > -1.0 && self.mu_l_max < 1.0 && self.mu_l_min <= self.mu_l_max) {
            return Err(domain("mu_l range must lie in (-1, 1)"));
        }
        Ok(TuningAxes {
            mu_l: linear_grid(self.mu_l_min, self.mu_l_max, self.mu_l_count),
            alpha: log_grid(self.alpha_min, self.alpha_max, self.alpha_count),
        })
    }
}

// ---------------------------------------------------------------- queue-sim

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct QueueSimFlags {
    /// Number of workers M.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<u32>,
    /// Work completion rate per worker.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// Total number of writes to simulate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub writes: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub work: Option<WorkTimeArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkTimeArg {
    Exponential,
    Constant,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueueSimParams {
    pub workers: Option<u32>,
    pub rate: f64,
    pub writes: u64,
    pub work: WorkTime,
}

impl Default for QueueSimParams {
    fn default() -> Self {
        Self {
            workers: None,
            rate: 1.0,
            writes: 100_000,
            work: WorkTime::Exponential,
        }
    }
}

pub fn queue_sim(ctx: &Context, p: &QueueSimParams) -> CliResult<Status> {
    let workers = p
        .workers
        .ok_or_else(|| usage("--workers is required (flag or config key `workers`)"))?;
    let cfg = QueueConfig::new(workers, p.rate, p.writes, ctx.seed).with_work(p.work);
    let trace = queueing::simulate(&cfg)?;
    let resolved = ctx.resolved("queue-sim", p)?;

    let model = StalenessDistribution::from_worker_count(workers)?;
    let mut summary = Map::new();
    summary.insert("writes".into(), json!(trace.len()));
    summary.insert("warmup".into(), json!(trace.warmup));
    summary.insert("stationary_writes".into(), json!(trace.stationary().len()));
    match stationary_histogram(&trace) {
        Ok(h) => {
            let mean = h.mean();
            let chi = chi_square_test(h.counts().unwrap_or(&[]), &model, CHI_SQUARE_SIGNIFICANCE)?;
            summary.insert("mean_staleness".into(), json!(mean));
            summary.insert("variance_staleness".into(), json!(h.variance()));
            summary.insert("mu_s_hat".into(), json!(mean / (1.0 + mean)));
            summary.insert("model_mean".into(), json!(model.mean()));
            summary.insert("model_mu_s".into(), json!(model.implicit_momentum()));
            summary.insert("total_variation".into(), json!(total_variation(&h, &model)));
            summary.insert("chi_square_statistic".into(), json!(chi.statistic));
            summary.insert("chi_square_df".into(), json!(chi.degrees_of_freedom));
            summary.insert("chi_square_p_value".into(), json!(chi.p_value));
            summary.insert("chi_square_critical".into(), json!(chi.critical_value));
        }
        Err(stale_momentum::Error::EmptyTrace) => {}
        Err(e) => return Err(e.into()),
    }
    summary.insert("time_per_step".into(), json!(queueing::time_per_step(&trace)?));
    summary.insert(
        "expected_time_per_step".into(),
        json!(1.0 / (f64::from(workers) * p.rate)),
    );

    if ctx.sink.dir.is_some() {
        ctx.sink.emit_as(crate::output::Format::Csv, "trace", &resolved, Value::Null, |out| {
            Ok(trace.write_csv(out)?)
        })?;
    }
    let rows: Vec<(String, Value)> = summary.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    ctx.sink.emit("summary", &resolved, Value::Object(summary), |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["key", "value"])?;
        for (k, v) in rows {
            w.write_record([k, v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(Status::Pass)
}

// ---------------------------------------------------------------- verify

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct VerifyFlags {
    /// Which identity to check: 1 memory, 2 geometric momentum, 3 queueing law, 4 implicit plus explicit momentum.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem: Option<u8>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_l: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Dimension of the default quadratic.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Condition number of the default quadratic.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    /// Staleness pmf for the memory identity, e.g. `0.5,0.5`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub writes: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub work: Option<WorkTimeArg>,
    /// Also compare a seeded ensemble against the exact expectation.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub monte_carlo: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyParams {
    pub theorem: Option<u8>,
    pub mu_s: f64,
    pub mu_l: f64,
    pub alpha: f64,
    pub dim: usize,
    pub condition: f64,
    pub objective: Option<ObjectiveSpec>,
    pub w0: Option<Vec<f64>>,
    pub steps: usize,
    pub burn_in: usize,
    pub pmf: Option<Vec<f64>>,
    pub workers: u32,
    pub rate: f64,
    pub writes: u64,
    pub work: WorkTime,
    pub monte_carlo: bool,
    pub runs: usize,
    pub sigma: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            theorem: None,
            mu_s: 0.5,
            mu_l: 0.0,
            alpha: 0.1,
            dim: 1,
            condition: 10.0,
            objective: None,
            w0: None,
            steps: 200,
            burn_in: stale_momentum::verify::DEFAULT_BURN_IN,
            pmf: None,
            workers: 2,
            rate: 1.0,
            writes: 100_000,
            work: WorkTime::Exponential,
            monte_carlo: false,
            runs: 10_000,
            sigma: 0.01,
        }
    }
}

fn add_check(report: &mut VerificationReport, check: stale_momentum::verify::Check) {
    if !check.passed && report.status == Status::Pass {
        report.status = Status::Fail;
    }
    report.checks.push(check);
}

pub fn verify(ctx: &Context, p: &VerifyParams) -> CliResult<Status> {
    let theorem = p.theorem.ok_or_else(|| usage("--theorem is required"))?;
    let report = match theorem {
        1 | 2 | 4 => {
            let obj = objective(&p.objective, p.dim, p.condition)?;
            let w0 = start_point(&p.w0, &obj)?;
            let opts = ExactOptions {
                steps: p.steps,
                burn_in: p.burn_in,
                w0: Some(w0.clone()),
            };
            let staleness = match (&p.pmf, theorem) {
                (Some(pmf), 1) => StalenessDistribution::empirical(pmf.clone())?,
                (Some(_), _) => return Err(usage("--pmf applies to --theorem 1 only")),
                (None, _) => StalenessDistribution::geometric(p.mu_s)?,
            };
            let mu_l = if theorem == 4 { p.mu_l } else { 0.0 };
            let mut report = match theorem {
                1 => verify_theorem1(&obj, p.alpha, &staleness, &opts)?,
                2 => verify_theorem2(&obj, p.alpha, p.mu_s, &opts)?,
                _ => verify_theorem4(&obj, p.alpha, p.mu_s, p.mu_l, &opts)?,
            };
            if p.monte_carlo {
                let check_steps: Vec<usize> = (1..=p.steps / 10).map(|k| 10 * k).collect();
                if check_steps.is_empty() {
                    return Err(domain("Monte-Carlo mode needs at least 10 steps"));
                }
                let mut mc = MonteCarloOptions::new(p.runs, p.sigma, ctx.seed, check_steps);
                mc.exec = ctx.exec;
                let params = StepParams::new(p.alpha, mu_l)?;
                add_check(&mut report, monte_carlo_consistency(&obj, params, &staleness, &w0, &mc)?);
                if theorem == 2 {
                    add_check(&mut report, theorem2_monte_carlo(&obj, p.alpha, p.mu_s, &w0, &mc)?);
                }
            }
            report
        }
        3 => verify_theorem3(p.workers, p.rate, p.writes, ctx.seed, p.work)?,
        _ => return Err(usage(format!("--theorem must be 1, 2, 3 or 4, got {theorem}"))),
    };
    let resolved = ctx.resolved("verify", p)?;
    let status = report.status;
    let rows = report.checks.clone();
    ctx.sink.emit(
        &format!("verify_theorem{theorem}"),
        &resolved,
        serde_json::to_value(&report)?,
        |out| {
            writeln!(out, "# status: {}", serde_json::to_value(status)?.as_str().unwrap_or(""))?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["check", "t", "discrepancy", "tolerance", "passed"])?;
            for c in &rows {
                for (t, d) in &c.series {
                    w.write_record([
                        c.name.clone(),
                        t.to_string(),
                        format!("{d:?}"),
                        format!("{:?}", c.tolerance),
                        (*d <= c.tolerance).to_string(),
                    ])?;
                }
            }
            w.flush()?;
            Ok(())
        },
    )?;
    Ok(status)
}

// ---------------------------------------------------------------- trajectory

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryMode {
    /// One seeded asynchronous run with geometric staleness.
    #[default]
    Async,
    /// Synchronous heavy-ball run.
    Momentum,
    /// Exact expected iterates from the dynamic program.
    Exact,
    /// Expected iterates from the three-term recurrence.
    Recurrence,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct TrajectoryFlags {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<TrajectoryMode>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_l: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Standard deviation of additive Gaussian gradient noise.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryParams {
    pub mode: TrajectoryMode,
    pub mu_s: f64,
    pub mu_l: f64,
    pub alpha: f64,
    pub dim: usize,
    pub condition: f64,
    pub objective: Option<ObjectiveSpec>,
    pub w0: Option<Vec<f64>>,
    pub steps: usize,
    pub sigma: f64,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self {
            mode: TrajectoryMode::Async,
            mu_s: 0.5,
            mu_l: 0.0,
            alpha: 0.1,
            dim: 1,
            condition: 10.0,
            objective: None,
            w0: None,
            steps: 100,
            sigma: 0.0,
        }
    }
}

pub fn trajectory(ctx: &Context, p: &TrajectoryParams) -> CliResult<Status> {
    let obj = objective(&p.objective, p.dim, p.condition)?;
    let w0 = start_point(&p.w0, &obj)?;
    let params = StepParams::new(p.alpha, p.mu_l)?;
    let noise = if p.sigma > 0.0 {
        NoiseModel::AdditiveGaussian { sigma: p.sigma }
    } else if p.sigma == 0.0 {
        NoiseModel::None
    } else {
        return Err(domain(format!("sigma must be nonnegative, got {}", p.sigma)));
    };
    let staleness = StalenessDistribution::geometric(p.mu_s)?;
    let traj: Trajectory = match p.mode {
        TrajectoryMode::Async => run_async_sgd(
            &obj,
            params,
            StalenessSource::Distribution(&staleness),
            p.steps,
            &w0,
            noise,
            ctx.seed,
        )?,
        TrajectoryMode::Momentum => run_momentum_sgd(&obj, params, p.steps, &w0, noise, ctx.seed)?,
        TrajectoryMode::Exact => expected_iterates_exact(&obj, params, &staleness, p.steps, &w0)?,
        TrajectoryMode::Recurrence => recurrence_iterates(&obj, params, p.mu_s, p.steps, &w0)?,
    };
    let resolved = ctx.resolved("trajectory", p)?;
    let values = traj
        .iterates
        .iter()
        .map(|w| obj.value(w))
        .collect::<stale_momentum::Result<Vec<f64>>>()?;
    let body = json!({
        "staleness": traj.staleness,
        "iterates": traj.iterates.iter().map(|w| w.as_slice().to_vec()).collect::<Vec<_>>(),
        "objective": values,
        "distance": traj.distances(obj.w_star()),
    });
    ctx.sink.emit("trajectory", &resolved, body, |out| Ok(traj.write_csv(&obj, out)?))?;
    Ok(Status::Pass)
}

// ---------------------------------------------------------------- rates

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct RatesFlags {
    /// Hessian eigenvalues, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigs: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_l: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RatesParams {
    pub eigs: Vec<f64>,
    pub mu_s: f64,
    pub mu_l: f64,
    pub alpha: f64,
}

impl Default for RatesParams {
    fn default() -> Self {
        Self {
            eigs: vec![1.0],
            mu_s: 0.0,
            mu_l: 0.0,
            alpha: 0.1,
        }
    }
}

pub fn rates(ctx: &Context, p: &RatesParams) -> CliResult<Status> {
    let report = convergence_rate(&p.eigs, p.mu_s, p.mu_l, p.alpha)?;
    let resolved = ctx.resolved("rates", p)?;
    let gamma = report.gamma;
    ctx.sink.emit("rates", &resolved, serde_json::to_value(&report)?, |out| {
        writeln!(out, "# gamma: {gamma:?}")?;
        Ok(export::rate_report_csv(&report, out)?)
    })?;
    Ok(Status::Pass)
}

// ---------------------------------------------------------------- tune

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct TuneFlags {
    /// Condition number Q; repeat for several curves.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<Vec<f64>>,
    /// Implicit momenta to tune at (default 0, 0.05, ..., 0.95).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_s: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Emit every grid cell instead of the optimum per mu_s.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub cells: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridFlags,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TuneParams {
    pub condition: Vec<f64>,
    pub mu_s: Vec<f64>,
    pub spectrum: SpectrumKind,
    pub dim: usize,
    pub cells: bool,
    #[serde(flatten)]
    pub grid: GridParams,
}

impl Default for TuneParams {
    fn default() -> Self {
        Self {
            condition: vec![5.0, 20.0],
            mu_s: default_mu_s_grid(),
            spectrum: SpectrumKind::TwoPoint,
            dim: 10,
            cells: false,
            grid: GridParams::default(),
        }
    }
}

pub fn tune_cmd(ctx: &Context, p: &TuneParams) -> CliResult<Status> {
    if p.condition.is_empty() || p.mu_s.is_empty() {
        return Err(domain("at least one condition number and one mu_s are required"));
    }
    let axes = p.grid.axes()?;
    let grids = p
        .condition
        .iter()
        .map(|&q| {
            let eigs = spectrum(p.spectrum, p.dim, q)?;
            let grid = TuningGrid::sweep(&eigs, &p.mu_s, &axes, p.cells, ctx.exec)?;
            Ok((format!("Q={q}"), grid))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let resolved = ctx.resolved("tune", p)?;
    let body = json!({
        "curves": grids.iter().map(|(label, g)| json!({
            "label": label,
            "eigenvalues": g.eigenvalues,
            "entries": g.entries,
        })).collect::<Vec<_>>(),
    });
    ctx.sink.emit("tune", &resolved, body, |out| {
        Ok(export::tuning_grid_csv(&grids, p.cells, out)?)
    })?;
    Ok(Status::Pass)
}

// ---------------------------------------------------------------- compare

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct CompareFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    /// Horizon k of the distance proxy gamma^k.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_s: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridFlags,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompareParams {
    pub condition: f64,
    pub steps: u32,
    pub mu_s: Vec<f64>,
    pub spectrum: SpectrumKind,
    pub dim: usize,
    #[serde(flatten)]
    pub grid: GridParams,
}

impl Default for CompareParams {
    fn default() -> Self {
        Self {
            condition: 10.0,
            steps: 10,
            mu_s: default_mu_s_grid(),
            spectrum: SpectrumKind::TwoPoint,
            dim: 10,
            grid: GridParams::default(),
        }
    }
}

pub fn compare(ctx: &Context, p: &CompareParams) -> CliResult<Status> {
    let eigs = spectrum(p.spectrum, p.dim, p.condition)?;
    let rows = strategy_compare(&eigs, &p.mu_s, p.steps, &p.grid.axes()?, ctx.exec)?;
    let resolved = ctx.resolved("compare", p)?;
    ctx.sink.emit("compare", &resolved, json!({ "rows": rows }), |out| {
        Ok(export::strategy_csv(&rows, out)?)
    })?;
    Ok(Status::Pass)
}

// ---------------------------------------------------------------- efficiency

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct EfficiencyFlags {
    /// Worker counts; must include 1.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<Vec<u32>>,
    /// Rates per worker count. When absent they come from tuning at mu_s = 1 - 1/M.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    /// Target ratio of final to initial distance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridFlags,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EfficiencyParams {
    pub workers: Vec<u32>,
    pub gammas: Option<Vec<f64>>,
    pub target: f64,
    pub condition: f64,
    pub spectrum: SpectrumKind,
    pub dim: usize,
    #[serde(flatten)]
    pub grid: GridParams,
}

impl Default for EfficiencyParams {
    fn default() -> Self {
        Self {
            workers: vec![1, 2, 4, 8, 16],
            gammas: None,
            target: 1e-3,
            condition: 10.0,
            spectrum: SpectrumKind::TwoPoint,
            dim: 10,
            grid: GridParams::default(),
        }
    }
}

pub fn efficiency(ctx: &Context, p: &EfficiencyParams) -> CliResult<Status> {
    let gammas = match &p.gammas {
        Some(g) => g.clone(),
        None => {
            let eigs = spectrum(p.spectrum, p.dim, p.condition)?;
            let axes = p.grid.axes()?;
            p.workers
                .iter()
                .map(|&m| {
                    let mu_s = StalenessDistribution::from_worker_count(m)?
                        .implicit_momentum()
                        .unwrap_or(0.0);
                    Ok(tune(&eigs, mu_s, &axes, ctx.exec)?.gamma)
                })
                .collect::<CliResult<Vec<f64>>>()?
        }
    };
    let rows = efficiency_metrics(&p.workers, &gammas, p.target)?;
    let resolved = ctx.resolved("efficiency", p)?;
    ctx.sink.emit("efficiency", &resolved, json!({ "rows": rows }), |out| {
        Ok(export::efficiency_csv(&rows, out)?)
    })?;
    Ok(Status::Pass)
}
