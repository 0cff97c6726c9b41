//! CSV tables behind the rate figures. Every table starts with a
//! `# params: {...}` comment line carrying the resolved parameters, so a
//! file describes how it was produced.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::rates::{EfficiencyRow, RateReport, StrategyRow, TuningGrid};

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(|| "inf".to_string(), |v| v.to_string())
}

/// Writes the `# params:` line. Pass `None` to omit it.
pub fn write_params<W: Write, P: Serialize>(out: &mut W, params: Option<&P>) -> Result<()> {
    if let Some(p) = params {
        writeln!(out, "# params: {}", serde_json::to_string(p)?)?;
    }
    Ok(())
}

/// One row per `mu_s` with the optimum, or one row per cell when the grids
/// kept their cells. Each grid is tagged with its label.
pub fn tuning_grid_csv<W: Write>(grids: &[(String, TuningGrid)], cells: bool, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if cells {
        w.write_record(["label", "mu_s", "mu_l", "alpha", "gamma", "stable"])?;
    } else {
        w.write_record(["label", "mu_s", "mu_l_star", "alpha_star", "gamma_star", "stable"])?;
    }
    for (label, grid) in grids {
        for e in &grid.entries {
            if cells {
                for c in &e.cells {
                    w.write_record([
                        label.clone(),
                        fmt(e.mu_s),
                        fmt(c.mu_l),
                        fmt(c.alpha),
                        fmt(c.gamma),
                        (c.gamma < 1.0).to_string(),
                    ])?;
                }
            } else {
                w.write_record([
                    label.clone(),
                    fmt(e.mu_s),
                    fmt(e.mu_l),
                    fmt(e.alpha),
                    fmt(e.gamma),
                    e.stable.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn strategy_csv<W: Write>(rows: &[StrategyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "mu_s",
        "tuned_mu_l",
        "tuned_alpha",
        "tuned_gamma",
        "zero_alpha",
        "zero_gamma",
        "half_alpha",
        "half_gamma",
        "distance_tuned",
        "distance_zero",
        "distance_half",
        "speedup_over_zero",
    ])?;
    for r in rows {
        w.write_record([
            fmt(r.mu_s),
            fmt(r.tuned.mu_l),
            fmt(r.tuned.alpha),
            fmt(r.tuned.gamma),
            fmt(r.zero_momentum.alpha),
            fmt(r.zero_momentum.gamma),
            fmt(r.half_momentum.alpha),
            fmt(r.half_momentum.gamma),
            fmt(r.distance_tuned),
            fmt(r.distance_zero),
            fmt(r.distance_half),
            fmt(r.speedup_over_zero),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn efficiency_csv<W: Write>(rows: &[EfficiencyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "workers",
        "gamma",
        "hardware_efficiency",
        "iterations",
        "statistical_efficiency",
        "wall_clock",
    ])?;
    for r in rows {
        w.write_record([
            r.workers.to_string(),
            fmt(r.gamma),
            fmt(r.hardware_efficiency),
            opt(r.iterations),
            opt(r.statistical_efficiency.map(fmt)),
            opt(r.wall_clock.map(fmt)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn rate_report_csv<W: Write>(report: &RateReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "root_re", "root_im", "rate"])?;
    for e in &report.per_eigenvalue {
        let (re, im) = e.root.map_or((f64::INFINITY, 0.0), |r| (r.re, r.im));
        w.write_record([fmt(e.lambda), fmt(re), fmt(im), fmt(e.rate)])?;
    }
    w.flush()?;
    Ok(())
}
