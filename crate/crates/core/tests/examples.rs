use nalgebra::DVector;

use stale_momentum::engine::{run_async_sgd, NoiseModel, StalenessSource, StepParams};
use stale_momentum::queueing::{histogram, simulate, stationary_histogram, time_per_step, QueueConfig};
use stale_momentum::rates::{convergence_rate, efficiency_metrics, tune, TuningAxes};
use stale_momentum::staleness::{total_variation, StalenessDistribution};
use stale_momentum::verify::{verify_theorem2, verify_theorem3, verify_theorem4, ExactOptions, Status};
use stale_momentum::{Exec, QuadraticObjective, WorkTime};

#[test]
fn two_workers_mean_staleness() {
    let trace = simulate(&QueueConfig::new(2, 1.0, 100_000, 1)).unwrap();
    let mean = stationary_histogram(&trace).unwrap().mean();
    // Geometric(1/2) has variance 2, so the standard error is about 0.0045
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn eight_workers_close_in_total_variation() {
    let trace = simulate(&QueueConfig::new(8, 1.0, 100_000, 3)).unwrap();
    let tv = total_variation(
        &stationary_histogram(&trace).unwrap(),
        &StalenessDistribution::from_worker_count(8).unwrap(),
    );
    assert!(tv < 0.02, "{tv}");
}

#[test]
fn time_per_step_scales_with_workers() {
    for (m, rate) in [(1, 1.0), (4, 1.0), (4, 2.0)] {
        let t = time_per_step(&simulate(&QueueConfig::new(m, rate, 50_000, 9)).unwrap()).unwrap();
        let expected = 1.0 / (f64::from(m) * rate);
        assert!((t / expected - 1.0).abs() < 0.02, "M={m}: {t}");
    }
}

#[test]
fn single_worker_histogram_is_degenerate() {
    let trace = simulate(&QueueConfig::new(1, 1.0, 1000, 0)).unwrap();
    let h = histogram(&trace).unwrap();
    assert_eq!(h.pmf(0), 1.0);
    assert_eq!(h.mean(), 0.0);
}

#[test]
fn queueing_report_statuses() {
    assert_eq!(verify_theorem3(4, 1.0, 20_000, 5, WorkTime::Exponential).unwrap().status, Status::Pass);
    assert_eq!(verify_theorem3(4, 1.0, 20_000, 5, WorkTime::Constant).unwrap().status, Status::Fail);
    assert_eq!(verify_theorem3(4, 1.0, 500, 5, WorkTime::Exponential).unwrap().status, Status::Inconclusive);
}

#[test]
fn exact_verification_on_ten_dimensions() {
    let eigs: Vec<f64> = (1..=10).map(f64::from).collect();
    let obj = QuadraticObjective::from_spectrum(&eigs, DVector::from_element(10, -0.5)).unwrap();
    let opts = ExactOptions::new(150);
    let r = verify_theorem2(&obj, 0.02, 0.75, &opts).unwrap();
    assert!(r.passed(), "{}", r.max_discrepancy());
    let r = verify_theorem4(&obj, 0.02, 0.75, -0.4, &opts).unwrap();
    assert!(r.passed());
    assert!(r.max_discrepancy() < 1e-12);
}

#[test]
fn trace_driven_run_uses_recorded_staleness() {
    let trace = simulate(&QueueConfig::new(3, 1.0, 200, 4)).unwrap();
    let obj = QuadraticObjective::from_spectrum(&[1.0], DVector::zeros(1)).unwrap();
    let params = StepParams::new(0.1, 0.0).unwrap();
    let w0 = DVector::from_element(1, 1.0);
    let run = |seed| {
        run_async_sgd(&obj, params, StalenessSource::Trace(&trace), 200, &w0, NoiseModel::None, seed).unwrap()
    };
    // without noise the seed is irrelevant once staleness is fixed
    assert_eq!(run(1).iterates, run(2).iterates);
    assert!(run(1).iterates[200][0].abs() < 1e-3);
}

#[test]
fn gradient_descent_rate() {
    let r = convergence_rate(&[1.0], 0.0, 0.0, 0.1).unwrap();
    assert!((r.gamma - 0.9).abs() < 1e-12);
    assert!(r.stable);
}

#[test]
fn tuning_prefers_negative_momentum_under_heavy_staleness() {
    let t = tune(&[1.0, 5.0], 0.9, &TuningAxes::default(), Exec::default()).unwrap();
    assert!(t.mu_l < 0.0 && t.stable);
    let t0 = tune(&[1.0, 5.0], 0.0, &TuningAxes::default(), Exec::default()).unwrap();
    assert!(t0.mu_l > 0.0);
}

#[test]
fn efficiency_rows() {
    let rows = efficiency_metrics(&[1, 4], &[0.9, 0.95], 0.01).unwrap();
    assert_eq!(rows[0].iterations, Some(44));
    assert_eq!(rows[1].iterations, Some(90));
    assert_eq!(rows[1].statistical_efficiency, Some(90.0 / 44.0));
    assert_eq!(rows[1].hardware_efficiency, 0.25);
    assert!(efficiency_metrics(&[2], &[0.9], 0.01).is_err());
}
