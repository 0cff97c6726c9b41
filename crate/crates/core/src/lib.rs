//! Asynchronous SGD as momentum SGD: staleness models, a queueing simulator
//! for worker staleness, exact expected-iterate oracles on quadratics, and
//! convergence-rate analysis of implicit plus explicit momentum.
//!
//! Grid sweeps, ensembles and multi-seed simulations take an [`Exec`]
//! policy. With the default `parallel` feature they run on rayon; results
//! are identical either way.

pub mod engine;
pub mod error;
pub mod exec;
pub mod export;
pub mod objective;
pub mod queueing;
pub mod rates;
pub mod staleness;
pub mod verify;

pub use engine::{
    expected_iterates_exact, recurrence_iterates, run_async_sgd, run_momentum_sgd, NoiseModel,
    StalenessSource, StepParams, Trajectory,
};
pub use error::{Error, Result};
pub use exec::Exec;
pub use objective::{Objective, ObjectiveSpec, QuadraticObjective};
pub use queueing::{histogram, simulate, time_per_step, QueueConfig, StalenessTrace, WorkTime};
pub use rates::{
    convergence_rate, efficiency_metrics, growth_polynomial, smallest_magnitude_root,
    strategy_compare, tune, GrowthPolynomial, RateReport, TuneResult, TuningAxes, TuningGrid,
};
pub use staleness::{total_variation, StalenessDistribution};
pub use verify::{Status, VerificationReport};
