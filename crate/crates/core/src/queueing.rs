//! Discrete-event simulation of `M` asynchronous workers sharing one model.
//!
//! Each worker loops: read the model (instantaneous), work for a random
//! duration, write (instantaneous, atomic). The staleness of a write is the
//! number of writes by other workers between that worker's read and its
//! write. With independent `Exp(lambda)` work times the post-warm-up
//! staleness is geometric with `mu_s = 1 - 1/M`.
//!
//! The event loop is single threaded and keyed by next-write time; ties are
//! broken by worker id. Worker `j` draws its work times from its own ChaCha8
//! stream: `ChaCha8Rng::seed_from_u64(seed)` with `set_stream(j)`. A trace
//! therefore does not depend on how the event queue orders equal keys.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::staleness::StalenessDistribution;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkTime {
    /// `Exp(lambda)` durations.
    #[default]
    Exponential,
    /// Every step takes exactly `1 / lambda`.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueConfig {
    pub workers: u32,
    /// Work completion rate per worker and unit time.
    pub rate: f64,
    pub num_writes: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub work: WorkTime,
}

impl QueueConfig {
    pub fn new(workers: u32, rate: f64, num_writes: u64, seed: u64) -> Self {
        Self {
            workers,
            rate,
            num_writes,
            seed,
            work: WorkTime::Exponential,
        }
    }

    pub fn with_work(mut self, work: WorkTime) -> Self {
        self.work = work;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::domain("at least one worker is required"));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::domain(format!(
                "work rate must be positive, got {}",
                self.rate
            )));
        }
        if self.num_writes == 0 {
            return Err(Error::domain("num_writes must be at least 1"));
        }
        let max_records = (isize::MAX as usize) / std::mem::size_of::<WriteRecord>();
        if usize::try_from(self.num_writes).map_or(true, |n| n > max_records) {
            return Err(Error::TooManyWrites(self.num_writes));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WriteRecord {
    pub write_index: u64,
    pub worker_id: u32,
    pub staleness: u64,
    pub write_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StalenessTrace {
    pub records: Vec<WriteRecord>,
    pub total_time: f64,
    /// Number of leading writes that belong to the start-up transient.
    pub warmup: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Event {
    time: f64,
    worker: u32,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.worker.cmp(&other.worker))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Worker {
    rng: ChaCha8Rng,
    // global write count seen at the last read
    read_count: u64,
}

pub fn worker_rng(seed: u64, worker: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(worker));
    rng
}

/// Runs the simulation. All workers read at `t = 0`; the first `M` writes
/// are flagged as warm-up.
pub fn simulate(cfg: &QueueConfig) -> Result<StalenessTrace> {
    cfg.validate()?;
    let n = cfg.num_writes as usize;
    let exp = Exp::new(cfg.rate).map_err(|e| Error::domain(e.to_string()))?;
    let constant = 1.0 / cfg.rate;
    let draw = |rng: &mut ChaCha8Rng| match cfg.work {
        WorkTime::Exponential => exp.sample(rng),
        WorkTime::Constant => constant,
    };

    let mut workers: Vec<Worker> = (0..cfg.workers)
        .map(|id| Worker {
            rng: worker_rng(cfg.seed, id),
            read_count: 0,
        })
        .collect();
    let mut queue = BinaryHeap::with_capacity(workers.len());
    for (id, w) in workers.iter_mut().enumerate() {
        queue.push(Reverse(Event {
            time: draw(&mut w.rng),
            worker: id as u32,
        }));
    }

    let mut records = Vec::with_capacity(n);
    let mut writes: u64 = 0;
    let mut now = 0.0;
    while records.len() < n {
        let Reverse(event) = queue.pop().expect("event queue is never empty");
        now = event.time;
        let worker = &mut workers[event.worker as usize];
        records.push(WriteRecord {
            write_index: writes,
            worker_id: event.worker,
            staleness: writes - worker.read_count,
            write_time: now,
        });
        writes += 1;
        worker.read_count = writes;
        queue.push(Reverse(Event {
            time: now + draw(&mut worker.rng),
            worker: event.worker,
        }));
    }

    Ok(StalenessTrace {
        records,
        total_time: now,
        warmup: (cfg.workers as usize).min(n),
    })
}

impl StalenessTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn staleness(&self) -> impl Iterator<Item = u64> + '_ {
        self.records.iter().map(|r| r.staleness)
    }

    /// Records after the warm-up prefix.
    pub fn stationary(&self) -> &[WriteRecord] {
        &self.records[self.warmup.min(self.records.len())..]
    }

    /// Recomputes every staleness value from worker ids alone: a worker
    /// reads right after its own previous write (or at time zero), so its
    /// staleness is the number of writes since then. Returns the index of
    /// the first inconsistent record.
    pub fn check_consistency(&self) -> std::result::Result<(), usize> {
        let mut last_write: std::collections::HashMap<u32, u64> = Default::default();
        let mut prev_time = f64::NEG_INFINITY;
        for (pos, r) in self.records.iter().enumerate() {
            let read_count = last_write.get(&r.worker_id).map_or(0, |k| k + 1);
            if r.write_index != pos as u64
                || r.staleness != r.write_index - read_count
                || r.write_time < prev_time
            {
                return Err(pos);
            }
            prev_time = r.write_time;
            last_write.insert(r.worker_id, r.write_index);
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["write_index", "worker_id", "staleness", "write_time"])?;
        for r in &self.records {
            w.write_record(&[
                r.write_index.to_string(),
                r.worker_id.to_string(),
                r.staleness.to_string(),
                format!("{:?}", r.write_time),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn counts_of(records: &[WriteRecord]) -> Vec<u64> {
    let mut counts = Vec::new();
    for r in records {
        let s = r.staleness as usize;
        if s >= counts.len() {
            counts.resize(s + 1, 0);
        }
        counts[s] += 1;
    }
    counts
}

/// Empirical staleness distribution of every write in the trace.
pub fn histogram(trace: &StalenessTrace) -> Result<StalenessDistribution> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    StalenessDistribution::from_counts(&counts_of(&trace.records))
}

/// Empirical staleness distribution with the warm-up writes discarded.
pub fn stationary_histogram(trace: &StalenessTrace) -> Result<StalenessDistribution> {
    let records = trace.stationary();
    if records.is_empty() {
        return Err(Error::EmptyTrace);
    }
    StalenessDistribution::from_counts(&counts_of(records))
}

/// Simulated time per write. Writes form a pooled Poisson process of rate
/// `M lambda`, so this is `1/(M lambda)` in expectation.
pub fn time_per_step(trace: &StalenessTrace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(trace.total_time / trace.len() as f64)
}
