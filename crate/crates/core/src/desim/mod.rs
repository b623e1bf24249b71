//! Discrete-event Monte Carlo simulation.
//!
//! Two independent simulators live here. [`simulate`] runs the physical
//! server (arrivals, preemptive service, idle/sleep/wake-up timers) and
//! measures the age of synchronization straight from its definition.
//! [`simulate_generic`] runs an arbitrary [`ShsModel`] as competing
//! exponential clocks. Neither consults the analytical solvers.

mod generic;
mod physical;

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generic::simulate_generic;
pub use physical::{
    record_path, simulate, simulate_with_path, PathRecord, ServerPhase, SimEvent, SyncTracker,
};

pub const DEFAULT_EVENT_CAP: f64 = 1e9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Simulated time per replication.
    pub horizon: f64,
    /// Initial time of every replication excluded from the averages.
    pub warmup: f64,
    pub seed: u64,
    /// Number of independent replications.
    pub batches: usize,
    /// Upper bound on expected events per replication.
    pub event_cap: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 1e6,
            warmup: 1e3,
            seed: 1,
            batches: 10,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(Error::InvalidConfig(format!(
                "warmup must lie in [0, horizon), got {}",
                self.warmup
            )));
        }
        if self.batches < 2 {
            return Err(Error::InvalidConfig(format!(
                "at least 2 batches are needed, got {}",
                self.batches
            )));
        }
        Ok(())
    }

    fn check_budget(&self, max_rate: f64) -> Result<()> {
        let needed = self.horizon * max_rate;
        if needed > self.event_cap {
            return Err(Error::EventBudget {
                needed,
                cap: self.event_cap,
            });
        }
        Ok(())
    }

    /// Hard stop on processed events, with slack over the expected count.
    fn event_limit(&self) -> u64 {
        (self.event_cap * 4.0).min(u64::MAX as f64) as u64
    }

    fn measured_time(&self) -> f64 {
        self.horizon - self.warmup
    }

    fn rng(&self, batch: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(batch as u64);
        rng
    }
}

/// Sample mean with its standard error over replications.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n).sqrt(),
        }
    }

    /// `|mean - target|` in units of the standard error, combined with
    /// `other_se` in quadrature. Zero error counts as agreement only on equality.
    pub fn z_score(&self, target: f64, other_se: f64) -> f64 {
        let se = self.std_err.hypot(other_se);
        let diff = (self.mean - target).abs();
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / se
        }
    }

    /// True if the estimate is within `k` combined standard errors of `target`.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        self.z_score(target, 0.0) <= k
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub avg_aos: Estimate,
    pub avg_power: Estimate,
    /// Fraction of measured time per phase (physical) or per state label (generic).
    pub per_phase_time_fraction: BTreeMap<String, Estimate>,
    /// Events processed over all replications.
    pub events: u64,
}

/// What one replication measured.
#[derive(Clone, Debug)]
pub(crate) struct Replication {
    pub aos: f64,
    pub power: f64,
    pub fractions: Vec<(String, f64)>,
    pub events: u64,
}

/// Runs `config.batches` replications (in parallel when enabled) and merges
/// them in batch order.
pub(crate) fn run_batches<F>(config: &SimConfig, run: F) -> Result<SimEstimate>
where
    F: Fn(usize, ChaCha8Rng) -> Result<Replication> + Sync,
{
    let one = |b: usize| run(b, config.rng(b));
    #[cfg(feature = "parallel")]
    let reps: Vec<Result<Replication>> = {
        use rayon::prelude::*;
        (0..config.batches).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let reps: Vec<Result<Replication>> = (0..config.batches).map(one).collect();
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(merge(&reps))
}

fn merge(reps: &[Replication]) -> SimEstimate {
    let aos: Vec<f64> = reps.iter().map(|r| r.aos).collect();
    let power: Vec<f64> = reps.iter().map(|r| r.power).collect();
    let mut by_label: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, r) in reps.iter().enumerate() {
        for (label, f) in &r.fractions {
            by_label
                .entry(label.clone())
                .or_insert_with(|| vec![0.0; reps.len()])[i] = *f;
        }
    }
    SimEstimate {
        avg_aos: Estimate::from_samples(&aos),
        avg_power: Estimate::from_samples(&power),
        per_phase_time_fraction: by_label
            .into_iter()
            .map(|(k, v)| (k, Estimate::from_samples(&v)))
            .collect(),
        events: reps.iter().map(|r| r.events).sum(),
    }
}

/// Writes a sample path as CSV with columns `time,aos,phase_label`.
pub fn write_path_csv(records: &[PathRecord], path: &Path) -> Result<()> {
    let wrap = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(["time", "aos", "phase_label"])
        .map_err(wrap)?;
    for r in records {
        w.write_record([r.time.to_string(), r.aos.to_string(), r.phase.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
