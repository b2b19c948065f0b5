//! Monte Carlo estimators with replicate fan-out and CSV output.
//!
//! Replicate `r` of a run seeded with `s` always draws from ChaCha stream
//! `(s, r)`, and per-replicate results are collected in replicate order
//! before any reduction, so every estimate is independent of the worker count.

mod activity;
mod dichotomy;
mod estimators;
mod fixation;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::colony::ColonyError;
use crate::dual::{DualError, DualKind};
use crate::kernel::KernelError;
use crate::oracle::OracleError;

pub use activity::{
    activity_fraction, meeting_probe, meeting_sample, ActivityCheckpoint, ActivityReport,
    MeetingReport, MeetingSample,
};
pub use dichotomy::{assess_dichotomy, dichotomy_scan, DichotomyAssessment, ScanCell, ScanRow};
pub use estimators::{
    chain_factor, epsilon_r, first_jump_factor, lower_bound_check, mc_absorption_cdf,
    paired_ordering, series_estimate, LowerBoundReport, LowerBoundSetup, PairedOrdering, PairedRow,
    SeriesReport,
};
pub use fixation::{fixation_experiment, FixationReport};

/// Replicate count below which estimators refuse to run.
pub const MIN_REPLICATES: u64 = 100;

/// Width of every confidence check, in standard errors.
pub const CONFIDENCE_SE: f64 = 3.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{got} replicates requested, at least {min} needed")]
    TooFewReplicates { got: u64, min: u64 },
    #[error("estimator not defined for {0:?}")]
    UnsupportedKind(DualKind),
    #[error("censoring at the horizon leaves the comparison open: estimate {estimate} against bound {bound}, {censored_fraction} censored")]
    HorizonInsufficient {
        estimate: f64,
        bound: f64,
        censored_fraction: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Colony(#[from] ColonyError),
    #[error(transparent)]
    Dual(#[from] DualError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub(crate) fn check_replicates(n: u64) -> Result<(), ExperimentError> {
    if n < MIN_REPLICATES {
        return Err(ExperimentError::TooFewReplicates {
            got: n,
            min: MIN_REPLICATES,
        });
    }
    Ok(())
}

/// One row of an experiment's output table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub experiment: String,
    pub quantity: String,
    pub time: Option<f64>,
    pub estimate: f64,
    pub std_error: f64,
    pub censored_fraction: f64,
    pub replicates: u64,
    pub passed: Option<bool>,
}

impl EstimateRecord {
    pub fn new(experiment: &str, quantity: impl Into<String>, estimate: f64, std_error: f64) -> Self {
        EstimateRecord {
            experiment: experiment.to_string(),
            quantity: quantity.into(),
            time: None,
            estimate,
            std_error,
            censored_fraction: 0.0,
            replicates: 0,
            passed: None,
        }
    }

    pub fn at(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn replicates(mut self, n: u64, censored_fraction: f64) -> Self {
        self.replicates = n;
        self.censored_fraction = censored_fraction;
        self
    }

    pub fn passed(mut self, ok: bool) -> Self {
        self.passed = Some(ok);
        self
    }
}

pub const CSV_HEADER: &str =
    "experiment,quantity,time,estimate,std_error,censored_fraction,replicates,passed";

/// Writes `# key: value` provenance lines, then the records.
pub fn write_records_csv<W: Write>(
    metadata: &[(String, String)],
    records: &[EstimateRecord],
    mut w: W,
) -> std::io::Result<()> {
    for (k, v) in metadata {
        writeln!(w, "# {k}: {}", v.replace('\n', " "))?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        let time = r.time.map(|t| t.to_string()).unwrap_or_default();
        let passed = match r.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "",
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.experiment, r.quantity, time, r.estimate, r.std_error, r.censored_fraction, r.replicates, passed
        )?;
    }
    Ok(())
}

/// Count, mean and centred second moment; `merge` combines two partial summaries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        Moments {
            n,
            mean: a.mean + d * b.n as f64 / n as f64,
            m2: a.m2 + b.m2 + d * d * (a.n as f64 * b.n as f64) / n as f64,
        }
    }

    /// Pairwise merge over fixed blocks of `values`.
    pub fn of(values: &[f64]) -> Moments {
        const BLOCK: usize = 256;
        if values.len() <= BLOCK {
            let mut m = Moments::default();
            for &x in values {
                m.push(x);
            }
            return m;
        }
        let mid = values.len().div_ceil(2 * BLOCK) * BLOCK;
        Moments::merge(Moments::of(&values[..mid]), Moments::of(&values[mid..]))
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Binomial standard error `sqrt(p (1 - p) / n)`.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Runs `f(replicate, scratch)` for every replicate and returns results in replicate order.
pub fn run_replicates<T, S, I, F>(n: u64, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(u64, &mut S) -> T + Sync + Send,
{
    (0..n).into_par_iter().map_init(init, |s, r| f(r, s)).collect()
}

/// Nearest-rank quantile of a sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}
