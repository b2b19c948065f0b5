//! Config-driven experiment runs: parse, validate, execute, write one CSV.

mod config;
mod runners;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::experiments::{write_records_csv, EstimateRecord, ExperimentError};
use crate::kernel::KernelError;

pub use config::{ExperimentConfig, ExperimentName, Prepared, ScanCriteria, TimeGrid, TorusConfig};
use config::variant_name;

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    #[error("invalid config ({cause}): {message}")]
    ConfigInvalid { cause: String, message: String },
    #[error("experiment {experiment} failed: {message}")]
    ExperimentFailed { experiment: String, message: String },
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    cause: Option<&'a str>,
    message: String,
}

impl CliError {
    pub(crate) fn invalid(cause: impl Into<String>, message: String) -> Self {
        CliError::ConfigInvalid {
            cause: cause.into(),
            message,
        }
    }

    pub(crate) fn from_kernel(e: KernelError) -> Self {
        CliError::invalid(variant_name(&e), e.to_string())
    }

    pub(crate) fn failed(experiment: ExperimentName, message: impl Into<String>) -> Self {
        CliError::ExperimentFailed {
            experiment: experiment.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn from_experiment(experiment: ExperimentName, e: ExperimentError) -> Self {
        match e {
            ExperimentError::TooFewReplicates { .. } | ExperimentError::InvalidParameter(_) => {
                CliError::invalid(variant_name(&e), e.to_string())
            }
            _ => CliError::failed(experiment, format!("{}: {e}", variant_name(&e))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid { .. } => "ConfigInvalid",
            CliError::ExperimentFailed { .. } => "ExperimentFailed",
            CliError::UnknownExperiment(_) => "UnknownExperiment",
            CliError::Io(_) => "Io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ExperimentFailed { .. } => 1,
            CliError::ConfigInvalid { .. } | CliError::UnknownExperiment(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    /// One-line JSON: `{"error": kind, "cause": ..., "message": ...}`.
    pub fn record(&self) -> String {
        let cause = match self {
            CliError::ConfigInvalid { cause, .. } => Some(cause.as_str()),
            _ => None,
        };
        serde_json::to_string(&ErrorRecord {
            error: self.kind(),
            cause,
            message: self.to_string(),
        })
        .expect("error record serialises")
    }
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub experiment: ExperimentName,
    pub output: PathBuf,
    pub records: Vec<EstimateRecord>,
    pub metadata: Vec<(String, String)>,
    pub passed: bool,
}

pub(crate) struct Table {
    pub records: Vec<EstimateRecord>,
    pub notes: Vec<(String, String)>,
    pub passed: bool,
    pub failure: String,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    Sha256::digest(config.canonical_json().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Loads a config file and runs it.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let config = ExperimentConfig::load(config_path)?;
    run_config(config, opts)
}

/// Runs one experiment and writes its CSV. The CSV is written even when the
/// experiment's check fails, in which case `ExperimentFailed` is returned after.
pub fn run_config(mut config: ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    let prepared = config.prepare()?;
    let table = runners::execute(&config, &prepared)?;
    let output = opts
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", config.experiment)));
    let mut metadata = vec![
        ("tool".to_string(), format!("seedbank-lab {}", env!("CARGO_PKG_VERSION"))),
        ("experiment".to_string(), config.experiment.to_string()),
        ("config_sha256".to_string(), config_hash(&config)),
        ("seed".to_string(), config.seed.to_string()),
        ("config".to_string(), config.canonical_json()),
        ("confidence".to_string(), "3 standard errors".to_string()),
    ];
    metadata.extend(table.notes);
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    let file = File::create(&output).map_err(|e| CliError::Io(format!("{}: {e}", output.display())))?;
    write_records_csv(&metadata, &table.records, BufWriter::new(file))
        .map_err(|e| CliError::Io(format!("{}: {e}", output.display())))?;
    if !table.passed {
        return Err(CliError::failed(config.experiment, table.failure));
    }
    Ok(RunOutcome {
        experiment: config.experiment,
        output,
        records: table.records,
        metadata,
        passed: table.passed,
    })
}

/// What an experiment checks, its config fields with defaults, and its output.
pub fn describe(name: &str) -> Result<String, CliError> {
    let e: ExperimentName = name.parse()?;
    let (what, fields) = match e {
        ExperimentName::Validate => (
            "Checks the kernel assumptions (self-rate 1/2, positive off-origin mass, irreducibility), \
             reports moments and the non-clumping statistic of the field, and on small tori solves \
             for the absorption probability of each dual walk, which must be 1.",
            "kernel, torus, field, radius (1)",
        ),
        ExperimentName::Ordering => (
            "Stochastic ordering of absorption times: the interacting walk absorbs no later than \
             the auxiliary walk. Exact on small tori over every initial state (slack >= -1e-10), \
             and by paired Monte Carlo with common random numbers (difference >= -3 paired SE).",
            "kernel, torus, field, lambda, t_grid (50 points on [0, 100]), init, replicates (10000), seed",
        ),
        ExperimentName::Series => (
            "Series representation of the absorption probability: sum_i w_i E[R_i] over jump-chain \
             visits R_i to the co-located active pair, with w_i the first-jump absorption probability. \
             Exact identity on small tori; Monte Carlo against the direct absorption frequency.",
            "kernel, torus, field, lambda, kind (AuxiliaryRW2), init, horizon (10000), replicates (10000), seed",
        ),
        ExperimentName::LowerBound => (
            "Lower bound on the absorption probability of the auxiliary walk from a co-located active \
             pair, epsilon_R * sum_{j in B_R(i)} 1/N_j, and the chained bound for an active-dormant start.",
            "kernel, torus, field, lambda, site (0), radius (1), n_max (20), probe_sites, horizon (10000), replicates (10000), seed",
        ),
        ExperimentName::Activity => (
            "Linear activity time: the 5th percentile of S(t)/t at the last checkpoint is at least \
             1/(1 + sup_i M_i/N_i) - 0.02.",
            "kernel, torus, field, lambda, t_grid ([10, 100, 1000, 10000]), site (0), replicates (1000), seed",
        ),
        ExperimentName::Meeting => (
            "Meeting probability of two independent particles after active times S, S': \
             sum_i a_S(0,i) a_S'(0,i) equals sum_i a^_{2 min}(0,i) a_{|S-S'|}(i,0) per sample \
             (to 1e-8), and the truncated time integral of the mean.",
            "kernel, torus, field (constant N/M), lambda, t_grid ([0.5 .. 5]), window, replicates (1000), seed",
        ),
        ExperimentName::Dichotomy => (
            "Dimensional dichotomy, d <= 2 vs d > 2: censored absorption frequency from a co-located \
             active pair while side and horizon grow together. Clustering shows as frequencies \
             climbing to 1 in d = 1; coexistence shows as saturation below 1 in d = 3. Finite tori \
             always absorb eventually, so saturation under horizon doubling is the proxy for transience.",
            "kernel (nearest neighbour), field (constant), lambda, kind (IndependentRW), cells, criteria, replicates (2000), seed",
        ),
        ExperimentName::LumpCheck => (
            "Lumpability of the interacting walk onto particle-count configurations (Dynkin criterion, \
             max discrepancy < 1e-12) and the closed form of the generator difference between the dual walks.",
            "kernel, torus, field, lambda",
        ),
        ExperimentName::Forward => (
            "Mean fixation time of the forward process from binomial initial counts, checked against \
             the exact finite chain when it is small enough to enumerate.",
            "kernel, torus, field, lambda, theta (0.5), horizon (1e6), replicates (10000), seed",
        ),
    };
    Ok(format!(
        "{e}\n\n{what}\n\nconfig fields (defaults): {fields}\n\noutput: CSV with `# key: value` provenance lines \
         (config_sha256, seed, config) followed by\n{}\n",
        crate::experiments::CSV_HEADER
    ))
}
