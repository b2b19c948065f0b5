use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::colony::{ColonyField, FieldConfig};
use crate::dual::{DualKind, DualState};
use crate::experiments::ScanCell;
use crate::kernel::{validate_kernel, KernelConfig, KernelSpec, TorusGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    Validate,
    Ordering,
    Series,
    LowerBound,
    Activity,
    Meeting,
    Dichotomy,
    LumpCheck,
    Forward,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 9] = [
        ExperimentName::Validate,
        ExperimentName::Ordering,
        ExperimentName::Series,
        ExperimentName::LowerBound,
        ExperimentName::Activity,
        ExperimentName::Meeting,
        ExperimentName::Dichotomy,
        ExperimentName::LumpCheck,
        ExperimentName::Forward,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Validate => "validate",
            ExperimentName::Ordering => "ordering",
            ExperimentName::Series => "series",
            ExperimentName::LowerBound => "lower-bound",
            ExperimentName::Activity => "activity",
            ExperimentName::Meeting => "meeting",
            ExperimentName::Dichotomy => "dichotomy",
            ExperimentName::LumpCheck => "lump-check",
            ExperimentName::Forward => "forward",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        ExperimentName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| CliError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusConfig {
    pub dim: usize,
    pub side: usize,
}

/// Either an explicit list of times or `points` evenly spaced times from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, points: usize },
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        match self {
            TimeGrid::List(v) => v.clone(),
            TimeGrid::Range { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                p => (0..*p)
                    .map(|k| start + (stop - start) * k as f64 / (p - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanCriteria {
    pub one_dim_threshold: f64,
    pub cap: f64,
    pub max_change: f64,
}

impl Default for ScanCriteria {
    fn default() -> Self {
        ScanCriteria {
            one_dim_threshold: 0.95,
            cap: 0.9,
            max_change: 0.05,
        }
    }
}

fn default_lambda() -> f64 {
    1.0
}

/// One experiment run. Fields an experiment does not use are ignored by it;
/// fields it needs but that are absent take the defaults listed by `describe`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    /// Nearest-neighbour kernel with `c = 1/2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    pub torus: TorusConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldConfig>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Initial dual state as `"i,a;j,b"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<DualKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_sites: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<ScanCell>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<ScanCriteria>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::invalid("Malformed", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid("Unreadable", format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Canonical one-line JSON without the output path, which does not affect results.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        serde_json::to_string(&c).expect("config serialises")
    }

    /// Builds and validates every sub-configuration.
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        let spec = match &self.kernel {
            Some(k) => k.build().map_err(CliError::from_kernel)?,
            None => KernelSpec::nearest_neighbour(self.torus.dim, 0.5),
        };
        validate_kernel(&spec).map_err(CliError::from_kernel)?;
        if spec.dim() != self.torus.dim {
            return Err(CliError::invalid(
                "DimensionMismatch",
                format!("kernel dimension {} but torus dimension {}", spec.dim(), self.torus.dim),
            ));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(CliError::invalid("BadLambda", format!("lambda must be positive, got {}", self.lambda)));
        }
        let geometry = TorusGeometry::new(&spec, self.torus.side).map_err(CliError::from_kernel)?;
        let field = self
            .field
            .clone()
            .unwrap_or(FieldConfig::Constant { n: 2, m: 2 })
            .build(geometry)
            .map_err(|e| CliError::invalid(variant_name(&e), e.to_string()))?;
        let init = match &self.init {
            Some(s) => {
                let st = DualState::parse(s).map_err(|e| CliError::invalid("BadInit", e.to_string()))?;
                st.check(field.sites())
                    .map_err(|e| CliError::invalid("BadInit", e.to_string()))?;
                Some(st)
            }
            None => None,
        };
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::invalid("BadHorizon", format!("horizon must be positive, got {h}")));
            }
        }
        let times = self.t_grid.as_ref().map(TimeGrid::times);
        if let Some(t) = &times {
            if t.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(CliError::invalid("BadTimeGrid", "times must be finite and nonnegative".into()));
            }
        }
        if let Some(site) = self.site {
            if site >= field.sites() {
                return Err(CliError::invalid("BadSite", format!("site {site} outside {} sites", field.sites())));
            }
        }
        Ok(Prepared {
            spec,
            field,
            init,
            times,
        })
    }
}

/// Validated objects built from an [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: KernelSpec,
    pub field: ColonyField,
    pub init: Option<DualState>,
    pub times: Option<Vec<f64>>,
}

/// Name of an enum variant from its `Debug` form.
pub(crate) fn variant_name<T: fmt::Debug>(v: &T) -> String {
    let s = format!("{v:?}");
    s.split(|c: char| !c.is_alphanumeric() && c != '_')
        .next()
        .unwrap_or_default()
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in ExperimentName::ALL {
            assert_eq!(e.as_str().parse::<ExperimentName>().unwrap(), e);
            let json = serde_json::to_string(&e).unwrap();
            assert_eq!(json, format!("\"{e}\""));
        }
        assert!(matches!("nope".parse::<ExperimentName>(), Err(CliError::UnknownExperiment(_))));
    }

    #[test]
    fn grids() {
        let g: TimeGrid = serde_json::from_str(r#"{"start": 0, "stop": 10, "points": 3}"#).unwrap();
        assert_eq!(g.times(), vec![0.0, 5.0, 10.0]);
        let g: TimeGrid = serde_json::from_str("[1, 2.5]").unwrap();
        assert_eq!(g.times(), vec![1.0, 2.5]);
    }

    #[test]
    fn bad_self_rate_is_rejected() {
        let text = r#"{"experiment": "lump-check", "torus": {"dim": 1, "side": 2},
            "kernel": {"d": 1, "entries": [{"offset": [0], "rate": 0.4}, {"offset": [1], "rate": 0.25}, {"offset": [-1], "rate": 0.25}]}}"#;
        let c = ExperimentConfig::from_json_str(text).unwrap();
        match c.prepare() {
            Err(CliError::ConfigInvalid { cause, .. }) => assert_eq!(cause, "BadSelfRate"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"experiment": "series", "torus": {"dim": 1, "side": 2}, "replicate": 5}"#;
        assert!(ExperimentConfig::from_json_str(text).is_err());
    }
}
