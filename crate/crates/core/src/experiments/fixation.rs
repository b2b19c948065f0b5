use serde::Serialize;

use super::{check_replicates, run_replicates, EstimateRecord, ExperimentError, Moments, CONFIDENCE_SE};
use crate::colony::ColonyField;
use crate::forward::{simulate_forward, ForwardChain, ForwardInit};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixationReport {
    /// Mean fixation time over replicates that fixed before the horizon.
    pub mean: EstimateRecord,
    /// Exact expectation when the field is small enough to enumerate.
    pub exact: Option<f64>,
    pub passed: Option<bool>,
}

impl FixationReport {
    pub fn records(&self) -> Vec<EstimateRecord> {
        let mut out = vec![self.mean.clone()];
        if let Some(e) = self.exact {
            let mut r = EstimateRecord::new("forward", "exact mean fixation time", e, 0.0);
            r.passed = self.passed;
            out.push(r);
        }
        out
    }
}

/// Mean fixation time of the forward process from independent binomial
/// counts of density `theta`, checked against the exact chain when it fits.
pub fn fixation_experiment(
    field: &ColonyField,
    lambda: f64,
    theta: f64,
    horizon: f64,
    n_reps: u64,
    seed: u64,
) -> Result<FixationReport, ExperimentError> {
    check_replicates(n_reps)?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(ExperimentError::InvalidParameter(format!("density {theta} outside [0, 1]")));
    }
    let init = ForwardInit::Density(theta);
    let times: Vec<Option<f64>> = run_replicates(n_reps, || (), |r, _| {
        simulate_forward(&init, field, lambda, horizon, &[], seed, r)
            .fixation
            .map(|f| f.0)
    });
    let fixed: Vec<f64> = times.iter().flatten().copied().collect();
    let censored = 1.0 - fixed.len() as f64 / n_reps as f64;
    let m = Moments::of(&fixed);
    let exact = ForwardChain::new(field, lambda).map(|c| c.expected_fixation_time(theta));
    let passed = exact.map(|e| censored == 0.0 && (m.mean - e).abs() <= CONFIDENCE_SE * m.std_error());
    Ok(FixationReport {
        mean: EstimateRecord::new("forward", "mean fixation time", m.mean, m.std_error())
            .at(horizon)
            .replicates(n_reps, censored),
        exact,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, TorusGeometry};

    #[test]
    fn single_colony_matches_chain() {
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), 1).unwrap();
        let f = ColonyField::constant(g, 2, 2).unwrap();
        let r = fixation_experiment(&f, 1.0, 0.5, 1e6, 2000, 4).unwrap();
        assert_eq!(r.passed, Some(true), "{r:?}");
        assert_eq!(r.mean.censored_fraction, 0.0);
    }
}
