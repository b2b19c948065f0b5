//! Exact computations on the finite state space of a torus.

mod solve;
mod verify;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::colony::ColonyField;
use crate::dual::{all_states, lump, lumped_rates, DualKind, DualModel, DualState, LumpedConfig};

pub use solve::{
    absorption_cdf, absorption_solve, finite_time_dist, hitting_cdf, jump_chain_absorption,
    AbsorptionSolution, SolverMethod,
};
pub use verify::{
    lyapunov_drift, verify_generator_difference, verify_lumping, DifferenceReport, LumpingReport,
};

/// Default cap on the number of states a generator may have.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("state space has {states} states, above the cap of {cap}")]
    StateSpaceTooLarge { states: usize, cap: usize },
    #[error("state {state} cannot reach the absorbing state")]
    NotAbsorbing { state: String },
    #[error("linear solve failed: {0}")]
    SolverFailed(String),
    #[error("no state {0} in this generator")]
    UnknownState(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GeneratorKind {
    Dual(DualKind),
    Lumped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Labels {
    Dual { sites: usize },
    Lumped(Vec<LumpedConfig>),
}

/// Sparse rate matrix of an absorbing chain. Rows hold the off-diagonal
/// rates sorted by column; the diagonal is minus the row sum and the
/// absorbing state is last.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    kind: GeneratorKind,
    labels: Labels,
    rows: Vec<Vec<(usize, f64)>>,
}

impl GeneratorMatrix {
    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn absorbing(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, k: usize) -> &[(usize, f64)] {
        &self.rows[k]
    }

    pub fn exit_rate(&self, k: usize) -> f64 {
        self.rows[k].iter().map(|e| e.1).sum()
    }

    /// `Q(x, y)` including the diagonal.
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return -self.exit_rate(x);
        }
        self.rows[x]
            .binary_search_by_key(&y, |e| e.0)
            .map(|k| self.rows[x][k].1)
            .unwrap_or(0.0)
    }

    pub fn label(&self, k: usize) -> String {
        match &self.labels {
            Labels::Dual { sites } => DualState::from_index(k, *sites).to_string(),
            Labels::Lumped(v) => v[k].to_string(),
        }
    }

    /// Number of torus sites for coordinate generators.
    pub fn dual_sites(&self) -> Option<usize> {
        match self.labels {
            Labels::Dual { sites } => Some(sites),
            Labels::Lumped(_) => None,
        }
    }

    /// Index of a coordinate state; `None` for lumped generators.
    pub fn dual_index(&self, state: &DualState) -> Option<usize> {
        match self.labels {
            Labels::Dual { sites } => Some(state.index(sites)),
            Labels::Lumped(_) => None,
        }
    }

    pub fn lumped_index(&self, config: &LumpedConfig) -> Option<usize> {
        match &self.labels {
            Labels::Lumped(v) => v.binary_search(config).ok(),
            Labels::Dual { .. } => None,
        }
    }

    /// `(Q g)(x) = sum_y Q(x, y) (g(y) - g(x))`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(x, row)| row.iter().map(|&(y, r)| r * (g[y] - g[x])).sum())
            .collect()
    }

    /// Same chain with every state in `set` made absorbing.
    pub fn stopped(&self, set: &[bool]) -> GeneratorMatrix {
        let mut g = self.clone();
        for (row, stop) in g.rows.iter_mut().zip(set) {
            if *stop {
                row.clear();
            }
        }
        g
    }

    /// Writes `row col rate` triples, diagonal included, after a `#` legend of state encodings.
    pub fn write_coordinate_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# kind {:?}, {} states", self.kind, self.len())?;
        for k in 0..self.len() {
            writeln!(w, "# {k} {}", self.label(k))?;
        }
        for (x, row) in self.rows.iter().enumerate() {
            let diag = -self.exit_rate(x);
            let mut wrote_diag = false;
            for &(y, r) in row {
                if !wrote_diag && y > x {
                    writeln!(w, "{x} {x} {diag:e}")?;
                    wrote_diag = true;
                }
                writeln!(w, "{x} {y} {r:e}")?;
            }
            if !wrote_diag {
                writeln!(w, "{x} {x} {diag:e}")?;
            }
        }
        Ok(())
    }
}

/// Generator of a coordinate dual or of the configuration dual over the whole torus.
pub fn build_generator(
    kind: GeneratorKind,
    field: &ColonyField,
    lambda: f64,
    cap: usize,
) -> Result<GeneratorMatrix, OracleError> {
    let sites = field.sites();
    let states = DualState::count(sites);
    if states > cap {
        return Err(OracleError::StateSpaceTooLarge { states, cap });
    }
    match kind {
        GeneratorKind::Dual(k) => {
            let model = DualModel::new(k, field, lambda);
            let rows = (0..states)
                .into_par_iter()
                .map(|x| {
                    model
                        .transitions(&DualState::from_index(x, sites))
                        .into_iter()
                        .map(|t| (t.target.index(sites), t.rate))
                        .collect()
                })
                .collect();
            Ok(GeneratorMatrix {
                kind,
                labels: Labels::Dual { sites },
                rows,
            })
        }
        GeneratorKind::Lumped => {
            let mut configs: Vec<LumpedConfig> = all_states(sites).map(|s| lump(&s)).collect();
            configs.sort();
            configs.dedup();
            let rows = configs
                .par_iter()
                .map(|c| match c {
                    LumpedConfig::Absorbed => Vec::new(),
                    _ => lumped_rates(c, field, lambda)
                        .expect("occupied configuration")
                        .into_iter()
                        .map(|(t, r)| (configs.binary_search(&t).expect("closed state space"), r))
                        .collect(),
                })
                .collect();
            Ok(GeneratorMatrix {
                kind,
                labels: Labels::Lumped(configs),
                rows,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, TorusGeometry};

    pub(crate) fn field(side: usize, n: Vec<u32>, m: Vec<u32>) -> ColonyField {
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), side).unwrap();
        ColonyField::new(g, n, m).unwrap()
    }

    #[test]
    fn single_site_has_five_states() {
        let f = field(1, vec![2], vec![2]);
        for kind in DualKind::ALL {
            let g = build_generator(GeneratorKind::Dual(kind), &f, 1.0, DEFAULT_STATE_CAP).unwrap();
            assert_eq!(g.len(), 5);
            assert!(g.row(g.absorbing()).is_empty());
            for x in 0..g.len() {
                let s: f64 = (0..g.len()).map(|y| g.entry(x, y)).sum();
                assert!(s.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rows_match_rate_lists() {
        let f = field(3, vec![2, 3, 5], vec![4, 2, 3]);
        let g = build_generator(
            GeneratorKind::Dual(DualKind::InteractingRW1),
            &f,
            0.8,
            DEFAULT_STATE_CAP,
        )
        .unwrap();
        for x in (0..g.len() - 1).step_by(5) {
            let s = DualState::from_index(x, 3);
            let list = crate::dual::rates(DualKind::InteractingRW1, &s, &f, 0.8).unwrap();
            let row: Vec<(DualState, f64)> = g
                .row(x)
                .iter()
                .map(|&(y, r)| (DualState::from_index(y, 3), r))
                .collect();
            assert_eq!(row, list);
        }
    }

    #[test]
    fn cap_and_export() {
        let f = field(2, vec![2, 3], vec![2, 4]);
        assert_eq!(
            build_generator(GeneratorKind::Lumped, &f, 1.0, 10),
            Err(OracleError::StateSpaceTooLarge { states: 17, cap: 10 })
        );
        let g = build_generator(GeneratorKind::Lumped, &f, 1.0, DEFAULT_STATE_CAP).unwrap();
        // 2 sites: 4 two-site configurations, 3 on each site, absorbed
        assert_eq!(g.len(), 11);
        let mut out = Vec::new();
        g.write_coordinate_list(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("# 10 ABS"));
    }
}
