use std::collections::BTreeMap;

use serde::Serialize;

use super::{build_generator, GeneratorKind, OracleError, DEFAULT_STATE_CAP};
use crate::colony::ColonyField;
use crate::dual::{all_states, lump, lumped_rates, DualKind, DualModel, DualState, LumpedConfig};

const IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LumpingReport {
    /// Largest gap between the pushed-forward coordinate rates and the configuration rates.
    pub max_discrepancy: f64,
    /// Largest gap between the pushed-forward rows of a state and of its swapped twin.
    pub swap_discrepancy: f64,
    pub states_checked: usize,
    pub passed: bool,
}

fn pushforward(model: &DualModel, state: &DualState) -> BTreeMap<LumpedConfig, f64> {
    let own = lump(state);
    let mut out = BTreeMap::new();
    for t in model.transitions(state) {
        let z = lump(&t.target);
        if z != own {
            *out.entry(z).or_insert(0.0) += t.rate;
        }
    }
    out
}

fn gap(a: &BTreeMap<LumpedConfig, f64>, b: &BTreeMap<LumpedConfig, f64>) -> f64 {
    a.keys()
        .chain(b.keys())
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .fold(0.0, f64::max)
}

/// Dynkin lumpability check of the interacting walk onto the configuration dual.
pub fn verify_lumping(field: &ColonyField, lambda: f64) -> LumpingReport {
    let model = DualModel::new(DualKind::InteractingRW1, field, lambda);
    let mut max_discrepancy: f64 = 0.0;
    let mut swap_discrepancy: f64 = 0.0;
    let mut checked = 0;
    for s in all_states(field.sites()) {
        let pushed = pushforward(&model, &s);
        let lumped: BTreeMap<LumpedConfig, f64> = match lump(&s) {
            LumpedConfig::Absorbed => BTreeMap::new(),
            z => lumped_rates(&z, field, lambda)
                .expect("occupied")
                .into_iter()
                .collect(),
        };
        max_discrepancy = max_discrepancy.max(gap(&pushed, &lumped));
        swap_discrepancy = swap_discrepancy.max(gap(&pushed, &pushforward(&model, &s.swapped())));
        checked += 1;
    }
    LumpingReport {
        max_discrepancy,
        swap_discrepancy,
        states_checked: checked,
        passed: max_discrepancy < IDENTITY_TOLERANCE && swap_discrepancy < IDENTITY_TOLERANCE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceReport {
    /// Largest gap between the matrix value of `(Q - Q^) g` and its closed form.
    pub interacting_error: f64,
    /// Smallest value of `(Q - Q^) g` over all states.
    pub interacting_min: f64,
    /// Largest gap between `(Q^ - Q*) g` and the flip-correction closed form.
    pub flip_error: f64,
    pub passed: bool,
}

/// Checks `(Q - Q^) g` and `(Q^ - Q*) g` against their closed forms, where
/// `g` is indexed by coordinate state. `(Q - Q^) g >= 0` is asserted only
/// when `g` is largest at the absorbed state.
pub fn verify_generator_difference(
    field: &ColonyField,
    lambda: f64,
    g: &[f64],
) -> Result<DifferenceReport, OracleError> {
    let sites = field.sites();
    let build = |k| build_generator(GeneratorKind::Dual(k), field, lambda, DEFAULT_STATE_CAP);
    let q = build(DualKind::InteractingRW1)?;
    let q_hat = build(DualKind::AuxiliaryRW2)?;
    let q_star = build(DualKind::IndependentRW)?;
    let (qg, hg, sg) = (q.apply(g), q_hat.apply(g), q_star.apply(g));
    let geo = field.geometry();
    let abs = g[DualState::Absorbed.index(sites)];
    let at = |s: DualState| g[s.index(sites)];

    let mut interacting_error: f64 = 0.0;
    let mut interacting_min = f64::INFINITY;
    let mut flip_error: f64 = 0.0;
    for s in all_states(sites) {
        let x = s.index(sites);
        let (closed, flip) = match s {
            DualState::Absorbed => (0.0, 0.0),
            DualState::Pair(p, r) => {
                let (i, j) = (p.site, r.site);
                let closed = if p.active && r.active && i != j {
                    let aij = geo.rate(i, j) / field.active_size(j) as f64;
                    let aji = geo.rate(j, i) / field.active_size(i) as f64;
                    -aij * at(DualState::diagonal(j)) - aji * at(DualState::diagonal(i))
                        + (aij + aji) * abs
                } else {
                    0.0
                };
                let flip = if i == j && p.active != r.active {
                    let one = DualState::pair(i, !p.active, j, r.active);
                    let two = DualState::pair(i, p.active, j, !r.active);
                    -(lambda / field.dormant_size(i) as f64) * (at(one) + at(two) - 2.0 * g[x])
                } else {
                    0.0
                };
                (closed, flip)
            }
        };
        let diff = qg[x] - hg[x];
        interacting_error = interacting_error.max((diff - closed).abs());
        interacting_min = interacting_min.min(diff);
        flip_error = flip_error.max((hg[x] - sg[x] - flip).abs());
    }
    let max_at_abs = g.iter().all(|v| *v <= abs);
    Ok(DifferenceReport {
        interacting_error,
        interacting_min,
        flip_error,
        passed: interacting_error < IDENTITY_TOLERANCE
            && flip_error < IDENTITY_TOLERANCE
            && (!max_at_abs || interacting_min >= -IDENTITY_TOLERANCE),
    })
}

/// Largest value of `Q V - 2 V - 2 mu1` over all states for `V = |i| + |j|`
/// (torus sup-norm, zero when absorbed); nonpositive when the drift bound holds.
pub fn lyapunov_drift(kind: DualKind, field: &ColonyField, lambda: f64, mu1: f64) -> f64 {
    let torus = *field.geometry().torus();
    let v = |s: &DualState| match s {
        DualState::Pair(p, q) => (torus.norm(p.site) + torus.norm(q.site)) as f64,
        DualState::Absorbed => 0.0,
    };
    let model = DualModel::new(kind, field, lambda);
    all_states(field.sites())
        .map(|s| {
            let vs = v(&s);
            let qv: f64 = model
                .transitions(&s)
                .iter()
                .map(|t| t.rate * (v(&t.target) - vs))
                .sum();
            qv - 2.0 * vs - 2.0 * mu1
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::super::tests::field;
    use super::*;

    #[test]
    fn lumping_holds_on_small_tori() {
        for (side, n, m) in [(1, vec![3], vec![2]), (2, vec![2, 5], vec![3, 2]), (3, vec![2, 3, 4], vec![4, 3, 2])] {
            let r = verify_lumping(&field(side, n, m), 0.9);
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn indicator_of_absorbed() {
        let f = field(2, vec![2, 3], vec![2, 4]);
        let mut g = vec![0.0; DualState::count(2)];
        *g.last_mut().unwrap() = 1.0;
        let r = verify_generator_difference(&f, 1.0, &g).unwrap();
        assert!(r.passed, "{r:?}");
        let c = vec![0.3; DualState::count(2)];
        let r = verify_generator_difference(&f, 1.0, &c).unwrap();
        assert_eq!(r.interacting_min, 0.0);
    }

    #[test]
    fn drift_bound() {
        let f = field(5, vec![2, 3, 4, 5, 6], vec![2; 5]);
        for kind in DualKind::ALL {
            assert!(lyapunov_drift(kind, &f, 1.0, 0.5) <= 0.0);
        }
    }
}
