//! Two-particle dual processes on a torus.
//!
//! A state is either a pair of particles `[(i, alpha), (j, beta)]` (site and
//! activity, `true` = active) or the absorbing state. Three rate tables share
//! this state space: the interacting walk with off-diagonal coalescence and
//! repulsive landing, the auxiliary walk that only coalesces on the diagonal,
//! and the independent walk that also drops the on-site flip corrections.

mod lumped;
mod simulate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colony::ColonyField;

pub use lumped::{lump, lumped_rates, LumpedConfig, SiteCount};
pub use simulate::{
    replicate_rng, simulate, simulate_with_rng, write_trajectory_csv, Censorable, SimOptions,
    TrajectoryRecord, TrajectoryRow,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualError {
    #[error("no transitions out of the absorbing state")]
    InvalidState,
    #[error("site {site} is not on a torus with {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },
    #[error("cannot parse state '{0}'")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Particle {
    pub site: usize,
    pub active: bool,
}

impl Particle {
    pub fn new(site: usize, active: bool) -> Self {
        Particle { site, active }
    }
}

/// Point of `(G x G) u {absorbed}`. The derived order is lexicographic in
/// `(site_1, act_1, site_2, act_2)` with the absorbed state last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DualState {
    Pair(Particle, Particle),
    Absorbed,
}

impl DualState {
    pub fn pair(site_1: usize, act_1: bool, site_2: usize, act_2: bool) -> Self {
        DualState::Pair(Particle::new(site_1, act_1), Particle::new(site_2, act_2))
    }

    /// Both particles active on the same site.
    pub fn diagonal(site: usize) -> Self {
        Self::pair(site, true, site, true)
    }

    pub fn is_absorbed(&self) -> bool {
        matches!(self, DualState::Absorbed)
    }

    /// The same pair with the particle labels exchanged.
    pub fn swapped(&self) -> Self {
        match *self {
            DualState::Pair(p, q) => DualState::Pair(q, p),
            DualState::Absorbed => DualState::Absorbed,
        }
    }

    /// Site of a co-located active pair, if this is one.
    pub fn diagonal_site(&self) -> Option<usize> {
        match self {
            DualState::Pair(p, q) if p.active && q.active && p.site == q.site => Some(p.site),
            _ => None,
        }
    }

    /// Member of the hitting set: a co-located active pair or the absorbed state.
    pub fn in_hitting_set(&self) -> bool {
        self.is_absorbed() || self.diagonal_site().is_some()
    }

    /// Position in the enumeration `(site_1, act_1, site_2, act_2)`, absorbed last.
    pub fn index(&self, sites: usize) -> usize {
        match self {
            DualState::Pair(p, q) => {
                (p.site * 2 + p.active as usize) * 2 * sites + q.site * 2 + q.active as usize
            }
            DualState::Absorbed => 4 * sites * sites,
        }
    }

    pub fn from_index(index: usize, sites: usize) -> Self {
        let g = 2 * sites;
        if index >= g * g {
            return DualState::Absorbed;
        }
        let (a, b) = (index / g, index % g);
        Self::pair(a / 2, a % 2 == 1, b / 2, b % 2 == 1)
    }

    pub fn count(sites: usize) -> usize {
        4 * sites * sites + 1
    }

    pub fn parse(text: &str) -> Result<Self, DualError> {
        let t = text.trim();
        if t == "ABS" {
            return Ok(DualState::Absorbed);
        }
        let err = || DualError::Parse(text.to_string());
        let mut parts = Vec::new();
        for half in t.split(';') {
            let (s, a) = half.split_once(',').ok_or_else(err)?;
            let site: usize = s.trim().parse().map_err(|_| err())?;
            let active = match a.trim() {
                "1" => true,
                "0" => false,
                _ => return Err(err()),
            };
            parts.push(Particle::new(site, active));
        }
        match parts[..] {
            [p, q] => Ok(DualState::Pair(p, q)),
            _ => Err(err()),
        }
    }

    pub(crate) fn check(&self, sites: usize) -> Result<(), DualError> {
        if let DualState::Pair(p, q) = self {
            for site in [p.site, q.site] {
                if site >= sites {
                    return Err(DualError::SiteOutOfRange { site, sites });
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for DualState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DualState::Pair(p, q) => write!(
                f,
                "{},{};{},{}",
                p.site, p.active as u8, q.site, q.active as u8
            ),
            DualState::Absorbed => f.write_str("ABS"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DualKind {
    InteractingRW1,
    AuxiliaryRW2,
    IndependentRW,
}

impl DualKind {
    pub const ALL: [DualKind; 3] = [
        DualKind::InteractingRW1,
        DualKind::AuxiliaryRW2,
        DualKind::IndependentRW,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Event {
    Absorb,
    Flip(u8),
    Migrate(u8),
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Absorb => f.write_str("absorb"),
            Event::Flip(p) => write!(f, "flip{p}"),
            Event::Migrate(p) => write!(f, "migrate{p}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub target: DualState,
    pub rate: f64,
    pub event: Event,
}

/// Rate table of one dual kind over a colony field.
#[derive(Debug, Clone, Copy)]
pub struct DualModel<'a> {
    pub kind: DualKind,
    pub field: &'a ColonyField,
    pub lambda: f64,
}

impl<'a> DualModel<'a> {
    pub fn new(kind: DualKind, field: &'a ColonyField, lambda: f64) -> Self {
        DualModel {
            kind,
            field,
            lambda,
        }
    }

    fn flip_rate(&self, me: Particle, other: Particle) -> f64 {
        let f = self.field;
        let base = if me.active {
            self.lambda
        } else {
            self.lambda * f.ratio(me.site)
        };
        if self.kind != DualKind::IndependentRW && me.site == other.site && me.active != other.active {
            base - self.lambda / f.dormant_size(me.site) as f64
        } else {
            base
        }
    }

    fn absorption_rate(&self, p: Particle, q: Particle) -> f64 {
        if !(p.active && q.active) {
            return 0.0;
        }
        let f = self.field;
        let g = f.geometry();
        if p.site == q.site {
            2.0 * g.self_rate() / f.active_size(p.site) as f64
        } else if self.kind == DualKind::InteractingRW1 {
            g.rate(p.site, q.site) / f.active_size(q.site) as f64
                + g.rate(q.site, p.site) / f.active_size(p.site) as f64
        } else {
            0.0
        }
    }

    /// Outgoing transitions of `state`, sorted by target, zero rates omitted.
    /// `out` is cleared first.
    pub fn transitions_into(&self, state: &DualState, out: &mut Vec<Transition>) {
        out.clear();
        let DualState::Pair(p, q) = *state else {
            return;
        };
        let f = self.field;
        let g = f.geometry();
        let interacting = self.kind == DualKind::InteractingRW1;
        let mut push = |target, rate: f64, event| {
            if rate > 0.0 {
                out.push(Transition {
                    target,
                    rate,
                    event,
                });
            }
        };
        push(
            DualState::Pair(Particle::new(p.site, !p.active), q),
            self.flip_rate(p, q),
            Event::Flip(1),
        );
        push(
            DualState::Pair(p, Particle::new(q.site, !q.active)),
            self.flip_rate(q, p),
            Event::Flip(2),
        );
        if p.active {
            for &(k, a) in g.neighbours(p.site) {
                let mut rate = a;
                if interacting && q.active && k == q.site {
                    rate -= a / f.active_size(q.site) as f64;
                }
                push(DualState::Pair(Particle::new(k, true), q), rate, Event::Migrate(1));
            }
        }
        if q.active {
            for &(k, a) in g.neighbours(q.site) {
                let mut rate = a;
                if interacting && p.active && k == p.site {
                    rate -= a / f.active_size(p.site) as f64;
                }
                push(DualState::Pair(p, Particle::new(k, true)), rate, Event::Migrate(2));
            }
        }
        push(DualState::Absorbed, self.absorption_rate(p, q), Event::Absorb);
        out.sort_unstable_by_key(|t| t.target);
    }

    pub fn transitions(&self, state: &DualState) -> Vec<Transition> {
        let mut out = Vec::new();
        self.transitions_into(state, &mut out);
        out
    }

    pub fn exit_rate(&self, state: &DualState) -> f64 {
        self.transitions(state).iter().map(|t| t.rate).sum()
    }

    /// Probability that the jump chain leaves the co-located active pair at
    /// `site` straight into the absorbed state.
    pub fn first_jump_absorption(&self, site: usize) -> f64 {
        let s = DualState::diagonal(site);
        let ts = self.transitions(&s);
        let total: f64 = ts.iter().map(|t| t.rate).sum();
        ts.iter()
            .filter(|t| t.target.is_absorbed())
            .map(|t| t.rate)
            .sum::<f64>()
            / total
    }
}

/// Complete outgoing rate list of `state` under `kind`, sorted by target.
pub fn rates(
    kind: DualKind,
    state: &DualState,
    field: &ColonyField,
    lambda: f64,
) -> Result<Vec<(DualState, f64)>, DualError> {
    if state.is_absorbed() {
        return Err(DualError::InvalidState);
    }
    state.check(field.sites())?;
    Ok(DualModel::new(kind, field, lambda)
        .transitions(state)
        .into_iter()
        .map(|t| (t.target, t.rate))
        .collect())
}

/// Every state of the torus in enumeration order, absorbed last.
pub fn all_states(sites: usize) -> impl Iterator<Item = DualState> {
    (0..DualState::count(sites)).map(move |k| DualState::from_index(k, sites))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, TorusGeometry};

    fn field(side: usize, n: Vec<u32>, m: Vec<u32>) -> ColonyField {
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), side).unwrap();
        ColonyField::new(g, n, m).unwrap()
    }

    fn rate_to(list: &[(DualState, f64)], target: DualState) -> f64 {
        list.iter().find(|e| e.0 == target).map(|e| e.1).unwrap_or(0.0)
    }

    #[test]
    fn diagonal_active_rates() {
        let f = field(5, vec![2; 5], vec![2; 5]);
        let s = DualState::diagonal(2);
        let r = rates(DualKind::AuxiliaryRW2, &s, &f, 1.0).unwrap();
        assert_eq!(rate_to(&r, DualState::Absorbed), 0.5);
        assert_eq!(rate_to(&r, DualState::pair(2, false, 2, true)), 1.0);
        assert_eq!(rate_to(&r, DualState::pair(2, true, 2, false)), 1.0);
        let mig1: f64 = r
            .iter()
            .filter(|(t, _)| matches!(t, DualState::Pair(p, _) if p.site != 2))
            .map(|e| e.1)
            .sum();
        assert_eq!(mig1, 0.5);
    }

    #[test]
    fn opposite_states_on_one_site() {
        let f = field(3, vec![2; 3], vec![2; 3]);
        let s = DualState::pair(1, true, 1, false);
        let r = rates(DualKind::AuxiliaryRW2, &s, &f, 1.0).unwrap();
        assert_eq!(rate_to(&r, DualState::pair(1, false, 1, false)), 0.5);
        assert_eq!(rate_to(&r, DualState::pair(1, true, 1, true)), 0.5);
        assert_eq!(rate_to(&r, DualState::Absorbed), 0.0);
        let star = rates(DualKind::IndependentRW, &s, &f, 1.0).unwrap();
        assert_eq!(rate_to(&star, DualState::pair(1, false, 1, false)), 1.0);
        assert_eq!(rate_to(&star, DualState::pair(1, true, 1, true)), 1.0);
        let rest = |l: &[(DualState, f64)]| -> Vec<(DualState, f64)> {
            l.iter().filter(|e| e.0.diagonal_site().is_none() && !matches!(e.0, DualState::Pair(p, q) if p.site == 1 && q.site == 1)).copied().collect()
        };
        assert_eq!(rest(&r), rest(&star));
    }

    #[test]
    fn off_diagonal_coalescence_only_for_interacting() {
        let f = field(4, vec![2, 3, 4, 5], vec![2; 4]);
        let s = DualState::pair(0, true, 1, true);
        let xi = rates(DualKind::InteractingRW1, &s, &f, 1.0).unwrap();
        assert!((rate_to(&xi, DualState::Absorbed) - (0.25 / 3.0 + 0.25 / 2.0)).abs() < 1e-15);
        for k in [DualKind::AuxiliaryRW2, DualKind::IndependentRW] {
            assert_eq!(rate_to(&rates(k, &s, &f, 1.0).unwrap(), DualState::Absorbed), 0.0);
        }
        // landing on the other active particle is thinned by 1/N of the target colony
        assert!((rate_to(&xi, DualState::pair(1, true, 1, true)) - 0.25 * (1.0 - 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn rates_are_positive_sorted_and_never_loop() {
        let f = field(3, vec![2, 3, 4], vec![3, 2, 5]);
        for kind in DualKind::ALL {
            for s in all_states(3).filter(|s| !s.is_absorbed()) {
                let r = rates(kind, &s, &f, 0.7).unwrap();
                assert!(r.iter().all(|e| e.1 > 0.0 && e.0 != s));
                assert!(r.windows(2).all(|w| w[0].0 < w[1].0));
            }
        }
        assert_eq!(
            rates(DualKind::IndependentRW, &DualState::Absorbed, &f, 1.0),
            Err(DualError::InvalidState)
        );
    }

    #[test]
    fn index_round_trip_and_encoding() {
        for k in 0..DualState::count(4) {
            let s = DualState::from_index(k, 4);
            assert_eq!(s.index(4), k);
            assert_eq!(DualState::parse(&s.to_string()).unwrap(), s);
        }
        let order: Vec<DualState> = all_states(3).collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(DualState::pair(3, true, 0, false).to_string(), "3,1;0,0");
        assert!(DualState::parse("1,2;0,0").is_err());
    }

    #[test]
    fn single_site_weight() {
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), 1).unwrap();
        let f = ColonyField::constant(g, 2, 2).unwrap();
        let m = DualModel::new(DualKind::IndependentRW, &f, 1.0);
        // all migration wraps onto the site: self-rate 1, no migration
        assert!((m.first_jump_absorption(0) - 1.0 / 3.0).abs() < 1e-15);
    }
}
