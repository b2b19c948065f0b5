//! Forward Moran dynamics with seed-banks in the count representation.
//!
//! At site `i`, `X_i` of the `N_i` active and `Y_i` of the `M_i` dormant
//! individuals carry the tracked type. Active individuals resample from a
//! colony chosen by the migration kernel (the wrapped self-rate included) and
//! swap places with dormant individuals at rate `lambda`.

mod exact;
mod tree;

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution as _, Exp1};
use serde::Serialize;

use crate::colony::ColonyField;
use crate::dual::replicate_rng;

pub use exact::{ForwardChain, FORWARD_STATE_CAP};
use tree::SumTree;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ForwardState {
    pub active: Vec<u32>,
    pub dormant: Vec<u32>,
}

impl ForwardState {
    pub fn zeros(field: &ColonyField) -> Self {
        ForwardState {
            active: vec![0; field.sites()],
            dormant: vec![0; field.sites()],
        }
    }

    pub fn full(field: &ColonyField) -> Self {
        ForwardState {
            active: field.active_sizes().to_vec(),
            dormant: field.dormant_sizes().to_vec(),
        }
    }

    /// Type swap: `X_i -> N_i - X_i`, `Y_i -> M_i - Y_i`.
    pub fn relabelled(&self, field: &ColonyField) -> Self {
        ForwardState {
            active: self
                .active
                .iter()
                .zip(field.active_sizes())
                .map(|(x, n)| n - x)
                .collect(),
            dormant: self
                .dormant
                .iter()
                .zip(field.dormant_sizes())
                .map(|(y, m)| m - y)
                .collect(),
        }
    }

    pub fn is_valid(&self, field: &ColonyField) -> bool {
        self.active.len() == field.sites()
            && self.dormant.len() == field.sites()
            && (0..field.sites()).all(|i| {
                self.active[i] <= field.active_size(i) && self.dormant[i] <= field.dormant_size(i)
            })
    }

    /// Independent `Binomial(N_i, theta)` and `Binomial(M_i, theta)` counts.
    pub fn binomial<R: Rng>(field: &ColonyField, theta: f64, rng: &mut R) -> Self {
        let draw = |size: u32, rng: &mut R| -> u32 {
            Binomial::new(size as u64, theta)
                .expect("theta in [0, 1]")
                .sample(rng) as u32
        };
        let active = field.active_sizes().iter().map(|&n| draw(n, rng)).collect();
        let dormant = field.dormant_sizes().iter().map(|&m| draw(m, rng)).collect();
        ForwardState { active, dormant }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ForwardEvent {
    Gain,
    Loss,
    Sleep,
    Wake,
}

impl ForwardEvent {
    const ALL: [ForwardEvent; 4] = [
        ForwardEvent::Gain,
        ForwardEvent::Loss,
        ForwardEvent::Sleep,
        ForwardEvent::Wake,
    ];

    fn delta(self) -> (i32, i32) {
        match self {
            ForwardEvent::Gain => (1, 0),
            ForwardEvent::Loss => (-1, 0),
            ForwardEvent::Sleep => (-1, 1),
            ForwardEvent::Wake => (1, -1),
        }
    }
}

/// Rates of the four events at site `i`, in the order of [`ForwardEvent::ALL`].
pub fn site_rates(state: &ForwardState, field: &ColonyField, lambda: f64, i: usize) -> [f64; 4] {
    let g = field.geometry();
    let freq = |j: usize| state.active[j] as f64 / field.active_size(j) as f64;
    let other = |j: usize| (field.active_size(j) - state.active[j]) as f64 / field.active_size(j) as f64;
    let mut pull = g.self_rate() * freq(i);
    let mut push = g.self_rate() * other(i);
    for &(j, a) in g.neighbours(i) {
        pull += a * freq(j);
        push += a * other(j);
    }
    let n = field.active_size(i) as f64;
    let m = field.dormant_size(i) as f64;
    let x = state.active[i] as f64;
    let y = state.dormant[i] as f64;
    [
        (n - x) * pull,
        x * push,
        lambda * x * (m - y) / m,
        lambda * (n - x) * y / m,
    ]
}

/// Outgoing transitions, grouped by site, zero rates omitted.
pub fn forward_rates(
    state: &ForwardState,
    field: &ColonyField,
    lambda: f64,
) -> Vec<(ForwardState, f64)> {
    let mut out = Vec::new();
    for i in 0..field.sites() {
        let r = site_rates(state, field, lambda, i);
        for (e, rate) in ForwardEvent::ALL.iter().zip(r) {
            if rate > 0.0 {
                out.push((apply(state, i, *e), rate));
            }
        }
    }
    out
}

fn apply(state: &ForwardState, i: usize, e: ForwardEvent) -> ForwardState {
    let mut s = state.clone();
    let (dx, dy) = e.delta();
    s.active[i] = (s.active[i] as i32 + dx) as u32;
    s.dormant[i] = (s.dormant[i] as i32 + dy) as u32;
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForwardInit {
    State(ForwardState),
    Density(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FixedType {
    /// Every individual carries the tracked type.
    Tracked,
    /// No individual carries the tracked type.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub time: f64,
    pub density: f64,
    pub heterozygosity: f64,
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardTrace {
    pub rows: Vec<TraceRow>,
    pub fixation: Option<(f64, FixedType)>,
    pub events: u64,
}

impl ForwardTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,density,heterozygosity,fixed")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.time, r.density, r.heterozygosity, r.fixed as u8)?;
        }
        Ok(())
    }
}

struct Summary {
    tracked: u64,
    total: u64,
    discordant: f64,
    pairs: f64,
}

impl Summary {
    fn new(state: &ForwardState, field: &ColonyField) -> Self {
        let mut s = Summary {
            tracked: 0,
            total: 0,
            discordant: 0.0,
            pairs: 0.0,
        };
        for i in 0..field.sites() {
            let (n, m) = (field.active_size(i) as u64, field.dormant_size(i) as u64);
            s.tracked += (state.active[i] + state.dormant[i]) as u64;
            s.total += n + m;
            s.discordant += Self::disc(state.active[i], n as u32);
            s.pairs += (n * (n - 1)) as f64;
        }
        s
    }

    fn disc(x: u32, n: u32) -> f64 {
        (x as f64) * (n - x) as f64
    }

    fn row(&self, time: f64) -> TraceRow {
        TraceRow {
            time,
            density: self.tracked as f64 / self.total as f64,
            heterozygosity: self.discordant / self.pairs,
            fixed: self.fixed().is_some(),
        }
    }

    fn fixed(&self) -> Option<FixedType> {
        if self.tracked == 0 {
            Some(FixedType::Other)
        } else if self.tracked == self.total {
            Some(FixedType::Tracked)
        } else {
            None
        }
    }
}

/// Gillespie simulation of the forward process with per-site rate caching:
/// an event at `i` only changes the rates at `i` and at sites that resample from `i`.
pub fn simulate_forward(
    init: &ForwardInit,
    field: &ColonyField,
    lambda: f64,
    horizon: f64,
    checkpoints: &[f64],
    seed: u64,
    replicate: u64,
) -> ForwardTrace {
    let mut rng = replicate_rng(seed, replicate);
    let mut state = match init {
        ForwardInit::State(s) => s.clone(),
        ForwardInit::Density(theta) => ForwardState::binomial(field, *theta, &mut rng),
    };
    assert!(state.is_valid(field), "initial state does not fit the field");
    let sites = field.sites();
    let mut cache: Vec<[f64; 4]> = (0..sites).map(|i| site_rates(&state, field, lambda, i)).collect();
    let mut tree = SumTree::new(&cache.iter().map(|r| r.iter().sum()).collect::<Vec<f64>>());
    let mut summary = Summary::new(&state, field);
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0;
    let mut t = 0.0;
    let mut events = 0u64;
    let mut fixation = summary.fixed().map(|f| (0.0, f));
    while fixation.is_none() {
        let total = tree.total();
        let next = t + rng.sample::<f64, _>(Exp1) / total;
        while next_cp < checkpoints.len() && checkpoints[next_cp] < next.min(horizon) {
            rows.push(summary.row(checkpoints[next_cp]));
            next_cp += 1;
        }
        if next > horizon {
            break;
        }
        t = next;
        let (i, mut u) = tree.find(rng.random::<f64>() * total);
        let mut event = ForwardEvent::Wake;
        for (e, r) in ForwardEvent::ALL.iter().zip(cache[i]) {
            if u < r {
                event = *e;
                break;
            }
            u -= r;
        }
        if cache[i][event as usize] <= 0.0 {
            // rounding pushed the draw past the last positive rate of this site
            event = ForwardEvent::ALL[cache[i].iter().rposition(|r| *r > 0.0).expect("site has positive rate")];
        }
        let n = field.active_size(i);
        let old_x = state.active[i];
        let (dx, dy) = event.delta();
        state.active[i] = (state.active[i] as i32 + dx) as u32;
        state.dormant[i] = (state.dormant[i] as i32 + dy) as u32;
        summary.tracked = (summary.tracked as i64 + (dx + dy) as i64) as u64;
        summary.discordant += Summary::disc(state.active[i], n) - Summary::disc(old_x, n);
        events += 1;
        cache[i] = site_rates(&state, field, lambda, i);
        tree.set(i, cache[i].iter().sum());
        if dx != 0 {
            for &(k, _) in field.geometry().incoming(i) {
                cache[k] = site_rates(&state, field, lambda, k);
                tree.set(k, cache[k].iter().sum());
            }
        }
        fixation = summary.fixed().map(|f| (t, f));
    }
    while next_cp < checkpoints.len() && checkpoints[next_cp] <= horizon {
        rows.push(summary.row(checkpoints[next_cp]));
        next_cp += 1;
    }
    ForwardTrace {
        rows,
        fixation,
        events,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, TorusGeometry};

    fn single() -> ColonyField {
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), 1).unwrap();
        ColonyField::constant(g, 2, 2).unwrap()
    }

    #[test]
    fn single_colony_rates() {
        let f = single();
        let s = ForwardState {
            active: vec![1],
            dormant: vec![0],
        };
        let r = site_rates(&s, &f, 1.0, 0);
        assert_eq!(r, [0.5, 0.5, 1.0, 0.0]);
    }

    #[test]
    fn monotype_states_are_absorbing() {
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(2, 0.5), 3).unwrap();
        let f = ColonyField::iid_uniform(g, 6, 5, 2).unwrap();
        assert!(forward_rates(&ForwardState::zeros(&f), &f, 1.0).is_empty());
        assert!(forward_rates(&ForwardState::full(&f), &f, 1.0).is_empty());
    }

    #[test]
    fn trivial_densities_fix_immediately() {
        let f = single();
        for (theta, ty) in [(0.0, FixedType::Other), (1.0, FixedType::Tracked)] {
            let tr = simulate_forward(&ForwardInit::Density(theta), &f, 1.0, 10.0, &[0.0, 5.0], 1, 0);
            assert_eq!(tr.fixation, Some((0.0, ty)));
            assert!(tr.rows.iter().all(|r| r.heterozygosity == 0.0 && r.fixed));
        }
    }

    #[test]
    fn incremental_cache_matches_full_recompute() {
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(2, 0.5), 4).unwrap();
        let f = ColonyField::iid_uniform(g, 5, 4, 9).unwrap();
        let tr = simulate_forward(&ForwardInit::Density(0.5), &f, 1.0, 3.0, &[1.0, 2.0, 3.0], 4, 0);
        assert_eq!(tr.rows.len(), 3);
        for r in &tr.rows {
            assert!((0.0..=1.0).contains(&r.density));
            assert!((0.0..=0.5 + 1e-12).contains(&r.heterozygosity));
        }
        let again = simulate_forward(&ForwardInit::Density(0.5), &f, 1.0, 3.0, &[1.0, 2.0, 3.0], 4, 0);
        assert_eq!(tr, again);
    }
}
