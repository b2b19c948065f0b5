use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::{DualKind, DualModel, DualState, Event, Transition};
use crate::colony::ColonyField;

/// Generator for replicate `replicate` of a run seeded with `seed`. Each
/// replicate owns a separate ChaCha stream, so results do not depend on
/// which worker ran it.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// A time that is either observed or censored at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Censorable {
    At(f64),
    Censored(f64),
}

impl Censorable {
    pub fn time(&self) -> Option<f64> {
        match self {
            Censorable::At(t) => Some(*t),
            Censorable::Censored(_) => None,
        }
    }

    /// Observed no later than `t`.
    pub fn by(&self, t: f64) -> bool {
        matches!(self, Censorable::At(x) if *x <= t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub horizon: f64,
    /// Times at which the accumulated active time of each particle is recorded.
    pub checkpoints: Vec<f64>,
    pub log: bool,
}

impl SimOptions {
    pub fn new(horizon: f64) -> Self {
        SimOptions {
            horizon,
            checkpoints: Vec::new(),
            log: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub event: Option<Event>,
    pub state: DualState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub absorption: Censorable,
    /// First entrance into the co-located active pairs or the absorbed state.
    pub hit_time: Censorable,
    /// Jump-chain visits to `[(i,1),(i,1)]` by site, the initial state included.
    pub visits: Vec<(usize, u64)>,
    /// Site of the co-located active pair occupied at the horizon, whose exit was not observed.
    pub open_visit: Option<usize>,
    /// Active time `[S_1(t), S_2(t)]` at each checkpoint, frozen at absorption.
    pub activity: Vec<[f64; 2]>,
    pub jumps: u64,
    pub first_target: Option<DualState>,
    pub final_state: DualState,
    pub log: Vec<TrajectoryRow>,
}

impl TrajectoryRecord {
    /// Visits to the co-located active pair at `site` whose exit jump happened before the horizon.
    pub fn completed_visits(&self, site: usize) -> u64 {
        let all = self
            .visits
            .binary_search_by_key(&site, |e| e.0)
            .map(|k| self.visits[k].1)
            .unwrap_or(0);
        all - u64::from(self.open_visit == Some(site))
    }
}

/// One trajectory with a generator derived from `seed`.
pub fn simulate(
    kind: DualKind,
    init: DualState,
    field: &ColonyField,
    lambda: f64,
    opts: &SimOptions,
    seed: u64,
) -> TrajectoryRecord {
    let mut rng = replicate_rng(seed, 0);
    let mut buf = Vec::new();
    simulate_with_rng(&DualModel::new(kind, field, lambda), init, opts, &mut rng, &mut buf)
}

fn record_visit(visits: &mut Vec<(usize, u64)>, site: usize) {
    match visits.binary_search_by_key(&site, |e| e.0) {
        Ok(k) => visits[k].1 += 1,
        Err(k) => visits.insert(k, (site, 1)),
    }
}

struct ActivityClock<'a> {
    checkpoints: &'a [f64],
    next: usize,
    acc: [f64; 2],
    out: Vec<[f64; 2]>,
}

impl ActivityClock<'_> {
    fn advance(&mut self, from: f64, to: f64, flags: [bool; 2]) {
        let f = [flags[0] as u8 as f64, flags[1] as u8 as f64];
        while self.next < self.checkpoints.len() && self.checkpoints[self.next] <= to {
            let dt = (self.checkpoints[self.next] - from).max(0.0);
            self.out.push([self.acc[0] + dt * f[0], self.acc[1] + dt * f[1]]);
            self.next += 1;
        }
        self.acc[0] += (to - from) * f[0];
        self.acc[1] += (to - from) * f[1];
    }

    fn finish(mut self) -> Vec<[f64; 2]> {
        while self.out.len() < self.checkpoints.len() {
            self.out.push(self.acc);
        }
        self.out
    }
}

/// Gillespie simulation up to absorption or the horizon. `buf` is scratch
/// space reused across calls.
pub fn simulate_with_rng<R: Rng>(
    model: &DualModel,
    init: DualState,
    opts: &SimOptions,
    rng: &mut R,
    buf: &mut Vec<Transition>,
) -> TrajectoryRecord {
    let horizon = opts.horizon;
    let mut state = init;
    let mut t = 0.0;
    let mut jumps = 0u64;
    let mut visits = Vec::new();
    let mut hit = init.in_hitting_set().then_some(0.0);
    let mut absorption = Censorable::Censored(horizon);
    let mut open_visit = None;
    let mut first_target = None;
    let mut log = Vec::new();
    let mut clock = ActivityClock {
        checkpoints: &opts.checkpoints,
        next: 0,
        acc: [0.0; 2],
        out: Vec::with_capacity(opts.checkpoints.len()),
    };
    if opts.log {
        log.push(TrajectoryRow {
            time: 0.0,
            event: None,
            state,
        });
    }
    if state.is_absorbed() {
        absorption = Censorable::At(0.0);
    }
    while let DualState::Pair(p, q) = state {
        let diag = state.diagonal_site();
        if let Some(site) = diag {
            record_visit(&mut visits, site);
        }
        model.transitions_into(&state, buf);
        let total: f64 = buf.iter().map(|x| x.rate).sum();
        let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
        let next = t + hold;
        if next > horizon {
            clock.advance(t, horizon, [p.active, q.active]);
            open_visit = diag;
            break;
        }
        clock.advance(t, next, [p.active, q.active]);
        let mut u = rng.random::<f64>() * total;
        let mut chosen = buf[buf.len() - 1];
        for x in buf.iter() {
            if u < x.rate {
                chosen = *x;
                break;
            }
            u -= x.rate;
        }
        t = next;
        state = chosen.target;
        jumps += 1;
        first_target.get_or_insert(state);
        if opts.log {
            log.push(TrajectoryRow {
                time: t,
                event: Some(chosen.event),
                state,
            });
        }
        if hit.is_none() && state.in_hitting_set() {
            hit = Some(t);
        }
        if state.is_absorbed() {
            absorption = Censorable::At(t);
        }
    }
    TrajectoryRecord {
        absorption,
        hit_time: hit.map_or(Censorable::Censored(horizon), Censorable::At),
        visits,
        open_visit,
        activity: clock.finish(),
        jumps,
        first_target,
        final_state: state,
        log,
    }
}

/// Writes the jump log as `time,event,state`.
pub fn write_trajectory_csv<W: Write>(record: &TrajectoryRecord, mut w: W) -> std::io::Result<()> {
    writeln!(w, "time,event,state")?;
    for row in &record.log {
        let event = row.event.map_or("start".to_string(), |e| e.to_string());
        writeln!(w, "{},{},\"{}\"", row.time, event, row.state)?;
    }
    Ok(())
}
