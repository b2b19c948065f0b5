use serde::Serialize;

use super::{
    binomial_se, check_replicates, run_replicates, EstimateRecord, ExperimentError, Moments,
    CONFIDENCE_SE,
};
use crate::colony::ColonyField;
use crate::dual::{replicate_rng, simulate_with_rng, Censorable, DualKind, DualModel, DualState, SimOptions};
use crate::kernel::{n_step_kernels, KernelSpec};

fn check_grid(t_grid: &[f64]) -> Result<f64, ExperimentError> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(ExperimentError::InvalidParameter(
            "time grid must be a nonempty list of finite nonnegative times".into(),
        ));
    }
    Ok(t_grid.iter().copied().fold(0.0, f64::max))
}

fn check_init(init: &DualState, field: &ColonyField) -> Result<(), ExperimentError> {
    init.check(field.sites())?;
    Ok(())
}

/// Absorption times of `n` replicates on streams `base + r`.
fn absorption_times(
    kind: DualKind,
    init: DualState,
    field: &ColonyField,
    lambda: f64,
    horizon: f64,
    n: u64,
    seed: u64,
    base: u64,
) -> Vec<Censorable> {
    let model = DualModel::new(kind, field, lambda);
    let opts = SimOptions::new(horizon);
    run_replicates(n, Vec::new, |r, buf| {
        let mut rng = replicate_rng(seed, base + r);
        simulate_with_rng(&model, init, &opts, &mut rng, buf).absorption
    })
}

fn censored_fraction(times: &[Censorable]) -> f64 {
    times.iter().filter(|t| t.time().is_none()).count() as f64 / times.len() as f64
}

/// Empirical `P(tau <= t)` on `t_grid` with binomial standard errors.
pub fn mc_absorption_cdf(
    kind: DualKind,
    init: DualState,
    field: &ColonyField,
    lambda: f64,
    t_grid: &[f64],
    n_reps: u64,
    seed: u64,
) -> Result<Vec<EstimateRecord>, ExperimentError> {
    check_replicates(n_reps)?;
    check_init(&init, field)?;
    let horizon = check_grid(t_grid)?;
    let times = absorption_times(kind, init, field, lambda, horizon, n_reps, seed, 0);
    let censored = censored_fraction(&times);
    Ok(t_grid
        .iter()
        .map(|&t| {
            let p = times.iter().filter(|x| x.by(t)).count() as f64 / n_reps as f64;
            EstimateRecord::new("absorption_cdf", format!("{kind:?}"), p, binomial_se(p, n_reps))
                .at(t)
                .replicates(n_reps, censored)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedRow {
    pub time: f64,
    pub interacting: f64,
    pub auxiliary: f64,
    pub difference: f64,
    pub paired_se: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedOrdering {
    pub rows: Vec<PairedRow>,
    pub replicates: u64,
    pub passed: bool,
}

impl PairedOrdering {
    pub fn records(&self) -> Vec<EstimateRecord> {
        let n = self.replicates;
        self.rows
            .iter()
            .flat_map(|r| {
                [
                    EstimateRecord::new("ordering", "InteractingRW1", r.interacting, binomial_se(r.interacting, n)),
                    EstimateRecord::new("ordering", "AuxiliaryRW2", r.auxiliary, binomial_se(r.auxiliary, n)),
                    EstimateRecord::new("ordering", "difference", r.difference, r.paired_se).passed(r.passed),
                ]
                .map(|e| e.at(r.time).replicates(n, 0.0))
            })
            .collect()
    }
}

/// Paired comparison of `P(tau <= t)` for the interacting walk and the
/// auxiliary walk: replicate `r` of both kinds uses the same random stream.
/// A grid point passes when the difference is at least `-3` paired standard errors.
pub fn paired_ordering(
    init: DualState,
    field: &ColonyField,
    lambda: f64,
    t_grid: &[f64],
    n_reps: u64,
    seed: u64,
) -> Result<PairedOrdering, ExperimentError> {
    check_replicates(n_reps)?;
    check_init(&init, field)?;
    let horizon = check_grid(t_grid)?;
    let a = absorption_times(DualKind::InteractingRW1, init, field, lambda, horizon, n_reps, seed, 0);
    let b = absorption_times(DualKind::AuxiliaryRW2, init, field, lambda, horizon, n_reps, seed, 0);
    let rows: Vec<PairedRow> = t_grid
        .iter()
        .map(|&t| {
            let diffs: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(x, y)| x.by(t) as u8 as f64 - y.by(t) as u8 as f64)
                .collect();
            let m = Moments::of(&diffs);
            let count = |v: &[Censorable]| v.iter().filter(|x| x.by(t)).count() as f64 / n_reps as f64;
            PairedRow {
                time: t,
                interacting: count(&a),
                auxiliary: count(&b),
                difference: m.mean,
                paired_se: m.std_error(),
                passed: m.mean >= -CONFIDENCE_SE * m.std_error(),
            }
        })
        .collect();
    let passed = rows.iter().all(|r| r.passed);
    Ok(PairedOrdering {
        rows,
        replicates: n_reps,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    /// `sum_i w_i R_i` over completed visits.
    pub series: EstimateRecord,
    /// Frequency of absorption by the horizon.
    pub direct: EstimateRecord,
    pub difference: f64,
    pub paired_se: f64,
    pub passed: bool,
}

/// Series estimator of the absorption probability against the direct frequency.
///
/// Visits still open at the horizon are not counted, which makes the series
/// an unbiased estimate of the censored absorption probability, so the two
/// estimators target the same number at any horizon.
pub fn series_estimate(
    kind: DualKind,
    init: DualState,
    field: &ColonyField,
    lambda: f64,
    horizon: f64,
    n_reps: u64,
    seed: u64,
) -> Result<SeriesReport, ExperimentError> {
    if kind == DualKind::InteractingRW1 {
        return Err(ExperimentError::UnsupportedKind(kind));
    }
    check_replicates(n_reps)?;
    check_init(&init, field)?;
    check_grid(&[horizon])?;
    let model = DualModel::new(kind, field, lambda);
    let weights: Vec<f64> = (0..field.sites()).map(|i| model.first_jump_absorption(i)).collect();
    let opts = SimOptions::new(horizon);
    let pairs: Vec<(f64, f64, bool)> = run_replicates(n_reps, Vec::new, |r, buf| {
        let mut rng = replicate_rng(seed, r);
        let rec = simulate_with_rng(&model, init, &opts, &mut rng, buf);
        let series: f64 = rec
            .visits
            .iter()
            .map(|&(i, _)| weights[i] * rec.completed_visits(i) as f64)
            .sum();
        let absorbed = rec.absorption.time().is_some();
        (series, absorbed as u8 as f64, !absorbed)
    });
    let censored = pairs.iter().filter(|p| p.2).count() as f64 / n_reps as f64;
    let s = Moments::of(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let d = Moments::of(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let diff = Moments::of(&pairs.iter().map(|p| p.0 - p.1).collect::<Vec<_>>());
    let passed = diff.mean.abs() <= CONFIDENCE_SE * diff.std_error();
    let label = format!("{kind:?}");
    Ok(SeriesReport {
        series: EstimateRecord::new("series", format!("{label} series"), s.mean, s.std_error())
            .at(horizon)
            .replicates(n_reps, censored),
        direct: EstimateRecord::new("series", format!("{label} direct"), d.mean, d.std_error())
            .at(horizon)
            .replicates(n_reps, censored),
        difference: diff.mean,
        paired_se: diff.std_error(),
        passed,
    })
}

/// `min_{|l| <= R} (2(c+lambda)+1)^-1 sum_{n=1}^{n_max} m^{2n} a_n(0,l)^2`
/// with `m = c / (2(c+lambda)+1)` and lattice `n`-step kernels.
pub fn epsilon_r(spec: &KernelSpec, lambda: f64, radius: usize, n_max: usize) -> Result<f64, ExperimentError> {
    if n_max == 0 {
        return Err(ExperimentError::InvalidParameter("n_max must be at least 1".into()));
    }
    let c = spec.total_off_origin();
    let denom = 2.0 * (c + lambda) + 1.0;
    let m2 = (c / denom).powi(2);
    let window = (n_max * spec.support_radius()).max(radius);
    let kernels = n_step_kernels(spec, n_max, window)?;
    let r = radius as i64;
    let mut best = f64::INFINITY;
    for (l, _) in kernels[0].iter() {
        if l.iter().any(|x| x.abs() > r) {
            continue;
        }
        let mut weight = 1.0;
        let mut sum = 0.0;
        for a_n in &kernels[1..] {
            weight *= m2;
            sum += weight * a_n.get(&l).powi(2);
        }
        best = best.min(sum / denom);
    }
    Ok(best)
}

/// Probability that a dormant particle sharing a site with an active one
/// wakes up before anything else happens: `lambda K / (c + lambda + lambda K)`.
pub fn first_jump_factor(c: f64, lambda: f64, ratio: f64) -> f64 {
    lambda * ratio / (c + lambda + lambda * ratio)
}

/// `lambda / (lambda + (c + lambda) sup_i K_i^-1)`.
pub fn chain_factor(c: f64, lambda: f64, field: &ColonyField) -> f64 {
    let sup_inv = (0..field.sites())
        .map(|i| 1.0 / field.ratio(i))
        .fold(0.0, f64::max);
    lambda / (lambda + (c + lambda) * sup_inv)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundSetup {
    pub site: usize,
    pub radius: usize,
    pub n_max: usize,
    pub horizon: f64,
    pub replicates: u64,
    pub seed: u64,
    /// Sites whose co-located active start enters the infimum of the chained
    /// bound; empty means `site` alone.
    pub probe_sites: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub epsilon: f64,
    pub bound: f64,
    /// Censored estimate of the absorption probability from the co-located active start.
    pub diagonal: EstimateRecord,
    pub bound_holds: bool,
    pub first_jump_factor: f64,
    pub chain_factor: f64,
    /// Smallest co-located active estimate over the probe sites.
    pub probe_minimum: f64,
    /// Censored estimate from the active-dormant start at `site`.
    pub mixed: EstimateRecord,
    pub chained_bound: f64,
    pub chain_holds: bool,
}

impl LowerBoundReport {
    pub fn passed(&self) -> bool {
        self.bound_holds && self.chain_holds
    }

    pub fn records(&self) -> Vec<EstimateRecord> {
        vec![
            EstimateRecord::new("lower-bound", "epsilon", self.epsilon, 0.0),
            EstimateRecord::new("lower-bound", "bound", self.bound, 0.0),
            self.diagonal.clone().passed(self.bound_holds),
            EstimateRecord::new("lower-bound", "first_jump_factor", self.first_jump_factor, 0.0),
            EstimateRecord::new("lower-bound", "chain_factor", self.chain_factor, 0.0),
            EstimateRecord::new("lower-bound", "chained_bound", self.chained_bound, 0.0),
            self.mixed.clone().passed(self.chain_holds),
        ]
    }
}

/// Monte Carlo check of the lower bound on the absorption probability of the
/// auxiliary walk and of the chained bound for the active-dormant start.
///
/// Estimates are censored at the horizon and therefore biased low. A failed
/// comparison with some censoring is reported as `HorizonInsufficient`.
pub fn lower_bound_check(
    setup: &LowerBoundSetup,
    field: &ColonyField,
    spec: &KernelSpec,
    lambda: f64,
) -> Result<LowerBoundReport, ExperimentError> {
    check_replicates(setup.replicates)?;
    check_grid(&[setup.horizon])?;
    let sites = field.sites();
    let probes = if setup.probe_sites.is_empty() {
        vec![setup.site]
    } else {
        setup.probe_sites.clone()
    };
    if let Some(&bad) = probes.iter().chain([&setup.site]).find(|&&s| s >= sites) {
        return Err(ExperimentError::InvalidParameter(format!("site {bad} outside a torus of {sites} sites")));
    }
    let c = spec.total_off_origin();
    let epsilon = epsilon_r(spec, lambda, setup.radius, setup.n_max)?;
    let torus = field.geometry().torus();
    let bound = epsilon
        * torus
            .ball(setup.site, setup.radius)
            .iter()
            .map(|&j| 1.0 / field.active_size(j) as f64)
            .sum::<f64>();

    let n = setup.replicates;
    let estimate = |init: DualState, block: u64| {
        let times = absorption_times(DualKind::AuxiliaryRW2, init, field, lambda, setup.horizon, n, setup.seed, block << 40);
        let cens = censored_fraction(&times);
        let p = 1.0 - cens;
        (p, binomial_se(p, n), cens)
    };
    let mut diagonal = None;
    let mut probe_minimum = f64::INFINITY;
    for (k, &j) in probes.iter().enumerate() {
        let est = estimate(DualState::diagonal(j), k as u64);
        probe_minimum = probe_minimum.min(est.0);
        if j == setup.site {
            diagonal = Some(est);
        }
    }
    let diagonal = match diagonal {
        Some(d) => d,
        None => estimate(DualState::diagonal(setup.site), probes.len() as u64),
    };
    let mixed = estimate(DualState::pair(setup.site, true, setup.site, false), probes.len() as u64 + 1);

    let decide = |holds: bool, est: (f64, f64, f64), target: f64| {
        if !holds && est.2 > 0.0 {
            Err(ExperimentError::HorizonInsufficient {
                estimate: est.0,
                bound: target,
                censored_fraction: est.2,
            })
        } else {
            Ok(holds)
        }
    };
    let bound_holds = decide(diagonal.0 >= bound - CONFIDENCE_SE * diagonal.1, diagonal, bound)?;
    let factor = chain_factor(c, lambda, field);
    let chained_bound = factor * probe_minimum;
    let chain_holds = decide(mixed.0 + CONFIDENCE_SE * mixed.1 >= chained_bound, mixed, chained_bound)?;
    let record = |q: &str, e: (f64, f64, f64)| {
        EstimateRecord::new("lower-bound", q, e.0, e.1)
            .at(setup.horizon)
            .replicates(n, e.2)
    };
    Ok(LowerBoundReport {
        epsilon,
        bound,
        diagonal: record("absorption from co-located active pair", diagonal),
        bound_holds,
        first_jump_factor: first_jump_factor(c, lambda, field.ratio(setup.site)),
        chain_factor: factor,
        probe_minimum,
        mixed: record("absorption from active-dormant pair", mixed),
        chained_bound,
        chain_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::TorusGeometry;
    use crate::oracle::{build_generator, finite_time_dist, GeneratorKind, DEFAULT_STATE_CAP};

    fn field(side: usize, n: u32, m: u32) -> ColonyField {
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), side).unwrap();
        ColonyField::constant(g, n, m).unwrap()
    }

    #[test]
    fn cdf_at_zero_and_against_oracle() {
        let f = field(2, 2, 3);
        let init = DualState::pair(0, true, 1, false);
        let grid = [0.0, 1.0, 4.0];
        let recs = mc_absorption_cdf(DualKind::InteractingRW1, init, &f, 1.0, &grid, 4000, 11).unwrap();
        assert_eq!(recs[0].estimate, 0.0);
        let gen = build_generator(GeneratorKind::Dual(DualKind::InteractingRW1), &f, 1.0, DEFAULT_STATE_CAP).unwrap();
        for r in &recs[1..] {
            let exact = finite_time_dist(&gen, init.index(2), r.time.unwrap())[gen.absorbing()];
            assert!((r.estimate - exact).abs() <= 3.0 * r.std_error + 1e-12, "{r:?} vs {exact}");
        }
        assert!(matches!(
            mc_absorption_cdf(DualKind::InteractingRW1, init, &f, 1.0, &grid, 99, 1),
            Err(ExperimentError::TooFewReplicates { .. })
        ));
    }

    #[test]
    fn series_single_site_is_one() {
        let f = field(1, 2, 2);
        for kind in [DualKind::AuxiliaryRW2, DualKind::IndependentRW] {
            let r = series_estimate(kind, DualState::diagonal(0), &f, 1.0, 1e4, 2000, 5).unwrap();
            assert_eq!(r.direct.estimate, 1.0);
            assert!((r.series.estimate - 1.0).abs() <= 3.0 * r.series.std_error, "{r:?}");
        }
        assert!(series_estimate(DualKind::InteractingRW1, DualState::diagonal(0), &f, 1.0, 1.0, 200, 5).is_err());
    }

    #[test]
    fn epsilon_monotone_in_truncation() {
        let spec = KernelSpec::nearest_neighbour(1, 0.5);
        let mut prev = 0.0;
        for n_max in 1..8 {
            let e = epsilon_r(&spec, 1.0, 1, n_max).unwrap();
            assert!(e >= prev);
            prev = e;
        }
        // n_max = 1 leaves the origin unreachable
        assert_eq!(epsilon_r(&spec, 1.0, 1, 1).unwrap(), 0.0);
        assert!(epsilon_r(&spec, 1.0, 0, 2).unwrap() > 0.0);
    }

    #[test]
    fn factors() {
        assert!((first_jump_factor(0.5, 1.0, 1.0) - 0.4).abs() < 1e-15);
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), 2).unwrap();
        let f = ColonyField::checkerboard(g, (2, 8), (8, 2)).unwrap();
        assert!((chain_factor(0.5, 1.0, &f) - 1.0 / 7.0).abs() < 1e-15);
    }
}
