use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::{check_replicates, quantile, run_replicates, EstimateRecord, ExperimentError, Moments};
use crate::colony::ColonyField;
use crate::dual::replicate_rng;
use crate::kernel::{poisson_weights, symmetrize, time_kernel, KernelSpec, TimeKernelMethod, POISSON_TAIL_TOLERANCE};

/// Largest gap tolerated between the two evaluations of one meeting sample.
pub const MEETING_TOLERANCE: f64 = 1e-8;

fn check_times(times: &[f64]) -> Result<(), ExperimentError> {
    let increasing = times.windows(2).all(|w| w[0] < w[1]);
    if times.is_empty() || !increasing || times[0] <= 0.0 || !times.iter().all(|t| t.is_finite()) {
        return Err(ExperimentError::InvalidParameter(
            "checkpoints must be finite, positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Active time of one particle that flips, and migrates while active, on
/// the torus; recorded at each checkpoint. Starts active at `site`.
fn activity_path<R: Rng>(field: &ColonyField, lambda: f64, site: usize, checkpoints: &[f64], rng: &mut R) -> Vec<f64> {
    let g = field.geometry();
    let c = g.c();
    let mut out = Vec::with_capacity(checkpoints.len());
    let (mut t, mut acc, mut here, mut active) = (0.0, 0.0, site, true);
    for &cp in checkpoints {
        loop {
            let rate = if active { lambda + c } else { lambda * field.ratio(here) };
            let next = t + rng.sample::<f64, _>(Exp1) / rate;
            if next > cp {
                if active {
                    acc += cp - t;
                }
                t = cp;
                // memorylessness: the pending holding time is redrawn from `cp`
                break;
            }
            if active {
                acc += next - t;
            }
            t = next;
            let mut u = rng.random::<f64>() * rate;
            if u < lambda || !active {
                active = !active;
                continue;
            }
            u -= lambda;
            let ns = g.neighbours(here);
            here = ns
                .iter()
                .find(|&&(_, a)| {
                    let hit = u < a;
                    u -= a;
                    hit
                })
                .unwrap_or(&ns[ns.len() - 1])
                .0;
        }
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityCheckpoint {
    pub time: f64,
    /// Mean of `S(t) / t`.
    pub mean: f64,
    pub std_error: f64,
    pub p05: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityReport {
    pub checkpoints: Vec<ActivityCheckpoint>,
    /// `1 / (1 + sup_i K_i^-1) - 0.02`.
    pub bound: f64,
    pub replicates: u64,
    pub passed: bool,
}

impl ActivityReport {
    pub fn records(&self) -> Vec<EstimateRecord> {
        let last = self.checkpoints.len() - 1;
        let mut out = Vec::new();
        for (k, c) in self.checkpoints.iter().enumerate() {
            out.push(
                EstimateRecord::new("activity", "mean active fraction", c.mean, c.std_error)
                    .at(c.time)
                    .replicates(self.replicates, 0.0),
            );
            let p = EstimateRecord::new("activity", "5th percentile", c.p05, 0.0)
                .at(c.time)
                .replicates(self.replicates, 0.0);
            out.push(if k == last { p.passed(self.passed) } else { p });
        }
        out.push(EstimateRecord::new("activity", "bound", self.bound, 0.0));
        out
    }
}

/// Distribution of the fraction of time a single particle spends active.
pub fn activity_fraction(
    field: &ColonyField,
    lambda: f64,
    checkpoints: &[f64],
    start_site: usize,
    n_reps: u64,
    seed: u64,
) -> Result<ActivityReport, ExperimentError> {
    check_replicates(n_reps)?;
    check_times(checkpoints)?;
    if start_site >= field.sites() {
        return Err(ExperimentError::InvalidParameter(format!("start site {start_site} outside the torus")));
    }
    let paths = run_replicates(n_reps, || (), |r, _| {
        activity_path(field, lambda, start_site, checkpoints, &mut replicate_rng(seed, r))
    });
    let sup_inv = (0..field.sites()).map(|i| 1.0 / field.ratio(i)).fold(0.0, f64::max);
    let bound = 1.0 / (1.0 + sup_inv) - 0.02;
    let summary: Vec<ActivityCheckpoint> = checkpoints
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let fr: Vec<f64> = paths.iter().map(|p| p[k] / t).collect();
            let m = Moments::of(&fr);
            ActivityCheckpoint {
                time: t,
                mean: m.mean,
                std_error: m.std_error(),
                p05: quantile(&fr, 0.05),
            }
        })
        .collect();
    let passed = summary.last().expect("nonempty").p05 >= bound;
    Ok(ActivityReport {
        checkpoints: summary,
        bound,
        replicates: n_reps,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeetingSample {
    pub s: f64,
    pub s_prime: f64,
    /// `min(S, S')`.
    pub shared: f64,
    /// `|S - S'|`.
    pub lag: f64,
    /// `sum_i a_S(0,i) a_S'(0,i)`.
    pub direct: f64,
    /// `sum_i a^_{2 min}(0,i) a_lag(i,0)`.
    pub bridged: f64,
}

impl MeetingSample {
    pub fn gap(&self) -> f64 {
        (self.direct - self.bridged).abs()
    }
}

/// Smallest box that loses no mass beyond the Poisson tail for times up to `t`.
fn exact_window(spec: &KernelSpec, t: f64) -> usize {
    let terms = poisson_weights(spec.total_off_origin() * t, POISSON_TAIL_TOLERANCE).len();
    terms * spec.support_radius().max(1)
}

/// Both evaluations of the meeting probability for fixed active times.
/// `window` fixes the box radius; `None` picks one large enough to be exact.
pub fn meeting_sample(
    spec: &KernelSpec,
    s: f64,
    s_prime: f64,
    window: Option<usize>,
) -> Result<MeetingSample, ExperimentError> {
    if !(s >= 0.0 && s_prime >= 0.0 && s.is_finite() && s_prime.is_finite()) {
        return Err(ExperimentError::InvalidParameter("active times must be finite and nonnegative".into()));
    }
    let shared = s.min(s_prime);
    let lag = (s - s_prime).abs();
    let radius = window.unwrap_or_else(|| exact_window(spec, s.max(s_prime).max(2.0 * shared)));
    let kernel = |sp: &KernelSpec, t: f64| time_kernel(sp, t, TimeKernelMethod::Uniformization, radius);
    let direct = kernel(spec, s)?.overlap(&kernel(spec, s_prime)?);
    let bridged = kernel(&symmetrize(spec), 2.0 * shared)?.overlap(&kernel(spec, lag)?.reflect());
    Ok(MeetingSample {
        s,
        s_prime,
        shared,
        lag,
        direct,
        bridged,
    })
}

/// Active time of a particle that only flips, recorded at each time.
fn flip_path<R: Rng>(lambda: f64, ratio: f64, times: &[f64], rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut acc, mut active) = (0.0, 0.0, true);
    for &cp in times {
        loop {
            let rate = if active { lambda } else { lambda * ratio };
            let next = t + rng.sample::<f64, _>(Exp1) / rate;
            if next > cp {
                if active {
                    acc += cp - t;
                }
                t = cp;
                break;
            }
            if active {
                acc += next - t;
            }
            t = next;
            active = !active;
        }
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeetingReport {
    /// `(t, mean f(t), standard error)` at each grid time.
    pub meeting: Vec<(f64, f64, f64)>,
    /// Trapezoid integral of the mean meeting probability from 0 to the last grid time.
    pub integral: f64,
    pub max_gap: f64,
    pub samples: Vec<MeetingSample>,
    pub replicates: u64,
    pub passed: bool,
}

impl MeetingReport {
    pub fn records(&self) -> Vec<EstimateRecord> {
        let mut out: Vec<EstimateRecord> = self
            .meeting
            .iter()
            .map(|&(t, f, se)| {
                EstimateRecord::new("meeting", "meeting probability", f, se)
                    .at(t)
                    .replicates(self.replicates, 0.0)
            })
            .collect();
        let end = self.meeting.last().map(|m| m.0);
        let mut integral = EstimateRecord::new("meeting", "truncated integral", self.integral, 0.0);
        integral.time = end;
        out.push(integral);
        out.push(EstimateRecord::new("meeting", "max identity gap", self.max_gap, 0.0).passed(self.passed));
        out
    }
}

/// Meeting probability of two independent particles whose activity flips
/// with constant ratio `ratio = N/M`, evaluated both directly and through
/// the bridge identity for each sampled pair of active times.
pub fn meeting_probe(
    spec: &KernelSpec,
    ratio: f64,
    lambda: f64,
    times: &[f64],
    n_reps: u64,
    window: Option<usize>,
    seed: u64,
) -> Result<MeetingReport, ExperimentError> {
    check_replicates(n_reps)?;
    check_times(times)?;
    let per_rep: Vec<Result<Vec<MeetingSample>, ExperimentError>> = run_replicates(n_reps, || (), |r, _| {
        let mut rng = replicate_rng(seed, r);
        let a = flip_path(lambda, ratio, times, &mut rng);
        let b = flip_path(lambda, ratio, times, &mut rng);
        a.iter()
            .zip(&b)
            .map(|(&s, &sp)| meeting_sample(spec, s, sp, window))
            .collect()
    });
    let per_rep: Vec<Vec<MeetingSample>> = per_rep.into_iter().collect::<Result<_, _>>()?;
    let mut meeting = Vec::with_capacity(times.len());
    let (mut integral, mut prev) = (0.0, (0.0, 1.0));
    for (k, &t) in times.iter().enumerate() {
        let m = Moments::of(&per_rep.iter().map(|v| v[k].direct).collect::<Vec<_>>());
        integral += 0.5 * (t - prev.0) * (m.mean + prev.1);
        prev = (t, m.mean);
        meeting.push((t, m.mean, m.std_error()));
    }
    let samples: Vec<MeetingSample> = per_rep.into_iter().flatten().collect();
    let max_gap = samples.iter().map(MeetingSample::gap).fold(0.0, f64::max);
    Ok(MeetingReport {
        meeting,
        integral,
        max_gap,
        samples,
        replicates: n_reps,
        passed: max_gap <= MEETING_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::TorusGeometry;

    #[test]
    fn short_run_is_all_active() {
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), 4).unwrap();
        let f = ColonyField::constant(g, 2, 2).unwrap();
        let r = activity_fraction(&f, 1.0, &[1e-9, 1.0], 0, 200, 3).unwrap();
        assert!((r.checkpoints[0].mean - 1.0).abs() < 1e-6);
        assert!((r.bound - 0.48).abs() < 1e-15);
    }

    #[test]
    fn equal_times_reduce_to_return_probability() {
        let spec = KernelSpec::nearest_neighbour(1, 0.5);
        let m = meeting_sample(&spec, 1.5, 1.5, None).unwrap();
        let back = time_kernel(&symmetrize(&spec), 3.0, TimeKernelMethod::Uniformization, 40).unwrap();
        assert!((m.direct - back.get(&[0])).abs() < 1e-12);
        assert!(m.gap() < 1e-12);
        assert_eq!(m.lag, 0.0);
    }

    #[test]
    fn skewed_kernel_identity() {
        let spec = KernelSpec::new(1, [(vec![0], 0.5), (vec![1], 0.375), (vec![-1], 0.125)]).unwrap();
        for (s, sp) in [(1.0, 2.0), (2.0, 1.0), (0.0, 3.5), (4.0, 0.3)] {
            let m = meeting_sample(&spec, s, sp, None).unwrap();
            assert!(m.gap() < 1e-12, "{m:?}");
        }
    }

    #[test]
    fn probe_runs() {
        let spec = KernelSpec::nearest_neighbour(2, 0.5);
        let r = meeting_probe(&spec, 1.0, 1.0, &[0.5, 1.0, 2.0], 100, None, 9).unwrap();
        assert!(r.passed);
        assert_eq!(r.samples.len(), 300);
        assert!(r.meeting.windows(2).all(|w| w[0].1 >= w[1].1 - 0.05));
        assert!(r.integral > 0.0 && r.integral < 2.0);
    }
}
