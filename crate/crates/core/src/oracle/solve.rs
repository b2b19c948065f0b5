use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{GeneratorMatrix, OracleError};
use crate::dual::DualState;
use crate::kernel::poisson_weights;

/// Transient blocks up to this size are factorised densely.
const DENSE_LIMIT: usize = 2048;
const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Poisson tail dropped by the uniformization series.
const UNIFORMIZATION_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolverMethod {
    DenseLu,
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionSolution {
    /// Absorption probability from each state.
    pub probability: Vec<f64>,
    /// Expected absorption time from each state.
    pub expected_time: Vec<f64>,
    /// `visits[x][i]`: expected jump-chain visits from state `x` to the
    /// co-located active pair at site `i`, the initial state counted.
    /// Empty for lumped generators.
    pub visits: Vec<Vec<f64>>,
    pub method: SolverMethod,
    /// Largest scaled residual `|A x - b| / (|A| |x| + |b|)` over all solves.
    pub residual: f64,
}

/// Fails with `NotAbsorbing` if some state cannot reach the absorbing state.
fn check_reachability(gen: &GeneratorMatrix) -> Result<(), OracleError> {
    let n = gen.len();
    let mut reverse = vec![Vec::new(); n];
    for x in 0..n {
        for &(y, _) in gen.row(x) {
            reverse[y].push(x);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([gen.absorbing()]);
    seen[gen.absorbing()] = true;
    while let Some(y) = queue.pop_front() {
        for &x in &reverse[y] {
            if !seen[x] {
                seen[x] = true;
                queue.push_back(x);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(x) => Err(OracleError::NotAbsorbing {
            state: gen.label(x),
        }),
        None => Ok(()),
    }
}

/// `-Q` restricted to the transient states (all but the last).
struct TransientSystem<'a> {
    gen: &'a GeneratorMatrix,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    norm: f64,
}

impl<'a> TransientSystem<'a> {
    fn new(gen: &'a GeneratorMatrix) -> Self {
        let t = gen.absorbing();
        let norm = (0..t).map(|x| 2.0 * gen.exit_rate(x)).fold(0.0, f64::max);
        let lu = (t <= DENSE_LIMIT).then(|| {
            let mut a = DMatrix::<f64>::zeros(t, t);
            for x in 0..t {
                a[(x, x)] = gen.exit_rate(x);
                for &(y, r) in gen.row(x) {
                    if y < t {
                        a[(x, y)] -= r;
                    }
                }
            }
            a.lu()
        });
        TransientSystem { gen, lu, norm }
    }

    fn method(&self) -> SolverMethod {
        if self.lu.is_some() {
            SolverMethod::DenseLu
        } else {
            SolverMethod::GaussSeidel
        }
    }

    fn multiply(&self, x: &[f64]) -> Vec<f64> {
        let t = x.len();
        (0..t)
            .map(|k| {
                let mut s = self.gen.exit_rate(k) * x[k];
                for &(y, r) in self.gen.row(k) {
                    if y < t {
                        s -= r * x[y];
                    }
                }
                s
            })
            .collect()
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.multiply(x);
        let r = ax.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let bn = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let scale = self.norm * xn + bn;
        if scale == 0.0 {
            r
        } else {
            r / scale
        }
    }

    fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, f64), OracleError> {
        let x = match &self.lu {
            Some(lu) => lu
                .solve(&DVector::from_column_slice(b))
                .ok_or_else(|| OracleError::SolverFailed("singular transient block".into()))?
                .as_slice()
                .to_vec(),
            None => self.gauss_seidel(b)?,
        };
        let res = self.residual(&x, b);
        if !(res <= RESIDUAL_TOLERANCE) {
            return Err(OracleError::SolverFailed(format!(
                "residual {res:e} above {RESIDUAL_TOLERANCE:e}"
            )));
        }
        Ok((x, res))
    }

    fn gauss_seidel(&self, b: &[f64]) -> Result<Vec<f64>, OracleError> {
        let t = b.len();
        let mut x = vec![0.0; t];
        for sweep in 0..1_000_000 {
            let mut change: f64 = 0.0;
            let mut size: f64 = 0.0;
            for k in 0..t {
                let mut s = b[k];
                for &(y, r) in self.gen.row(k) {
                    if y < t {
                        s += r * x[y];
                    }
                }
                let v = s / self.gen.exit_rate(k);
                change = change.max((v - x[k]).abs());
                size = size.max(v.abs());
                x[k] = v;
            }
            if sweep % 16 == 0 && change <= 1e-14 * size.max(1.0) && self.residual(&x, b) <= RESIDUAL_TOLERANCE {
                return Ok(x);
            }
        }
        Err(OracleError::SolverFailed("Gauss-Seidel did not converge".into()))
    }
}

/// Absorption probabilities, expected absorption times and expected visits
/// to the co-located active pairs, from linear solves on the transient block.
pub fn absorption_solve(gen: &GeneratorMatrix) -> Result<AbsorptionSolution, OracleError> {
    check_reachability(gen)?;
    let t = gen.absorbing();
    let sys = TransientSystem::new(gen);
    let into_abs: Vec<f64> = (0..t)
        .map(|x| {
            gen.row(x)
                .iter()
                .filter(|e| e.0 == t)
                .map(|e| e.1)
                .sum()
        })
        .collect();
    let (mut probability, r1) = sys.solve(&into_abs)?;
    let (mut expected_time, r2) = sys.solve(&vec![1.0; t])?;
    probability.push(1.0);
    expected_time.push(0.0);
    let mut residual = r1.max(r2);

    let mut visits = Vec::new();
    if let Some(sites) = gen.dual_sites() {
        let mut columns = Vec::with_capacity(sites);
        for i in 0..sites {
            let s = DualState::diagonal(i).index(sites);
            // E_x[visits to s] solves (-Q_TT) g = q(s) e_s
            let mut b = vec![0.0; t];
            b[s] = gen.exit_rate(s);
            let (g, r) = sys.solve(&b)?;
            residual = residual.max(r);
            columns.push(g);
        }
        visits = (0..gen.len())
            .map(|x| {
                (0..sites)
                    .map(|i| if x < t { columns[i][x] } else { 0.0 })
                    .collect()
            })
            .collect();
    }
    Ok(AbsorptionSolution {
        probability,
        expected_time,
        visits,
        method: sys.method(),
        residual,
    })
}

fn uniformization_rate(gen: &GeneratorMatrix) -> f64 {
    let m = (0..gen.len()).map(|x| gen.exit_rate(x)).fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// `v P` with `P = I + Q / rate`.
fn step_left(gen: &GeneratorMatrix, rate: f64, v: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(x, p)| p * (1.0 - gen.exit_rate(x) / rate))
        .collect();
    for (x, p) in v.iter().enumerate() {
        if *p != 0.0 {
            for &(y, r) in gen.row(x) {
                out[y] += p * r / rate;
            }
        }
    }
    out
}

/// `P u` with `P = I + Q / rate`.
fn step_right(gen: &GeneratorMatrix, rate: f64, u: &[f64]) -> Vec<f64> {
    (0..gen.len())
        .map(|x| {
            let mut s = u[x] * (1.0 - gen.exit_rate(x) / rate);
            for &(y, r) in gen.row(x) {
                s += r / rate * u[y];
            }
            s
        })
        .collect()
}

/// Law at time `t` of the chain started at `init`, by uniformization.
pub fn finite_time_dist(gen: &GeneratorMatrix, init: usize, t: f64) -> Vec<f64> {
    let rate = uniformization_rate(gen);
    let weights = poisson_weights(rate * t, UNIFORMIZATION_TAIL);
    let mut v = vec![0.0; gen.len()];
    v[init] = 1.0;
    let mut acc = vec![0.0; gen.len()];
    for (k, w) in weights.iter().enumerate() {
        if k > 0 {
            v = step_left(gen, rate, &v);
        }
        for (a, p) in acc.iter_mut().zip(&v) {
            *a += w * p;
        }
    }
    acc
}

/// `P_x(chain is in target set at time t)` for every start `x` and every `t` in `times`;
/// `result[k][x]` belongs to `times[k]`.
fn set_probability(gen: &GeneratorMatrix, target: &[bool], times: &[f64]) -> Vec<Vec<f64>> {
    let rate = uniformization_rate(gen);
    let weights: Vec<Vec<f64>> = times
        .iter()
        .map(|t| poisson_weights(rate * t, UNIFORMIZATION_TAIL))
        .collect();
    let k_max = weights.iter().map(|w| w.len()).max().unwrap_or(0);
    let mut u: Vec<f64> = target.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mut acc = vec![vec![0.0; gen.len()]; times.len()];
    for k in 0..k_max {
        if k > 0 {
            u = step_right(gen, rate, &u);
        }
        for (a, w) in acc.iter_mut().zip(&weights) {
            if let Some(wk) = w.get(k) {
                for (ax, ux) in a.iter_mut().zip(&u) {
                    *ax += wk * ux;
                }
            }
        }
    }
    acc
}

/// `P_x(tau <= t)` for every state `x` and grid time `t`; `result[k][x]` belongs to `times[k]`.
pub fn absorption_cdf(gen: &GeneratorMatrix, times: &[f64]) -> Vec<Vec<f64>> {
    let mut target = vec![false; gen.len()];
    target[gen.absorbing()] = true;
    set_probability(gen, &target, times)
}

/// `P_x(T_B <= t)` for the first entrance time of `set`, via the chain stopped on `set`.
pub fn hitting_cdf(gen: &GeneratorMatrix, set: &[bool], times: &[f64]) -> Vec<Vec<f64>> {
    set_probability(&gen.stopped(set), set, times)
}

/// `P_init(absorbed within n jumps)` for `n = 0..=n_max`.
pub fn jump_chain_absorption(gen: &GeneratorMatrix, init: usize, n_max: usize) -> Vec<f64> {
    let a = gen.absorbing();
    let mut v = vec![0.0; gen.len()];
    v[init] = 1.0;
    let mut out = vec![v[a]];
    for _ in 0..n_max {
        let mut next = vec![0.0; gen.len()];
        next[a] = v[a];
        for (x, p) in v.iter().enumerate() {
            if *p == 0.0 || x == a {
                continue;
            }
            let q = gen.exit_rate(x);
            for &(y, r) in gen.row(x) {
                next[y] += p * r / q;
            }
        }
        v = next;
        out.push(v[a]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::field;
    use super::super::{build_generator, GeneratorKind, DEFAULT_STATE_CAP};
    use super::*;
    use crate::dual::DualKind;

    #[test]
    fn certain_absorption_and_series() {
        let f = field(2, vec![2, 3], vec![2, 4]);
        for kind in [DualKind::AuxiliaryRW2, DualKind::IndependentRW] {
            let g = build_generator(GeneratorKind::Dual(kind), &f, 1.0, DEFAULT_STATE_CAP).unwrap();
            let sol = absorption_solve(&g).unwrap();
            assert!(sol.probability.iter().all(|p| (p - 1.0).abs() < 1e-10));
            assert!(sol.residual <= 1e-10);
            let model = crate::dual::DualModel::new(kind, &f, 1.0);
            let w: Vec<f64> = (0..2).map(|i| model.first_jump_absorption(i)).collect();
            for x in 0..g.absorbing() {
                let s: f64 = sol.visits[x].iter().zip(&w).map(|(v, w)| v * w).sum();
                assert!((s - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn uniformization_basics() {
        let f = field(2, vec![2, 2], vec![2, 2]);
        let g = build_generator(GeneratorKind::Dual(DualKind::InteractingRW1), &f, 1.0, DEFAULT_STATE_CAP)
            .unwrap();
        let d0 = finite_time_dist(&g, 3, 0.0);
        assert_eq!(d0[3], 1.0);
        let times: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
        let cdf = absorption_cdf(&g, &times);
        for x in 0..g.len() {
            assert!(cdf.windows(2).all(|w| w[1][x] >= w[0][x] - 1e-12));
        }
        let d = finite_time_dist(&g, 3, 4.0);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((d[g.absorbing()] - cdf[8][3]).abs() < 1e-10);
    }

    #[test]
    fn not_absorbing_detected() {
        let f = field(2, vec![2, 2], vec![2, 2]);
        let g = build_generator(GeneratorKind::Dual(DualKind::IndependentRW), &f, 1.0, DEFAULT_STATE_CAP)
            .unwrap();
        let mut cut = vec![false; g.len()];
        cut[g.absorbing()] = false;
        // removing the absorbing rows' sources: stop every state that feeds the absorbing state
        for x in 0..g.absorbing() {
            if g.row(x).iter().any(|e| e.0 == g.absorbing()) {
                cut[x] = true;
            }
        }
        let stopped = g.stopped(&cut);
        assert!(matches!(absorption_solve(&stopped), Err(OracleError::NotAbsorbing { .. })));
    }
}
