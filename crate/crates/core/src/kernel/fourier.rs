//! Fourier representation of continuous-time kernels and Green integrals.
//!
//! `a_t(0, j) = (2 pi)^-d  int_{T^d} exp(-i(theta, j)) exp(-c t [1 - F(theta)]) dtheta`
//! where `F` is the characteristic function of the jump kernel. The integrand
//! concentrates near `theta = 0` at rate `1 / sqrt(c t)`, so the tensor rule is
//! built from Gauss-Legendre panels graded geometrically toward the origin.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{embedded_kernel, symmetrize, KernelError, KernelSpec, Offset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeKernelMethod {
    Uniformization,
    Fourier,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite rule on `[-pi, pi]` with panels `[pi 2^-(k+1), pi 2^-k]` for
/// `k < levels` plus the innermost `[0, pi 2^-levels]`, mirrored.
fn graded_rule(levels: u32, per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(per_panel);
    let mut edges = vec![0.0];
    for k in (0..=levels).rev() {
        edges.push(PI / 2f64.powi(k as i32));
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for win in edges.windows(2) {
        let (a, b) = (win[0], win[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gx.iter().zip(&gw) {
            let t = mid + half * x;
            nodes.push(t);
            weights.push(w * half);
            nodes.push(-t);
            weights.push(w * half);
        }
    }
    (nodes, weights)
}

/// Smallest axis variance of the jump kernel, used to size the graded panels.
fn axis_curvature(spec: &KernelSpec) -> f64 {
    let b = embedded_kernel(spec);
    (0..spec.dim())
        .map(|k| {
            b.probs
                .iter()
                .map(|(o, p)| p * (o[k] * o[k]) as f64)
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn levels_for(spec: &KernelSpec, t: f64) -> u32 {
    let scale = spec.total_off_origin() * t * axis_curvature(spec);
    if scale <= 1.0 {
        return 0;
    }
    let width = 1.0 / scale.sqrt();
    ((PI / width).log2().ceil().max(0.0) as u32).min(40)
}

struct Characteristic {
    steps: Vec<(Vec<f64>, f64)>,
}

impl Characteristic {
    fn new(spec: &KernelSpec) -> Self {
        let b = embedded_kernel(spec);
        Characteristic {
            steps: b
                .probs
                .into_iter()
                .map(|(o, p)| (o.iter().map(|&x| x as f64).collect(), p))
                .collect(),
        }
    }

    /// `(Re F, Im F)` at `theta`.
    fn eval(&self, theta: &[f64]) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (v, p) in &self.steps {
            let phase: f64 = v.iter().zip(theta).map(|(a, b)| a * b).sum();
            re += p * phase.cos();
            im += p * phase.sin();
        }
        (re, im)
    }
}

/// Calls `f(theta, weight)` for every node of the tensor product of `rule` in `dim` dimensions.
fn for_each_node(dim: usize, rule: &(Vec<f64>, Vec<f64>), mut f: impl FnMut(&[f64], f64)) {
    let n = rule.0.len();
    let mut idx = vec![0usize; dim];
    let mut theta = vec![0.0; dim];
    loop {
        let mut w = 1.0;
        for k in 0..dim {
            theta[k] = rule.0[idx[k]];
            w *= rule.1[idx[k]];
        }
        f(&theta, w);
        let mut k = 0;
        loop {
            if k == dim {
                return;
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

const MAX_QUADRATURE_NODES: usize = 40_000_000;

/// `a_t(0, j)` for each requested offset by adaptive tensor quadrature:
/// the per-panel order doubles until two successive rules agree within `tol`.
pub(crate) fn time_kernel_fourier_at(
    spec: &KernelSpec,
    t: f64,
    offsets: &[Offset],
    tol: f64,
) -> Result<Vec<f64>, KernelError> {
    let dim = spec.dim();
    let ch = Characteristic::new(spec);
    let ct = spec.total_off_origin() * t;
    let levels = levels_for(spec, t);
    let norm = (2.0 * PI).powi(dim as i32);
    let targets: Vec<Vec<f64>> = offsets
        .iter()
        .map(|o| o.iter().map(|&x| x as f64).collect())
        .collect();

    let evaluate = |per_panel: usize| -> Vec<f64> {
        let rule = graded_rule(levels, per_panel);
        let mut acc = vec![0.0; targets.len()];
        for_each_node(dim, &rule, |theta, w| {
            let (re, im) = ch.eval(theta);
            let amp = w * (-ct * (1.0 - re)).exp();
            if amp == 0.0 {
                return;
            }
            let drift = ct * im;
            for (a, j) in acc.iter_mut().zip(&targets) {
                let tj: f64 = theta.iter().zip(j).map(|(x, y)| x * y).sum();
                *a += amp * (drift - tj).cos();
            }
        });
        acc.iter().map(|v| v / norm).collect()
    };

    let mut per_panel = 8;
    let mut previous = evaluate(per_panel);
    loop {
        per_panel *= 2;
        let nodes = (2 * (levels as usize + 1) * per_panel).pow(dim as u32);
        let current = evaluate(per_panel);
        let change = previous
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change < tol {
            return Ok(current);
        }
        if nodes * 8 > MAX_QUADRATURE_NODES {
            return Err(KernelError::QuadratureNotConverged {
                tolerance: tol,
                change,
            });
        }
        previous = current;
    }
}

/// Return probabilities `a^_t(0, 0)` of the symmetrised walk from a fixed
/// graded grid, valid for every `t` up to the horizon it was built for.
///
/// The integrand depends on `theta` only through `g = 1 - Re F(theta)`, so the
/// nodes are stored as `(g, weight)` sorted by `g`; nodes with `c t g > 50`
/// contribute less than `e^-50` and are skipped.
pub struct ReturnProbabilityGrid {
    c: f64,
    nodes: Vec<(f64, f64)>,
    norm: f64,
}

/// Gauss-Legendre nodes per panel for the fixed Green-integral grid.
const GREEN_PANEL_ORDER: usize = 8;

impl ReturnProbabilityGrid {
    pub fn new(spec: &KernelSpec, horizon: f64) -> Self {
        let sym = symmetrize(spec);
        let dim = sym.dim();
        let ch = Characteristic::new(&sym);
        let rule = graded_rule(levels_for(&sym, horizon.max(1.0)), GREEN_PANEL_ORDER);
        // F is even, so integrate theta_0 >= 0 with doubled weight
        let half: (Vec<f64>, Vec<f64>) = rule
            .0
            .iter()
            .zip(&rule.1)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, w)| (*x, 2.0 * w))
            .unzip();
        let mut nodes = Vec::new();
        for_each_node(dim.saturating_sub(1), &rule, |rest, w_rest| {
            let mut theta = vec![0.0; dim];
            theta[1..].copy_from_slice(rest);
            for (x0, w0) in half.0.iter().zip(&half.1) {
                theta[0] = *x0;
                let (re, _) = ch.eval(&theta);
                nodes.push(((1.0 - re).max(0.0), w0 * w_rest));
            }
        });
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        ReturnProbabilityGrid {
            c: sym.total_off_origin(),
            nodes,
            norm: (2.0 * PI).powi(dim as i32),
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        let ct = self.c * t;
        let cutoff = if ct > 0.0 { 50.0 / ct } else { f64::INFINITY };
        let end = self.nodes.partition_point(|(g, _)| *g <= cutoff);
        // fixed chunks summed in order keep the result independent of thread count
        let partial: Vec<f64> = self.nodes[..end]
            .par_chunks(1 << 14)
            .map(|chunk| chunk.iter().map(|(g, w)| w * (-ct * g).exp()).sum::<f64>())
            .collect();
        partial.iter().sum::<f64>() / self.norm
    }
}

/// Truncated Green integral of the symmetrised walk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenReport {
    pub horizon: f64,
    /// Trapezoidal approximation of `int_0^horizon a^_t(0,0) dt`.
    pub integral: f64,
    /// Partial integrals at `t = 1, 10, 100, ...` below the horizon, and at the horizon.
    pub checkpoints: Vec<(f64, f64)>,
}

/// Trapezoidal Green integral `int_0^T a^_t(0, 0) dt` of the symmetrised kernel.
///
/// The step is `dt` on `[0, 1]` and `dt * t` beyond, so late times are
/// sampled geometrically; every checkpoint is hit exactly.
pub fn green_integral(spec: &KernelSpec, horizon: f64, dt: f64) -> GreenReport {
    assert!(dt > 0.0, "green_integral needs a positive step");
    if horizon <= 0.0 {
        return GreenReport {
            horizon: horizon.max(0.0),
            integral: 0.0,
            checkpoints: Vec::new(),
        };
    }
    let grid = ReturnProbabilityGrid::new(spec, horizon);
    let mut marks = Vec::new();
    let mut m = 1.0;
    while m < horizon {
        marks.push(m);
        m *= 10.0;
    }
    marks.push(horizon);

    let mut checkpoints = Vec::new();
    let mut t: f64 = 0.0;
    let mut f_prev = grid.at(0.0);
    let mut integral = 0.0;
    let mut mark_idx = 0;
    while mark_idx < marks.len() {
        let mark = marks[mark_idx];
        let mut next = t + dt * t.max(1.0);
        if next >= mark * (1.0 - 1e-12) {
            next = mark;
        }
        let f_next = grid.at(next);
        integral += 0.5 * (next - t) * (f_prev + f_next);
        t = next;
        f_prev = f_next;
        if t == mark {
            checkpoints.push((mark, integral));
            mark_idx += 1;
        }
    }
    GreenReport {
        horizon,
        integral,
        checkpoints,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // degree 10 is exact for six nodes
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((m - 2.0 / 11.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!(x1, vec![0.0]);
        assert!((w1[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn graded_rule_weights_cover_circle() {
        for levels in [0, 3, 9] {
            let (_, w) = graded_rule(levels, 5);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn return_grid_is_normalised_at_zero() {
        for d in 1..=3 {
            let g = ReturnProbabilityGrid::new(&KernelSpec::nearest_neighbour(d, 0.5), 100.0);
            assert!((g.at(0.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_horizon() {
        let r = green_integral(&KernelSpec::nearest_neighbour(1, 0.5), 0.0, 0.1);
        assert_eq!(r.integral, 0.0);
    }
}
