//! Reference computations written from the model definitions, kept apart
//! from the library so the tests compare two independent derivations.
#![allow(dead_code)]

use std::collections::BTreeMap;

use seedbank_lab::colony::ColonyField;
use seedbank_lab::dual::{DualKind, DualState, Particle};
use seedbank_lab::kernel::{KernelSpec, TorusGeometry};

pub fn nn_field(side: usize, n: &[u32], m: &[u32]) -> ColonyField {
    let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), side).unwrap();
    ColonyField::new(g, n.to_vec(), m.to_vec()).unwrap()
}

/// Outgoing rates of a dual state straight from the rate tables.
pub fn reference_rates(kind: DualKind, state: &DualState, f: &ColonyField, lambda: f64) -> BTreeMap<DualState, f64> {
    let mut out = BTreeMap::new();
    let DualState::Pair(p, q) = *state else {
        return out;
    };
    let g = f.geometry();
    let (i, j) = (p.site, q.site);
    let (a, b) = (p.active as u8 as f64, q.active as u8 as f64);
    let nn = |s: usize| f.active_size(s) as f64;
    let mm = |s: usize| f.dormant_size(s) as f64;
    let k = |s: usize| nn(s) / mm(s);
    let same = (i == j) as u8 as f64;
    let mixed = (p.active != q.active) as u8 as f64;
    let mut add = |t: DualState, r: f64| {
        if r != 0.0 {
            *out.entry(t).or_insert(0.0) += r;
        }
    };
    let correction = if kind == DualKind::IndependentRW { 0.0 } else { 1.0 };
    add(
        DualState::Pair(Particle::new(i, !p.active), q),
        lambda * (a + (1.0 - a) * k(i)) - correction * lambda / mm(i) * same * mixed,
    );
    add(
        DualState::Pair(p, Particle::new(j, !q.active)),
        lambda * (b + (1.0 - b) * k(j)) - correction * lambda / mm(j) * same * mixed,
    );
    add(DualState::Absorbed, 2.0 * g.self_rate() * a * b / nn(i) * same);
    let interacting = kind == DualKind::InteractingRW1;
    for site in 0..f.sites() {
        if site != i {
            let mut r = a * g.rate(i, site);
            if interacting && site == j {
                r -= g.rate(i, site) * a * b / nn(j);
            }
            add(DualState::Pair(Particle::new(site, true), q), r);
        }
        if site != j {
            let mut r = b * g.rate(j, site);
            if interacting && site == i {
                r -= g.rate(j, site) * a * b / nn(i);
            }
            add(DualState::Pair(p, Particle::new(site, true)), r);
        }
    }
    if interacting && i != j {
        add(DualState::Absorbed, a * b * (g.rate(i, j) / nn(j) + g.rate(j, i) / nn(i)));
    }
    out
}

/// Dense generator of the coordinate dual from the reference rates.
pub fn reference_generator(kind: DualKind, f: &ColonyField, lambda: f64) -> Vec<Vec<f64>> {
    let sites = f.sites();
    let n = DualState::count(sites);
    let mut q = vec![vec![0.0; n]; n];
    for x in 0..n {
        let s = DualState::from_index(x, sites);
        for (t, r) in reference_rates(kind, &s, f, lambda) {
            let y = t.index(sites);
            q[x][y] += r;
            q[x][x] -= r;
        }
    }
    q
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] != 0.0 {
                for j in 0..n {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
    }
    c
}

/// `exp(t Q)` by scaling and squaring with a Taylor core.
pub fn expm(q: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = q.len();
    let norm = q
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * t;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let h = t / 2f64.powi(squarings as i32);
    let a: Vec<Vec<f64>> = q.iter().map(|r| r.iter().map(|x| x * h).collect()).collect();
    let mut result: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    let mut term = result.clone();
    for k in 1..30 {
        term = mat_mul(&term, &a);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result);
    }
    result
}

/// Expected jump-chain visits to each co-located active pair, from every
/// state, by solving `(I - P_TT) v = e_s` on the transient states.
pub fn reference_visits(q: &[Vec<f64>], sites: usize) -> Vec<Vec<f64>> {
    let n = q.len() - 1;
    let mut a = vec![vec![0.0; n]; n];
    for x in 0..n {
        let out = -q[x][x];
        for y in 0..n {
            a[x][y] = (x == y) as u8 as f64 - if x == y { 0.0 } else { q[x][y] / out };
        }
    }
    let mut visits = vec![vec![0.0; sites]; n];
    for s in 0..sites {
        let target = DualState::diagonal(s).index(sites);
        let mut b = vec![0.0; n];
        b[target] = 1.0;
        // visits to `target` from x solve v = e_target + P v
        let v = dense_solve(a.clone(), b);
        for x in 0..n {
            visits[x][s] = v[x];
        }
    }
    visits
}

/// `e^{-x} I_j(x)` by its power series.
pub fn scaled_bessel_i(j: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = (-x).exp();
    for k in 1..=j {
        term *= half / k as f64;
    }
    let mut sum = 0.0;
    let mut k = 0u32;
    loop {
        sum += term;
        k += 1;
        term *= half * half / (k as f64 * (k + j) as f64);
        if term < 1e-18 * sum && k > 5 {
            break;
        }
    }
    sum
}

/// `a_t(0, j)` of the one-dimensional nearest-neighbour walk with total rate `c`:
/// jumps of `+1` and `-1` each at rate `c/2`, so the law is `e^{-ct} I_j(ct)`.
pub fn nn1_time_kernel(c: f64, t: f64, j: i64) -> f64 {
    scaled_bessel_i(j.unsigned_abs() as u32, c * t)
}

/// n-step law of the simple random walk on Z at offset `l`.
pub fn srw_n_step(n: usize, l: i64) -> f64 {
    let l = l.unsigned_abs() as usize;
    if l > n || (n - l) % 2 == 1 {
        return 0.0;
    }
    let k = (n + l) / 2;
    let mut log = 0.0;
    for x in 0..n - k {
        log += ((k + 1 + x) as f64).ln() - ((x + 1) as f64).ln();
    }
    (log - n as f64 * 2f64.ln()).exp()
}

/// Expected fixation time of one colony from binomial(theta) counts, built
/// from the count rates and solved densely.
pub fn single_colony_fixation(n: u32, m: u32, lambda: f64, theta: f64) -> f64 {
    // on a single colony the wrapped kernel leaves only the self-rate 1/2 + c
    let states: Vec<(u32, u32)> = (0..=n).flat_map(|x| (0..=m).map(move |y| (x, y))).collect();
    let idx = |x: u32, y: u32| (x * (m + 1) + y) as usize;
    let fixed = |x: u32, y: u32| (x == 0 && y == 0) || (x == n && y == m);
    let k = states.len();
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    let self_rate = 1.0; // 1/2 + c with c = 1/2
    for &(x, y) in &states {
        let r = idx(x, y);
        a[r][r] = 1.0;
        if fixed(x, y) {
            continue;
        }
        let (nf, mf, xf, yf) = (n as f64, m as f64, x as f64, y as f64);
        let moves = [
            ((x + 1, y), (nf - xf) * self_rate * xf / nf),
            ((x.wrapping_sub(1), y), xf * self_rate * (nf - xf) / nf),
            ((x.wrapping_sub(1), y + 1), lambda * xf * (mf - yf) / mf),
            ((x + 1, y.wrapping_sub(1)), lambda * (nf - xf) * yf / mf),
        ];
        let total: f64 = moves.iter().map(|m| m.1).sum();
        a[r][r] = total;
        b[r] = 1.0;
        for ((tx, ty), rate) in moves {
            if rate > 0.0 {
                a[r][idx(tx, ty)] -= rate;
            }
        }
    }
    let t = dense_solve(a, b);
    let pmf = |size: u32, c: u32| {
        let mut v = 1.0;
        for j in 0..c {
            v *= (size - j) as f64 / (j + 1) as f64;
        }
        v * theta.powi(c as i32) * (1.0 - theta).powi((size - c) as i32)
    };
    states
        .iter()
        .map(|&(x, y)| pmf(n, x) * pmf(m, y) * t[idx(x, y)])
        .sum()
}
