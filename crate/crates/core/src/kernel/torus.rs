use serde::Serialize;

use super::{KernelError, KernelSpec};

/// The discrete torus `(Z / L Z)^d`, sites numbered with the first coordinate fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Torus {
    pub dim: usize,
    pub side: usize,
}

impl Torus {
    pub fn new(dim: usize, side: usize) -> Result<Self, KernelError> {
        if dim == 0 || side == 0 {
            return Err(KernelError::Malformed(format!(
                "torus needs positive dimension and side, got d={dim}, L={side}"
            )));
        }
        if side.checked_pow(dim as u32).is_none_or(|n| n > u32::MAX as usize) {
            return Err(KernelError::Malformed(format!("torus {side}^{dim} is too large")));
        }
        Ok(Torus { dim, side })
    }

    pub fn sites(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut rest = site;
        (0..self.dim)
            .map(|_| {
                let x = rest % self.side;
                rest /= self.side;
                x
            })
            .collect()
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .rev()
            .fold(0, |acc, &x| acc * self.side + x % self.side)
    }

    /// Site reached from `site` by the lattice offset `v`, wrapping around.
    pub fn shift(&self, site: usize, v: &[i64]) -> usize {
        let l = self.side as i64;
        let c: Vec<usize> = self
            .coords(site)
            .iter()
            .zip(v)
            .map(|(&x, &dv)| (x as i64 + dv).rem_euclid(l) as usize)
            .collect();
        self.site(&c)
    }

    /// Torus offset `j - i` as a site index.
    pub fn difference(&self, i: usize, j: usize) -> usize {
        let ci = self.coords(i);
        let cj = self.coords(j);
        let d: Vec<usize> = ci
            .iter()
            .zip(&cj)
            .map(|(&a, &b)| (b + self.side - a) % self.side)
            .collect();
        self.site(&d)
    }

    /// Sup-norm distance on the torus.
    pub fn distance(&self, i: usize, j: usize) -> usize {
        self.coords(i)
            .iter()
            .zip(self.coords(j))
            .map(|(&a, b)| {
                let d = a.abs_diff(b);
                d.min(self.side - d)
            })
            .max()
            .unwrap_or(0)
    }

    /// Sup-norm of a site viewed as an offset from the origin.
    pub fn norm(&self, site: usize) -> usize {
        self.distance(0, site)
    }

    /// Distinct sites within sup-distance `radius` of `centre`.
    pub fn ball(&self, centre: usize, radius: usize) -> Vec<usize> {
        (0..self.sites())
            .filter(|&j| self.distance(centre, j) <= radius)
            .collect()
    }
}

/// A torus together with the kernel folded onto it.
///
/// `wrapped[k]` is the total rate of all lattice offsets congruent to the
/// torus offset `k`. Offsets that wrap onto the origin add to the self-rate,
/// so `self_rate() + c() = 1/2 + c` of the lattice kernel.
#[derive(Debug, Clone)]
pub struct TorusGeometry {
    torus: Torus,
    wrapped: Vec<f64>,
    out: Vec<Vec<(usize, f64)>>,
    inc: Vec<Vec<(usize, f64)>>,
}

impl TorusGeometry {
    pub fn new(spec: &KernelSpec, side: usize) -> Result<Self, KernelError> {
        let torus = Torus::new(spec.dim(), side)?;
        let n = torus.sites();
        let mut wrapped = vec![0.0; n];
        for (v, r) in spec.entries() {
            wrapped[torus.shift(0, v)] += r;
        }
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        for (i, row) in out.iter_mut().enumerate() {
            for (k, &r) in wrapped.iter().enumerate().skip(1) {
                if r > 0.0 {
                    let j = torus.site(
                        &torus
                            .coords(i)
                            .iter()
                            .zip(torus.coords(k))
                            .map(|(a, b)| a + b)
                            .collect::<Vec<_>>(),
                    );
                    row.push((j, r));
                    inc[j].push((i, r));
                }
            }
            row.sort_by_key(|e| e.0);
        }
        for row in &mut inc {
            row.sort_by_key(|e| e.0);
        }
        Ok(TorusGeometry {
            torus,
            wrapped,
            out,
            inc,
        })
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn sites(&self) -> usize {
        self.torus.sites()
    }

    /// Wrapped rate `a(i, j)`; for `i == j` this is the wrapped self-rate.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.wrapped[self.torus.difference(i, j)]
    }

    pub fn self_rate(&self) -> f64 {
        self.wrapped[0]
    }

    /// Wrapped off-origin mass.
    pub fn c(&self) -> f64 {
        self.wrapped[1..].iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.wrapped.iter().sum()
    }

    /// `(j, a(i, j))` for every `j != i` with positive rate, by increasing `j`.
    pub fn neighbours(&self, i: usize) -> &[(usize, f64)] {
        &self.out[i]
    }

    /// `(k, a(k, i))` for every `k != i` with positive rate, by increasing `k`.
    pub fn incoming(&self, i: usize) -> &[(usize, f64)] {
        &self.inc[i]
    }
}
