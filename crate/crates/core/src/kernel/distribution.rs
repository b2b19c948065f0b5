use std::io::Write;

use super::{KernelError, Offset, ProbabilityKernel};

/// A (sub-)probability distribution on the box `[-radius, radius]^d` of Z^d.
///
/// Mass pushed outside the box by a convolution is dropped; `total()` then
/// reports what was retained.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    dim: usize,
    radius: usize,
    values: Vec<f64>,
}

impl Distribution {
    pub fn zeros(dim: usize, radius: usize) -> Self {
        let side = 2 * radius + 1;
        Distribution {
            dim,
            radius,
            values: vec![0.0; side.pow(dim as u32)],
        }
    }

    pub fn point_mass(dim: usize, radius: usize) -> Self {
        let mut d = Self::zeros(dim, radius);
        let origin = vec![0; dim];
        d.set(&origin, 1.0);
        d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    fn side(&self) -> usize {
        2 * self.radius + 1
    }

    fn index(&self, offset: &[i64]) -> Option<usize> {
        let r = self.radius as i64;
        let side = self.side();
        let mut idx = 0usize;
        for &x in offset.iter().rev() {
            if x < -r || x > r {
                return None;
            }
            idx = idx * side + (x + r) as usize;
        }
        Some(idx)
    }

    fn offset_of(&self, mut idx: usize) -> Offset {
        let side = self.side();
        let r = self.radius as i64;
        let mut o = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            o.push((idx % side) as i64 - r);
            idx /= side;
        }
        o
    }

    /// Probability at `offset`; zero outside the box.
    pub fn get(&self, offset: &[i64]) -> f64 {
        self.index(offset).map(|i| self.values[i]).unwrap_or(0.0)
    }

    pub fn set(&mut self, offset: &[i64], value: f64) {
        let i = self
            .index(offset)
            .unwrap_or_else(|| panic!("offset {offset:?} outside box of radius {}", self.radius));
        self.values[i] = value;
    }

    /// Every offset of the box, in storage order.
    pub fn offsets(&self) -> Vec<Offset> {
        (0..self.values.len()).map(|i| self.offset_of(i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Offset, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.offset_of(i), v))
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_mass(&self, tol: f64) -> Result<(), KernelError> {
        let retained = self.total();
        if retained < 1.0 - tol {
            return Err(KernelError::WindowTooSmall {
                radius: self.radius,
                retained,
            });
        }
        Ok(())
    }

    pub(crate) fn add_scaled(&mut self, other: &Distribution, w: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += w * b;
        }
    }

    /// One step of the jump chain: `(self * b)(x) = sum_v self(x - v) b(v)`.
    pub fn convolve(&self, kernel: &ProbabilityKernel) -> Distribution {
        let steps: Vec<(Vec<i64>, f64)> = kernel.probs.iter().map(|(o, p)| (o.clone(), *p)).collect();
        self.convolve_steps(&steps)
    }

    /// Convolution with another distribution on the same box.
    pub fn convolve_dist(&self, other: &Distribution) -> Distribution {
        let steps: Vec<(Vec<i64>, f64)> = other.iter().filter(|(_, p)| *p != 0.0).collect();
        self.convolve_steps(&steps)
    }

    fn convolve_steps(&self, steps: &[(Vec<i64>, f64)]) -> Distribution {
        let mut out = Distribution::zeros(self.dim, self.radius);
        let r = self.radius as i64;
        let mut o = vec![-r; self.dim];
        let mut target = vec![0i64; self.dim];
        for &v in &self.values {
            if v != 0.0 {
                for (step, p) in steps {
                    for k in 0..self.dim {
                        target[k] = o[k] + step[k];
                    }
                    if let Some(j) = out.index(&target) {
                        out.values[j] += v * p;
                    }
                }
            }
            // advance the odometer, first coordinate fastest
            for x in o.iter_mut() {
                if *x < r {
                    *x += 1;
                    break;
                }
                *x = -r;
            }
        }
        out
    }

    /// `sum_x self(x) other(x)` over the common box.
    pub fn overlap(&self, other: &Distribution) -> f64 {
        if self.dim == other.dim && self.radius == other.radius {
            return self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        }
        self.iter().map(|(o, v)| v * other.get(&o)).sum()
    }

    /// Reflected distribution `x -> self(-x)`.
    pub fn reflect(&self) -> Distribution {
        let mut out = Distribution::zeros(self.dim, self.radius);
        for (o, v) in self.iter() {
            let neg: Offset = o.iter().map(|x| -x).collect();
            out.set(&neg, v);
        }
        out
    }

    /// CSV export: one column per coordinate, then the probability.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        writeln!(w, "{},probability", header.join(","))?;
        for (o, v) in self.iter() {
            let coords: Vec<String> = o.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{:e}", coords.join(","), v)?;
        }
        Ok(())
    }
}
