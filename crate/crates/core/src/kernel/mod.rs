//! Translation-invariant migration kernels on Z^d.
//!
//! A [`KernelSpec`] stores the rates `a(0, v)` for a finite set of offsets,
//! including the self-rate `a(0, 0)`. From it we derive the total off-origin
//! mass `c`, the symmetrised kernel, the jump kernel `b = a / c` of the
//! embedded chain, its n-step powers, the continuous-time kernels `a_t`, and
//! truncated Green integrals of the symmetrised walk.

mod distribution;
mod fourier;
mod lattice;
mod torus;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use distribution::Distribution;
pub use fourier::{gauss_legendre, green_integral, GreenReport, TimeKernelMethod};
pub use lattice::{generates_full_lattice, lattice_index};
pub use torus::{Torus, TorusGeometry};

pub(crate) use fourier::time_kernel_fourier_at;

/// An offset vector in Z^d.
pub type Offset = Vec<i64>;

/// Mass-loss threshold below which a truncated distribution is rejected.
pub const WINDOW_MASS_TOLERANCE: f64 = 1e-6;
/// Poisson tail dropped by uniformization series.
pub const POISSON_TAIL_TOLERANCE: f64 = 1e-12;
/// Agreement target for adaptive Fourier quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("self-rate a(0,0) must be exactly 1/2, found {0}")]
    BadSelfRate(f64),
    #[error("off-origin support generates a proper sublattice of Z^{dim}")]
    NotIrreducible { dim: usize },
    #[error("kernel has no off-origin mass (c = 0)")]
    EmptyOffOrigin,
    #[error("window of radius {radius} retains only {retained} of the mass")]
    WindowTooSmall { radius: usize, retained: f64 },
    #[error("Fourier quadrature did not reach {tolerance:e}; last refinement changed values by {change:e}")]
    QuadratureNotConverged { tolerance: f64, change: f64 },
    #[error("malformed kernel: {0}")]
    Malformed(String),
}

/// Rates `a(0, v)` of a translation-invariant migration kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    dim: usize,
    entries: BTreeMap<Offset, f64>,
    sigma: Option<f64>,
}

impl KernelSpec {
    /// Builds a kernel from `(offset, rate)` pairs. Repeated offsets are summed.
    ///
    /// Only structural checks happen here (dimension, finite nonnegative
    /// rates); the model assumptions are checked by [`validate_kernel`].
    pub fn new<I>(dim: usize, entries: I) -> Result<Self, KernelError>
    where
        I: IntoIterator<Item = (Offset, f64)>,
    {
        if dim == 0 {
            return Err(KernelError::Malformed("dimension must be positive".into()));
        }
        let mut map = BTreeMap::new();
        for (offset, rate) in entries {
            if offset.len() != dim {
                return Err(KernelError::Malformed(format!(
                    "offset {offset:?} does not have dimension {dim}"
                )));
            }
            if !rate.is_finite() || rate < 0.0 {
                return Err(KernelError::Malformed(format!(
                    "rate {rate} at offset {offset:?} is not a finite nonnegative number"
                )));
            }
            *map.entry(offset).or_insert(0.0) += rate;
        }
        Ok(KernelSpec {
            dim,
            entries: map,
            sigma: None,
        })
    }

    /// Like [`KernelSpec::new`] followed by [`validate_kernel`].
    pub fn validated<I>(dim: usize, entries: I) -> Result<Self, KernelError>
    where
        I: IntoIterator<Item = (Offset, f64)>,
    {
        let spec = Self::new(dim, entries)?;
        validate_kernel(&spec)?;
        Ok(spec)
    }

    /// Symmetric nearest-neighbour kernel with total off-origin mass `c`,
    /// split evenly over the `2d` unit offsets.
    pub fn nearest_neighbour(dim: usize, c: f64) -> Self {
        let per = c / (2 * dim) as f64;
        let mut entries = vec![(vec![0; dim], 0.5)];
        for k in 0..dim {
            for sign in [1, -1] {
                let mut v = vec![0; dim];
                v[k] = sign;
                entries.push((v, per));
            }
        }
        Self::new(dim, entries).expect("nearest-neighbour kernel is well formed")
    }

    pub fn with_sigma(mut self, sigma: Option<f64>) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared regular-variation index; carried as metadata only.
    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn rate(&self, offset: &[i64]) -> f64 {
        self.entries.get(offset).copied().unwrap_or(0.0)
    }

    pub fn self_rate(&self) -> f64 {
        self.rate(&vec![0; self.dim])
    }

    /// All stored entries, origin included, in lexicographic offset order.
    pub fn entries(&self) -> impl Iterator<Item = (&Offset, f64)> {
        self.entries.iter().map(|(o, &r)| (o, r))
    }

    /// Off-origin entries with positive rate.
    pub fn off_origin(&self) -> impl Iterator<Item = (&Offset, f64)> {
        self.entries
            .iter()
            .filter(|(o, &r)| r > 0.0 && o.iter().any(|&x| x != 0))
            .map(|(o, &r)| (o, r))
    }

    /// Total off-origin mass `c`.
    pub fn total_off_origin(&self) -> f64 {
        self.off_origin().map(|(_, r)| r).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries.iter().all(|(o, &r)| {
            let neg: Offset = o.iter().map(|x| -x).collect();
            self.rate(&neg) == r
        })
    }

    /// Largest sup-norm of an off-origin offset with positive rate.
    pub fn support_radius(&self) -> usize {
        self.off_origin()
            .map(|(o, _)| sup_norm(o) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn load_json(path: &Path) -> Result<Self, KernelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KernelError::Malformed(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, KernelError> {
        let cfg: KernelConfig =
            serde_json::from_str(text).map_err(|e| KernelError::Malformed(e.to_string()))?;
        cfg.build()
    }

    pub fn to_config(&self) -> KernelConfig {
        KernelConfig {
            d: self.dim,
            entries: self
                .entries
                .iter()
                .map(|(o, &r)| KernelEntry {
                    offset: o.clone(),
                    rate: r,
                })
                .collect(),
            sigma: self.sigma,
        }
    }
}

/// JSON form of a kernel: `{"d": 1, "entries": [{"offset": [1], "rate": 0.25}], "sigma": null}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub d: usize,
    pub entries: Vec<KernelEntry>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry {
    pub offset: Offset,
    pub rate: f64,
}

impl KernelConfig {
    pub fn build(&self) -> Result<KernelSpec, KernelError> {
        let spec = KernelSpec::new(
            self.d,
            self.entries.iter().map(|e| (e.offset.clone(), e.rate)),
        )?;
        Ok(spec.with_sigma(self.sigma))
    }
}

pub(crate) fn sup_norm(v: &[i64]) -> i64 {
    v.iter().map(|x| x.abs()).max().unwrap_or(0)
}

/// Outcome of [`validate_kernel`]: each model check plus advisory moment statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub self_rate: f64,
    pub self_rate_ok: bool,
    /// Total off-origin mass `c`.
    pub c: f64,
    pub c_ok: bool,
    pub irreducible: bool,
    pub symmetric: bool,
    /// First moment `sum_{v != 0} |v| a(0, v)` in the sup norm.
    pub mu1: f64,
    /// `sum |v|^(d+1) a(0, v)`: with finite support every polynomial moment is finite.
    pub moment_d_plus_one: f64,
    /// `sum exp(|v|) a(0, v)`, the exponential moment with rate 1.
    pub exp_moment: f64,
    pub support_radius: usize,
    /// Well-posedness conditions refer to the whole lattice; on a finite
    /// support both hold trivially for the kernel part and are reported only.
    pub advisory: String,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.self_rate_ok && self.c_ok && self.irreducible
    }
}

/// Checks the model assumptions on a kernel and reports moment statistics.
///
/// Fails with the first violated assumption, in the order self-rate,
/// off-origin mass, irreducibility.
pub fn validate_kernel(spec: &KernelSpec) -> Result<ValidationReport, KernelError> {
    let report = kernel_report(spec);
    if !report.self_rate_ok {
        return Err(KernelError::BadSelfRate(report.self_rate));
    }
    if !report.c_ok {
        return Err(KernelError::EmptyOffOrigin);
    }
    if !report.irreducible {
        return Err(KernelError::NotIrreducible { dim: spec.dim });
    }
    Ok(report)
}

/// The full report without turning failures into errors.
pub fn kernel_report(spec: &KernelSpec) -> ValidationReport {
    let self_rate = spec.self_rate();
    let c = spec.total_off_origin();
    let support: Vec<Offset> = spec.off_origin().map(|(o, _)| o.clone()).collect();
    let irreducible = lattice::generates_full_lattice(&support, spec.dim);
    let mut mu1 = 0.0;
    let mut moment = 0.0;
    let mut exp_moment = 0.0;
    for (o, r) in spec.off_origin() {
        let n = sup_norm(o) as f64;
        mu1 += n * r;
        moment += n.powi(spec.dim as i32 + 1) * r;
        exp_moment += n.exp() * r;
    }
    ValidationReport {
        self_rate,
        self_rate_ok: self_rate == 0.5,
        c,
        c_ok: c > 0.0 && c.is_finite(),
        irreducible,
        symmetric: spec.is_symmetric(),
        mu1,
        moment_d_plus_one: moment,
        exp_moment,
        support_radius: spec.support_radius(),
        advisory: "finite support: exponential and (d+delta)-moments are finite; colony growth \
                   conditions cannot be decided on a finite window"
            .into(),
    }
}

/// Symmetrised kernel `a^(0, v) = (a(0, v) + a(0, -v)) / 2`; the self-rate is unchanged.
pub fn symmetrize(spec: &KernelSpec) -> KernelSpec {
    let mut map: BTreeMap<Offset, f64> = BTreeMap::new();
    for (o, r) in spec.entries() {
        let neg: Offset = o.iter().map(|x| -x).collect();
        if neg == *o {
            map.insert(o.clone(), r);
            continue;
        }
        *map.entry(o.clone()).or_insert(0.0) += 0.5 * r;
        *map.entry(neg).or_insert(0.0) += 0.5 * r;
    }
    KernelSpec {
        dim: spec.dim,
        entries: map,
        sigma: spec.sigma,
    }
}

/// Jump kernel of the embedded chain: `b(0, v) = a(0, v) / c` off the origin, `b(0, 0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityKernel {
    pub dim: usize,
    pub probs: Vec<(Offset, f64)>,
}

impl ProbabilityKernel {
    pub fn prob(&self, offset: &[i64]) -> f64 {
        self.probs
            .iter()
            .find(|(o, _)| o.as_slice() == offset)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().map(|(_, p)| p).sum()
    }
}

pub fn embedded_kernel(spec: &KernelSpec) -> ProbabilityKernel {
    let c = spec.total_off_origin();
    ProbabilityKernel {
        dim: spec.dim,
        probs: spec.off_origin().map(|(o, r)| (o.clone(), r / c)).collect(),
    }
}

/// `a_n(0, ·)`: the n-fold convolution of the jump kernel, restricted to a box of `radius`.
pub fn n_step_kernel(spec: &KernelSpec, n: usize, radius: usize) -> Result<Distribution, KernelError> {
    let b = embedded_kernel(spec);
    let mut dist = Distribution::point_mass(spec.dim, radius);
    for _ in 0..n {
        dist = dist.convolve(&b);
    }
    dist.check_mass(WINDOW_MASS_TOLERANCE)?;
    Ok(dist)
}

/// Every `a_n(0, ·)` for `n = 0..=n_max` on a common box.
pub fn n_step_kernels(
    spec: &KernelSpec,
    n_max: usize,
    radius: usize,
) -> Result<Vec<Distribution>, KernelError> {
    let b = embedded_kernel(spec);
    let mut out = Vec::with_capacity(n_max + 1);
    let mut dist = Distribution::point_mass(spec.dim, radius);
    for _ in 0..n_max {
        let next = dist.convolve(&b);
        out.push(dist);
        dist = next;
    }
    out.push(dist);
    for d in &out {
        d.check_mass(WINDOW_MASS_TOLERANCE)?;
    }
    Ok(out)
}

/// Continuous-time kernel `a_t(0, ·)` of the walk with jump rate `c` and jump kernel `b`.
pub fn time_kernel(
    spec: &KernelSpec,
    t: f64,
    method: TimeKernelMethod,
    radius: usize,
) -> Result<Distribution, KernelError> {
    match method {
        TimeKernelMethod::Uniformization => time_kernel_uniformization(spec, t, radius),
        TimeKernelMethod::Fourier => {
            let offsets = Distribution::point_mass(spec.dim, radius).offsets();
            let values = time_kernel_fourier_at(spec, t, &offsets, QUADRATURE_TOLERANCE)?;
            let mut dist = Distribution::zeros(spec.dim, radius);
            for (o, v) in offsets.iter().zip(values) {
                dist.set(o, v);
            }
            Ok(dist)
        }
    }
}

/// Poisson weights `e^{-x} x^k / k!` for `k = 0..K`, with `K` the first index
/// past the mean whose upper tail is below `tail`.
pub(crate) fn poisson_weights(x: f64, tail: f64) -> Vec<f64> {
    if x <= 0.0 {
        return vec![1.0];
    }
    let mut weights = Vec::new();
    let mut log_w = -x;
    let ln_x = x.ln();
    let mut cumulative = 0.0;
    let mut k = 0usize;
    loop {
        let w = log_w.exp();
        weights.push(w);
        cumulative += w;
        if k as f64 > x && 1.0 - cumulative < tail {
            break;
        }
        // hard stop well into the tail, where rounding dominates the remainder
        if k as f64 > x + 40.0 * x.sqrt() + 100.0 {
            break;
        }
        k += 1;
        log_w += ln_x - (k as f64).ln();
    }
    weights
}

fn time_kernel_uniformization(
    spec: &KernelSpec,
    t: f64,
    radius: usize,
) -> Result<Distribution, KernelError> {
    let b = embedded_kernel(spec);
    let c = spec.total_off_origin();
    let weights = poisson_weights(c * t, POISSON_TAIL_TOLERANCE);
    let mut power = Distribution::point_mass(spec.dim, radius);
    let mut acc = Distribution::zeros(spec.dim, radius);
    for (k, w) in weights.iter().enumerate() {
        if k > 0 {
            power = power.convolve(&b);
        }
        acc.add_scaled(&power, *w);
    }
    acc.check_mass(WINDOW_MASS_TOLERANCE)?;
    Ok(acc)
}
