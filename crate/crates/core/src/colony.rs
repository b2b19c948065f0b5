//! Per-site active and dormant population sizes on a torus.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{n_step_kernels, KernelError, KernelSpec, TorusGeometry};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ColonyError {
    #[error("site {site} has N = {n}, M = {m}; every colony needs at least two active and two dormant individuals")]
    TooSmall { site: usize, n: u32, m: u32 },
    #[error("field has {got} sites but the torus has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("malformed field: {0}")]
    Malformed(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Colony sizes `N_i` (active) and `M_i` (dormant) over a torus.
#[derive(Debug, Clone)]
pub struct ColonyField {
    geometry: TorusGeometry,
    n: Vec<u32>,
    m: Vec<u32>,
}

impl ColonyField {
    pub fn new(geometry: TorusGeometry, n: Vec<u32>, m: Vec<u32>) -> Result<Self, ColonyError> {
        let sites = geometry.sites();
        for v in [&n, &m] {
            if v.len() != sites {
                return Err(ColonyError::LengthMismatch {
                    expected: sites,
                    got: v.len(),
                });
            }
        }
        if let Some(site) = (0..sites).find(|&i| n[i] < 2 || m[i] < 2) {
            return Err(ColonyError::TooSmall {
                site,
                n: n[site],
                m: m[site],
            });
        }
        Ok(ColonyField { geometry, n, m })
    }

    pub fn constant(geometry: TorusGeometry, n: u32, m: u32) -> Result<Self, ColonyError> {
        let s = geometry.sites();
        Self::new(geometry, vec![n; s], vec![m; s])
    }

    /// Independent sizes uniform on `[2, n_max]` and `[2, m_max]`.
    pub fn iid_uniform(
        geometry: TorusGeometry,
        n_max: u32,
        m_max: u32,
        seed: u64,
    ) -> Result<Self, ColonyError> {
        if n_max < 2 || m_max < 2 {
            return Err(ColonyError::Malformed(format!(
                "uniform bounds must be at least 2, got N_max = {n_max}, M_max = {m_max}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = geometry.sites();
        let n = (0..s).map(|_| rng.random_range(2..=n_max)).collect();
        let m = (0..s).map(|_| rng.random_range(2..=m_max)).collect();
        Self::new(geometry, n, m)
    }

    /// Sites with even coordinate sum get `even`, the others `odd`, each as `(N, M)`.
    pub fn checkerboard(
        geometry: TorusGeometry,
        even: (u32, u32),
        odd: (u32, u32),
    ) -> Result<Self, ColonyError> {
        let t = *geometry.torus();
        let (n, m) = (0..t.sites())
            .map(|i| {
                if t.coords(i).iter().sum::<usize>() % 2 == 0 {
                    even
                } else {
                    odd
                }
            })
            .unzip();
        Self::new(geometry, n, m)
    }

    /// Constant background `(N, M)` with one colony of active size `spike_n`.
    pub fn single_spike(
        geometry: TorusGeometry,
        n: u32,
        m: u32,
        site: usize,
        spike_n: u32,
    ) -> Result<Self, ColonyError> {
        let s = geometry.sites();
        if site >= s {
            return Err(ColonyError::Malformed(format!("spike site {site} is off the torus")));
        }
        let mut ns = vec![n; s];
        ns[site] = spike_n;
        Self::new(geometry, ns, vec![m; s])
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn sites(&self) -> usize {
        self.n.len()
    }

    pub fn active_size(&self, i: usize) -> u32 {
        self.n[i]
    }

    pub fn dormant_size(&self, i: usize) -> u32 {
        self.m[i]
    }

    pub fn active_sizes(&self) -> &[u32] {
        &self.n
    }

    pub fn dormant_sizes(&self) -> &[u32] {
        &self.m
    }

    /// `K_i = N_i / M_i`.
    pub fn ratio(&self, i: usize) -> f64 {
        self.n[i] as f64 / self.m[i] as f64
    }
}

/// JSON form of a colony field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Constant {
        #[serde(rename = "N")]
        n: u32,
        #[serde(rename = "M")]
        m: u32,
    },
    PerSite {
        #[serde(rename = "N")]
        n: Vec<u32>,
        #[serde(rename = "M")]
        m: Vec<u32>,
    },
    Generator(GeneratorConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    IidUniform {
        n_max: u32,
        m_max: u32,
        seed: u64,
    },
    Checkerboard {
        even: (u32, u32),
        odd: (u32, u32),
    },
    SingleSpike {
        #[serde(rename = "N")]
        n: u32,
        #[serde(rename = "M")]
        m: u32,
        site: usize,
        spike_n: u32,
    },
}

impl FieldConfig {
    pub fn build(&self, geometry: TorusGeometry) -> Result<ColonyField, ColonyError> {
        match self {
            FieldConfig::Constant { n, m } => ColonyField::constant(geometry, *n, *m),
            FieldConfig::PerSite { n, m } => ColonyField::new(geometry, n.clone(), m.clone()),
            FieldConfig::Generator(g) => match g {
                GeneratorConfig::IidUniform { n_max, m_max, seed } => {
                    ColonyField::iid_uniform(geometry, *n_max, *m_max, *seed)
                }
                GeneratorConfig::Checkerboard { even, odd } => {
                    ColonyField::checkerboard(geometry, *even, *odd)
                }
                GeneratorConfig::SingleSpike {
                    n,
                    m,
                    site,
                    spike_n,
                } => ColonyField::single_spike(geometry, *n, *m, *site, *spike_n),
            },
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, ColonyError> {
        serde_json::from_str(text).map_err(|e| ColonyError::Malformed(e.to_string()))
    }

    pub fn load_json(path: &Path) -> Result<Self, ColonyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ColonyError::Malformed(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

/// `min_i sum_{|j - i| <= R} 1 / N_j` with the torus sup-norm.
pub fn non_clumping_stat(field: &ColonyField, radius: usize) -> f64 {
    let t = field.geometry().torus();
    (0..field.sites())
        .map(|i| {
            t.ball(i, radius)
                .into_iter()
                .map(|j| 1.0 / field.n[j] as f64)
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxedNonClumping {
    pub value: f64,
    /// `m = c / (2(c + lambda) + 1)`.
    pub m: f64,
}

/// `min_i sum_j N_j^-1 sum_{n=1}^{n_max} m^{2n} a_n(i, j)^2`.
///
/// `a_n` is the lattice kernel of `spec` (not the wrapped one) and the field is
/// extended periodically from the torus to Z^d.
pub fn relaxed_non_clumping(
    field: &ColonyField,
    spec: &KernelSpec,
    lambda: f64,
    n_max: usize,
) -> Result<RelaxedNonClumping, ColonyError> {
    let c = spec.total_off_origin();
    let m = c / (2.0 * (c + lambda) + 1.0);
    let radius = n_max.max(1) * spec.support_radius();
    let kernels = n_step_kernels(spec, n_max, radius)?;
    let t = field.geometry().torus();
    // weights[n][k]: sum over lattice offsets congruent to torus offset k of a_n(0, .)^2
    let weights: Vec<Vec<f64>> = kernels[1..]
        .iter()
        .map(|a| {
            let mut w = vec![0.0; t.sites()];
            for (o, p) in a.iter() {
                if p > 0.0 {
                    w[t.shift(0, &o)] += p * p;
                }
            }
            w
        })
        .collect();
    let mut value = f64::INFINITY;
    for i in 0..field.sites() {
        let mut s = 0.0;
        let mut mn = 1.0;
        for w in &weights {
            mn *= m * m;
            for (k, wk) in w.iter().enumerate() {
                if *wk > 0.0 {
                    let j = t.site(
                        &t.coords(i)
                            .iter()
                            .zip(t.coords(k))
                            .map(|(a, b)| a + b)
                            .collect::<Vec<_>>(),
                    );
                    s += mn * wk / field.n[j] as f64;
                }
            }
        }
        value = value.min(s);
    }
    Ok(RelaxedNonClumping { value, m })
}

/// Harmonic mean of the active sizes within sup-distance `radius` of `site`.
pub fn harmonic_mean_ces(field: &ColonyField, site: usize, radius: usize) -> f64 {
    let ball = field.geometry().torus().ball(site, radius);
    let inv: f64 = ball.iter().map(|&j| 1.0 / field.n[j] as f64).sum();
    ball.len() as f64 / inv
}

/// `max_i M_i / N_i`.
pub fn seedbank_strength(field: &ColonyField) -> f64 {
    (0..field.sites())
        .map(|i| 1.0 / field.ratio(i))
        .fold(0.0, f64::max)
}
