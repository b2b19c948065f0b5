use std::collections::BTreeMap;
use std::fmt;

use super::{DualError, DualState};
use crate::colony::ColonyField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteCount {
    pub site: usize,
    pub active: u8,
    pub dormant: u8,
}

/// Occupation numbers of a two-particle configuration, or absorbed.
/// Occupied sites are kept sorted, so equal configurations compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LumpedConfig {
    Occupied(Vec<SiteCount>),
    Absorbed,
}

impl LumpedConfig {
    fn from_map(map: BTreeMap<usize, (u8, u8)>) -> Self {
        LumpedConfig::Occupied(
            map.into_iter()
                .filter(|(_, (n, m))| n + m > 0)
                .map(|(site, (active, dormant))| SiteCount {
                    site,
                    active,
                    dormant,
                })
                .collect(),
        )
    }

    fn to_map(&self) -> BTreeMap<usize, (u8, u8)> {
        match self {
            LumpedConfig::Occupied(v) => v.iter().map(|s| (s.site, (s.active, s.dormant))).collect(),
            LumpedConfig::Absorbed => BTreeMap::new(),
        }
    }

    /// `(n_i, m_i)` at `site`.
    pub fn at(&self, site: usize) -> (u8, u8) {
        match self {
            LumpedConfig::Occupied(v) => v
                .iter()
                .find(|s| s.site == site)
                .map(|s| (s.active, s.dormant))
                .unwrap_or((0, 0)),
            LumpedConfig::Absorbed => (0, 0),
        }
    }

    pub fn mass(&self) -> u32 {
        match self {
            LumpedConfig::Occupied(v) => v.iter().map(|s| (s.active + s.dormant) as u32).sum(),
            LumpedConfig::Absorbed => 0,
        }
    }
}

impl fmt::Display for LumpedConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LumpedConfig::Absorbed => f.write_str("ABS"),
            LumpedConfig::Occupied(v) => {
                let parts: Vec<String> = v
                    .iter()
                    .map(|s| format!("{}:{}/{}", s.site, s.active, s.dormant))
                    .collect();
                f.write_str(&parts.join(" "))
            }
        }
    }
}

/// Forgets particle labels: `[(i, a), (j, b)]` becomes `n_k = a d_ki + b d_kj`,
/// `m_k = (1 - a) d_ki + (1 - b) d_kj`.
pub fn lump(state: &DualState) -> LumpedConfig {
    match state {
        DualState::Absorbed => LumpedConfig::Absorbed,
        DualState::Pair(p, q) => {
            let mut map = BTreeMap::new();
            for x in [p, q] {
                let e = map.entry(x.site).or_insert((0u8, 0u8));
                if x.active {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
            LumpedConfig::from_map(map)
        }
    }
}

fn moved(config: &LumpedConfig, changes: &[(usize, i8, i8)]) -> LumpedConfig {
    let mut map = config.to_map();
    for &(site, dn, dm) in changes {
        let e = map.entry(site).or_insert((0, 0));
        e.0 = (e.0 as i8 + dn) as u8;
        e.1 = (e.1 as i8 + dm) as u8;
    }
    LumpedConfig::from_map(map)
}

/// Outgoing rates of the configuration dual, sorted by target.
pub fn lumped_rates(
    config: &LumpedConfig,
    field: &ColonyField,
    lambda: f64,
) -> Result<Vec<(LumpedConfig, f64)>, DualError> {
    let LumpedConfig::Occupied(occupied) = config else {
        return Err(DualError::InvalidState);
    };
    let g = field.geometry();
    let nn = |i: usize| field.active_size(i) as f64;
    let mm = |i: usize| field.dormant_size(i) as f64;
    let mut out: BTreeMap<LumpedConfig, f64> = BTreeMap::new();
    let mut absorb = 0.0;
    for s in occupied {
        let i = s.site;
        let n = s.active as f64;
        let m = s.dormant as f64;
        absorb += 2.0 * g.self_rate() / nn(i) * (n * (n - 1.0) / 2.0);
        for t in occupied {
            if t.site != i {
                absorb += n * g.rate(i, t.site) * t.active as f64 / nn(t.site);
            }
        }
        if s.active > 0 {
            let r = lambda * n * (mm(i) - m) / mm(i);
            *out.entry(moved(config, &[(i, -1, 1)])).or_insert(0.0) += r;
            for &(j, a) in g.neighbours(i) {
                let nj = config.at(j).0 as f64;
                let r = n * a * (nn(j) - nj) / nn(j);
                *out.entry(moved(config, &[(i, -1, 0), (j, 1, 0)])).or_insert(0.0) += r;
            }
        }
        if s.dormant > 0 {
            let r = lambda * (nn(i) - n) * m / mm(i);
            *out.entry(moved(config, &[(i, 1, -1)])).or_insert(0.0) += r;
        }
    }
    *out.entry(LumpedConfig::Absorbed).or_insert(0.0) += absorb;
    Ok(out.into_iter().filter(|(_, r)| *r > 0.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, TorusGeometry};

    fn field() -> ColonyField {
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), 3).unwrap();
        ColonyField::new(g, vec![2, 3, 2], vec![2, 4, 3]).unwrap()
    }

    #[test]
    fn phi_examples() {
        let l = lump(&DualState::pair(0, true, 2, false));
        assert_eq!(l.at(0), (1, 0));
        assert_eq!(l.at(2), (0, 1));
        assert_eq!(l.at(1), (0, 0));
        assert_eq!(l.mass(), 2);
        let s = DualState::pair(1, false, 0, true);
        assert_eq!(lump(&s), lump(&s.swapped()));
        assert_eq!(lump(&DualState::Absorbed), LumpedConfig::Absorbed);
    }

    #[test]
    fn two_active_on_site() {
        let f = field();
        let c = lump(&DualState::diagonal(0));
        let r = lumped_rates(&c, &f, 1.0).unwrap();
        let abs = r.iter().find(|e| e.0 == LumpedConfig::Absorbed).unwrap().1;
        assert!((abs - 2.0 * f.geometry().self_rate() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn both_dormant_never_absorb() {
        let f = field();
        let c = lump(&DualState::pair(1, false, 2, false));
        let r = lumped_rates(&c, &f, 1.0).unwrap();
        assert!(r.iter().all(|e| e.0 != LumpedConfig::Absorbed));
        assert!(lumped_rates(&LumpedConfig::Absorbed, &f, 1.0).is_err());
    }
}
