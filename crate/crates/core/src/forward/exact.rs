use nalgebra::{DMatrix, DVector};

use super::{site_rates, ForwardEvent, ForwardState};
use crate::colony::ColonyField;

/// Largest state space [`ForwardChain`] will enumerate.
pub const FORWARD_STATE_CAP: usize = 4096;

/// The forward process on a tiny field as an explicit finite chain.
pub struct ForwardChain<'a> {
    field: &'a ColonyField,
    lambda: f64,
    states: Vec<ForwardState>,
}

fn binomial_pmf(n: u32, k: u32, p: f64) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c *= (n - j) as f64 / (j + 1) as f64;
    }
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

impl<'a> ForwardChain<'a> {
    pub fn new(field: &'a ColonyField, lambda: f64) -> Option<Self> {
        let mut count: usize = 1;
        for i in 0..field.sites() {
            count = count.checked_mul(
                (field.active_size(i) as usize + 1) * (field.dormant_size(i) as usize + 1),
            )?;
            if count > FORWARD_STATE_CAP {
                return None;
            }
        }
        let mut states = vec![ForwardState::zeros(field)];
        for i in 0..field.sites() {
            let mut next = Vec::with_capacity(states.len());
            for s in &states {
                for x in 0..=field.active_size(i) {
                    for y in 0..=field.dormant_size(i) {
                        let mut t = s.clone();
                        t.active[i] = x;
                        t.dormant[i] = y;
                        next.push(t);
                    }
                }
            }
            states = next;
        }
        Some(ForwardChain {
            field,
            lambda,
            states,
        })
    }

    pub fn states(&self) -> &[ForwardState] {
        &self.states
    }

    fn index(&self, s: &ForwardState) -> usize {
        let mut k = 0;
        for i in 0..self.field.sites() {
            let (n, m) = (self.field.active_size(i) as usize, self.field.dormant_size(i) as usize);
            k = k * (n + 1) * (m + 1) + s.active[i] as usize * (m + 1) + s.dormant[i] as usize;
        }
        k
    }

    /// Expected fixation time from every state, by a dense solve on the non-fixed states.
    pub fn expected_fixation_times(&self) -> Vec<f64> {
        let n = self.states.len();
        let fixed = |s: &ForwardState| {
            *s == ForwardState::zeros(self.field) || *s == ForwardState::full(self.field)
        };
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for (k, s) in self.states.iter().enumerate() {
            a[(k, k)] = 1.0;
            if fixed(s) {
                continue;
            }
            b[k] = 1.0;
            let mut total = 0.0;
            for i in 0..self.field.sites() {
                let rates = site_rates(s, self.field, self.lambda, i);
                for (e, r) in ForwardEvent::ALL.iter().zip(rates) {
                    if r > 0.0 {
                        let t = super::apply(s, i, *e);
                        a[(k, self.index(&t))] -= r;
                        total += r;
                    }
                }
            }
            a[(k, k)] = total + a[(k, k)] - 1.0;
        }
        a.lu()
            .solve(&b)
            .expect("fixation is certain on a finite field")
            .as_slice()
            .to_vec()
    }

    /// Expected fixation time from independent binomial initial counts with density `theta`.
    pub fn expected_fixation_time(&self, theta: f64) -> f64 {
        let times = self.expected_fixation_times();
        self.states
            .iter()
            .zip(times)
            .map(|(s, t)| {
                let p: f64 = (0..self.field.sites())
                    .map(|i| {
                        binomial_pmf(self.field.active_size(i), s.active[i], theta)
                            * binomial_pmf(self.field.dormant_size(i), s.dormant[i], theta)
                    })
                    .product();
                p * t
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, TorusGeometry};

    #[test]
    fn single_colony_has_nine_states() {
        let g = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), 1).unwrap();
        let f = ColonyField::constant(g, 2, 2).unwrap();
        let chain = ForwardChain::new(&f, 1.0).unwrap();
        assert_eq!(chain.states().len(), 9);
        let t = chain.expected_fixation_times();
        assert_eq!(t[0], 0.0);
        assert_eq!(t[8], 0.0);
        // type swap symmetry of the chain
        for (k, s) in chain.states().iter().enumerate() {
            let r = s.relabelled(&f);
            assert!((t[k] - t[chain.index(&r)]).abs() < 1e-10);
        }
        assert!(chain.expected_fixation_time(0.5) > 0.0);
    }
}
