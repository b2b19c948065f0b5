mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use seedbank_lab::colony::{non_clumping_stat, ColonyField};
use seedbank_lab::dual::{all_states, rates, simulate, DualKind, DualState, SimOptions};
use seedbank_lab::experiments::Moments;
use seedbank_lab::forward::{forward_rates, ForwardState};
use seedbank_lab::kernel::{symmetrize, validate_kernel, KernelSpec, TorusGeometry};
use seedbank_lab::oracle::{
    absorption_cdf, absorption_solve, build_generator, hitting_cdf, jump_chain_absorption, lyapunov_drift,
    verify_lumping, GeneratorKind, DEFAULT_STATE_CAP,
};

use common::{nn_field, reference_rates};

fn field_strategy(max_side: usize) -> impl Strategy<Value = ColonyField> {
    (1..=max_side).prop_flat_map(|side| {
        (
            prop::collection::vec(2u32..=6, side),
            prop::collection::vec(2u32..=6, side),
        )
            .prop_map(move |(n, m)| nn_field(side, &n, &m))
    })
}

fn kind_strategy() -> impl Strategy<Value = DualKind> {
    prop::sample::select(DualKind::ALL.to_vec())
}

fn gen(kind: DualKind, f: &ColonyField, lambda: f64) -> seedbank_lab::oracle::GeneratorMatrix {
    build_generator(GeneratorKind::Dual(kind), f, lambda, DEFAULT_STATE_CAP).unwrap()
}

fn grid() -> Vec<f64> {
    vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rates_are_valid_and_match_reference(f in field_strategy(3), kind in kind_strategy(), lambda in 0.1f64..4.0) {
        for s in all_states(f.sites()).filter(|s| !s.is_absorbed()) {
            let lib = rates(kind, &s, &f, lambda).unwrap();
            prop_assert!(lib.iter().all(|(t, r)| *r > 0.0 && r.is_finite() && *t != s));
            let lib: BTreeMap<DualState, f64> = lib.into_iter().collect();
            let reference = reference_rates(kind, &s, &f, lambda);
            prop_assert_eq!(lib.len(), reference.len());
            for (t, r) in &lib {
                prop_assert!((r - reference[t]).abs() <= 1e-12 * r.max(1.0));
            }
        }
        prop_assert!(rates(kind, &DualState::Absorbed, &f, lambda).is_err());
    }

    #[test]
    fn lumping_holds(f in field_strategy(3), lambda in 0.1f64..4.0) {
        let r = verify_lumping(&f, lambda);
        prop_assert!(r.passed, "max discrepancy {}", r.max_discrepancy);
    }

    #[test]
    fn rates_commute_with_swap(f in field_strategy(3), kind in kind_strategy(), lambda in 0.1f64..4.0) {
        for s in all_states(f.sites()).filter(|s| !s.is_absorbed()) {
            let direct: BTreeMap<DualState, f64> = rates(kind, &s.swapped(), &f, lambda).unwrap().into_iter().collect();
            let mapped: BTreeMap<DualState, f64> = rates(kind, &s, &f, lambda)
                .unwrap()
                .into_iter()
                .map(|(t, r)| (t.swapped(), r))
                .collect();
            prop_assert_eq!(direct.len(), mapped.len());
            for (t, r) in &direct {
                prop_assert!((r - mapped[t]).abs() <= 1e-14 * r.max(1.0));
            }
        }
    }

    #[test]
    fn interacting_absorbs_first(f in field_strategy(2), lambda in 0.1f64..4.0) {
        let times = grid();
        let a = absorption_cdf(&gen(DualKind::InteractingRW1, &f, lambda), &times);
        let b = absorption_cdf(&gen(DualKind::AuxiliaryRW2, &f, lambda), &times);
        for (x, y) in a.iter().zip(&b) {
            for (u, v) in x.iter().zip(y) {
                prop_assert!(u - v >= -1e-10);
            }
        }
    }

    #[test]
    fn series_identity(f in field_strategy(3), lambda in 0.1f64..4.0, independent in any::<bool>()) {
        let kind = if independent { DualKind::IndependentRW } else { DualKind::AuxiliaryRW2 };
        let g = gen(kind, &f, lambda);
        let sol = absorption_solve(&g).unwrap();
        let model = seedbank_lab::dual::DualModel::new(kind, &f, lambda);
        for x in 0..g.len() - 1 {
            let s: f64 = (0..f.sites()).map(|i| model.first_jump_absorption(i) * sol.visits[x][i]).sum();
            prop_assert!((s - 1.0).abs() < 1e-8, "state {} gives {}", x, s);
        }
    }

    #[test]
    fn interchange_of_activity_labels(f in field_strategy(2), kind in kind_strategy(), lambda in 0.1f64..4.0) {
        let g = gen(kind, &f, lambda);
        let sites = f.sites();
        let times = grid();
        let cdf = absorption_cdf(&g, &times);
        for i in 0..sites {
            let p00 = DualState::pair(i, false, i, false).index(sites);
            let p10 = DualState::pair(i, true, i, false).index(sites);
            let p01 = DualState::pair(i, false, i, true).index(sites);
            for row in &cdf {
                prop_assert!((row[p10] - row[p01]).abs() <= 1e-12);
                prop_assert!(row[p00] <= row[p10] + 1e-12);
            }
            // two dormant particles at one site must wake one of them first, and the
            // waking jump lands on the mixed state
            let j00 = jump_chain_absorption(&g, p00, 40);
            let j10 = jump_chain_absorption(&g, p10, 40);
            for n in 0..40 {
                prop_assert!((j00[n + 1] - j10[n]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn hitting_times_agree(f in field_strategy(2), lambda in 0.1f64..4.0) {
        let sites = f.sites();
        let set: Vec<bool> = (0..DualState::count(sites))
            .map(|x| {
                let s = DualState::from_index(x, sites);
                s.is_absorbed() || s.in_hitting_set()
            })
            .collect();
        let times = grid();
        let a = hitting_cdf(&gen(DualKind::InteractingRW1, &f, lambda), &set, &times);
        let b = hitting_cdf(&gen(DualKind::AuxiliaryRW2, &f, lambda), &set, &times);
        for (x, y) in a.iter().zip(&b) {
            for (u, v) in x.iter().zip(y) {
                prop_assert!((u - v).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn forward_relabel_symmetry(
        f in field_strategy(3),
        lambda in 0.1f64..4.0,
        fractions in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 3),
    ) {
        let s = ForwardState {
            active: (0..f.sites()).map(|i| (fractions[i].0 * f.active_size(i) as f64).round() as u32).collect(),
            dormant: (0..f.sites()).map(|i| (fractions[i].1 * f.dormant_size(i) as f64).round() as u32).collect(),
        };
        let key = |v: &mut Vec<(ForwardState, f64)>| {
            v.sort_by(|a, b| a.0.active.cmp(&b.0.active).then(a.0.dormant.cmp(&b.0.dormant)));
        };
        let mut mapped: Vec<(ForwardState, f64)> =
            forward_rates(&s, &f, lambda).into_iter().map(|(t, r)| (t.relabelled(&f), r)).collect();
        let mut direct = forward_rates(&s.relabelled(&f), &f, lambda);
        key(&mut mapped);
        key(&mut direct);
        prop_assert_eq!(mapped, direct);
    }

    #[test]
    fn lyapunov_drift_is_bounded(side in 1usize..=6, n in 2u32..=5, m in 2u32..=5, kind in kind_strategy(), lambda in 0.1f64..4.0) {
        let spec = KernelSpec::nearest_neighbour(1, 0.5);
        let f = ColonyField::constant(TorusGeometry::new(&spec, side).unwrap(), n, m).unwrap();
        let mu1 = validate_kernel(&spec).unwrap().mu1;
        prop_assert!(lyapunov_drift(kind, &f, lambda, mu1) <= 1e-12);
    }

    #[test]
    fn symmetrized_kernels_are_even(right in 0.01f64..0.5, far in 0.0f64..0.3) {
        let left = 0.5 - right;
        let spec = KernelSpec::new(1, [(vec![0], 0.5), (vec![1], right), (vec![-1], left), (vec![2], far)]).unwrap();
        let s = symmetrize(&spec);
        prop_assert!(s.is_symmetric());
        prop_assert!((s.total_off_origin() - spec.total_off_origin()).abs() < 1e-14);
        prop_assert_eq!(symmetrize(&s), s.clone());
        for (o, r) in s.entries() {
            let neg: Vec<i64> = o.iter().map(|x| -x).collect();
            prop_assert_eq!(r, s.rate(&neg));
        }
    }

    #[test]
    fn non_clumping_grows_with_radius(f in field_strategy(5), r in 0usize..3) {
        prop_assert!(non_clumping_stat(&f, r + 1) >= non_clumping_stat(&f, r));
    }

    #[test]
    fn simulation_is_deterministic(kind in kind_strategy(), seed in any::<u64>(), side in 2usize..6) {
        let f = nn_field(side, &vec![3; side], &vec![2; side]);
        let opts = SimOptions::new(50.0);
        let init = DualState::pair(0, true, side - 1, false);
        prop_assert_eq!(simulate(kind, init, &f, 1.0, &opts, seed), simulate(kind, init, &f, 1.0, &opts, seed));
    }

    #[test]
    fn moments_merge_matches_direct(values in prop::collection::vec(-1e3f64..1e3, 2..600), cut in 0usize..600) {
        let cut = cut.min(values.len());
        let (a, b) = values.split_at(cut);
        let merged = Moments::merge(Moments::of(a), Moments::of(b));
        let mut direct = Moments::default();
        for &x in &values {
            direct.push(x);
        }
        prop_assert_eq!(merged.n, direct.n);
        prop_assert!((merged.mean - direct.mean).abs() <= 1e-9);
        prop_assert!((merged.variance() - direct.variance()).abs() <= 1e-7 * direct.variance().max(1.0));
    }
}
