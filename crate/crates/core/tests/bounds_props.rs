mod common;

use proptest::prelude::*;

use landmark_core::bounds::{
    bound, feasible, feasible_with_witnesses, oracle_feasible, tightness_witness, Endpoint,
};
use landmark_core::oracle::{CHECK_SLACK, DEFAULT_TOL};
use landmark_core::{
    build_cover, ActionId, HittingTimes, LandmarkCover, MetricKind, QTable, RngStream, StateId,
    TabularMdp,
};

use common::random_mdp_strategy;

const METRICS: [MetricKind; 2] = [MetricKind::RoundTrip, MetricKind::MaxOneWay];

fn optimal_actions(
    mdp: &TabularMdp,
    times: &HittingTimes,
    s: StateId,
    g: StateId,
) -> Vec<ActionId> {
    let q = QTable::from_values(mdp, &times.value_table(g));
    let best = q.min(s);
    mdp.actions()
        .filter(|&a| q.get(s, a) <= best + CHECK_SLACK)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bounds_contain_true_value(mdp in random_mdp_strategy(), eta in 0.5f64..15.0, seed in any::<u64>()) {
        let times = HittingTimes::compute(&mdp, DEFAULT_TOL).unwrap();
        for metric in METRICS {
            let cover = build_cover(&mdp, &times, eta, metric, &mut RngStream::new(seed)).unwrap();
            for g in mdp.states() {
                for s in mdp.states() {
                    let b = bound(&cover, s, g).unwrap();
                    let v = times.get(s, g);
                    prop_assert!(b.lower <= b.upper + CHECK_SLACK);
                    prop_assert!(b.contains(v, CHECK_SLACK), "{metric} s={s} g={g}: {v} not in [{}, {}]", b.lower, b.upper);
                }
            }
        }
    }

    #[test]
    fn pruning_keeps_optimal_actions(mdp in random_mdp_strategy(), eta in 0.5f64..15.0, seed in any::<u64>()) {
        let times = HittingTimes::compute(&mdp, DEFAULT_TOL).unwrap();
        for metric in METRICS {
            let cover = build_cover(&mdp, &times, eta, metric, &mut RngStream::new(seed)).unwrap();
            for g in mdp.states() {
                for s in mdp.states().filter(|&s| s != g) {
                    let set = feasible(&cover, s, g).unwrap();
                    let exact = oracle_feasible(&cover, s, g, times.get(s, g));
                    prop_assert!(exact.is_subset(&set), "{metric} s={s} g={g}");
                    for a in optimal_actions(&mdp, &times, s, g) {
                        prop_assert!(exact.contains(a), "oracle set drops optimal {a:?} at s={s} g={g}");
                        prop_assert!(set.contains(a), "{metric} drops optimal {a:?} at s={s} g={g}");
                    }
                }
            }
        }
    }

    #[test]
    fn more_radius_never_prunes_more(mdp in random_mdp_strategy(), eta in 0.5f64..10.0, extra in 0.0f64..10.0, seed in any::<u64>()) {
        let times = HittingTimes::compute(&mdp, DEFAULT_TOL).unwrap();
        for metric in METRICS {
            let cover = build_cover(&mdp, &times, eta, metric, &mut RngStream::new(seed)).unwrap();
            let mut wide = cover.clone();
            wide.eta = eta + extra;
            for g in mdp.states() {
                let witnesses = cover.witness_indices(g);
                for s in mdp.states() {
                    let narrow = feasible_with_witnesses(&cover, s, g, &witnesses);
                    let broad = feasible_with_witnesses(&wide, s, g, &witnesses);
                    prop_assert!(narrow.is_subset(&broad));
                }
            }
        }
    }
}

#[test]
fn tightness_endpoints_are_attained() {
    for case in tightness_witness() {
        assert!(case.cover.verify().covered, "{}", case.name);
        let b = bound(&case.cover, case.s, case.g).unwrap();
        let (hit, other) = match case.endpoint {
            Endpoint::Lower => (b.lower, b.upper),
            Endpoint::Upper => (b.upper, b.lower),
        };
        assert_eq!(hit, case.true_value, "{}", case.name);
        assert_ne!(other, case.true_value, "{}", case.name);
    }
}

#[test]
fn tightness_radius_is_minimal() {
    for case in tightness_witness() {
        let eta = case.cover.eta;
        let narrower = case.with_eta(eta - 1.0).unwrap();
        assert!(!narrower.cover.verify().covered, "{}", case.name);
        if case.endpoint == Endpoint::Upper {
            let wider = case.with_eta(eta + 1.0).unwrap();
            let b = bound(&wider.cover, wider.s, wider.g).unwrap();
            assert!(b.upper > case.true_value, "{}", case.name);
        }
    }
}

#[test]
fn singleton_cover_bounds_are_exact_at_landmark_goals() {
    let mdp = landmark_core::env::build_random_mdp(12, 3, 2, 9).unwrap();
    let times = HittingTimes::compute(&mdp, DEFAULT_TOL).unwrap();
    let all: Vec<StateId> = mdp.states().collect();
    let cover =
        LandmarkCover::from_landmarks(&mdp, &times, &all, 1e-3, MetricKind::RoundTrip).unwrap();
    for g in mdp.states() {
        for s in mdp.states() {
            let b = bound(&cover, s, g).unwrap();
            assert!((b.lower - times.get(s, g)).abs() < CHECK_SLACK);
            assert!((b.upper - times.get(s, g)).abs() < 2e-3);
        }
    }
}
