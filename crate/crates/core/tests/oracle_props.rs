mod common;

use proptest::prelude::*;

use landmark_core::env::{
    build_cliff_walker, build_deterministic_grid, build_grid_world, cliff_goal, cliff_start,
};
use landmark_core::mdp::STOCHASTIC_TOL;
use landmark_core::oracle::{solve, DEFAULT_TOL};
use landmark_core::{GoalTask, HittingTimes, RngStream, StateId, TabularMdp};

use common::{
    bfs_into, evaluate_greedy, max_bellman_residual, random_mdp_strategy, within_3_sigma,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernels_are_stochastic(mdp in random_mdp_strategy()) {
        prop_assert!(mdp.validate().is_empty());
        for s in mdp.states() {
            for a in mdp.actions() {
                let sum: f64 = mdp.successors(s, a).iter().map(|e| e.1).sum();
                prop_assert!((sum - 1.0).abs() <= STOCHASTIC_TOL);
            }
        }
    }

    #[test]
    fn solve_matches_linear_policy_evaluation(mdp in random_mdp_strategy(), g in 0usize..12) {
        let g = StateId(g % mdp.n_states());
        let (v, q) = solve(&mdp, g, DEFAULT_TOL).unwrap();
        prop_assert!(max_bellman_residual(&mdp, &v.values, g) < 1e-6);
        let exact = evaluate_greedy(&mdp, &q, g);
        for s in mdp.states() {
            prop_assert!((exact[s.0] - v.get(s)).abs() < 1e-6, "state {s}: {} vs {}", exact[s.0], v.get(s));
        }
    }

    #[test]
    fn deterministic_grids_equal_bfs(w in 1usize..7, h in 1usize..7, g in 0usize..49) {
        let mdp = build_deterministic_grid(w, h).unwrap();
        let g = StateId(g % mdp.n_states());
        let (v, _) = solve(&mdp, g, DEFAULT_TOL).unwrap();
        prop_assert_eq!(v.values, bfs_into(&mdp, g));
    }

    #[test]
    fn every_step_costs_one(mdp in random_mdp_strategy(), seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let task = GoalTask { goal: StateId(mdp.n_states() - 1) };
        let mut s = StateId(0);
        for t in 0..200 {
            if s == task.goal { break; }
            let out = mdp.step(s, landmark_core::ActionId(t % mdp.n_actions()), task, &mut rng).unwrap();
            prop_assert_eq!(out.reward, -1.0);
            prop_assert_eq!(out.done, out.next == task.goal);
            s = out.next;
        }
    }
}

#[test]
fn random_mdps_are_strongly_connected() {
    for seed in 0..20 {
        let mdp = landmark_core::env::build_random_mdp(20, 4, 3, seed).unwrap();
        for g in mdp.states() {
            assert!(
                bfs_into(&mdp, g).iter().all(|d| d.is_finite()),
                "seed {seed}, goal {g}"
            );
        }
    }
}

#[test]
fn cliff_start_value_matches_linear_solve() {
    let mdp = build_cliff_walker();
    let g = cliff_goal();
    let (v, q) = solve(&mdp, g, DEFAULT_TOL).unwrap();
    let exact = evaluate_greedy(&mdp, &q, g);
    assert!((exact[cliff_start().0] - v.get(cliff_start())).abs() < 1e-6);
    assert!(max_bellman_residual(&mdp, &v.values, g) < 1e-6);
}

fn rollout_mean(mdp: &TabularMdp, g: StateId, start: StateId, episodes: usize) -> (f64, f64) {
    let (_, q) = solve(mdp, g, DEFAULT_TOL).unwrap();
    let task = GoalTask { goal: g };
    let mut rng = RngStream::new(17);
    let mut lens = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut s = start;
        let mut n = 0.0;
        while s != g {
            s = mdp.step(s, q.greedy(s), task, &mut rng).unwrap().next;
            n += 1.0;
        }
        lens.push(n);
    }
    let mean = lens.iter().sum::<f64>() / episodes as f64;
    let var = lens.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (episodes - 1) as f64;
    (mean, (var / episodes as f64).sqrt())
}

#[test]
fn greedy_policy_monte_carlo_matches_values() {
    let mdp = build_cliff_walker();
    let g = cliff_goal();
    let (v, _) = solve(&mdp, g, DEFAULT_TOL).unwrap();
    let (mean, se) = rollout_mean(&mdp, g, cliff_start(), 10_000);
    let want = v.get(cliff_start());
    assert!(
        (mean - want).abs() <= 2.0 * se,
        "mean {mean} vs {want} (se {se})"
    );
}

#[test]
fn same_seed_same_trajectory() {
    let mdp = build_cliff_walker();
    let task = GoalTask { goal: cliff_goal() };
    let walk = |seed| {
        let mut rng = RngStream::new(seed);
        let mut s = mdp.sample_initial(task, &mut rng).unwrap();
        let mut path = vec![s];
        for t in 0..300 {
            let out = mdp
                .step(s, landmark_core::ActionId(t % 4), task, &mut rng)
                .unwrap();
            s = out.next;
            path.push(s);
            if out.done {
                break;
            }
        }
        path
    };
    assert_eq!(walk(42), walk(42));
    assert_ne!(walk(42), walk(43));
}

#[test]
fn uniform_initial_excludes_goal() {
    let mdp = build_deterministic_grid(10, 1).unwrap();
    let task = GoalTask { goal: StateId(3) };
    let mut rng = RngStream::new(7);
    let draws = 90_000;
    let mut counts = [0usize; 10];
    for _ in 0..draws {
        counts[mdp.sample_initial(task, &mut rng).unwrap().0] += 1;
    }
    assert_eq!(counts[3], 0);
    for (s, &c) in counts.iter().enumerate().filter(|(s, _)| *s != 3) {
        assert!(within_3_sigma(c, draws, 1.0 / 9.0), "state {s}: {c}");
    }
}

#[test]
fn built_environments_have_expected_hazards() {
    let cliff = build_cliff_walker();
    assert!(cliff.validate().is_empty());
    assert_eq!(cliff.states_labelled("cliff").len(), 10);
    let grid = build_grid_world();
    assert!(grid.validate().is_empty());
    assert_eq!(grid.states_labelled("sticky").len(), 1);
    assert_eq!(grid.n_states(), 1000);
}

#[test]
fn all_pairs_agree_with_single_solves() {
    let mdp = landmark_core::env::build_random_mdp(15, 3, 2, 4).unwrap();
    let times = HittingTimes::compute(&mdp, DEFAULT_TOL).unwrap();
    for g in mdp.states() {
        let (v, _) = solve(&mdp, g, DEFAULT_TOL).unwrap();
        for s in mdp.states() {
            assert_eq!(times.get(s, g), v.get(s));
        }
    }
}
