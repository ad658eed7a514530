#![allow(dead_code)]

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};

use landmark_core::bandit::{UcbController, DEFAULT_EXPLORATION};
use landmark_core::env::build_random_mdp;
use landmark_core::{QTable, RngStream, StateId, TabularMdp};

/// Shortest path lengths into `target` over edges with positive probability.
/// On deterministic MDPs these are the exact hitting times.
pub fn bfs_into(mdp: &TabularMdp, target: StateId) -> Vec<f64> {
    let n = mdp.n_states();
    let mut preds = vec![Vec::new(); n];
    for s in mdp.states() {
        for a in mdp.actions() {
            for &(t, p) in mdp.successors(s, a) {
                if p > 0.0 {
                    preds[t.0].push(s.0);
                }
            }
        }
    }
    let mut dist = vec![f64::INFINITY; n];
    dist[target.0] = 0.0;
    let mut queue = VecDeque::from([target.0]);
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if dist[s].is_infinite() {
                dist[s] = dist[t] + 1.0;
                queue.push_back(s);
            }
        }
    }
    dist
}

/// Expected steps to `target` under the greedy policy of `q`, by a direct
/// dense linear solve over the states `q` values finitely.
pub fn evaluate_greedy(mdp: &TabularMdp, q: &QTable, target: StateId) -> Vec<f64> {
    let n = mdp.n_states();
    let idx: Vec<usize> = (0..n)
        .filter(|&s| s != target.0 && q.min(StateId(s)).is_finite())
        .collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &s) in idx.iter().enumerate() {
        pos[s] = i;
    }
    let m = idx.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    let b = DVector::<f64>::from_element(m, 1.0);
    for (i, &s) in idx.iter().enumerate() {
        let act = q.greedy(StateId(s));
        for &(t, p) in mdp.successors(StateId(s), act) {
            if t != target {
                assert_ne!(
                    pos[t.0],
                    usize::MAX,
                    "greedy policy leaves the proper region"
                );
                a[(i, pos[t.0])] -= p;
            }
        }
    }
    let x = a
        .lu()
        .solve(&b)
        .expect("policy evaluation system is singular");
    let mut v = vec![f64::INFINITY; n];
    v[target.0] = 0.0;
    for (i, &s) in idx.iter().enumerate() {
        v[s] = x[i];
    }
    v
}

pub fn max_bellman_residual(mdp: &TabularMdp, values: &[f64], target: StateId) -> f64 {
    let mut worst: f64 = 0.0;
    for s in mdp.states() {
        if s == target || !values[s.0].is_finite() {
            continue;
        }
        let best = mdp
            .actions()
            .map(|a| {
                1.0 + mdp
                    .successors(s, a)
                    .iter()
                    .map(|&(t, p)| p * values[t.0])
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((best - values[s.0]).abs());
    }
    worst
}

/// Strongly connected random MDPs small enough for exhaustive checks.
pub fn random_mdp_strategy() -> impl Strategy<Value = TabularMdp> {
    (3usize..12, 2usize..5, 2usize..4, any::<u64>()).prop_map(|(n, na, deg, seed)| {
        build_random_mdp(n, na, deg.min(n), seed).expect("random MDP")
    })
}

/// Binomial 3σ acceptance for an empirical count.
pub fn within_3_sigma(count: usize, draws: usize, p: f64) -> bool {
    let mean = draws as f64 * p;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= 3.0 * sd
}

/// Fraction of pulls on arm 0 after `rounds` episodes when arm 0 takes `gap`
/// fewer steps on average than arm 1.
pub fn two_arm_share(gap: f64, noise: f64, rounds: usize, seed: u64) -> f64 {
    let mut ucb = UcbController::new(2, DEFAULT_EXPLORATION).unwrap();
    let mut rng = RngStream::new(seed);
    let base = 100.0;
    let arms = [
        Normal::new(base, noise).unwrap(),
        Normal::new(base + gap, noise).unwrap(),
    ];
    let mut best = 0usize;
    for _ in 0..rounds {
        let k = ucb.select();
        let steps = arms[k].sample(&mut rng).round().max(1.0) as usize;
        ucb.record(k, steps);
        best += usize::from(k == 0);
    }
    best as f64 / rounds as f64
}
