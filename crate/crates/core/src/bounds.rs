//! Value bounds from a landmark cover and the action-pruning sets built on them.
//!
//! For a goal `g` every witness landmark `ℓ` (one with `d(g, ℓ) ≤ η`) brackets
//! the unknown hitting time `|V^{g*}(s)|`:
//!
//! ```text
//! round trip:   [max(0, V_ℓ(s) - V_ℓ(g)),  V_ℓ(s) - V_ℓ(g) + η]
//! max one-way:  [max(0, V_ℓ(s) - V_ℓ(g)),  V_ℓ(s) + η]
//! ```
//!
//! where `V_ℓ(x) = |V^{ℓ*}(x)|`. Intervals from different witnesses are
//! intersected.

use serde::{Deserialize, Serialize};

use crate::cover::{LandmarkCover, MetricKind};
use crate::env::build_deterministic_grid;
use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp};
use crate::oracle::{HittingTimes, CHECK_SLACK, DEFAULT_TOL};

/// Added to the right-hand side of every feasibility test so solver
/// round-off never prunes an optimal action.
pub const FEASIBILITY_SLACK: f64 = CHECK_SLACK;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueBound {
    pub lower: f64,
    pub upper: f64,
    /// Witness giving the smallest upper bound.
    pub witness_landmark: StateId,
}

impl ValueBound {
    pub fn contains(&self, v: f64, slack: f64) -> bool {
        v >= self.lower - slack && v <= self.upper + slack
    }
}

fn require_metric(cover: &LandmarkCover, expected: MetricKind) -> Result<()> {
    if cover.metric == expected {
        Ok(())
    } else {
        Err(Error::MetricMismatch {
            expected,
            actual: cover.metric,
        })
    }
}

fn intersect(
    cover: &LandmarkCover,
    s: StateId,
    g: StateId,
    upper: impl Fn(f64, f64) -> f64,
) -> Result<ValueBound> {
    let witnesses = cover.witness_indices(g);
    let mut out: Option<ValueBound> = None;
    for k in witnesses {
        let t = &cover.tables[k];
        let vs = t.to_landmark.get(s);
        let vg = t.to_landmark.get(g);
        let lo = (vs - vg).max(0.0);
        let hi = upper(vs, vg);
        out = Some(match out {
            None => ValueBound {
                lower: lo,
                upper: hi,
                witness_landmark: t.landmark,
            },
            Some(b) => ValueBound {
                lower: b.lower.max(lo),
                upper: b.upper.min(hi),
                witness_landmark: if hi < b.upper {
                    t.landmark
                } else {
                    b.witness_landmark
                },
            },
        });
    }
    out.ok_or(Error::NoWitness(g))
}

/// Bracket on `|V^{g*}(s)|` from a round-trip cover.
pub fn bound_rt(cover: &LandmarkCover, s: StateId, g: StateId) -> Result<ValueBound> {
    require_metric(cover, MetricKind::RoundTrip)?;
    let eta = cover.eta;
    intersect(cover, s, g, |vs, vg| vs - vg + eta)
}

/// Bracket on `|V^{g*}(s)|` from a max one-way cover.
pub fn bound_inf(cover: &LandmarkCover, s: StateId, g: StateId) -> Result<ValueBound> {
    require_metric(cover, MetricKind::MaxOneWay)?;
    let eta = cover.eta;
    intersect(cover, s, g, |vs, _| vs + eta)
}

/// Dispatches on the cover's metric.
pub fn bound(cover: &LandmarkCover, s: StateId, g: StateId) -> Result<ValueBound> {
    match cover.metric {
        MetricKind::RoundTrip => bound_rt(cover, s, g),
        MetricKind::MaxOneWay => bound_inf(cover, s, g),
    }
}

/// A subset of the action space stored as a mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionSet {
    mask: Vec<bool>,
}

impl ActionSet {
    pub fn all(n_actions: usize) -> Self {
        Self {
            mask: vec![true; n_actions],
        }
    }

    pub fn none(n_actions: usize) -> Self {
        Self {
            mask: vec![false; n_actions],
        }
    }

    #[inline]
    pub fn contains(&self, a: ActionId) -> bool {
        self.mask[a.0]
    }

    pub fn insert(&mut self, a: ActionId) {
        self.mask[a.0] = true;
    }

    pub fn remove(&mut self, a: ActionId) {
        self.mask[a.0] = false;
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn is_subset(&self, other: &ActionSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn iter(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(a, _)| ActionId(a))
    }

    pub fn n_actions(&self) -> usize {
        self.mask.len()
    }
}

/// Actions consistent with an oracle value `o(s, g)`, checked against every
/// landmark. Test-only in practice: nobody has the oracle at run time.
pub fn oracle_feasible(
    cover: &LandmarkCover,
    s: StateId,
    g: StateId,
    oracle_value: f64,
) -> ActionSet {
    let mut set = ActionSet::all(cover.n_actions);
    for t in &cover.tables {
        let rhs = t.to_landmark.get(g) + oracle_value + FEASIBILITY_SLACK;
        for a in 0..cover.n_actions {
            if t.q.get(s, ActionId(a)) > rhs {
                set.remove(ActionId(a));
            }
        }
    }
    set
}

/// Feasible set against an explicit witness list (indices into the cover).
/// Uses the cover's metric to pick the right-hand side.
pub fn feasible_with_witnesses(
    cover: &LandmarkCover,
    s: StateId,
    g: StateId,
    witnesses: &[usize],
) -> ActionSet {
    let mut set = ActionSet::all(cover.n_actions);
    for &k in witnesses {
        let t = &cover.tables[k];
        let vs = t.to_landmark.get(s);
        let rhs = match cover.metric {
            MetricKind::RoundTrip => vs + cover.eta,
            MetricKind::MaxOneWay => t.to_landmark.get(g) + vs + cover.eta,
        } + FEASIBILITY_SLACK;
        for a in 0..cover.n_actions {
            if t.q.get(s, ActionId(a)) > rhs {
                set.remove(ActionId(a));
            }
        }
    }
    set
}

fn feasible_checked(
    cover: &LandmarkCover,
    s: StateId,
    g: StateId,
    metric: MetricKind,
) -> Result<ActionSet> {
    require_metric(cover, metric)?;
    let witnesses = cover.witness_indices(g);
    if witnesses.is_empty() {
        return Err(Error::NoWitness(g));
    }
    Ok(feasible_with_witnesses(cover, s, g, &witnesses))
}

pub fn feasible_rt(cover: &LandmarkCover, s: StateId, g: StateId) -> Result<ActionSet> {
    feasible_checked(cover, s, g, MetricKind::RoundTrip)
}

pub fn feasible_inf(cover: &LandmarkCover, s: StateId, g: StateId) -> Result<ActionSet> {
    feasible_checked(cover, s, g, MetricKind::MaxOneWay)
}

pub fn feasible(cover: &LandmarkCover, s: StateId, g: StateId) -> Result<ActionSet> {
    feasible_checked(cover, s, g, cover.metric)
}

/// Replaces an empty feasible set by the full action space so pruning can
/// never leave the agent without a move.
pub fn or_all(set: ActionSet, s: StateId, g: StateId) -> ActionSet {
    if set.is_empty() {
        log::warn!("empty feasible set at s={s}, g={g}; falling back to all actions");
        ActionSet::all(set.n_actions())
    } else {
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Lower,
    Upper,
}

/// A deterministic chain on which one bound endpoint equals the true value.
#[derive(Debug, Clone)]
pub struct TightnessCase {
    pub name: &'static str,
    pub mdp: TabularMdp,
    pub cover: LandmarkCover,
    pub s: StateId,
    pub g: StateId,
    pub endpoint: Endpoint,
    pub true_value: f64,
}

impl TightnessCase {
    pub fn landmark(&self) -> StateId {
        self.cover.tables[0].landmark
    }

    /// Same instance with the radius changed; landmark kept.
    pub fn with_eta(&self, eta: f64) -> Result<TightnessCase> {
        let times = HittingTimes::compute(&self.mdp, DEFAULT_TOL)?;
        let cover = LandmarkCover::from_landmarks(
            &self.mdp,
            &times,
            &[self.landmark()],
            eta,
            self.cover.metric,
        )?;
        Ok(TightnessCase {
            cover,
            ..self.clone()
        })
    }
}

/// Four 5-state deterministic chains, one per (metric, endpoint). Each uses a
/// single-landmark cover whose radius sits exactly at the witness limit.
pub fn tightness_witness() -> Vec<TightnessCase> {
    let mdp = build_deterministic_grid(1, 5).expect("1x5 chain");
    let times = HittingTimes::compute(&mdp, DEFAULT_TOL).expect("chain solves");
    let case = |name, metric, landmark: usize, eta: f64, s: usize, g: usize, endpoint| {
        let cover = LandmarkCover::from_landmarks(&mdp, &times, &[StateId(landmark)], eta, metric)
            .expect("fixture cover");
        debug_assert!(cover.verify().covered);
        TightnessCase {
            name,
            mdp: mdp.clone(),
            cover,
            s: StateId(s),
            g: StateId(g),
            endpoint,
            true_value: times.get(StateId(s), StateId(g)),
        }
    };
    vec![
        // landmark between start and goal, d_rt(g, ℓ) = η
        case(
            "round_trip_upper",
            MetricKind::RoundTrip,
            2,
            4.0,
            0,
            4,
            Endpoint::Upper,
        ),
        // goal between start and landmark
        case(
            "round_trip_lower",
            MetricKind::RoundTrip,
            4,
            8.0,
            0,
            2,
            Endpoint::Lower,
        ),
        case(
            "max_one_way_upper",
            MetricKind::MaxOneWay,
            2,
            2.0,
            0,
            4,
            Endpoint::Upper,
        ),
        case(
            "max_one_way_lower",
            MetricKind::MaxOneWay,
            4,
            4.0,
            0,
            2,
            Endpoint::Lower,
        ),
    ]
}

/// One line of an all-pairs bound audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckRow {
    pub s: usize,
    pub g: usize,
    pub lower: f64,
    pub upper: f64,
    pub true_value: f64,
    pub contained: bool,
}

/// Checks the cover's bound against the exact value for every `(s, g)`.
pub fn check_all_bounds(
    cover: &LandmarkCover,
    times: &HittingTimes,
    slack: f64,
) -> Result<Vec<BoundCheckRow>> {
    let n = cover.n_states;
    let mut rows = Vec::with_capacity(n * n);
    for g in (0..n).map(StateId) {
        for s in (0..n).map(StateId) {
            let b = bound(cover, s, g)?;
            let v = times.get(s, g);
            rows.push(BoundCheckRow {
                s: s.0,
                g: g.0,
                lower: b.lower,
                upper: b.upper,
                true_value: v,
                contained: b.contains(v, slack),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::build_cover;
    use crate::env::{build_cliff_walker, cliff_goal, cliff_layout, SOUTH};
    use crate::rng::RngStream;

    fn line_cover(
        landmarks: &[usize],
        eta: f64,
        metric: MetricKind,
    ) -> (HittingTimes, LandmarkCover) {
        let mdp = build_deterministic_grid(1, 5).unwrap();
        let times = HittingTimes::compute(&mdp, DEFAULT_TOL).unwrap();
        let ls: Vec<StateId> = landmarks.iter().map(|&l| StateId(l)).collect();
        let cover = LandmarkCover::from_landmarks(&mdp, &times, &ls, eta, metric).unwrap();
        (times, cover)
    }

    #[test]
    fn goal_bound_contains_zero() {
        let (_, cover) = line_cover(&[1, 3], 2.0, MetricKind::RoundTrip);
        for g in 0..5 {
            let b = bound_rt(&cover, StateId(g), StateId(g)).unwrap();
            assert!(b.contains(0.0, 0.0));
        }
    }

    #[test]
    fn degenerate_inf_interval() {
        let (_, cover) = line_cover(&[2], 2.0, MetricKind::MaxOneWay);
        let b = bound_inf(&cover, StateId(2), StateId(2)).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 2.0));
        assert_eq!(b.witness_landmark, StateId(2));
    }

    #[test]
    fn metric_mismatch_is_an_error() {
        let (_, cover) = line_cover(&[2], 2.0, MetricKind::MaxOneWay);
        assert!(matches!(
            bound_rt(&cover, StateId(0), StateId(1)),
            Err(Error::MetricMismatch { .. })
        ));
        assert!(feasible_rt(&cover, StateId(0), StateId(1)).is_err());
    }

    #[test]
    fn oracle_feasible_empty_cover_allows_everything() {
        let (_, cover) = line_cover(&[], 2.0, MetricKind::MaxOneWay);
        assert!(oracle_feasible(&cover, StateId(2), StateId(4), 2.0).is_full());
    }

    #[test]
    fn oracle_feasible_line_excludes_backtracking() {
        // 1x5 line indexed along y: north (0) moves toward state 4.
        let (times, cover) = line_cover(&[4], 4.0, MetricKind::MaxOneWay);
        let s = StateId(2);
        let g = StateId(4);
        let set = oracle_feasible(&cover, s, g, times.get(s, g));
        assert!(set.contains(crate::env::NORTH));
        assert!(!set.contains(SOUTH));
    }

    #[test]
    fn single_landmark_at_goal_reduces() {
        let (times, cover) = line_cover(&[4], 4.0, MetricKind::MaxOneWay);
        let g = StateId(4);
        for s in 0..4 {
            let s = StateId(s);
            let set = feasible_inf(&cover, s, g).unwrap();
            for a in 0..4 {
                let a = ActionId(a);
                let q = cover.tables[0].q.get(s, a);
                assert_eq!(
                    set.contains(a),
                    q <= times.get(s, g) + 4.0 + FEASIBILITY_SLACK
                );
            }
        }
    }

    #[test]
    fn huge_eta_feasible_everything() {
        let (times, _) = line_cover(&[], 1.0, MetricKind::RoundTrip);
        let d = times.diameter().unwrap();
        let (_, cover) = line_cover(&[0, 2], 2.0 * d, MetricKind::RoundTrip);
        for s in 0..5 {
            for g in 0..5 {
                assert!(feasible_rt(&cover, StateId(s), StateId(g))
                    .unwrap()
                    .is_full());
            }
        }
    }

    #[test]
    fn cliff_down_above_cliff_is_pruned() {
        let mdp = build_cliff_walker();
        let times = HittingTimes::compute(&mdp, DEFAULT_TOL).unwrap();
        let grid = cliff_layout();
        for seed in 0..5 {
            let cover = build_cover(
                &mdp,
                &times,
                8.0,
                MetricKind::MaxOneWay,
                &mut RngStream::new(seed),
            )
            .unwrap();
            for x in 1..11 {
                let s = grid.state(x, 1);
                // At a landmark its own Q row is zero, so nothing is pruned there.
                if cover.index_of(s).is_some() {
                    continue;
                }
                let set = feasible_inf(&cover, s, cliff_goal()).unwrap();
                assert!(!set.contains(SOUTH), "seed {seed}, column {x}");
            }
        }
    }

    #[test]
    fn tightness_cases_attain_their_endpoint() {
        for case in tightness_witness() {
            let b = bound(&case.cover, case.s, case.g).unwrap();
            let hit = match case.endpoint {
                Endpoint::Lower => b.lower,
                Endpoint::Upper => b.upper,
            };
            assert_eq!(hit, case.true_value, "{}", case.name);
        }
    }

    #[test]
    fn action_set_ops() {
        let mut a = ActionSet::none(4);
        a.insert(ActionId(1));
        let b = ActionSet::all(4);
        assert!(a.is_subset(&b));
        assert!(!b.is_subset(&a));
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![ActionId(1)]);
        assert_eq!(or_all(ActionSet::none(4), StateId(0), StateId(1)), b);
    }
}
