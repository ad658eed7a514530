//! Exact stochastic-shortest-path solver for hitting times.
//!
//! Values are stored as positive expected step counts `|V^{g*}(s)|`. A state
//! that cannot reach the target almost surely under any policy holds
//! [`UNREACHABLE`] (`+inf`), never a large finite stand-in.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp};
use crate::par::{self, Execution};

pub const UNREACHABLE: f64 = f64::INFINITY;

/// Default stopping tolerance on the Bellman residual.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Slack applied by every downstream bound or metric check to absorb the
/// solver tolerance.
pub const CHECK_SLACK: f64 = 1e-6;

const MAX_SWEEPS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub target: StateId,
    #[serde(with = "crate::serde_inf::vec")]
    pub values: Vec<f64>,
}

impl ValueTable {
    #[inline]
    pub fn get(&self, s: StateId) -> f64 {
        self.values[s.0]
    }

    pub fn hitting_time(&self, s: StateId) -> Option<f64> {
        let v = self.values[s.0];
        v.is_finite().then_some(v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per `(s, a)` expected steps to the target when `a` is taken first and an
/// optimal policy followed afterwards. Rows at the target are zero.
///
/// The same layout backs the learners' tables, which is why it is mutable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub target: StateId,
    pub n_actions: usize,
    #[serde(with = "crate::serde_inf::vec")]
    pub q: Vec<f64>,
}

impl QTable {
    pub fn zeros(target: StateId, n_states: usize, n_actions: usize) -> Self {
        Self {
            target,
            n_actions,
            q: vec![0.0; n_states * n_actions],
        }
    }

    /// One-step lookahead on `values`.
    pub fn from_values(mdp: &TabularMdp, values: &ValueTable) -> Self {
        let mut table = Self::zeros(values.target, mdp.n_states(), mdp.n_actions());
        for s in mdp.states() {
            if s == values.target {
                continue;
            }
            for a in mdp.actions() {
                table.q[s.0 * mdp.n_actions() + a.0] = lookahead(mdp, s, a, &values.values);
            }
        }
        table
    }

    pub fn n_states(&self) -> usize {
        self.q.len() / self.n_actions
    }

    #[inline]
    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.q[s.0 * self.n_actions + a.0]
    }

    #[inline]
    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        self.q[s.0 * self.n_actions + a.0] = v;
    }

    #[inline]
    pub fn row(&self, s: StateId) -> &[f64] {
        &self.q[s.0 * self.n_actions..(s.0 + 1) * self.n_actions]
    }

    #[inline]
    pub fn min(&self, s: StateId) -> f64 {
        self.row(s).iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cheapest action, lowest index on ties.
    pub fn greedy(&self, s: StateId) -> ActionId {
        let row = self.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v < row[best] {
                best = a;
            }
        }
        ActionId(best)
    }

    pub fn to_values(&self) -> ValueTable {
        ValueTable {
            target: self.target,
            values: (0..self.n_states()).map(|s| self.min(StateId(s))).collect(),
        }
    }
}

#[inline]
fn lookahead(mdp: &TabularMdp, s: StateId, a: ActionId, values: &[f64]) -> f64 {
    let mut q = 1.0;
    for &(t, p) in mdp.successors(s, a) {
        if p > 0.0 {
            q += p * values[t.0];
        }
    }
    q
}

/// Solves for the optimal hitting times to `target` and the matching Q table.
pub fn solve(mdp: &TabularMdp, target: StateId, tol: f64) -> Result<(ValueTable, QTable)> {
    let values = solve_values(mdp, target, tol)?;
    let q = QTable::from_values(mdp, &values);
    Ok((values, q))
}

/// Gauss-Seidel value iteration on the absorbing-target problem.
///
/// States are first restricted to those with a proper policy (the target is
/// reached with probability one); the rest are [`UNREACHABLE`]. Sweeps visit
/// states in breadth-first order outward from the target, and self-loops are
/// eliminated in closed form, which keeps sticky cells from stalling
/// convergence.
pub fn solve_values(mdp: &TabularMdp, target: StateId, tol: f64) -> Result<ValueTable> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be > 0"
        )));
    }
    mdp.check_state(target)?;
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let region = ProperRegion::compute(mdp, target);

    let mut values = vec![UNREACHABLE; n];
    for &s in &region.order {
        values[s.0] = 0.0;
    }

    for sweep in 0..MAX_SWEEPS {
        let mut delta = 0.0f64;
        for &s in region.order.iter().skip(1) {
            let mut best = f64::INFINITY;
            for a in 0..na {
                if !region.allowed[s.0 * na + a] {
                    continue;
                }
                let mut stay = 0.0;
                let mut rest = 1.0;
                for &(t, p) in mdp.successors(s, ActionId(a)) {
                    if t == s {
                        stay += p;
                    } else if p > 0.0 {
                        rest += p * values[t.0];
                    }
                }
                if stay < 1.0 {
                    best = best.min(rest / (1.0 - stay));
                }
            }
            delta = delta.max((best - values[s.0]).abs());
            values[s.0] = best;
        }
        if delta < tol {
            let residual = bellman_residual(mdp, &region, &values);
            if residual < tol {
                return Ok(ValueTable { target, values });
            }
        }
        if sweep + 1 == MAX_SWEEPS {
            return Err(Error::NotConverged {
                target,
                sweeps: MAX_SWEEPS,
                residual: bellman_residual(mdp, &region, &values),
            });
        }
    }
    unreachable!()
}

fn bellman_residual(mdp: &TabularMdp, region: &ProperRegion, values: &[f64]) -> f64 {
    let na = mdp.n_actions();
    let mut worst = 0.0f64;
    for &s in region.order.iter().skip(1) {
        let mut best = f64::INFINITY;
        for a in 0..na {
            if region.allowed[s.0 * na + a] {
                best = best.min(lookahead(mdp, s, ActionId(a), values));
            }
        }
        worst = worst.max((best - values[s.0]).abs());
    }
    worst
}

/// States with a policy reaching the target almost surely, plus the actions
/// that keep every successor inside that set.
struct ProperRegion {
    /// Breadth-first order from the target; `order[0]` is the target.
    order: Vec<StateId>,
    allowed: Vec<bool>,
}

impl ProperRegion {
    fn compute(mdp: &TabularMdp, target: StateId) -> Self {
        let n = mdp.n_states();
        let na = mdp.n_actions();
        let mut preds: Vec<Vec<(StateId, ActionId)>> = vec![Vec::new(); n];
        for s in mdp.states() {
            for a in mdp.actions() {
                for &(t, p) in mdp.successors(s, a) {
                    if p > 0.0 {
                        preds[t.0].push((s, a));
                    }
                }
            }
        }

        let mut inside = vec![true; n];
        let mut allowed = vec![false; n * na];
        loop {
            for s in mdp.states() {
                for a in mdp.actions() {
                    allowed[s.0 * na + a.0] = inside[s.0]
                        && mdp
                            .successors(s, a)
                            .iter()
                            .all(|&(t, p)| p <= 0.0 || inside[t.0]);
                }
            }
            let mut reached = vec![false; n];
            let mut order = vec![target];
            reached[target.0] = true;
            let mut queue = VecDeque::from([target]);
            while let Some(t) = queue.pop_front() {
                for &(s, a) in &preds[t.0] {
                    if !reached[s.0] && allowed[s.0 * na + a.0] {
                        reached[s.0] = true;
                        order.push(s);
                        queue.push_back(s);
                    }
                }
            }
            if reached == inside {
                return Self { order, allowed };
            }
            inside = reached;
        }
    }
}

/// All-pairs optimal hitting times, one solve per target.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingTimes {
    n: usize,
    /// `times[target * n + source]`
    times: Vec<f64>,
}

impl HittingTimes {
    pub fn compute(mdp: &TabularMdp, tol: f64) -> Result<Self> {
        Self::compute_with(mdp, tol, Execution::default())
    }

    pub fn compute_with(mdp: &TabularMdp, tol: f64, exec: Execution) -> Result<Self> {
        let n = mdp.n_states();
        let tables = par::try_map_range(n, exec, |t| solve_values(mdp, StateId(t), tol))?;
        let mut times = Vec::with_capacity(n * n);
        for table in tables {
            times.extend_from_slice(&table.values);
        }
        Ok(Self { n, times })
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    /// Optimal expected steps from `from` to `to`.
    #[inline]
    pub fn get(&self, from: StateId, to: StateId) -> f64 {
        self.times[to.0 * self.n + from.0]
    }

    /// Hitting times into `target` from every state.
    pub fn into_target(&self, target: StateId) -> &[f64] {
        &self.times[target.0 * self.n..(target.0 + 1) * self.n]
    }

    pub fn value_table(&self, target: StateId) -> ValueTable {
        ValueTable {
            target,
            values: self.into_target(target).to_vec(),
        }
    }

    /// First unreachable ordered pair, if any.
    pub fn first_unreachable(&self) -> Option<(StateId, StateId)> {
        let idx = self.times.iter().position(|v| !v.is_finite())?;
        Some((StateId(idx % self.n), StateId(idx / self.n)))
    }

    /// Largest hitting time over all ordered pairs.
    pub fn diameter(&self) -> Result<f64> {
        if let Some((from, to)) = self.first_unreachable() {
            return Err(Error::Unreachable { from, to });
        }
        Ok(self.times.iter().copied().fold(0.0, f64::max))
    }
}

/// `o(s, g) = |V^{g*}(s)|`.
#[inline]
pub fn oracle_fn(times: &HittingTimes, s: StateId, g: StateId) -> f64 {
    times.get(s, g)
}

pub fn diameter(mdp: &TabularMdp) -> Result<f64> {
    HittingTimes::compute(mdp, DEFAULT_TOL)?.diameter()
}
