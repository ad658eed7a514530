//! Baseline, pruned, LOVR, zombie and reward-transfer policies behind one
//! act/update interface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{feasible_with_witnesses, or_all, ActionSet};
use crate::cover::LandmarkCover;
use crate::error::{Error, Result};
use crate::learning::{epsilon_greedy, QLearner, StepSize};
use crate::mdp::{ActionId, GoalTask, StateId};
use crate::oracle::QTable;
use crate::rng::RngStream;

pub const DEFAULT_BETA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Baseline,
    Pruned,
    Lovr,
    LovrPruned,
    Zombie,
    RewardTransfer,
}

impl AgentKind {
    pub const ALL: [AgentKind; 6] = [
        AgentKind::Baseline,
        AgentKind::Pruned,
        AgentKind::Lovr,
        AgentKind::LovrPruned,
        AgentKind::Zombie,
        AgentKind::RewardTransfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Baseline => "baseline",
            AgentKind::Pruned => "pruned",
            AgentKind::Lovr => "lovr",
            AgentKind::LovrPruned => "lovr_pruned",
            AgentKind::Zombie => "zombie",
            AgentKind::RewardTransfer => "reward_transfer",
        }
    }

    pub fn needs_cover(self) -> bool {
        self != AgentKind::Baseline
    }

    pub fn learns(self) -> bool {
        self != AgentKind::Zombie
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown agent kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: StateId,
    pub a: ActionId,
    pub reward: f64,
    pub next: StateId,
    pub done: bool,
    pub task: GoalTask,
}

/// `(|V^{ℓ_1}(s)|, ..., |V^{ℓ_n}(s)|)` in cover order.
pub type VLRepresentation = Vec<f64>;

pub fn v_l(cover: &LandmarkCover, s: StateId) -> VLRepresentation {
    cover.tables.iter().map(|t| t.to_landmark.get(s)).collect()
}

pub fn q_l(cover: &LandmarkCover, s: StateId, a: ActionId) -> Vec<f64> {
    cover.tables.iter().map(|t| t.q.get(s, a)).collect()
}

/// `‖v_l(s) - target‖₁`.
pub fn landmark_distance(cover: &LandmarkCover, s: StateId, target: &[f64]) -> f64 {
    cover
        .tables
        .iter()
        .zip(target)
        .map(|(t, &v)| (t.to_landmark.get(s) - v).abs())
        .sum()
}

pub fn act_baseline(q: &QTable, s: StateId, epsilon: f64, rng: &mut RngStream) -> ActionId {
    epsilon_greedy(q, s, epsilon, &ActionSet::all(q.n_actions), rng)
}

/// ε-greedy restricted to the feasible set for `g` (all actions if empty).
pub fn act_pruned(
    q: &QTable,
    cover: &LandmarkCover,
    s: StateId,
    g: StateId,
    epsilon: f64,
    rng: &mut RngStream,
) -> ActionId {
    let witnesses = cover.witness_indices(g);
    let allowed = or_all(feasible_with_witnesses(cover, s, g, &witnesses), s, g);
    epsilon_greedy(q, s, epsilon, &allowed, rng)
}

/// Follows the option toward the goal's nearest witness while outside its
/// η-ball, and acts on `learner_q` (optionally pruned) inside it.
pub fn act_lovr(
    cover: &LandmarkCover,
    learner_q: &QTable,
    s: StateId,
    g: StateId,
    epsilon: f64,
    rng: &mut RngStream,
    pruned: bool,
) -> Result<ActionId> {
    let k = cover.nearest_witness(g)?;
    if cover.distance(s, k) > cover.eta {
        return Ok(cover.tables[k].q.greedy(s));
    }
    Ok(if pruned {
        act_pruned(learner_q, cover, s, g, epsilon, rng)
    } else {
        act_baseline(learner_q, s, epsilon, rng)
    })
}

/// `argmin_a ‖q_l(s,a) - v_l(g)‖₁`, lowest index on ties.
pub fn act_zombie(cover: &LandmarkCover, s: StateId, g: StateId) -> ActionId {
    if s == g {
        return ActionId(0);
    }
    zombie_with_target(cover, s, &v_l(cover, g))
}

fn zombie_with_target(cover: &LandmarkCover, s: StateId, vg: &[f64]) -> ActionId {
    let mut best = ActionId(0);
    let mut best_gap = f64::INFINITY;
    for a in 0..cover.n_actions {
        let gap: f64 = cover
            .tables
            .iter()
            .zip(vg)
            .map(|(t, &v)| (t.q.get(s, ActionId(a)) - v).abs())
            .sum();
        if gap < best_gap {
            best_gap = gap;
            best = ActionId(a);
        }
    }
    best
}

/// `-β ‖v_l(s') - v_l(g)‖₁`.
pub fn reward_transfer(cover: &LandmarkCover, next: StateId, g: StateId, beta: f64) -> f64 {
    -beta * landmark_distance(cover, next, &v_l(cover, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub epsilon: f64,
    pub step_size: StepSize,
    pub beta: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            step_size: StepSize::default(),
            beta: DEFAULT_BETA,
        }
    }
}

/// Per-task quantities computed once when a goal is announced.
#[derive(Debug, Clone, PartialEq)]
struct TaskContext {
    goal: StateId,
    witnesses: Vec<usize>,
    nearest: usize,
    goal_vl: VLRepresentation,
}

impl TaskContext {
    fn new(cover: &LandmarkCover, goal: StateId) -> Result<Self> {
        Ok(Self {
            goal,
            witnesses: cover.witness_indices(goal),
            nearest: cover.nearest_witness(goal)?,
            goal_vl: v_l(cover, goal),
        })
    }
}

/// One policy with its own learner. Learners are reset at every task.
#[derive(Debug, Clone)]
pub struct Agent<'a> {
    kind: AgentKind,
    cover: Option<&'a LandmarkCover>,
    params: AgentParams,
    learner: QLearner,
    task: Option<TaskContext>,
}

impl<'a> Agent<'a> {
    pub fn new(
        kind: AgentKind,
        cover: Option<&'a LandmarkCover>,
        params: AgentParams,
        n_states: usize,
        n_actions: usize,
    ) -> Result<Self> {
        if kind.needs_cover() && cover.is_none() {
            return Err(Error::Config(format!(
                "agent '{kind}' needs a landmark cover"
            )));
        }
        if !(0.0..=1.0).contains(&params.epsilon) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {} outside [0, 1]",
                params.epsilon
            )));
        }
        if kind == AgentKind::RewardTransfer && (params.beta.is_nan() || params.beta <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta {} must be > 0",
                params.beta
            )));
        }
        Ok(Self {
            kind,
            cover,
            params,
            learner: QLearner::new(StateId(0), n_states, n_actions, params.step_size),
            task: None,
        })
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn q(&self) -> &QTable {
        &self.learner.q
    }

    /// Announces a new goal: fresh learner, recomputed landmark context.
    pub fn begin_task(&mut self, goal: StateId) -> Result<()> {
        self.learner.reset(goal);
        self.task = match self.cover {
            Some(c) => Some(TaskContext::new(c, goal)?),
            None => None,
        };
        Ok(())
    }

    fn ctx(&self) -> &TaskContext {
        self.task.as_ref().expect("begin_task not called")
    }

    fn pruned_set(&self, s: StateId) -> ActionSet {
        let cover = self.cover.expect("checked at construction");
        let ctx = self.ctx();
        or_all(
            feasible_with_witnesses(cover, s, ctx.goal, &ctx.witnesses),
            s,
            ctx.goal,
        )
    }

    /// The landmark option's action when LOVR is outside the goal's η-ball.
    fn option_action(&self, s: StateId) -> Option<ActionId> {
        if !matches!(self.kind, AgentKind::Lovr | AgentKind::LovrPruned) {
            return None;
        }
        let cover = self.cover.expect("checked at construction");
        let k = self.ctx().nearest;
        (cover.distance(s, k) > cover.eta).then(|| cover.tables[k].q.greedy(s))
    }

    /// Actions this agent can take at `s`. Learning bootstraps over this set,
    /// so actions the agent never takes cannot keep their optimistic value.
    pub fn available(&self, s: StateId) -> ActionSet {
        let n = self.learner.q.n_actions;
        if let Some(a) = self.option_action(s) {
            let mut only = ActionSet::none(n);
            only.insert(a);
            return only;
        }
        match self.kind {
            AgentKind::Pruned | AgentKind::LovrPruned => self.pruned_set(s),
            _ => ActionSet::all(n),
        }
    }

    pub fn act(&self, s: StateId, rng: &mut RngStream) -> ActionId {
        if self.kind == AgentKind::Zombie {
            let ctx = self.ctx();
            if s == ctx.goal {
                return ActionId(0);
            }
            return zombie_with_target(
                self.cover.expect("checked at construction"),
                s,
                &ctx.goal_vl,
            );
        }
        if let Some(a) = self.option_action(s) {
            return a;
        }
        epsilon_greedy(
            &self.learner.q,
            s,
            self.params.epsilon,
            &self.available(s),
            rng,
        )
    }

    /// One backup on this agent's view of the transition. Zombie never learns.
    pub fn update(&mut self, t: &Transition) {
        let cost = match self.kind {
            AgentKind::Zombie => return,
            AgentKind::RewardTransfer => {
                let cover = self.cover.expect("checked at construction");
                self.params.beta * landmark_distance(cover, t.next, &self.ctx().goal_vl)
            }
            _ => -t.reward,
        };
        match self.kind {
            AgentKind::Baseline | AgentKind::RewardTransfer => {
                self.learner.backup(t.s, t.a, cost, t.next, t.done)
            }
            _ => {
                let allowed = self.available(t.next);
                self.learner
                    .backup_over(t.s, t.a, cost, t.next, t.done, &allowed)
            }
        }
    }
}
