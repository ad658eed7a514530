//! Tabular Q-learning in hitting-time (cost) form, and the self-supervised
//! landmark phase that learns one table per landmark.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::ActionSet;
use crate::cover::{CoverCheck, CoverMode, LandmarkCover};
use crate::error::{Error, Result};
use crate::mdp::{ActionId, GoalTask, StateId, TabularMdp};
use crate::oracle::QTable;
use crate::par::{self, Execution};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepSizeRepr", into = "StepSizeRepr")]
pub enum StepSize {
    Constant(f64),
    /// `1 / N(s, a)` where `N` counts updates of the pair.
    VisitCount,
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::Constant(0.1)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StepSizeRepr {
    Constant(f64),
    Named(String),
}

impl TryFrom<StepSizeRepr> for StepSize {
    type Error = String;

    fn try_from(r: StepSizeRepr) -> Result<Self, String> {
        match r {
            StepSizeRepr::Constant(a) if a > 0.0 && a <= 1.0 => Ok(StepSize::Constant(a)),
            StepSizeRepr::Constant(a) => Err(format!("step size {a} outside (0, 1]")),
            StepSizeRepr::Named(n) if n == "visit_count" => Ok(StepSize::VisitCount),
            StepSizeRepr::Named(n) => Err(format!("unknown step size schedule '{n}'")),
        }
    }
}

impl From<StepSize> for StepSizeRepr {
    fn from(s: StepSize) -> Self {
        match s {
            StepSize::Constant(a) => StepSizeRepr::Constant(a),
            StepSize::VisitCount => StepSizeRepr::Named("visit_count".into()),
        }
    }
}

/// A Q table of expected steps-to-go, updated by one-step backups.
///
/// Initialised at zero, which is optimistic for a cost-to-go.
#[derive(Debug, Clone, PartialEq)]
pub struct QLearner {
    pub q: QTable,
    step_size: StepSize,
    counts: Vec<u32>,
}

impl QLearner {
    pub fn new(target: StateId, n_states: usize, n_actions: usize, step_size: StepSize) -> Self {
        Self {
            q: QTable::zeros(target, n_states, n_actions),
            step_size,
            counts: vec![0; n_states * n_actions],
        }
    }

    /// Zeroes the table and counts for a new target.
    pub fn reset(&mut self, target: StateId) {
        self.q.target = target;
        self.q.q.iter_mut().for_each(|v| *v = 0.0);
        self.counts.iter_mut().for_each(|c| *c = 0);
    }

    /// `Q(s,a) += α (cost + min_a' Q(s',a') - Q(s,a))`, bootstrapping zero at
    /// a terminal successor.
    #[inline]
    pub fn backup(&mut self, s: StateId, a: ActionId, cost: f64, next: StateId, done: bool) {
        let future = if done { 0.0 } else { self.q.min(next) };
        self.backup_to(s, a, cost + future);
    }

    /// Like [`backup`](Self::backup) but the minimum at `next` only ranges
    /// over `allowed`.
    #[inline]
    pub fn backup_over(
        &mut self,
        s: StateId,
        a: ActionId,
        cost: f64,
        next: StateId,
        done: bool,
        allowed: &ActionSet,
    ) {
        let future = if done {
            0.0
        } else {
            let row = self.q.row(next);
            allowed
                .iter()
                .map(|b| row[b.0])
                .fold(f64::INFINITY, f64::min)
        };
        self.backup_to(s, a, cost + future);
    }

    /// Moves `Q(s,a)` toward `target` by one step.
    #[inline]
    pub fn backup_to(&mut self, s: StateId, a: ActionId, target: f64) {
        let idx = s.0 * self.q.n_actions + a.0;
        self.counts[idx] = self.counts[idx].saturating_add(1);
        let alpha = match self.step_size {
            StepSize::Constant(a) => a,
            StepSize::VisitCount => 1.0 / f64::from(self.counts[idx]),
        };
        let old = self.q.q[idx];
        self.q.q[idx] = old + alpha * (target - old);
    }

    pub fn update_count(&self, s: StateId, a: ActionId) -> u32 {
        self.counts[s.0 * self.q.n_actions + a.0]
    }
}

/// ε-greedy over `allowed`: uniform with probability ε, otherwise the
/// cheapest allowed action with ties broken uniformly.
pub fn epsilon_greedy(
    q: &QTable,
    s: StateId,
    epsilon: f64,
    allowed: &ActionSet,
    rng: &mut RngStream,
) -> ActionId {
    let explore = rng.random::<f64>() < epsilon;
    let row = q.row(s);
    let best = if explore {
        f64::NAN
    } else {
        allowed
            .iter()
            .map(|a| row[a.0])
            .fold(f64::INFINITY, f64::min)
    };
    // exploring, or every allowed action at +inf, means the whole set ties
    let ties = |a: &ActionId| best.is_nan() || best == f64::INFINITY || row[a.0] == best;
    let n = allowed.iter().filter(ties).count();
    debug_assert!(n > 0, "empty action set");
    let pick = if n == 1 { 0 } else { rng.random_range(0..n) };
    allowed.iter().filter(ties).nth(pick).expect("pick < n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub episodes: usize,
    pub max_steps: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub step_size: StepSize,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            max_steps: 1000,
            epsilon: 0.1,
            step_size: StepSize::default(),
            seed: 0,
        }
    }
}

impl LearnConfig {
    pub fn check(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Learned table for one landmark plus how often each state was updated.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedTable {
    pub q: QTable,
    pub state_visits: Vec<u64>,
}

/// Q-learning toward `landmark` under the action penalty, starting each
/// episode from the MDP's initial distribution.
pub fn learn_landmark_q(
    mdp: &TabularMdp,
    landmark: StateId,
    cfg: &LearnConfig,
) -> Result<LearnedTable> {
    cfg.check()?;
    mdp.check_state(landmark)?;
    let task = GoalTask { goal: landmark };
    let mut rng = RngStream::new(cfg.seed);
    let mut learner = QLearner::new(landmark, mdp.n_states(), mdp.n_actions(), cfg.step_size);
    let mut visits = vec![0u64; mdp.n_states()];
    let all = ActionSet::all(mdp.n_actions());
    for _ in 0..cfg.episodes {
        let mut s = mdp.sample_initial(task, &mut rng)?;
        for _ in 0..cfg.max_steps {
            let a = epsilon_greedy(&learner.q, s, cfg.epsilon, &all, &mut rng);
            let out = mdp.step(s, a, task, &mut rng)?;
            learner.backup(s, a, 1.0, out.next, out.done);
            visits[s.0] += 1;
            if out.done {
                break;
            }
            s = out.next;
        }
    }
    Ok(LearnedTable {
        q: learner.q,
        state_visits: visits,
    })
}

/// Replaces every landmark's tables by learned ones and rechecks coverage
/// with the learned values. States never updated during learning count as
/// uncovered by that landmark.
pub fn learn_all(
    mdp: &TabularMdp,
    cover: &LandmarkCover,
    cfg: &LearnConfig,
    exec: Execution,
) -> Result<(LandmarkCover, CoverCheck)> {
    cfg.check()?;
    let base = RngStream::new(cfg.seed);
    let learned = par::try_map_range(cover.len(), exec, |k| {
        let sub = LearnConfig {
            seed: base.fork(k as u64).seed(),
            ..cfg.clone()
        };
        learn_landmark_q(mdp, cover.tables[k].landmark, &sub)
    })?;
    let mut out = cover.clone();
    out.mode = CoverMode::Learned;
    for (t, l) in out.tables.iter_mut().zip(learned) {
        t.to_landmark = l.q.to_values();
        t.q = l.q;
        t.visits = Some(l.state_visits);
    }
    let check = out.verify();
    if !check.covered {
        log::warn!(
            "learned tables leave {} state(s) uncovered at eta = {}",
            check.uncovered.len(),
            out.eta
        );
    }
    Ok((out, check))
}
