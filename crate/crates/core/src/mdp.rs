//! Finite episodic MDPs with goal-parameterised termination.
//!
//! Dynamics are task independent: the goal only decides when the stepper
//! reports `done`. Every transition costs one step (reward `-1`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Tolerance on row and initial-distribution sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Reward emitted by every transition.
pub const ACTION_PENALTY: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoalTask {
    pub goal: StateId,
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum {
        state: StateId,
        action: ActionId,
        sum: f64,
    },
    Probability {
        state: StateId,
        action: ActionId,
        successor: StateId,
        p: f64,
    },
    InitialSum {
        sum: f64,
    },
    InitialProbability {
        state: StateId,
        p: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, action, sum } => {
                write!(f, "row (s={state}, a={action}) sums to {sum}")
            }
            Violation::Probability {
                state,
                action,
                successor,
                p,
            } => write!(
                f,
                "P({successor} | s={state}, a={action}) = {p} is not a probability"
            ),
            Violation::InitialSum { sum } => write!(f, "initial distribution sums to {sum}"),
            Violation::InitialProbability { state, p } => {
                write!(f, "initial mass {p} at state {state} is not a probability")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: StateId,
    pub reward: f64,
    pub done: bool,
}

/// A finite MDP with sparse transition rows.
///
/// Immutable once built; share it freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// Row `s * n_actions + a` lists `(successor, probability)`.
    rows: Vec<Vec<(StateId, f64)>>,
    initial: Vec<(StateId, f64)>,
    labels: BTreeMap<StateId, String>,
}

impl TabularMdp {
    /// Builds an MDP, checking only shape and index ranges. Stochasticity is
    /// reported by [`TabularMdp::validate`].
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rows: Vec<Vec<(StateId, f64)>>,
        initial: Vec<(StateId, f64)>,
        labels: BTreeMap<StateId, String>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Shape(
                "need at least one state and one action".into(),
            ));
        }
        if rows.len() != n_states * n_actions {
            return Err(Error::Shape(format!(
                "expected {} kernel rows, got {}",
                n_states * n_actions,
                rows.len()
            )));
        }
        let check = |s: StateId| -> Result<()> {
            if s.0 >= n_states {
                Err(Error::StateOutOfRange {
                    state: s.0,
                    n_states,
                })
            } else {
                Ok(())
            }
        };
        for row in &rows {
            for &(s, _) in row {
                check(s)?;
            }
        }
        for &(s, _) in &initial {
            check(s)?;
        }
        for &s in labels.keys() {
            check(s)?;
        }
        Ok(Self {
            n_states,
            n_actions,
            rows,
            initial,
            labels,
        })
    }

    /// [`TabularMdp::new`] followed by a validation that must come back empty.
    pub fn new_validated(
        n_states: usize,
        n_actions: usize,
        rows: Vec<Vec<(StateId, f64)>>,
        initial: Vec<(StateId, f64)>,
        labels: BTreeMap<StateId, String>,
    ) -> Result<Self> {
        let mdp = Self::new(n_states, n_actions, rows, initial, labels)?;
        let report = mdp.validate();
        if report.is_empty() {
            Ok(mdp)
        } else {
            Err(Error::Invalid(report))
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.n_states).map(StateId)
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> + '_ {
        (0..self.n_actions).map(ActionId)
    }

    #[inline]
    pub fn successors(&self, s: StateId, a: ActionId) -> &[(StateId, f64)] {
        &self.rows[s.0 * self.n_actions + a.0]
    }

    pub fn initial_distribution(&self) -> &[(StateId, f64)] {
        &self.initial
    }

    pub fn labels(&self) -> &BTreeMap<StateId, String> {
        &self.labels
    }

    pub fn label(&self, s: StateId) -> Option<&str> {
        self.labels.get(&s).map(String::as_str)
    }

    pub fn has_label(&self, s: StateId, tag: &str) -> bool {
        self.label(s) == Some(tag)
    }

    pub fn states_labelled(&self, tag: &str) -> Vec<StateId> {
        self.labels
            .iter()
            .filter(|(_, t)| t.as_str() == tag)
            .map(|(&s, _)| s)
            .collect()
    }

    pub fn check_state(&self, s: StateId) -> Result<()> {
        if s.0 < self.n_states {
            Ok(())
        } else {
            Err(Error::StateOutOfRange {
                state: s.0,
                n_states: self.n_states,
            })
        }
    }

    /// Lists every violated stochasticity invariant; empty when valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for s in self.states() {
            for a in self.actions() {
                let row = self.successors(s, a);
                let mut sum = 0.0;
                for &(successor, p) in row {
                    if !(0.0..=1.0).contains(&p) {
                        out.push(Violation::Probability {
                            state: s,
                            action: a,
                            successor,
                            p,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    out.push(Violation::RowSum {
                        state: s,
                        action: a,
                        sum,
                    });
                }
            }
        }
        let mut sum = 0.0;
        for &(state, p) in &self.initial {
            if !(0.0..=1.0).contains(&p) {
                out.push(Violation::InitialProbability { state, p });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            out.push(Violation::InitialSum { sum });
        }
        out
    }

    /// Samples one transition under the action-penalty reward.
    pub fn step(
        &self,
        s: StateId,
        a: ActionId,
        task: GoalTask,
        rng: &mut RngStream,
    ) -> Result<StepOutcome> {
        if s == task.goal {
            return Err(Error::SteppedFromGoal(s));
        }
        let next = sample_from(self.successors(s, a), rng);
        Ok(StepOutcome {
            next,
            reward: ACTION_PENALTY,
            done: next == task.goal,
        })
    }

    /// Draws a start state from the initial distribution renormalised
    /// without the goal.
    pub fn sample_initial(&self, task: GoalTask, rng: &mut RngStream) -> Result<StateId> {
        let mass: f64 = self
            .initial
            .iter()
            .filter(|(s, _)| *s != task.goal)
            .map(|(_, p)| p)
            .sum();
        if mass <= 0.0 {
            return Err(Error::NoInitialMass(task.goal));
        }
        let mut u = rng.random::<f64>() * mass;
        let mut last = None;
        for &(s, p) in &self.initial {
            if s == task.goal || p <= 0.0 {
                continue;
            }
            last = Some(s);
            if u < p {
                return Ok(s);
            }
            u -= p;
        }
        // Rounding can leave u marginally above the final cell.
        last.ok_or(Error::NoInitialMass(task.goal))
    }

    pub fn to_document(&self) -> MdpDocument {
        let mut kernel = Vec::new();
        for s in self.states() {
            for a in self.actions() {
                for &(t, p) in self.successors(s, a) {
                    kernel.push((s.0, a.0, t.0, p));
                }
            }
        }
        MdpDocument {
            n_states: self.n_states,
            n_actions: self.n_actions,
            kernel,
            initial_dist: self.initial.iter().map(|&(s, p)| (s.0, p)).collect(),
            labels: self.labels.iter().map(|(s, t)| (s.0, t.clone())).collect(),
        }
    }

    pub fn from_document(doc: MdpDocument) -> Result<Self> {
        let MdpDocument {
            n_states,
            n_actions,
            kernel,
            initial_dist,
            labels,
        } = doc;
        let mut rows = vec![Vec::new(); n_states * n_actions];
        for (s, a, t, p) in kernel {
            if s >= n_states || t >= n_states {
                return Err(Error::StateOutOfRange {
                    state: s.max(t),
                    n_states,
                });
            }
            if a >= n_actions {
                return Err(Error::Shape(format!(
                    "action {a} out of range (n_actions = {n_actions})"
                )));
            }
            rows[s * n_actions + a].push((StateId(t), p));
        }
        Self::new_validated(
            n_states,
            n_actions,
            rows,
            initial_dist
                .into_iter()
                .map(|(s, p)| (StateId(s), p))
                .collect(),
            labels.into_iter().map(|(s, t)| (StateId(s), t)).collect(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// On-disk JSON layout of a [`TabularMdp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    /// `[s, a, s', p]` entries.
    pub kernel: Vec<(usize, usize, usize, f64)>,
    /// `[s, p]` entries.
    pub initial_dist: Vec<(usize, f64)>,
    #[serde(default)]
    pub labels: BTreeMap<usize, String>,
}

pub(crate) fn sample_from(row: &[(StateId, f64)], rng: &mut RngStream) -> StateId {
    let mut u: f64 = rng.random();
    for &(s, p) in row {
        if u < p {
            return s;
        }
        u -= p;
    }
    row.iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .map(|&(s, _)| s)
        .expect("kernel row has no positive mass")
}
