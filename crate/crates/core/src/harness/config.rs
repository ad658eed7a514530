use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentKind, AgentParams, DEFAULT_BETA};
use crate::bandit::DEFAULT_EXPLORATION;
use crate::cover::{CoverMode, MetricKind};
use crate::env;
use crate::error::{Error, Result};
use crate::learning::{LearnConfig, StepSize};
use crate::mdp::{StateId, TabularMdp};

/// Which MDP to run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Cliff,
    #[serde(rename = "grid100x10")]
    GridWorld,
    Detgrid {
        width: usize,
        height: usize,
    },
    Random {
        n_states: usize,
        n_actions: usize,
        out_degree: usize,
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

impl EnvSpec {
    pub fn build(&self) -> Result<TabularMdp> {
        match self {
            EnvSpec::Cliff => Ok(env::build_cliff_walker()),
            EnvSpec::GridWorld => Ok(env::build_grid_world()),
            EnvSpec::Detgrid { width, height } => env::build_deterministic_grid(*width, *height),
            EnvSpec::Random {
                n_states,
                n_actions,
                out_degree,
                seed,
            } => env::build_random_mdp(*n_states, *n_actions, *out_degree, *seed),
            EnvSpec::File { path } => TabularMdp::load(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CoverSpec {
    /// Greedy stochastic cover, rebuilt for every repeat from `seed` forked
    /// by the repeat index.
    Build {
        eta: f64,
        metric: MetricKind,
        #[serde(default)]
        seed: u64,
    },
    /// A saved cover shared by every repeat.
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditConfig {
    pub arms: Vec<AgentKind>,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_true")]
    pub reset_per_task: bool,
}

fn default_c() -> f64 {
    DEFAULT_EXPLORATION
}

fn default_true() -> bool {
    true
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalRule {
    /// Distinct goals drawn uniformly from states that are neither hazards
    /// nor landmarks.
    Sample,
    /// Every state carrying this label, in index order.
    Label(String),
    Fixed(Vec<StateId>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    /// Number of tasks. Defaults to 20 for sampled goals and to the full
    /// list otherwise.
    #[serde(default)]
    pub count: Option<usize>,
    pub goals: GoalRule,
}

pub const DEFAULT_TASK_COUNT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    #[serde(default)]
    pub cover: Option<CoverSpec>,
    #[serde(default = "default_mode")]
    pub landmark_mode: CoverMode,
    /// Landmark-phase settings, used when `landmark_mode` is `learned`.
    #[serde(default)]
    pub learn: Option<LearnConfig>,
    #[serde(default)]
    pub agents: Vec<AgentKind>,
    #[serde(default)]
    pub bandit: Option<BanditConfig>,
    pub tasks: TaskSpec,
    pub episodes_per_task: usize,
    pub max_steps: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub step_size: StepSize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_mode() -> CoverMode {
    CoverMode::Exact
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let EnvSpec::File { path } = &mut self.env {
            fix(path);
        }
        if let Some(CoverSpec::Path(p)) = &mut self.cover {
            fix(p);
        }
        if let Some(p) = &mut self.output {
            fix(p);
        }
    }

    pub fn agent_params(&self) -> AgentParams {
        AgentParams {
            epsilon: self.epsilon,
            step_size: self.step_size,
            beta: self.beta,
        }
    }

    pub fn needs_cover(&self) -> bool {
        self.agents.iter().any(|k| k.needs_cover())
            || self
                .bandit
                .as_ref()
                .is_some_and(|b| b.arms.iter().any(|k| k.needs_cover()))
    }

    pub fn task_count(&self) -> usize {
        match (&self.tasks.count, &self.tasks.goals) {
            (Some(n), _) => *n,
            (None, GoalRule::Fixed(goals)) => goals.len(),
            (None, GoalRule::Sample) => DEFAULT_TASK_COUNT,
            (None, GoalRule::Label(_)) => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.repeats == 0 {
            return bad("repeats must be >= 1".into());
        }
        if self.episodes_per_task == 0 {
            return bad("episodes_per_task must be >= 1".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps must be >= 1".into());
        }
        if self.tasks.count == Some(0) {
            return bad("tasks.count must be >= 1".into());
        }
        if let (Some(n), GoalRule::Fixed(goals)) = (self.tasks.count, &self.tasks.goals) {
            if n > goals.len() {
                return bad(format!(
                    "tasks.count {n} exceeds {} fixed goals",
                    goals.len()
                ));
            }
        }
        if matches!(&self.tasks.goals, GoalRule::Fixed(g) if g.is_empty()) {
            return bad("fixed goal list is empty".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta {} must be > 0", self.beta));
        }
        if self.agents.is_empty() && self.bandit.is_none() {
            return bad("no agents and no bandit configured".into());
        }
        if let Some(b) = &self.bandit {
            if b.arms.is_empty() {
                return bad("bandit has no arms".into());
            }
            if !(b.c >= 0.0 && b.c.is_finite()) {
                return bad(format!("bandit c {} must be >= 0", b.c));
            }
        }
        if self.needs_cover() && self.cover.is_none() {
            return bad("an agent needs a landmark cover but none is configured".into());
        }
        if let Some(CoverSpec::Build { eta, .. }) = &self.cover {
            if !(*eta > 0.0 && eta.is_finite()) {
                return bad(format!("cover eta {eta} must be > 0"));
            }
        }
        if self.landmark_mode == CoverMode::Learned {
            match &self.learn {
                None => return bad("landmark_mode learned needs a 'learn' section".into()),
                Some(l) => l.check()?,
            }
        }
        Ok(())
    }
}
