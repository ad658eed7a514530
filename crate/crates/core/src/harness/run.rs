use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentKind, Transition};
use crate::bandit::UcbController;
use crate::cover::{build_cover, CoverMode, LandmarkCover};
use crate::env::{CLIFF_LABEL, STICKY_LABEL};
use crate::error::{Error, Result};
use crate::learning::{learn_all, LearnConfig};
use crate::mdp::{GoalTask, StateId, TabularMdp};
use crate::oracle::{HittingTimes, DEFAULT_TOL};
use crate::par::{self, Execution};
use crate::rng::RngStream;

use super::config::{CoverSpec, ExperimentConfig, GoalRule};

pub const BANDIT_PREFIX: &str = "bandit:";

/// One episode. `agent` is the kind name, or `bandit:<kind>` for the arm a
/// bandit run pulled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub repeat: usize,
    pub task_index: usize,
    pub goal: usize,
    pub episode: usize,
    pub agent: String,
    pub steps: usize,
    pub regret: f64,
    pub cliff_steps: usize,
    pub truncated: bool,
}

impl ExperimentRecord {
    pub fn bandit_arm(&self) -> Option<&str> {
        self.agent.strip_prefix(BANDIT_PREFIX)
    }
}

pub fn write_records(path: impl AsRef<Path>, records: &[ExperimentRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| Ok(row?)).collect()
}

/// Environment plus everything shared read-only by all repeats.
pub struct Prepared {
    pub mdp: TabularMdp,
    pub times: HittingTimes,
    pub shared_cover: Option<LandmarkCover>,
}

pub fn prepare(cfg: &ExperimentConfig, exec: Execution) -> Result<Prepared> {
    cfg.validate()?;
    let mdp = cfg.env.build()?;
    let violations = mdp.validate();
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    let times = HittingTimes::compute_with(&mdp, DEFAULT_TOL, exec)?;
    let shared_cover = match &cfg.cover {
        Some(CoverSpec::Path(p)) => {
            let c = LandmarkCover::load(p)?;
            if c.n_states != mdp.n_states() || c.n_actions != mdp.n_actions() {
                return Err(Error::Shape(format!(
                    "cover is for {}x{} but the environment is {}x{}",
                    c.n_states,
                    c.n_actions,
                    mdp.n_states(),
                    mdp.n_actions()
                )));
            }
            Some(c)
        }
        _ => None,
    };
    Ok(Prepared {
        mdp,
        times,
        shared_cover,
    })
}

/// Runs every repeat and returns records ordered by
/// `(repeat, task_index, episode)`, then by agent order in the config.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    run_with(cfg, Execution::default())
}

pub fn run_with(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<ExperimentRecord>> {
    let prep = prepare(cfg, exec)?;
    run_prepared(cfg, &prep, exec)
}

pub fn run_prepared(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    exec: Execution,
) -> Result<Vec<ExperimentRecord>> {
    let per_repeat = par::try_map_range(cfg.repeats, exec, |r| run_repeat(cfg, prep, r))?;
    Ok(per_repeat.into_iter().flatten().collect())
}

/// The cover a repeat works with, after the optional landmark phase.
pub fn repeat_cover(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    repeat: usize,
) -> Result<Option<LandmarkCover>> {
    let base = match (&cfg.cover, &prep.shared_cover) {
        (_, Some(c)) => c.clone(),
        (Some(CoverSpec::Build { eta, metric, seed }), None) => {
            let mut rng = RngStream::new(*seed).fork(repeat as u64);
            build_cover(&prep.mdp, &prep.times, *eta, *metric, &mut rng)?
        }
        _ => return Ok(None),
    };
    if cfg.landmark_mode == CoverMode::Learned && base.mode == CoverMode::Exact {
        let learn = cfg.learn.as_ref().expect("validated");
        let lc = LearnConfig {
            seed: RngStream::new(learn.seed).fork(repeat as u64).seed(),
            ..learn.clone()
        };
        let (learned, _) = learn_all(&prep.mdp, &base, &lc, Execution::Sequential)?;
        return Ok(Some(learned));
    }
    Ok(Some(base))
}

/// Goals for one repeat. Sampled goals avoid hazards, landmarks and any
/// state some initial state cannot reach.
pub fn choose_goals(
    cfg: &ExperimentConfig,
    mdp: &TabularMdp,
    times: &HittingTimes,
    cover: Option<&LandmarkCover>,
    rng: &mut RngStream,
) -> Result<Vec<StateId>> {
    let count = cfg.task_count();
    let goals = match &cfg.tasks.goals {
        GoalRule::Fixed(g) => g[..count].to_vec(),
        GoalRule::Label(tag) => {
            let g = mdp.states_labelled(tag);
            if g.is_empty() {
                return Err(Error::Config(format!("no state is labelled '{tag}'")));
            }
            if count > g.len() {
                return Err(Error::Config(format!(
                    "tasks.count {count} exceeds the {} '{tag}' states",
                    g.len()
                )));
            }
            if count == 0 {
                g
            } else {
                g[..count].to_vec()
            }
        }
        GoalRule::Sample => {
            let landmarks = cover.map(|c| c.landmarks()).unwrap_or_default();
            let candidates: Vec<StateId> = mdp
                .states()
                .filter(|&s| {
                    !mdp.has_label(s, STICKY_LABEL)
                        && !mdp.has_label(s, CLIFF_LABEL)
                        && !landmarks.contains(&s)
                        && reachable_from_start(mdp, times, s)
                })
                .collect();
            if count > candidates.len() {
                return Err(Error::Config(format!(
                    "cannot sample {count} distinct goals from {} candidates",
                    candidates.len()
                )));
            }
            sample(rng, candidates.len(), count)
                .into_iter()
                .map(|i| candidates[i])
                .collect()
        }
    };
    for &g in &goals {
        mdp.check_state(g)?;
        if !reachable_from_start(mdp, times, g) {
            return Err(Error::Config(format!(
                "goal {g} is unreachable from the initial distribution"
            )));
        }
    }
    Ok(goals)
}

fn reachable_from_start(mdp: &TabularMdp, times: &HittingTimes, g: StateId) -> bool {
    mdp.initial_distribution()
        .iter()
        .all(|&(s, p)| p == 0.0 || s == g || times.get(s, g).is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunKind {
    Solo(AgentKind),
    Bandit,
}

impl RunKind {
    fn stream_label(self) -> u64 {
        match self {
            RunKind::Solo(k) => 16 + k as u64,
            RunKind::Bandit => 64,
        }
    }
}

struct EpisodeOutcome {
    steps: usize,
    cliff_steps: usize,
    done: bool,
}

/// Rolls out `agents[actor]` and feeds every transition to all of `agents`.
#[allow(clippy::too_many_arguments)]
fn rollout(
    mdp: &TabularMdp,
    agents: &mut [Agent<'_>],
    actor: usize,
    task: GoalTask,
    start: StateId,
    max_steps: usize,
    cliff: &[bool],
    rng: &mut RngStream,
) -> Result<EpisodeOutcome> {
    let mut s = start;
    let mut out = EpisodeOutcome {
        steps: 0,
        cliff_steps: 0,
        done: false,
    };
    while out.steps < max_steps {
        if cliff[s.0] {
            out.cliff_steps += 1;
        }
        let a = agents[actor].act(s, rng);
        let step = mdp.step(s, a, task, rng)?;
        let t = Transition {
            s,
            a,
            reward: step.reward,
            next: step.next,
            done: step.done,
            task,
        };
        for ag in agents.iter_mut() {
            ag.update(&t);
        }
        out.steps += 1;
        s = step.next;
        if step.done {
            out.done = true;
            break;
        }
    }
    Ok(out)
}

fn run_repeat(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    repeat: usize,
) -> Result<Vec<ExperimentRecord>> {
    let mdp = &prep.mdp;
    let cover = repeat_cover(cfg, prep, repeat)?;
    let stream = RngStream::new(cfg.seed).fork(repeat as u64);
    let goals = choose_goals(cfg, mdp, &prep.times, cover.as_ref(), &mut stream.fork(0))?;
    let cliff: Vec<bool> = mdp
        .states()
        .map(|s| mdp.has_label(s, CLIFF_LABEL))
        .collect();
    let params = cfg.agent_params();
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let make = |k: AgentKind| Agent::new(k, cover.as_ref(), params, ns, na);

    let mut runs: Vec<RunKind> = cfg.agents.iter().map(|&k| RunKind::Solo(k)).collect();
    if cfg.bandit.is_some() {
        runs.push(RunKind::Bandit);
    }

    let mut records = Vec::with_capacity(runs.len() * goals.len() * cfg.episodes_per_task);
    for run in runs {
        let run_stream = stream.fork(run.stream_label());
        let (mut agents, mut ucb) = match run {
            RunKind::Solo(k) => (vec![make(k)?], None),
            RunKind::Bandit => {
                let b = cfg.bandit.as_ref().expect("bandit run");
                let agents = b
                    .arms
                    .iter()
                    .map(|&k| make(k))
                    .collect::<Result<Vec<_>>>()?;
                (agents, Some(UcbController::new(b.arms.len(), b.c)?))
            }
        };
        let reset_bandit = cfg.bandit.as_ref().is_none_or(|b| b.reset_per_task);
        for (ti, &goal) in goals.iter().enumerate() {
            let mut rng = run_stream.fork(ti as u64);
            let task = GoalTask { goal };
            for a in agents.iter_mut() {
                a.begin_task(goal)?;
            }
            if let Some(u) = ucb.as_mut() {
                if reset_bandit {
                    u.reset();
                }
            }
            let oracle = prep.times.into_target(goal);
            for ep in 0..cfg.episodes_per_task {
                let start = mdp.sample_initial(task, &mut rng)?;
                let actor = ucb.as_mut().map_or(0, |u| u.select());
                let out = rollout(
                    mdp,
                    &mut agents,
                    actor,
                    task,
                    start,
                    cfg.max_steps,
                    &cliff,
                    &mut rng,
                )?;
                let name = match run {
                    RunKind::Solo(k) => k.name().to_string(),
                    RunKind::Bandit => format!("{BANDIT_PREFIX}{}", agents[actor].kind()),
                };
                if let Some(u) = ucb.as_mut() {
                    u.record(actor, out.steps);
                }
                records.push(ExperimentRecord {
                    repeat,
                    task_index: ti,
                    goal: goal.0,
                    episode: ep,
                    agent: name,
                    steps: out.steps,
                    regret: out.steps as f64 - oracle[start.0],
                    cliff_steps: out.cliff_steps,
                    truncated: !out.done,
                });
            }
        }
    }
    records.sort_by_key(|r| (r.task_index, r.episode));
    Ok(records)
}
