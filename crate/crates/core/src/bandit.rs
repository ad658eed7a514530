//! UCB1 selection among agents, one pull per episode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EXPLORATION: f64 = 200.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub pulls: u64,
    pub mean_reward: f64,
}

/// UCB1 with exploration constant `c` at round `t` (1-based). Unpulled arms
/// go first; ties go to the lowest index.
pub fn select_arm(stats: &[ArmStats], t: u64, c: f64) -> Result<usize> {
    if stats.is_empty() {
        return Err(Error::InvalidParameter("bandit has no arms".into()));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("bandit round must be >= 1".into()));
    }
    if let Some(k) = stats.iter().position(|a| a.pulls == 0) {
        return Ok(k);
    }
    let ln_t = (t as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, a) in stats.iter().enumerate() {
        let score = a.mean_reward + c * (ln_t / a.pulls as f64).sqrt();
        if score > best_score {
            best = k;
            best_score = score;
        }
    }
    Ok(best)
}

/// Records an episode of `steps` steps, i.e. reward `-steps`.
pub fn record(stats: &mut [ArmStats], arm: usize, steps: usize) {
    record_reward(stats, arm, -(steps as f64));
}

pub fn record_reward(stats: &mut [ArmStats], arm: usize, reward: f64) {
    let a = &mut stats[arm];
    a.pulls += 1;
    a.mean_reward += (reward - a.mean_reward) / a.pulls as f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcbController {
    stats: Vec<ArmStats>,
    c: f64,
    round: u64,
}

impl UcbController {
    pub fn new(n_arms: usize, c: f64) -> Result<Self> {
        if n_arms == 0 {
            return Err(Error::InvalidParameter("bandit has no arms".into()));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "UCB constant {c} must be >= 0"
            )));
        }
        Ok(Self {
            stats: vec![ArmStats::default(); n_arms],
            c,
            round: 0,
        })
    }

    pub fn select(&mut self) -> usize {
        self.round += 1;
        select_arm(&self.stats, self.round, self.c).expect("arms checked at construction")
    }

    pub fn record(&mut self, arm: usize, steps: usize) {
        record(&mut self.stats, arm, steps);
    }

    pub fn reset(&mut self) {
        self.stats.iter_mut().for_each(|a| *a = ArmStats::default());
        self.round = 0;
    }

    pub fn stats(&self) -> &[ArmStats] {
        &self.stats
    }
}
