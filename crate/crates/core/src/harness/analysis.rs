use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::run::ExperimentRecord;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Mean over repeats of the cliff steps one agent accumulated in a repeat.
pub fn cliff_exposure(records: &[ExperimentRecord], agent: &str) -> Option<f64> {
    let mut per_repeat: BTreeMap<usize, usize> = BTreeMap::new();
    for r in records.iter().filter(|r| r.agent == agent) {
        *per_repeat.entry(r.repeat).or_default() += r.cliff_steps;
    }
    if per_repeat.is_empty() {
        return None;
    }
    Some(per_repeat.values().map(|&c| c as f64).sum::<f64>() / per_repeat.len() as f64)
}

/// `100 (1 - variant / baseline)`.
pub fn percent_reduction(baseline: f64, variant: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::InvalidParameter(
            "percent reduction against a zero baseline".into(),
        ));
    }
    Ok(100.0 * (1.0 - variant / baseline))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation, zero for fewer than two values.
    pub std: f64,
}

impl Moments {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self::default();
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { n, mean, std }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.std / (self.n as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub agent: String,
    pub episode: usize,
    pub n: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
}

/// Per-(agent, episode) regret statistics over all repeats and tasks.
pub fn regret_curves(records: &[ExperimentRecord]) -> Vec<CurvePoint> {
    let mut groups: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        let agent = if r.bandit_arm().is_some() {
            "bandit"
        } else {
            r.agent.as_str()
        };
        groups.entry((agent, r.episode)).or_default().push(r.regret);
    }
    groups
        .into_iter()
        .map(|((agent, episode), v)| {
            let m = Moments::of(v);
            CurvePoint {
                agent: agent.to_string(),
                episode,
                n: m.n,
                mean_regret: m.mean,
                std_regret: m.std,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRegret {
    pub agent: String,
    pub repeat: usize,
    pub task_index: usize,
    pub goal: usize,
    pub episodes: usize,
    pub mean_regret: f64,
    pub cumulative_regret: f64,
}

/// Regret per (agent, repeat, task). Bandit arms are pooled as `bandit`.
pub fn task_regret(records: &[ExperimentRecord]) -> Vec<TaskRegret> {
    let mut groups: BTreeMap<(&str, usize, usize), (usize, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let agent = if r.bandit_arm().is_some() {
            "bandit"
        } else {
            r.agent.as_str()
        };
        let e = groups
            .entry((agent, r.repeat, r.task_index))
            .or_insert((r.goal, Vec::new()));
        e.1.push(r.regret);
    }
    groups
        .into_iter()
        .map(|((agent, repeat, task_index), (goal, v))| {
            let total: f64 = v.iter().sum();
            TaskRegret {
                agent: agent.to_string(),
                repeat,
                task_index,
                goal,
                episodes: v.len(),
                mean_regret: total / v.len() as f64,
                cumulative_regret: total,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmProportion {
    pub episode: usize,
    pub arm: String,
    pub pulls: usize,
    pub proportion: f64,
}

/// Share of bandit pulls going to each arm at every episode index, pooled
/// over repeats and tasks. Arms never pulled at an episode are listed with 0.
pub fn arm_proportions(records: &[ExperimentRecord]) -> Vec<ArmProportion> {
    let arms: std::collections::BTreeSet<&str> =
        records.iter().filter_map(|r| r.bandit_arm()).collect();
    let mut counts: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
    for r in records {
        if let Some(arm) = r.bandit_arm() {
            *counts.entry(r.episode).or_default().entry(arm).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for (episode, c) in counts {
        let total: usize = c.values().sum();
        for &arm in &arms {
            let pulls = c.get(arm).copied().unwrap_or(0);
            out.push(ArmProportion {
                episode,
                arm: arm.to_string(),
                pulls,
                proportion: pulls as f64 / total as f64,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Trend {
    pub fn ci_contains_zero(&self) -> bool {
        self.ci_low <= 0.0 && 0.0 <= self.ci_high
    }
}

/// Least-squares line through `(x, y)` with a normal 95% interval on the
/// slope. Needs at least three points with distinct `x`.
pub fn linear_trend(points: &[(f64, f64)]) -> Result<Trend> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InvalidParameter(
            "trend needs at least 3 points".into(),
        ));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "trend needs distinct x values".into(),
        ));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let se = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(Trend {
        slope,
        intercept,
        slope_stderr: se,
        ci_low: slope - Z_95 * se,
        ci_high: slope + Z_95 * se,
    })
}

/// Headline numbers written next to the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: usize,
    pub agents: BTreeMap<String, AgentSummary>,
    /// Percent reduction in cliff exposure relative to `baseline`, when both
    /// are present and the baseline touched the cliff.
    pub cliff_reduction: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub episodes: usize,
    pub mean_regret: f64,
    pub mean_steps: f64,
    pub truncated: usize,
    pub cliff_exposure: f64,
}

pub fn summarize(records: &[ExperimentRecord]) -> Summary {
    let mut by_agent: BTreeMap<String, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        let key = if r.bandit_arm().is_some() {
            "bandit".to_string()
        } else {
            r.agent.clone()
        };
        by_agent.entry(key).or_default().push(r);
    }
    let mut agents = BTreeMap::new();
    for (name, rs) in &by_agent {
        let n = rs.len() as f64;
        let repeats: std::collections::BTreeSet<usize> = rs.iter().map(|r| r.repeat).collect();
        agents.insert(
            name.clone(),
            AgentSummary {
                episodes: rs.len(),
                mean_regret: rs.iter().map(|r| r.regret).sum::<f64>() / n,
                mean_steps: rs.iter().map(|r| r.steps as f64).sum::<f64>() / n,
                truncated: rs.iter().filter(|r| r.truncated).count(),
                cliff_exposure: rs.iter().map(|r| r.cliff_steps as f64).sum::<f64>()
                    / repeats.len() as f64,
            },
        );
    }
    let mut cliff_reduction = BTreeMap::new();
    if let Some(base) = agents.get("baseline").map(|a| a.cliff_exposure) {
        if base > 0.0 {
            for (name, a) in &agents {
                if name != "baseline" {
                    cliff_reduction.insert(
                        name.clone(),
                        percent_reduction(base, a.cliff_exposure).expect("nonzero baseline"),
                    );
                }
            }
        }
    }
    Summary {
        records: records.len(),
        agents,
        cliff_reduction,
    }
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(
        repeat: usize,
        agent: &str,
        episode: usize,
        regret: f64,
        cliff: usize,
    ) -> ExperimentRecord {
        ExperimentRecord {
            repeat,
            task_index: 0,
            goal: 1,
            episode,
            agent: agent.into(),
            steps: 10,
            regret,
            cliff_steps: cliff,
            truncated: false,
        }
    }

    #[test]
    fn reduction_against_itself_is_zero() {
        assert_eq!(percent_reduction(22754.31, 22754.31).unwrap(), 0.0);
        assert_eq!(percent_reduction(200.0, 50.0).unwrap(), 75.0);
        assert!(percent_reduction(0.0, 1.0).is_err());
    }

    #[test]
    fn exposure_averages_repeat_totals() {
        let recs = vec![
            rec(0, "baseline", 0, 0.0, 3),
            rec(0, "baseline", 1, 0.0, 5),
            rec(1, "baseline", 0, 0.0, 2),
            rec(1, "pruned", 0, 0.0, 1),
        ];
        assert_eq!(cliff_exposure(&recs, "baseline"), Some(5.0));
        assert_eq!(cliff_exposure(&recs, "lovr"), None);
        let s = summarize(&recs);
        assert_eq!(s.agents["baseline"].cliff_exposure, 5.0);
        assert_eq!(s.cliff_reduction["pruned"], 80.0);
    }

    #[test]
    fn curves_and_proportions() {
        let recs = vec![
            rec(0, "baseline", 0, 1.0, 0),
            rec(1, "baseline", 0, 3.0, 0),
            rec(0, "bandit:zombie", 0, 2.0, 0),
            rec(1, "bandit:lovr", 0, 2.0, 0),
            rec(0, "bandit:zombie", 1, 2.0, 0),
        ];
        let c = regret_curves(&recs);
        let b = c.iter().find(|p| p.agent == "baseline").unwrap();
        assert_eq!((b.mean_regret, b.n), (2.0, 2));
        assert!((b.std_regret - 2f64.sqrt()).abs() < 1e-12);
        let props = arm_proportions(&recs);
        for ep in [0, 1] {
            let total: f64 = props
                .iter()
                .filter(|p| p.episode == ep)
                .map(|p| p.proportion)
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert_eq!(props.len(), 4);
    }

    #[test]
    fn trend_recovers_line() {
        let pts: Vec<_> = (0..50).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let t = linear_trend(&pts).unwrap();
        assert!((t.slope + 0.5).abs() < 1e-12);
        assert!((t.intercept - 3.0).abs() < 1e-9);
        assert!(!t.ci_contains_zero());
        let flat: Vec<_> = (0..50)
            .map(|i| (i as f64, if i % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
        assert!(linear_trend(&flat).unwrap().ci_contains_zero());
    }
}
