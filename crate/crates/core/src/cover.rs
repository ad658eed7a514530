//! Hitting-time metrics and landmark η-covers.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{StateId, TabularMdp};
use crate::oracle::{HittingTimes, QTable, ValueTable};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// `d(x, y) = |V^{x*}(y)| + |V^{y*}(x)|`
    #[serde(alias = "rt")]
    RoundTrip,
    /// `d(x, y) = max(|V^{x*}(y)|, |V^{y*}(x)|)`
    #[serde(alias = "inf", alias = "max")]
    MaxOneWay,
}

impl MetricKind {
    /// Combines the two directed hitting times between a pair of states.
    #[inline]
    pub fn combine(self, there: f64, back: f64) -> f64 {
        match self {
            MetricKind::RoundTrip => there + back,
            MetricKind::MaxOneWay => there.max(back),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::RoundTrip => "rt",
            MetricKind::MaxOneWay => "inf",
        })
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rt" | "round_trip" | "roundtrip" => Ok(MetricKind::RoundTrip),
            "inf" | "max" | "max_one_way" | "maxoneway" => Ok(MetricKind::MaxOneWay),
            other => Err(Error::InvalidParameter(format!("unknown metric '{other}'"))),
        }
    }
}

/// `d(x, y)` under `metric`; `+inf` when either direction is unreachable.
pub fn distance(times: &HittingTimes, x: StateId, y: StateId, metric: MetricKind) -> f64 {
    metric.combine(times.get(x, y), times.get(y, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMode {
    Exact,
    Learned,
}

/// Everything the transfer mechanisms need to know about one landmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkTables {
    pub landmark: StateId,
    /// `|V^{ℓ*}(s)|` for every `s`.
    pub to_landmark: ValueTable,
    /// `|V^{s*}(ℓ)|` for every `s`: expected steps from the landmark out to `s`.
    #[serde(with = "crate::serde_inf::vec")]
    pub from_landmark: Vec<f64>,
    pub q: QTable,
    /// Per-state update counts when the tables were learned.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visits: Option<Vec<u64>>,
}

impl LandmarkTables {
    pub fn exact(mdp: &TabularMdp, times: &HittingTimes, landmark: StateId) -> Self {
        let to_landmark = times.value_table(landmark);
        let q = QTable::from_values(mdp, &to_landmark);
        let from_landmark = mdp.states().map(|s| times.get(landmark, s)).collect();
        Self {
            landmark,
            to_landmark,
            from_landmark,
            q,
            visits: None,
        }
    }

    /// Whether the value at `s` is backed by data. Always true for exact tables.
    #[inline]
    pub fn known(&self, s: StateId) -> bool {
        s == self.landmark || self.visits.as_ref().is_none_or(|v| v[s.0] > 0)
    }
}

/// An η-cover: landmark list in fixed order, radius, metric and tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkCover {
    pub n_states: usize,
    pub n_actions: usize,
    pub eta: f64,
    pub metric: MetricKind,
    pub mode: CoverMode,
    pub tables: Vec<LandmarkTables>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverCheck {
    pub covered: bool,
    pub uncovered: Vec<StateId>,
}

impl LandmarkCover {
    /// Exact cover over a given landmark list. Does not check coverage.
    pub fn from_landmarks(
        mdp: &TabularMdp,
        times: &HittingTimes,
        landmarks: &[StateId],
        eta: f64,
        metric: MetricKind,
    ) -> Result<Self> {
        check_eta(eta)?;
        for (i, &l) in landmarks.iter().enumerate() {
            mdp.check_state(l)?;
            if landmarks[..i].contains(&l) {
                return Err(Error::InvalidParameter(format!("duplicate landmark {l}")));
            }
        }
        Ok(Self {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            eta,
            metric,
            mode: CoverMode::Exact,
            tables: landmarks
                .iter()
                .map(|&l| LandmarkTables::exact(mdp, times, l))
                .collect(),
        })
    }

    pub fn landmarks(&self) -> Vec<StateId> {
        self.tables.iter().map(|t| t.landmark).collect()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn index_of(&self, landmark: StateId) -> Option<usize> {
        self.tables.iter().position(|t| t.landmark == landmark)
    }

    /// `d(s, ℓ_k)` as seen through the stored tables.
    #[inline]
    pub fn distance(&self, s: StateId, k: usize) -> f64 {
        let t = &self.tables[k];
        if !t.known(s) {
            return f64::INFINITY;
        }
        self.metric
            .combine(t.to_landmark.values[s.0], t.from_landmark[s.0])
    }

    /// Indices of landmarks within η of `g`.
    pub fn witness_indices(&self, g: StateId) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.distance(g, k) <= self.eta)
            .collect()
    }

    /// Landmarks within η of `g`. Empty means the cover is corrupted.
    pub fn witnesses(&self, g: StateId) -> Result<Vec<StateId>> {
        let idx = self.witness_indices(g);
        if idx.is_empty() {
            return Err(Error::NoWitness(g));
        }
        Ok(idx.into_iter().map(|k| self.tables[k].landmark).collect())
    }

    /// Witness closest to `g`, lowest index on ties.
    pub fn nearest_witness(&self, g: StateId) -> Result<usize> {
        self.witness_indices(g)
            .into_iter()
            .min_by(|&a, &b| self.distance(g, a).total_cmp(&self.distance(g, b)))
            .ok_or(Error::NoWitness(g))
    }

    pub fn without_landmark(&self, k: usize) -> Self {
        let mut out = self.clone();
        out.tables.remove(k);
        out
    }

    pub fn verify(&self) -> CoverCheck {
        let uncovered: Vec<StateId> = (0..self.n_states)
            .map(StateId)
            .filter(|&s| (0..self.len()).all(|k| self.distance(s, k) > self.eta))
            .collect();
        CoverCheck {
            covered: uncovered.is_empty(),
            uncovered,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cover: Self = serde_json::from_str(text)?;
        check_eta(cover.eta)?;
        for t in &cover.tables {
            if t.to_landmark.len() != cover.n_states
                || t.from_landmark.len() != cover.n_states
                || t.q.q.len() != cover.n_states * cover.n_actions
            {
                return Err(Error::Shape(format!(
                    "tables for landmark {} do not match {} states x {} actions",
                    t.landmark, cover.n_states, cover.n_actions
                )));
            }
        }
        Ok(cover)
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

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "eta must be positive and finite, got {eta}"
        )))
    }
}

/// Stochastic greedy cover: repeatedly promote a uniformly drawn uncovered
/// state to a landmark until nothing is left uncovered.
pub fn build_cover(
    mdp: &TabularMdp,
    times: &HittingTimes,
    eta: f64,
    metric: MetricKind,
    rng: &mut RngStream,
) -> Result<LandmarkCover> {
    check_eta(eta)?;
    if let Some((from, to)) = times.first_unreachable() {
        return Err(Error::Unreachable { from, to });
    }
    let mut uncovered: Vec<StateId> = mdp.states().collect();
    let mut landmarks = Vec::new();
    while !uncovered.is_empty() {
        let l = uncovered[rng.random_range(0..uncovered.len())];
        landmarks.push(l);
        uncovered.retain(|&s| distance(times, s, l, metric) > eta);
    }
    LandmarkCover::from_landmarks(mdp, times, &landmarks, eta, metric)
}

pub fn verify_cover(cover: &LandmarkCover) -> CoverCheck {
    cover.verify()
}
