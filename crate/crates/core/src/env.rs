//! Gridworld and random-MDP constructors.
//!
//! Grid cells are indexed `x * height + y` with `y = 0` the bottom row.
//! Actions are the four compass moves in the order north, east, south, west.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::index;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp};
use crate::rng::RngStream;

pub const NORTH: ActionId = ActionId(0);
pub const EAST: ActionId = ActionId(1);
pub const SOUTH: ActionId = ActionId(2);
pub const WEST: ActionId = ActionId(3);
pub const COMPASS: [ActionId; 4] = [NORTH, EAST, SOUTH, WEST];

pub const CLIFF_LABEL: &str = "cliff";
pub const START_LABEL: &str = "start";
pub const GOAL_LABEL: &str = "goal";
pub const STICKY_LABEL: &str = "sticky";

pub const CLIFF_WIDTH: usize = 12;
pub const CLIFF_HEIGHT: usize = 4;
const CLIFF_INTENDED: f64 = 0.8;
const CLIFF_WIND: f64 = 0.2;
const CLIFF_STAY: f64 = 0.95;

pub const GRID_WORLD_WIDTH: usize = 100;
pub const GRID_WORLD_HEIGHT: usize = 10;
pub const GRID_WORLD_SUCCESS: f64 = 0.85;
pub const GRID_WORLD_STICKY: (usize, usize) = (55, 5);
const GRID_WORLD_STAY: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
}

impl GridLayout {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn state(&self, x: usize, y: usize) -> StateId {
        debug_assert!(x < self.width && y < self.height);
        StateId(x * self.height + y)
    }

    #[inline]
    pub fn coords(&self, s: StateId) -> (usize, usize) {
        (s.0 / self.height, s.0 % self.height)
    }

    /// Neighbour in direction `a`, or `None` when the move leaves the grid.
    pub fn neighbour(&self, s: StateId, a: ActionId) -> Option<StateId> {
        let (x, y) = self.coords(s);
        match a {
            NORTH if y + 1 < self.height => Some(self.state(x, y + 1)),
            EAST if x + 1 < self.width => Some(self.state(x + 1, y)),
            SOUTH if y >= 1 => Some(self.state(x, y - 1)),
            WEST if x >= 1 => Some(self.state(x - 1, y)),
            _ => None,
        }
    }

    fn move_or_stay(&self, s: StateId, a: ActionId) -> StateId {
        self.neighbour(s, a).unwrap_or(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlipModel {
    /// Intended move w.p. 0.8, otherwise blown one cell south. The south
    /// action drops one or two cells with equal probability.
    CliffWindy,
    /// Intended move w.p. `success`, remaining mass spread evenly over the
    /// other three directions.
    UniformSlip { success: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub slip_model: SlipModel,
    /// `(cell, stay probability)`: the cell ignores the chosen action with
    /// that probability and otherwise performs the intended move exactly.
    pub sticky_states: Vec<(StateId, f64)>,
}

impl GridSpec {
    pub fn layout(&self) -> GridLayout {
        GridLayout::new(self.width, self.height)
    }

    /// Transition rows for every `(cell, action)` in kernel order.
    pub fn kernel(&self) -> Result<Vec<Vec<(StateId, f64)>>> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("grid must be at least 1x1".into()));
        }
        let grid = self.layout();
        let mut sticky = BTreeMap::new();
        for &(s, p) in &self.sticky_states {
            if s.0 >= grid.n_cells() {
                return Err(Error::StateOutOfRange {
                    state: s.0,
                    n_states: grid.n_cells(),
                });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "sticky probability {p} at {s} outside [0, 1]"
                )));
            }
            sticky.insert(s, p);
        }
        if let SlipModel::UniformSlip { success } = self.slip_model {
            if !(0.0..=1.0).contains(&success) {
                return Err(Error::InvalidParameter(format!(
                    "success probability {success} outside [0, 1]"
                )));
            }
        }

        let mut rows = Vec::with_capacity(grid.n_cells() * 4);
        for s in (0..grid.n_cells()).map(StateId) {
            for a in COMPASS {
                let mut row = Row::default();
                if let Some(&stay) = sticky.get(&s) {
                    row.add(s, stay);
                    row.add(grid.move_or_stay(s, a), 1.0 - stay);
                } else {
                    self.free_move(&grid, s, a, &mut row);
                }
                rows.push(row.finish());
            }
        }
        Ok(rows)
    }

    fn free_move(&self, grid: &GridLayout, s: StateId, a: ActionId, row: &mut Row) {
        match self.slip_model {
            SlipModel::CliffWindy => {
                if a == SOUTH {
                    match grid.neighbour(s, SOUTH) {
                        Some(one) => match grid.neighbour(one, SOUTH) {
                            Some(two) => {
                                row.add(one, CLIFF_INTENDED / 2.0);
                                row.add(two, CLIFF_INTENDED / 2.0);
                            }
                            None => row.add(one, CLIFF_INTENDED),
                        },
                        None => row.add(s, CLIFF_INTENDED),
                    }
                } else {
                    row.add(grid.move_or_stay(s, a), CLIFF_INTENDED);
                }
                row.add(grid.move_or_stay(s, SOUTH), CLIFF_WIND);
            }
            SlipModel::UniformSlip { success } => {
                let slip = (1.0 - success) / 3.0;
                for b in COMPASS {
                    let p = if b == a { success } else { slip };
                    row.add(grid.move_or_stay(s, b), p);
                }
            }
        }
    }
}

/// Accumulates mass per successor so repeated "stay" contributions merge.
#[derive(Default)]
struct Row(BTreeMap<StateId, f64>);

impl Row {
    fn add(&mut self, s: StateId, p: f64) {
        if p > 0.0 {
            *self.0.entry(s).or_insert(0.0) += p;
        }
    }

    fn finish(self) -> Vec<(StateId, f64)> {
        self.0.into_iter().collect()
    }
}

fn uniform_initial(n: usize) -> Vec<(StateId, f64)> {
    let p = 1.0 / n as f64;
    (0..n).map(|s| (StateId(s), p)).collect()
}

pub fn cliff_layout() -> GridLayout {
    GridLayout::new(CLIFF_WIDTH, CLIFF_HEIGHT)
}

pub fn cliff_start() -> StateId {
    cliff_layout().state(0, 0)
}

pub fn cliff_goal() -> StateId {
    cliff_layout().state(CLIFF_WIDTH - 1, 0)
}

/// Bottom-row cells strictly between the start and goal columns.
pub fn cliff_cells() -> Vec<StateId> {
    let grid = cliff_layout();
    (1..CLIFF_WIDTH - 1).map(|x| grid.state(x, 0)).collect()
}

/// The 4x12 windy cliff walk. Episodes always start bottom-left.
pub fn build_cliff_walker() -> TabularMdp {
    let cliff = cliff_cells();
    let spec = GridSpec {
        width: CLIFF_WIDTH,
        height: CLIFF_HEIGHT,
        slip_model: SlipModel::CliffWindy,
        sticky_states: cliff.iter().map(|&s| (s, CLIFF_STAY)).collect(),
    };
    let mut labels: BTreeMap<StateId, String> = cliff
        .into_iter()
        .map(|s| (s, CLIFF_LABEL.to_string()))
        .collect();
    labels.insert(cliff_start(), START_LABEL.into());
    labels.insert(cliff_goal(), GOAL_LABEL.into());
    let rows = spec.kernel().expect("cliff spec is well formed");
    TabularMdp::new_validated(
        spec.width * spec.height,
        4,
        rows,
        vec![(cliff_start(), 1.0)],
        labels,
    )
    .expect("cliff walker is a valid MDP")
}

pub fn grid_world_layout() -> GridLayout {
    GridLayout::new(GRID_WORLD_WIDTH, GRID_WORLD_HEIGHT)
}

pub fn grid_world_sticky() -> StateId {
    grid_world_layout().state(GRID_WORLD_STICKY.0, GRID_WORLD_STICKY.1)
}

/// The 100x10 slippery grid with a single sticky cell at (55, 5) and a
/// uniform initial distribution.
pub fn build_grid_world() -> TabularMdp {
    let sticky = grid_world_sticky();
    let spec = GridSpec {
        width: GRID_WORLD_WIDTH,
        height: GRID_WORLD_HEIGHT,
        slip_model: SlipModel::UniformSlip {
            success: GRID_WORLD_SUCCESS,
        },
        sticky_states: vec![(sticky, GRID_WORLD_STAY)],
    };
    let rows = spec.kernel().expect("grid spec is well formed");
    let n = spec.width * spec.height;
    TabularMdp::new_validated(
        n,
        4,
        rows,
        uniform_initial(n),
        BTreeMap::from([(sticky, STICKY_LABEL.to_string())]),
    )
    .expect("grid world is a valid MDP")
}

/// Deterministic 4-action grid; moves into walls stay put.
pub fn build_deterministic_grid(width: usize, height: usize) -> Result<TabularMdp> {
    let spec = GridSpec {
        width,
        height,
        slip_model: SlipModel::UniformSlip { success: 1.0 },
        sticky_states: Vec::new(),
    };
    let rows = spec.kernel()?;
    let n = width * height;
    TabularMdp::new_validated(n, 4, rows, uniform_initial(n), BTreeMap::new())
}

const RANDOM_MDP_ATTEMPTS: usize = 1000;

/// Random MDP where each `(s, a)` row has `out_degree` distinct successors
/// with flat-Dirichlet probabilities. Resamples until strongly connected.
pub fn build_random_mdp(
    n_states: usize,
    n_actions: usize,
    out_degree: usize,
    seed: u64,
) -> Result<TabularMdp> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidParameter(
            "random MDP needs at least one state and one action".into(),
        ));
    }
    if out_degree == 0 || out_degree > n_states {
        return Err(Error::InvalidParameter(format!(
            "out_degree {out_degree} must lie in 1..={n_states}"
        )));
    }
    let mut rng = RngStream::new(seed);
    for _ in 0..RANDOM_MDP_ATTEMPTS {
        let mut rows = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states * n_actions {
            let mut succ: Vec<usize> = index::sample(&mut rng, n_states, out_degree).into_vec();
            succ.sort_unstable();
            let weights: Vec<f64> = (0..out_degree)
                .map(|_| {
                    let w: f64 = Exp1.sample(&mut rng);
                    w.max(f64::MIN_POSITIVE)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let mut row: Vec<(StateId, f64)> = succ
                .into_iter()
                .zip(weights)
                .map(|(s, w)| (StateId(s), w / total))
                .collect();
            // Put rounding residue on the last entry so the row sums to 1.
            let residue = 1.0 - row.iter().map(|(_, p)| p).sum::<f64>();
            if let Some(last) = row.last_mut() {
                last.1 += residue;
            }
            rows.push(row);
        }
        if strongly_connected(n_states, n_actions, &rows) {
            return TabularMdp::new_validated(
                n_states,
                n_actions,
                rows,
                uniform_initial(n_states),
                BTreeMap::new(),
            );
        }
    }
    Err(Error::InvalidParameter(format!(
        "no strongly connected MDP found in {RANDOM_MDP_ATTEMPTS} draws"
    )))
}

fn strongly_connected(n: usize, n_actions: usize, rows: &[Vec<(StateId, f64)>]) -> bool {
    let mut fwd = vec![Vec::new(); n];
    let mut bwd = vec![Vec::new(); n];
    for s in 0..n {
        for a in 0..n_actions {
            for &(t, p) in &rows[s * n_actions + a] {
                if p > 0.0 {
                    fwd[s].push(t.0);
                    bwd[t.0].push(s);
                }
            }
        }
    }
    reach_all(&fwd) && reach_all(&bwd)
}

fn reach_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == adj.len()
}
