//! Landmark coverings of tabular goal-based MDPs.
//!
//! The crate solves every goal task of a finite MDP exactly, builds η-covers
//! of the state space under two hitting-time metrics, and uses the landmark
//! value tables for transfer: action pruning, landmark options, a zero-shot
//! greedy "zombie" policy and a dense shaped reward. A UCB controller can
//! pick among those agents per episode, and [`harness`] runs seeded
//! experiments end to end.

pub mod agents;
pub mod bandit;
pub mod bounds;
pub mod cover;
pub mod env;
pub mod error;
pub mod harness;
pub mod learning;
pub mod mdp;
pub mod oracle;
pub mod par;
pub mod rng;
mod serde_inf;

pub use cover::{build_cover, distance, verify_cover, CoverMode, LandmarkCover, MetricKind};
pub use error::{Error, Result};
pub use mdp::{ActionId, GoalTask, StateId, TabularMdp};
pub use oracle::{solve, HittingTimes, QTable, ValueTable};
pub use rng::RngStream;
