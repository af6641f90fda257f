//! Decentralized multi-armed bandits with distributed players.
//!
//! The crate is organised bottom-up:
//!
//! * [`reward`]: reward families, ground-truth parameter sets, KL divergences, arm ranking.
//! * [`policy`]: single-player arm selection (Lai-Robbins and the sample-mean index
//!   policies) over an arbitrary eligible subset of arms.
//! * [`tdfs`]: the time-division fair-sharing policy wrapping a single-player policy,
//!   with or without pre-agreed offsets.
//! * [`arena`]: the multi-player environment, collision resolution and trial loop.
//! * [`analytics`]: regret curves and the closed-form regret constants.
//!
//! Arms and players are 0-based throughout the API. The 1-based `⊘` operator
//! ([`tdfs::oslash`]) is kept 1-based because the schedule is defined in those terms.

pub mod analytics;
pub mod arena;
mod error;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod tdfs;

pub use error::{Error, Result};
