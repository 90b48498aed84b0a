//! Finite-horizon robust Markov games.
//!
//! Reward and transition uncertainty sets, their support functions and equivalent policy
//! regularizers, stage-game solvers, robust planning and the general-sum to zero-sum reductions.

pub mod error;
pub mod game;
pub mod io;
pub mod linalg;
pub mod oracles;
pub mod planner;
pub mod reductions;
pub mod reward;
pub mod stage;
pub mod transition;

pub use error::{Error, Result};
