//! Sequential hypothesis tests driven by scalar random walks.
//!
//! Each test family turns a block of observations into a scalar increment
//! `h` that is mean zero under the null. The engine accumulates
//! `T_n = Σ h` and `V̂_n = Σ h²` and rejects the first time `T_n` crosses a
//! finite-time iterated-logarithm boundary `q(V̂_n)`. Batch comparators,
//! closed-form power and sample-size oracles, and a seeded Monte Carlo
//! harness sit alongside.

pub mod analysis;
pub mod domain;
pub mod engine;
pub mod error;
pub mod increments;
pub mod sim;
pub mod stream_io;
pub mod thresholds;

pub use domain::{
    rescale, update_walk, Decision, Family, Increment, Observation, ProblemSpec, TestVerdict, WalkState,
};
pub use engine::{run_batch, run_sequential, SequentialTest, Sidedness, StepOutcome};
pub use error::{Error, Result};
pub use thresholds::{batch_threshold, sequential_threshold, ThresholdMode, ThresholdPolicy};
