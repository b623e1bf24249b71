//! Average age of synchronization (AoS) and average energy consumption of
//! a single-source, single-server status-update system whose server sleeps
//! when idle and wakes up under an N-policy, single-sleep or multi-sleep
//! rule.
//!
//! * [`shs`] solves any finite age-annotated Markov chain (stochastic hybrid
//!   system with a scalar age) for its stationary distribution, age
//!   correlation vector, average age and average power.
//! * [`policies`] builds the chain of each wake-up policy and evaluates the
//!   closed-form results.
//! * [`desim`] simulates the physical server and the generic chain.
//! * [`sweep`] runs parameter sweeps and writes trade-off CSVs.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod desim;
pub mod error;
pub mod policies;
pub mod shs;
pub mod sweep;

pub use error::{Error, Result};
pub use policies::{analyze, closed_form, AnalyticalResult, PolicyKind, PolicyParams};
