//! Energy-saving decision making for a radio access network.
//!
//! The crate couples a TTI-level RAN simulator ([`simkernel`]) built on the
//! model kernels in [`netmodel`], a softgoal decomposition model that
//! reweights objectives and prunes the operation space ([`sigraph`]), and a
//! DQN agent that picks per-BS power/tilt/sleep combinations ([`agent`]).
//! [`orchestrator`] wires them into episodes and scheme comparisons.

pub mod agent;
pub mod error;
pub mod files;
pub mod netmodel;
pub mod orchestrator;
pub mod sigraph;
pub mod simkernel;

pub use error::{Error, Result};
