//! Sliding-window UCRL for switching MDPs.
//!
//! A switching MDP is a finite MDP whose mean rewards and transition kernel
//! are swapped out at fixed change points. This crate provides:
//!
//! - [`mdp`]: the ground-truth model, random instance generation and a
//!   seeded environment.
//! - [`solvers`]: exact optimal gain and diameter of a stationary MDP, and
//!   regret scoring of a trace.
//! - [`window`]: the sliding window of transitions and per-episode counts.
//! - [`evi`]: confidence radii and extended value iteration over the L1
//!   plausible set.
//! - [`agents`]: SW-UCRL and the UCRL2, UCRL2-R and UCRL2-RW baselines.
//! - [`bounds`]: closed-form regret bounds and the optimal window size.
//! - [`harness`]: the Monte-Carlo experiment runner, invariant audits and
//!   output writers used by the `swucrl` binary.
//!
//! States and actions are 0-based indices; time steps are 1-based.

pub mod agents;
pub mod bounds;
pub mod error;
pub mod evi;
pub mod harness;
pub mod mdp;
pub mod solvers;
pub mod window;

pub use agents::{run_agent, AgentConfig, AgentKind, RunTrace};
pub use error::{Error, Result};
pub use mdp::{EnvState, MdpConfig, SwitchingMdp};
