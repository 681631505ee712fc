//! Tabular offline reinforcement learning with support-filtered Bellman backups.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`] exact finite MDPs: evaluation, control, occupancy and simulation.
//! * [`env`] benchmark constructors (rare transition, combination lock,
//!   discretized cart-pole, random instances).
//! * [`data`] batch generation, count-based density estimates and the support
//!   filter `ζ(s,a) = 1(μ̂(s,a) ≥ b)`.
//! * [`algo`] MBS-QI / MBS-PI together with FQI, API, BCQL, SPIBB and
//!   behavior cloning over the complete tabular function class.
//! * [`theory`] the absorbing-action auxiliary MDP, policy projection and
//!   numeric checks of the fixed-point and value inequalities.
//! * [`experiment`] the seeded experiment harness behind the `mbs-lab` CLI.

pub mod algo;
pub mod data;
pub mod env;
mod error;
pub mod experiment;
pub mod mdp;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
pub use mdp::{Policy, QTable, RewardDist, TabularMdp};
