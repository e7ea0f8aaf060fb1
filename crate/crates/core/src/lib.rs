//! Distributed power allocation for device-to-device (D2D) couples sharing
//! OFDMA subcarriers with a cellular network.
//!
//! The crate covers both operating modes:
//!
//! * **overlay / dedicated**: D2D couples own a set of subcarriers and play a
//!   potential game whose potential is the network sum rate. Each couple
//!   updates its powers with a linearized best response ([`game`]) computed by a
//!   penalty-shifted waterfilling ([`subproblem`]).
//! * **underlay / reuse**: aggregate interference at every eNB must stay below
//!   a per-subcarrier threshold. The [`underlay`] module relaxes those
//!   constraints with Lagrange multipliers, runs a projected subgradient
//!   heuristic, and certifies it against an ellipsoid-method dual bound.
//!
//! [`scenario`] builds random multi-cell instances, [`rate`] holds the rate
//! algebra, [`sounding`] reconstructs the penalty coefficients from simulated
//! broadcast measurements and [`campaign`] drives seeded Monte-Carlo batches.

pub mod campaign;
pub mod error;
pub mod game;
pub mod rate;
pub mod scenario;
pub mod sounding;
pub mod subproblem;
pub mod underlay;

pub use error::{Error, Result};
pub use scenario::{PowerProfile, Scenario};
