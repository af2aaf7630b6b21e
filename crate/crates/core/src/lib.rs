//! Learning machines that copy the dynamics of black-box systems.
//!
//! A three-layer network is trained by Monte-Carlo search on input-output
//! responses or on a delay-embedded time series of a black system, then
//! closed on itself (output fed back as input) so it evolves as an
//! autonomous dynamical system. The crate provides:
//!
//! - [`net`]: the three-layer network and its evaluation,
//! - [`machines`]: the four machine variants (iterative, differential,
//!   and their delay-coordinate forms) and self-evolution,
//! - [`integrate`]: fixed-step RK4 for ODEs, delay-DEs (method of steps)
//!   and map iteration,
//! - [`trainer`]: greedy Monte-Carlo training under a hard weight bound,
//!   with scheduled parameter snapshots,
//! - [`blackbox`]: reference black systems (Lorenz flow, teacher
//!   classifier) and data extraction,
//! - [`analysis`]: Poincaré sections, period detection, bifurcation
//!   diagrams over training time, prediction horizons.
//!
//! Everything is deterministic under explicit seeds; no global RNG state.

pub mod analysis;
pub mod blackbox;
mod error;
pub mod integrate;
pub mod machines;
pub mod net;
pub mod trainer;

pub use error::{Error, Result};
