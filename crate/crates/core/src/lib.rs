//! Linear stochastic bandits with bootstrap confidence bounds.
//!
//! The crate contains two bootstrap agents (pairs bootstrap, "X-Random", and
//! residual bootstrap, "X-Fixed"), three classic baselines (OFUL, LinUCB and
//! linear Thompson sampling), and a test bed that draws sparse, hierarchical
//! response surfaces over a two-level combinatorial arm space.
//!
//! Module map:
//!
//! - [`numerics`]: dense solves, percentiles, seeded random streams.
//! - [`arms`]: enumeration of the `2^K` arms and their feature expansions.
//! - [`design`]: orthogonal-array initial designs.
//! - [`environment`]: surface sampling and reward generation.
//! - [`agents`]: the five arm-selection policies.
//! - [`simulation`]: experiment orchestration, regret metrics, tuning.

pub mod agents;
pub mod arms;
pub mod design;
pub mod environment;
mod error;
pub mod numerics;
pub mod simulation;

pub use error::{Error, Result};
