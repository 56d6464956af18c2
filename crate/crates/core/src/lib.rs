//! Exact no-trade analysis for finite partition models.
//!
//! Models, securities and priors use exact rationals throughout. The crate
//! decides the verifiability conditions, detects and synthesizes
//! common-knowledge trade, runs announcement and market dynamics, and
//! enumerates small models to check the equivalences between them.

pub mod agreement;
pub mod dynamics;
pub mod enumerate;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod market;
pub mod model;
pub mod multi;
pub mod rational;
pub mod report;
mod union_find;
pub mod verifiability;

pub use error::{Error, Result};
pub use model::{AgentId, Event, Frame, Model, Partition, Prior, Security, StateId, StateSpace};
pub use multi::SecurityBundle;
pub use rational::Rational;
