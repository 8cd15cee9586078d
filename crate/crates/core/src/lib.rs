//! Declarative puzzle specifications compiled into randomized,
//! solver-verified puzzle instances, plus corpus tooling.

pub mod error;
pub mod expr;
pub mod rng;
pub mod sampler;
pub mod solver;
pub mod spec;
pub mod symbols;
pub mod qa;
pub mod render;
pub mod record;
pub mod corpus;
pub mod pipeline;
pub mod verify;

pub use error::{Error, Result};
