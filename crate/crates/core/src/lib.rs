//! Hyperbolic ball-based multi-label classifier on the Poincaré ball:
//! geometry primitives, label balls, a Möbius projection head, the
//! single-positive training objective with exact gradients, Riemannian Adam,
//! a synthetic benchmark generator and evaluation/analysis tools.

pub mod balls;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod grad;
pub mod losses;
pub mod optim;
pub mod projector;

pub use error::{Error, Result};
