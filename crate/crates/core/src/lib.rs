//! Simulation of the random square-product process.
//!
//! Sample integers uniformly from `[1, x]`, record the primes dividing each
//! one to an odd power, peel the resulting hypergraph down to its 2-core one
//! column at a time, and find the first set of samples whose product is a
//! perfect square. The analytic side predicts the 2-core trajectory and the
//! threshold from exact smooth-number counts.

pub mod avalanche;
pub mod error;
pub mod instance;
pub mod numtheory;
pub mod peeling;
pub mod predictors;
pub mod squares;

pub use error::{Error, Result};
