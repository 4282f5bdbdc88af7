//! Neural-predictor-guided evolutionary search over enumerable cell search spaces.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithmic piece:
//!
//! - [`archgraph`]: cell DAGs, normalization, canonical hashing and encodings.
//! - [`space`]: enumerable search spaces, the two random samplers, one-to-many
//!   mutation, fitness oracles and path distributions.
//! - [`numgrad`]: a small dense tensor engine with reverse-mode differentiation.
//! - [`predictor`]: the GIN-based uncertainty and point predictors plus MLP baselines.
//! - [`evolve`]: the predictor-guided search loops and their baselines.
//!
//! IO, file formats and the command line live in the `npenas` crate.

#![no_std]

extern crate alloc;

pub mod archgraph;
pub mod error;
pub mod evolve;
pub mod numgrad;
pub mod predictor;
pub mod seed;
pub mod space;
pub mod stats;

pub use archgraph::{ArchGraph, GraphKey, OpKind, PathEncoding, PathUniverse, Vocabulary};
pub use error::{Error, Result};
pub use space::{EvalRecord, FitnessOracle, SearchSpace};
