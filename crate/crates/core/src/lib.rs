//! Production-line planning toolkit.
//!
//! A half-hour time-domain simulator scores line configurations; the
//! free-stage estimates shrink the search space; several bitstring encodings
//! expose that space to a matrix-product-state Born machine, which boosts
//! conventional metaheuristics (GA, SA, PT). The `bench` module reproduces
//! the comparison experiments.

pub mod bench;
pub mod catalog;
pub mod encoding;
pub mod error;
pub mod evaluator;
pub mod freestage;
pub mod geo;
pub mod mpsgen;
pub mod simulator;
pub mod solvers;
pub mod space;

pub use error::{Error, Result};
