//! Simulation and verification engine for set-indexed Lévy processes on the
//! dyadic rectangles of `[0,1]^N`.

pub mod batch;
pub mod config;
pub mod error;
pub mod flows;
pub mod indexing;
pub mod jumps;
pub mod laws;
pub mod markov;
pub mod simulate;
pub mod stats;
pub mod verify;
pub mod numeric;
pub mod rng;

pub use error::{Error, Result};
