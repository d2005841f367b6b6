//! Numerical laboratory for covariant phase-space measurements.
//!
//! The crate simulates, in a truncated oscillator basis, how the position
//! and momentum distributions of a quantum state are both recovered from
//! the statistics of a single phase-space measurement G^S, realizes that
//! measurement as an eight-port homodyne detection scheme, and probes the
//! limits of the method (moment indeterminacy for double-slit states).

pub mod config;
pub mod error;
pub mod fock;
pub mod grid;
pub mod homodyne;
pub mod io;
pub mod moments;
pub mod phase_space;
pub mod runner;

pub use error::{Error, Result};
