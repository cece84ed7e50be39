//! Exact-distribution simulator for a two-phase proof of quantumness whose
//! verifier is computationally unbounded.
//!
//! The prover commits coherently to a superposition over `(b, x)`, collapses a
//! pairwise-independent hash, and then answers one of two challenges. Because
//! every intermediate state is a uniform superposition over a support set, the
//! whole quantum run is simulated exactly from classical support sets and
//! their Walsh–Hadamard spectra.

pub mod adversaries;
pub mod amplification;
pub mod bits;
pub mod cli;
pub mod coherent;
pub mod commitment;
pub mod error;
pub mod hashing;
pub mod lemmas;
pub mod stats;
pub mod verifier;
pub mod wht;

pub use error::{Error, Result};
