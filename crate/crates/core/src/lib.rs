//! Thermodynamics of one-dimensional finite-range Gibbs measures and the
//! statistics of shift-matches in Gibbsian sequences.
//!
//! * [`potential`]: interactions, Hamiltonians, the `qU` / `U + V` algebra.
//! * [`thermo`]: transfer matrices, pressure, entropy, the match exponent
//!   `α = p(U) - p(2U)/2`, exact cylinder probabilities.
//! * [`sampler`]: seeded stationary sampling and the Dirac sequence.
//! * [`matcher`]: exact match counts `N`, maximal overlaps `M`, hitting
//!   times `T`, and two-sequence cross matches.
//! * [`experiments`]: Monte Carlo scans that compare sampled statistics
//!   with transfer-matrix predictions.
//! * [`model`]: model and plan file formats.

pub mod error;
pub mod experiments;
pub mod matcher;
pub mod model;
pub mod potential;
pub mod rng;
pub mod sampler;
pub mod thermo;

pub use error::{Error, Result};
pub use potential::{Alphabet, Interaction, Symbol, Term, Window};
pub use sampler::{Sequence, SequenceMeta, StationaryChain};
pub use thermo::TransferSystem;
