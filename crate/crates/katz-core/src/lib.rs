//! Exact invariants and reductions for formal type data of connections on
//! the projective line.
//!
//! The crate computes irregularity, slopes, delta, and the rigidity index of
//! formal type data, implements twist / Moebius / Fourier / middle-convolution
//! operations on such data, and runs the reduction algorithm deciding the
//! irregular Deligne-Simpson problem for rigid data, emitting a replayable
//! construction certificate.
//!
//! All arithmetic is exact: rationals with arbitrary-precision integers,
//! extended by roots of unity of bounded order. There is no floating point
//! anywhere.

pub mod batch;
pub mod datum;
pub mod disk;
pub mod error;
pub mod puiseux;
pub mod scalar;
pub mod transforms;

pub use error::{Error, Result};
