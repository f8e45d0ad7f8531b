//! Modified wave operators for discrete Schrödinger operators with long-range potentials.
//!
//! The crate works on a periodic box `{-L..L}^d` with `H = H0 + V`, where `H0` is the
//! Fourier multiplier by `p0(xi) = sum_j cos xi_j`.

pub mod classical;
pub mod error;
pub mod experiment;
pub mod extension;
pub mod fit;
pub mod hj;
pub mod linalg;
pub mod lattice;
pub mod quad;
pub mod quantum;
pub mod smooth;
pub mod waveop;

pub use error::{Error, Result};
