//! Certificates for the existence or non-existence of weighted time averages
//! `Σ a_n f^n` of polynomial maps.
//!
//! The crate is organized bottom-up: [`polycore`] (one-variable polynomials),
//! [`dynamics`] (Green's function, cycles, Fatou component charts),
//! [`monodromy`] (loop lifting on the preimage tree), [`permgroup`]
//! (stabilizer chains and blocks), [`averaging`] (weight sequences and the
//! certificate pipeline) and [`autos`] (polynomial maps of C^k).

pub mod autos;
pub mod averaging;
pub mod dynamics;
pub mod error;
pub mod monodromy;
pub mod permgroup;
pub mod polycore;

pub use error::{Error, Result};
pub use polycore::{ComplexPoly, C64};
