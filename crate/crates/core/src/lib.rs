//! Numerical operator-algebra toolkit for stability of the Wigner equation
//! `|<I(x), I(y)>| = |<x, y>|` in inner product C*-modules over
//! finite-dimensional C*-algebras.
//!
//! The crate is layered bottom-up:
//!
//! * [`algebra`]: direct sums of complex matrix blocks, operator norm,
//!   positive square root, `|a|`, spectral data and polar factors of normal
//!   elements.
//! * [`module`]: standard modules `A^k` with the algebra-valued inner product.
//! * [`control`]: control functions `phi` and their decay/boundedness checks.
//! * [`mapgen`]: exact Wigner solutions and certified approximate solutions.
//! * [`stability`]: scaled iterates, limit extraction and the assembly of
//!   `F`, `s`, `p`, `I` and `h`.
//! * [`verify`]: independent checks of every hypothesis and conclusion.

pub mod algebra;
pub mod control;
mod error;
pub mod mapgen;
pub mod module;
pub mod random;
pub mod stability;
pub mod verify;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
