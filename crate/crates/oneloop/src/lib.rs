//! Exact engine for stationary-phase expansions of formal Fourier
//! integrals and for one-loop exact (admissible) function pairs.
//!
//! The library computes the expansion coefficients `A_k` of
//! `int g exp((f(x) + x.y)/hbar) dx` two independent ways (a Feynman
//! graph sum and a Gaussian-moment rescaling), performs exact Legendre
//! and Fourier transforms on jets, computes the linear space of `g`
//! admissible for a given `f` together with its rank at a truncation,
//! checks projective-duality identities for explicit hypersurfaces
//! (quadrics, Steiner, Kummer, Segre, toric), and runs a delta-function
//! calculus for distributions supported on cones. Everything exact runs
//! over arbitrary-precision rationals or declared quadratic extension
//! towers; a 256-bit float backend covers the rest.

pub mod error;
pub mod scalar;
pub mod jet;
pub mod linalg;
pub mod expr;
pub mod loops;
pub mod wick;
pub mod transforms;
pub mod kernel;
pub mod parametric;
pub mod poly;
pub mod delta;
pub mod hols;
pub mod toric;
pub mod sample;

pub use error::{Error, Result};
pub use scalar::{Backend, Scalar};
pub use jet::{Jet, JetCtx, JetMap};
