//! Lyapunov exponents and singular-value moments for products of complex
//! Ginibre and truncated Haar unitary random matrices.
//!
//! * [`ensemble`]: factor-parameter sequences, frequency measures, s_n(L), α
//! * [`sampler`]: reproducible factor draws
//! * [`chain`]: stable log singular values of long products
//! * [`spectrum`]: exact λ_i(n), c(n), normalized gaps and their error bound
//! * [`moments`]: contour-integral moment formulas, by residues, quadrature
//!   and Monte Carlo
//! * [`special`]: digamma, trigamma, complex log-gamma

pub mod chain;
pub mod ensemble;
pub mod error;
mod linalg;
pub mod moments;
pub mod sampler;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};
