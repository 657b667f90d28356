//! Efficient random variables for multinomial data and the linear,
//! norm-preserving evolution they lead to.
//!
//! - [`multinomial`]: exact multinomial law, seeded sampling, moments and
//!   Chebyshev widths.
//! - [`transform`]: the arcsine variable `χ`, the arc length `ζ`, and the
//!   complex amplitudes `β` and `ψ`.
//! - [`invariance`]: exact and Monte Carlo spreads of transformed binomial
//!   frequencies.
//! - [`evolution`]: generators, matrix-exponential evolution, first-order
//!   steps and linear error propagation.
//! - [`tomography`]: recovering a generator and initial vector from timed
//!   frequency data.
//! - [`io`] and [`cli`]: file formats and the `erlab` command line.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod cli;
pub mod error;
pub mod evolution;
pub mod invariance;
pub mod io;
pub mod linalg;
pub mod lm;
pub mod multinomial;
pub mod rng;
pub mod tomography;
pub mod transform;

pub use error::{Error, Result};
