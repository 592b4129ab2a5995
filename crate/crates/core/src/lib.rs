//! Range-bound option markets treated as a one-dimensional Schrödinger
//! problem.
//!
//! * [`model`]: λ = r/σ, the 1/S² potential and related scalars.
//! * [`spectral`]: box spectrum of the pricing operator.
//! * [`tunneling`]: transmission coefficient, closed form and quadrature.
//! * [`marketdata`], [`regime`], [`detector`]: scanning price series for
//!   volatility-collapse breakouts.
//! * [`synthetic`]: seeded range-bound paths for testing the scanner.
//! * [`cli`]: the `qtunnel` command-line front end.

pub mod error;
pub mod model;
pub mod quadrature;
pub mod spectral;
pub mod tridiag;
pub mod tunneling;

pub use error::{Error, Result};
pub use model::MarketParams;
pub mod cli;
pub mod detector;
pub mod marketdata;
pub mod regime;
pub mod synthetic;
