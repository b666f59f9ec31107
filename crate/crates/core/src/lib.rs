//! Spectral analytics of trade execution flow.
//!
//! Tick streams are summarized by exponentially weighted polynomial
//! moments ([`moments`]); operators built from them are diagonalized
//! ([`spectral`]) to obtain flow spectra, price predictors and skewness
//! indicators ([`flow`], [`skew`]).

pub mod basis;
pub mod error;
pub mod flow;
pub mod moments;
pub mod skew;
pub mod spectral;
pub mod synthetic;

pub use error::{Error, Result};
