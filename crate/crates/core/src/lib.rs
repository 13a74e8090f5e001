//! Fourier and integral transforms of sampled analog signals through
//! Gaussian-process regression with a learned spectral covariance.

pub mod bench;
pub mod bgf;
pub mod cli;
pub mod convention;
pub mod dft;
pub mod error;
pub mod gpcore;
pub mod signal;
pub mod speclearn;
pub mod taper;

pub use error::{Error, Result};
