//! Key-rate simulation for multi-mode continuous-variable QKD with heralded
//! non-Gaussian operations.
//!
//! The pipeline for one supermode is
//! [`source`] → [`ops`] → [`channel`] → [`keyrate`], and [`optimizer`]
//! maximizes the summed rate over the source gain and the operation
//! transmissivities. [`fock`] is an independent number-basis engine used to
//! check the closed-form operation outcomes, and [`verify`] bundles those
//! checks into a report.

pub mod channel;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod keyrate;
pub mod ops;
pub mod optimizer;
pub mod source;
pub mod verify;

pub use error::{Error, Result};
