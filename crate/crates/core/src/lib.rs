//! Environment-aware codebook design for RIS-assisted multi-user MISO downlinks.
//!
//! The crate is split along the two stages of the training protocol:
//!
//! * [`codebook`] builds, offline, a set of discrete RIS phase configurations
//!   from statistical channel knowledge (virtual channels + alternating
//!   optimization of ZF power allocation and element phases).
//! * [`protocol`] plays the codebook online: one uplink training block per
//!   codeword, LS estimation of the composite channel, ZF precoding and
//!   selection of the best codeword.
//!
//! [`theory`] holds the closed-form received-power scaling law used to check
//! the Monte Carlo results produced by [`harness`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codebook;
mod error;
pub mod harness;
pub mod linalg;
pub mod protocol;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector};
pub use num_complex::Complex64;
