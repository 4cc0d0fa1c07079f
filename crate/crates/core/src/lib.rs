//! Simulation of a full-duplex receiver built around a modulo ADC.
//!
//! The signal chain runs: [`waveforms`] (QPSK data, periodic pilot, sparse
//! channels, received mixture) → [`frontend`] (folding and quantization) →
//! [`unfolding`] (higher-order-difference recovery) and [`chanest`]
//! (modulo-domain SI channel estimation) → [`sic`] (cancellation, NLMS
//! baseline, detection, metrics).

// `!(x > 0.0)` is how parameter checks reject NaN along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chanest;
pub mod dsp;
pub mod error;
pub mod frontend;
pub mod prony;
pub mod sic;
pub mod unfolding;
pub mod waveforms;

pub use error::{Error, Result};
pub use num_complex::Complex64;
