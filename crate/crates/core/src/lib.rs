//! Simulation core for a 4-dimensional simplex modulation link: codebooks,
//! transmitter, optical channel, coherent receiver DSP and BER metrics.

pub mod channel;
pub mod constellation;
pub mod dsp;
pub mod metrics;
mod error;
pub mod rng;
pub mod rxdsp;
pub mod txchain;
pub mod waveform;

pub use error::{Error, Result};
