//! Transmitter: bit sources, drive generation and modulation.

mod drive;
mod sources;

pub use drive::{bessel5_response, generate_drive, modulate, DriveWaveform};
pub use sources::{
    de_bruijn_sequence, differential_decode, differential_encode, prbs, BitOrigin, BitStream,
};
