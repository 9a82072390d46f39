//! Blind coherent receiver.

mod align;
mod carrier;
mod chain;
mod clock;
mod decide;
mod equalizer;
mod ideal;

pub use align::{bpsk_pair_demux, coherency_demux, parity_score, tributary_align, AlignOutput, TributaryRotation};
pub use carrier::{
    carrier_phase_estimate, carrier_phase_estimate_orders, estimate_freq_offset, estimate_freq_offset_bpsk_pair,
    remove_freq_offset, vv_phase, CpeOutput, MIN_FREQ_SYMBOLS,
};
pub use chain::{default_mode, run_blind_chain, ChainOutput, DspReport, RxChainConfig, StageCapture};
pub use clock::{clock_recover, clock_recover_with, ClockConfig, ClockReport};
pub use decide::{decide_and_decode, normalize_tributaries};
pub use equalizer::{
    bpsk_error, butterfly_equalize, cma_error, equalize_from, EqualizerConfig, EqualizerMode, EqualizerOutput,
    EqualizerState,
};
pub use ideal::{ideal_receive, IdealOutput};

use crate::waveform::DualPolWaveform;

/// Exact inverse of [`crate::channel::apply_cd`].
pub fn cd_compensate(sig: &DualPolWaveform, dispersion_total: f64) -> DualPolWaveform {
    crate::channel::apply_cd(sig, -dispersion_total)
}
