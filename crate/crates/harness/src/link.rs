//! One simulated frame: source, transmitter, channel and receiver.

use anyhow::{Context, Result};
use num_complex::Complex64;
use simplexlink_core::channel::{
    apply_freq_offset, apply_jones_rotation, apply_phase_noise, load_awgn_to_osnr, optical_bpf, ssfm_span,
    FiberSpec, ImpairmentConfig, JonesAngles, JonesMode, JonesSetting,
};
use simplexlink_core::constellation::{map_bits, Format, SymbolVec4};
use simplexlink_core::metrics::{count_ber, synchronize_search, SyncResult};
use simplexlink_core::rng::{stream, Stream};
use simplexlink_core::rxdsp::{
    decide_and_decode, ideal_receive, normalize_tributaries, run_blind_chain, DspReport, RxChainConfig, StageCapture,
};
use simplexlink_core::txchain::{de_bruijn_sequence, differential_encode, generate_drive, modulate, BitStream};
use simplexlink_core::waveform::DualPolWaveform;
use simplexlink_core::Error as CoreError;

pub const DE_BRUIJN_ORDER: u32 = 11;
pub const PERIOD_SYMBOLS: usize = 1 << DE_BRUIJN_ORDER;
/// Spare symbols past the counted period for equalizer and filter edges.
const GUARD_SYMBOLS: usize = 64;

/// Transmitted data for one format: a de Bruijn period on each of the two
/// bit lanes (the second lane offset by half a period), repeated to cover
/// equalizer convergence.
#[derive(Debug, Clone)]
pub struct TxFrame {
    pub format: Format,
    /// One period of payload bits, two per symbol.
    pub reference: BitStream,
    /// One period of line symbols.
    pub period: Vec<SymbolVec4>,
    pub periods: usize,
}

impl TxFrame {
    /// Frame for the blind receiver, long enough to converge before one full
    /// counted period.
    pub fn blind(format: Format, convergence_symbols: usize) -> Result<Self> {
        Self::new(format, (convergence_symbols + PERIOD_SYMBOLS + GUARD_SYMBOLS).div_ceil(PERIOD_SYMBOLS))
    }

    pub fn new(format: Format, periods: usize) -> Result<Self> {
        let db = de_bruijn_sequence(DE_BRUIJN_ORDER)?;
        let b = db.bits();
        let n = b.len();
        let lane0: Vec<u8> = b.to_vec();
        let lane1: Vec<u8> = (0..n).map(|k| b[(k + n / 2) % n]).collect();
        let payload: Vec<u8> = lane0.iter().zip(&lane1).flat_map(|(&a, &c)| [a, c]).collect();
        let (l0, l1) = match format {
            Format::Simplex3d => (lane0, lane1),
            Format::DpBpsk => (differential_encode(&lane0), differential_encode(&lane1)),
        };
        let line: Vec<u8> = l0.iter().zip(&l1).flat_map(|(&a, &c)| [a, c]).collect();
        let period = map_bits(&format.codebook(), &line)?;
        Ok(Self {
            format,
            reference: BitStream::explicit(payload)?,
            period,
            periods: periods.max(1),
        })
    }

    pub fn record(&self) -> Vec<SymbolVec4> {
        (0..self.periods).flat_map(|_| self.period.iter().copied()).collect()
    }
}

/// Noise-free optical field at the receiver input, before per-frame
/// impairments. Deterministic for a given format and sweep point, so it is
/// computed once and shared by all frames of a point.
pub fn transmit(
    frame: &TxFrame,
    symbol_rate: f64,
    samples_per_symbol: usize,
    dac_bandwidth: Option<f64>,
    launch_power_dbm: f64,
    fiber: Option<&FiberSpec>,
) -> Result<DualPolWaveform> {
    let drive = generate_drive(&frame.record(), samples_per_symbol, dac_bandwidth, symbol_rate).context("drive")?;
    let tx = modulate(&drive, launch_power_dbm).context("modulator")?;
    match fiber {
        Some(f) => ssfm_span(&tx, f).context("fiber propagation"),
        None => Ok(tx),
    }
}

/// Per-frame receiver-side impairments, in link order.
pub fn impair(
    sig: &DualPolWaveform,
    imp: &ImpairmentConfig,
    osnr_db: Option<f64>,
    symbol_rate: f64,
    seed: u64,
) -> Result<DualPolWaveform> {
    let mut w = apply_phase_noise(sig, imp.linewidth_total, seed).context("phase noise")?;
    w = apply_freq_offset(&w, imp.freq_offset).context("frequency offset")?;
    let angles = match imp.jones {
        JonesSetting::Mode(JonesMode::Off) => None,
        JonesSetting::Mode(JonesMode::Random) => Some(JonesAngles::random(&mut stream(seed, Stream::Jones))),
        JonesSetting::Fixed(a) => Some(a),
    };
    if let Some(a) = angles {
        w = apply_jones_rotation(&w, a);
    }
    w = load_awgn_to_osnr(&w, osnr_db, symbol_rate, seed).context("noise loading")?;
    if let Some(b) = imp.bpf_bandwidth {
        w = optical_bpf(&w, b).context("optical filter")?;
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy)]
pub enum Receiver<'a> {
    Blind(&'a RxChainConfig),
    Ideal,
}

#[derive(Debug, Clone)]
pub struct FrameOutcome {
    pub errors: u64,
    pub bits: u64,
    pub sync: SyncResult,
    /// Signal-to-error power ratio of the counted unit-scale symbols.
    pub snr_db: Option<f64>,
    pub report: Option<DspReport>,
    pub stages: Vec<StageCapture>,
    /// Why the receiver gave up on this frame, if it did.
    pub failure: Option<String>,
}

impl FrameOutcome {
    /// A frame the receiver could not lock onto counts as one period of
    /// coin-flip decisions.
    fn lost(bits: u64, why: String) -> Self {
        Self {
            errors: bits / 2,
            bits,
            sync: SyncResult {
                offset: 0,
                polarity: 1,
                agreement: 0.5,
            },
            snr_db: None,
            report: None,
            stages: Vec::new(),
            failure: Some(why),
        }
    }
}

/// Blind-receiver outcomes that mean "no lock on this frame" rather than a
/// broken setup.
fn is_lock_failure(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::Convergence(_)
            | CoreError::Divergence { .. }
            | CoreError::EstimationUnreliable { .. }
            | CoreError::AlignmentFailed { .. }
    )
}

/// Runs the receiver on one frame and counts errors over exactly one de
/// Bruijn period.
pub fn receive(
    rx: &DualPolWaveform,
    frame: &TxFrame,
    symbol_rate: f64,
    receiver: Receiver<'_>,
    capture: bool,
) -> Result<FrameOutcome> {
    let (x, y, bits, report, stages) = match receiver {
        Receiver::Blind(cfg) => {
            match run_blind_chain(rx, frame.format, symbol_rate, cfg, Some(&frame.reference), capture) {
                Ok(out) => (out.x, out.y, out.bits, Some(out.report), out.stages),
                Err(e) if is_lock_failure(&e) => {
                    return Ok(FrameOutcome::lost(frame.reference.len() as u64, e.to_string()));
                }
                Err(e) => return Err(anyhow::Error::new(e).context("receiver DSP")),
            }
        }
        Receiver::Ideal => {
            let out = ideal_receive(rx, symbol_rate, &frame.record()).context("ideal receiver")?;
            let bits = decide_and_decode(&out.x, &out.y, frame.format);
            let stages = if capture {
                vec![StageCapture {
                    stage: "ideal",
                    x: out.x.clone(),
                    y: out.y.clone(),
                }]
            } else {
                Vec::new()
            };
            (out.x, out.y, bits, None, stages)
        }
    };
    let need = frame.reference.len();
    if bits.len() < need {
        return Err(CoreError::InputShape(format!(
            "receiver produced {} bits, one period needs {need}",
            bits.len()
        ))
        .into());
    }
    let counted = BitStream::explicit(bits.bits()[..need].to_vec())?;
    // A failed sync still counts at the best offset: the point is then
    // simply very bad rather than missing.
    let sync = synchronize_search(&frame.reference, &counted)?;
    let p = count_ber(&frame.reference, &counted, sync.offset)?;
    let snr_db = unit_snr_db(&x[..PERIOD_SYMBOLS], &y[..PERIOD_SYMBOLS], frame, sync.offset / 2);
    Ok(FrameOutcome {
        errors: p.errors,
        bits: p.bits_counted,
        sync,
        snr_db: Some(snr_db),
        report,
        stages,
        failure: None,
    })
}

/// Error-vector SNR against the known line symbols after unit-coordinate
/// normalization; DP-BPSK lanes are compared up to sign.
fn unit_snr_db(x: &[Complex64], y: &[Complex64], frame: &TxFrame, symbol_offset: usize) -> f64 {
    let rx = normalize_tributaries(x, y, frame.format);
    let n = frame.period.len();
    let mut sig = 0.0;
    let mut err = [0.0f64; 4];
    let mut err_flipped = [0.0f64; 4];
    for (k, r) in rx.iter().enumerate() {
        let t = frame.period[(k + symbol_offset) % n];
        sig += t.norm_sqr();
        let ra = r.as_array();
        let ta = t.as_array();
        for d in 0..4 {
            err[d] += (ra[d] - ta[d]).powi(2);
            err_flipped[d] += (ra[d] + ta[d]).powi(2);
        }
    }
    let total = match frame.format {
        Format::Simplex3d => err.iter().sum::<f64>(),
        Format::DpBpsk => {
            (err[0] + err[1]).min(err_flipped[0] + err_flipped[1]) + (err[2] + err[3]).min(err_flipped[2] + err_flipped[3])
        }
    };
    10.0 * (sig / total.max(f64::MIN_POSITIVE)).log10()
}
