//! The complete blind receiver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::align::{bpsk_pair_demux, coherency_demux, tributary_align, TributaryRotation};
use super::carrier::{
    carrier_phase_estimate_orders, estimate_freq_offset, estimate_freq_offset_bpsk_pair, remove_freq_offset,
};
use super::clock::{clock_recover_with, ClockConfig, ClockReport};
use super::decide::decide_and_decode;
use super::equalizer::{butterfly_equalize, EqualizerConfig, EqualizerMode};
use super::cd_compensate;
use crate::channel::apply_jones_matrix;
use crate::constellation::Format;
use crate::error::{Error, Result};
use crate::metrics::synchronize_search;
use crate::txchain::BitStream;
use crate::waveform::DualPolWaveform;

/// Phase trajectories are reported as means over blocks of this many symbols.
const PHASE_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxChainConfig {
    /// Accumulated dispersion to remove, ps/nm.
    pub dispersion_total: f64,
    pub clock_recovery: bool,
    #[serde(default)]
    pub clock: ClockConfig,
    /// Eigen-based demultiplexing ahead of the equalizer (simplex only).
    pub polarization_prealign: bool,
    pub freq_offset_estimation: bool,
    pub equalizer: EqualizerConfig,
    pub cpe_window: usize,
}

impl RxChainConfig {
    pub fn for_format(format: Format) -> Self {
        Self {
            dispersion_total: 0.0,
            clock_recovery: true,
            clock: ClockConfig::default(),
            polarization_prealign: true,
            freq_offset_estimation: true,
            equalizer: EqualizerConfig::for_mode(default_mode(format)),
            cpe_window: 129,
        }
    }
}

pub fn default_mode(format: Format) -> EqualizerMode {
    match format {
        Format::Simplex3d => EqualizerMode::SimplexCombined,
        Format::DpBpsk => EqualizerMode::BpskDD,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DspReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub est_freq_offset: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_phase_trajectory: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tributary_rotation: Option<TributaryRotation>,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clock: Option<ClockReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prealign_eigen_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prealign_coherence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parity_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lanes_swapped: Option<bool>,
    pub equalizer_reinitializations: usize,
    /// Index of the first output symbol after equalizer convergence.
    pub first_symbol: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageCapture {
    pub stage: &'static str,
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    /// Aligned tributaries from `report.first_symbol` on.
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    /// Decoded bits for the same symbols.
    pub bits: BitStream,
    pub report: DspReport,
    pub stages: Vec<StageCapture>,
}

fn strobes(v: &[Complex64]) -> Vec<Complex64> {
    v.iter().step_by(2).copied().collect()
}

fn block_means(p: &[f64]) -> Vec<f64> {
    p.chunks(PHASE_BLOCK).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

fn reference_agreement(reference: &BitStream, bits: &BitStream) -> Result<f64> {
    let s = synchronize_search(reference, bits)?;
    Ok(if s.polarity > 0 { s.agreement } else { 1.0 - s.agreement })
}

/// CD compensation, clock recovery, (pre-alignment,) frequency-offset
/// removal, butterfly equalization, carrier-phase estimation, tributary
/// alignment and decisions. `reference` resolves the ambiguities left by
/// codebook symmetries and lane ordering.
pub fn run_blind_chain(
    sig: &DualPolWaveform,
    format: Format,
    symbol_rate: f64,
    cfg: &RxChainConfig,
    reference: Option<&BitStream>,
    capture: bool,
) -> Result<ChainOutput> {
    let mut report = DspReport::default();
    let mut stages = Vec::new();
    let mut keep = |stage: &'static str, x: &[Complex64], y: &[Complex64]| {
        if capture {
            stages.push(StageCapture {
                stage,
                x: x.to_vec(),
                y: y.to_vec(),
            });
        }
    };

    let sig = if cfg.dispersion_total != 0.0 {
        cd_compensate(sig, cfg.dispersion_total)
    } else {
        sig.clone()
    };
    let w2 = if cfg.clock_recovery {
        let (w, rep) = clock_recover_with(&sig, symbol_rate, &cfg.clock)?;
        report.clock = Some(rep);
        w
    } else {
        let ratio = sig.sample_rate / (2.0 * symbol_rate);
        let step = ratio.round() as usize;
        if step == 0 || (ratio - step as f64).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "without clock recovery the input must be an integer multiple of 2 samples/symbol, got {}",
                2.0 * ratio
            )));
        }
        let pick = |v: &[Complex64]| v.iter().step_by(step).copied().collect();
        DualPolWaveform::new(pick(&sig.ex), pick(&sig.ey), 2.0 * symbol_rate)?
    };
    keep("clock", &strobes(&w2.ex), &strobes(&w2.ey));

    let w2 = if cfg.polarization_prealign && format == Format::Simplex3d {
        let (m, ratio) = coherency_demux(&strobes(&w2.ex), &strobes(&w2.ey))?;
        report.prealign_eigen_ratio = Some(ratio);
        apply_jones_matrix(&w2, &m)
    } else {
        w2
    };

    let (mut ux, mut uy) = (w2.ex, w2.ey);
    if cfg.freq_offset_estimation {
        let (sx, sy) = (strobes(&ux), strobes(&uy));
        let df = match format {
            Format::Simplex3d => estimate_freq_offset(&sx, symbol_rate)?,
            Format::DpBpsk => estimate_freq_offset_bpsk_pair(&sx, &sy, symbol_rate)?,
        };
        ux = remove_freq_offset(&ux, df, 2.0 * symbol_rate);
        uy = remove_freq_offset(&uy, df, 2.0 * symbol_rate);
        report.est_freq_offset = Some(df);
    }
    // The DP-BPSK estimate relies on the pseudo-covariance, which only holds
    // still once the frequency offset is gone.
    if cfg.polarization_prealign && format == Format::DpBpsk {
        let (m, coherence) = bpsk_pair_demux(&strobes(&ux), &strobes(&uy))?;
        report.prealign_coherence = Some(coherence);
        let w = apply_jones_matrix(&DualPolWaveform::new(ux, uy, 2.0 * symbol_rate)?, &m);
        (ux, uy) = (w.ex, w.ey);
    }

    let eq = butterfly_equalize(&ux, &uy, &cfg.equalizer)?;
    report.equalizer_reinitializations = eq.state.reinitializations;
    keep("equalizer", &eq.x, &eq.y);

    let (ox, oy) = match format {
        Format::Simplex3d => (4, 2),
        Format::DpBpsk => (2, 2),
    };
    let cpe = carrier_phase_estimate_orders(&eq.x, &eq.y, cfg.cpe_window, ox, oy)?;
    report.mean_phase_trajectory = Some(block_means(&cpe.phase_x));
    keep("carrier_phase", &cpe.x, &cpe.y);

    let first = cfg.equalizer.convergence_symbols.min(cpe.x.len().saturating_sub(1));
    report.first_symbol = first;
    let (x, y, bits) = match format {
        Format::Simplex3d => {
            let al = tributary_align(&cpe.x[first..], &cpe.y[first..], reference)?;
            report.tributary_rotation = Some(al.rotation);
            report.parity_score = Some(al.parity_score);
            report.converged = al.parity_score >= 0.9;
            let bits = decide_and_decode(&al.x, &al.y, format);
            (al.x, al.y, bits)
        }
        Format::DpBpsk => {
            // Differential decoding runs over the whole record so that the
            // counted window starts with a valid predecessor symbol.
            let straight = decide_and_decode(&cpe.x, &cpe.y, format);
            let swapped = decide_and_decode(&cpe.y, &cpe.x, format);
            let tail = |b: &BitStream| BitStream::explicit(b.bits()[2 * first..].to_vec()).expect("binary");
            let (s_tail, w_tail) = (tail(&straight), tail(&swapped));
            let swap = match reference {
                Some(r) if s_tail.len() >= r.len() => reference_agreement(r, &w_tail)? > reference_agreement(r, &s_tail)?,
                _ => false,
            };
            report.lanes_swapped = Some(swap);
            let lin = |v: &[Complex64]| {
                let re: f64 = v.iter().map(|s| s.re * s.re).sum();
                let im: f64 = v.iter().map(|s| s.im * s.im).sum();
                im / re.max(f64::MIN_POSITIVE)
            };
            let (x, y) = if swap {
                (cpe.y[first..].to_vec(), cpe.x[first..].to_vec())
            } else {
                (cpe.x[first..].to_vec(), cpe.y[first..].to_vec())
            };
            report.converged = lin(&x) < 0.25 && lin(&y) < 0.25;
            (x, y, if swap { w_tail } else { s_tail })
        }
    };
    keep("aligned", &x, &y);
    Ok(ChainOutput {
        x,
        y,
        bits,
        report,
        stages,
    })
}
