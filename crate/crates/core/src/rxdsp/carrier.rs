//! Frequency-offset and carrier-phase recovery.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp::{bin_frequency, fft_in_place};
use crate::error::{Error, Result};

pub const MIN_FREQ_SYMBOLS: usize = 4096;
const MIN_PEAK_TO_MEDIAN_DB: f64 = 6.0;

const SEGMENT: usize = 1024;
const ZERO_PAD: usize = 8;

/// Welch periodogram (Hann, half-overlapping segments) of the summed spectra
/// of `seqs`, already raised to the `m`-th power; returns the peak frequency
/// divided by `m`.
fn power_tone(seqs: &[Vec<Complex64>], m: u32, symbol_rate: f64) -> Result<f64> {
    let n = seqs[0].len();
    if n < MIN_FREQ_SYMBOLS {
        return Err(Error::InputShape(format!(
            "frequency estimation needs ≥ {MIN_FREQ_SYMBOLS} symbols, got {n}"
        )));
    }
    let nfft = SEGMENT * ZERO_PAD;
    let hann: Vec<f64> = (0..SEGMENT)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / SEGMENT as f64).cos())
        .collect();
    let mut spec = vec![0.0; nfft];
    let mut buf = vec![Complex64::default(); nfft];
    for s in seqs {
        let mut start = 0;
        while start + SEGMENT <= n {
            buf.fill(Complex64::default());
            for (i, w) in hann.iter().enumerate() {
                buf[i] = s[start + i] * w;
            }
            fft_in_place(&mut buf);
            for (acc, v) in spec.iter_mut().zip(&buf) {
                *acc += v.norm_sqr();
            }
            start += SEGMENT / 2;
        }
    }
    // Search |m·Δf| < m·Rs/8, i.e. Δf within ±Rs/8.
    let limit = m as f64 * symbol_rate / 8.0;
    let in_range: Vec<usize> = (0..nfft)
        .filter(|&k| bin_frequency(k, nfft, symbol_rate).abs() < limit)
        .collect();
    let &kmax = in_range
        .iter()
        .max_by(|&&a, &&b| spec[a].total_cmp(&spec[b]).then(b.cmp(&a)))
        .expect("non-empty search range");
    let mut vals: Vec<f64> = in_range.iter().map(|&k| spec[k]).collect();
    vals.sort_by(f64::total_cmp);
    let median = vals[vals.len() / 2];
    let ratio_db = 10.0 * (spec[kmax] / median.max(f64::MIN_POSITIVE)).log10();
    if ratio_db < MIN_PEAK_TO_MEDIAN_DB {
        return Err(Error::EstimationUnreliable {
            peak_to_median_db: ratio_db,
        });
    }
    let at = |k: isize| spec[k.rem_euclid(nfft as isize) as usize].max(f64::MIN_POSITIVE).ln();
    let k = kmax as isize;
    let (a, b, c) = (at(k - 1), at(k), at(k + 1));
    let den = a - 2.0 * b + c;
    let delta = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
    let f = bin_frequency(kmax, nfft, symbol_rate) + delta * symbol_rate / nfft as f64;
    Ok(f / m as f64)
}

/// Fourth-power periodogram estimate on the QPSK-like tributary.
pub fn estimate_freq_offset(x: &[Complex64], symbol_rate: f64) -> Result<f64> {
    power_tone(&[x.iter().map(|v| v.powi(4)).collect()], 4, symbol_rate)
}

/// Squared-signal estimate for two polarization-mixed BPSK tributaries.
/// The `x²`, `y²` and `x·y` tones cannot all vanish for a unitary mixing.
pub fn estimate_freq_offset_bpsk_pair(x: &[Complex64], y: &[Complex64], symbol_rate: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InputShape("tributary lengths differ".into()));
    }
    let seqs = vec![
        x.iter().map(|v| v * v).collect(),
        y.iter().map(|v| v * v).collect(),
        x.iter().zip(y).map(|(a, b)| a * b).collect(),
    ];
    power_tone(&seqs, 2, symbol_rate)
}

/// Multiplies by `exp(−i·2π·Δf·n/fs)`.
pub fn remove_freq_offset(samples: &[Complex64], freq_offset: f64, sample_rate: f64) -> Vec<Complex64> {
    let w = -2.0 * PI * freq_offset / sample_rate;
    samples
        .iter()
        .enumerate()
        .map(|(n, v)| v * Complex64::from_polar(1.0, w * n as f64))
        .collect()
}

/// Viterbi-Viterbi phase trajectory with an `m`-fold ambiguity, unwrapped.
pub fn vv_phase(symbols: &[Complex64], m: u32, window: usize) -> Vec<f64> {
    let n = symbols.len();
    let reference = if m == 4 { -1.0 } else { 1.0 };
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Complex64::default());
    for v in symbols {
        let last = *prefix.last().unwrap();
        prefix.push(last + v.powi(m as i32) * reference);
    }
    let half = window / 2;
    let step = 2.0 * PI / m as f64;
    let mut out = Vec::with_capacity(n);
    let mut prev = 0.0;
    for k in 0..n {
        let lo = k.saturating_sub(half);
        let hi = (k + half + 1).min(n);
        let s = prefix[hi] - prefix[lo];
        let mut th = s.arg() / m as f64;
        if k > 0 {
            th += ((prev - th) / step).round() * step;
        }
        out.push(th);
        prev = th;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpeOutput {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub phase_x: Vec<f64>,
    pub phase_y: Vec<f64>,
}

/// Fourth-power tracking on x, second-power on y.
pub fn carrier_phase_estimate(x: &[Complex64], y: &[Complex64], window: usize) -> Result<CpeOutput> {
    carrier_phase_estimate_orders(x, y, window, 4, 2)
}

pub fn carrier_phase_estimate_orders(
    x: &[Complex64],
    y: &[Complex64],
    window: usize,
    order_x: u32,
    order_y: u32,
) -> Result<CpeOutput> {
    if window < 5 || window % 2 == 0 {
        return Err(Error::Parameter(format!("phase window must be odd and ≥ 5, got {window}")));
    }
    if x.len() != y.len() {
        return Err(Error::InputShape("tributary lengths differ".into()));
    }
    for m in [order_x, order_y] {
        if m != 2 && m != 4 {
            return Err(Error::Parameter(format!("unsupported phase-estimator power {m}")));
        }
    }
    let phase_x = vv_phase(x, order_x, window);
    let phase_y = vv_phase(y, order_y, window);
    let derot = |s: &[Complex64], p: &[f64]| -> Vec<Complex64> {
        s.iter().zip(p).map(|(v, &t)| v * Complex64::from_polar(1.0, -t)).collect()
    };
    Ok(CpeOutput {
        x: derot(x, &phase_x),
        y: derot(y, &phase_y),
        phase_x,
        phase_y,
    })
}
