//! Gardner-loop timing recovery to 2 samples per symbol.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::filter_freq;
use crate::error::{Error, Result};
use crate::waveform::DualPolWaveform;

const COARSE_PHASES: usize = 32;
const ACQUISITION_SYMBOLS: usize = 1024;
const RATE_CLAMP: f64 = 2e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockConfig {
    pub acquisition_gain: f64,
    pub tracking_gain: f64,
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self {
            acquisition_gain: 0.04,
            tracking_gain: 4e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockReport {
    /// Strobe offset chosen by the energy search, UI.
    pub initial_offset_ui: f64,
    /// Mean strobe offset over the second half of the record, UI in [0, 1).
    pub mean_offset_ui: f64,
    /// Final frequency-integrator value, fractional rate error.
    pub rate: f64,
    pub symbols: usize,
}

/// Cubic Lagrange interpolation on a circular buffer.
pub(crate) fn interp(buf: &[Complex64], t: f64) -> Complex64 {
    let n = buf.len() as isize;
    let i = t.floor();
    let mu = t - i;
    let i = i as isize;
    let at = |k: isize| buf[k.rem_euclid(n) as usize];
    let (xm1, x0, x1, x2) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let wm1 = -mu * (mu - 1.0) * (mu - 2.0) / 6.0;
    let w0 = (mu + 1.0) * (mu - 1.0) * (mu - 2.0) / 2.0;
    let w1 = -(mu + 1.0) * mu * (mu - 2.0) / 2.0;
    let w2 = (mu + 1.0) * mu * (mu - 1.0) / 6.0;
    xm1 * wm1 + x0 * w0 + x1 * w1 + x2 * w2
}

pub fn clock_recover(sig: &DualPolWaveform, symbol_rate: f64) -> Result<DualPolWaveform> {
    clock_recover_with(sig, symbol_rate, &ClockConfig::default()).map(|(w, _)| w)
}

pub fn clock_recover_with(
    sig: &DualPolWaveform,
    symbol_rate: f64,
    cfg: &ClockConfig,
) -> Result<(DualPolWaveform, ClockReport)> {
    if !(symbol_rate > 0.0) || sig.sample_rate < 2.0 * symbol_rate * (1.0 - 1e-12) {
        return Err(Error::Parameter(format!(
            "clock recovery needs sample rate ≥ 2× symbol rate, got {} for {symbol_rate}",
            sig.sample_rate
        )));
    }
    let sps = sig.sample_rate / symbol_rate;
    let n_sym = (sig.len() as f64 / sps).floor() as usize;
    if n_sym < 64 {
        return Err(Error::InputShape(format!("{n_sym} symbols is too short for clock recovery")));
    }
    let (ex, ey) = if sps > 2.0 + 1e-9 {
        let aa = |f: f64| {
            if f.abs() <= symbol_rate {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        };
        (filter_freq(&sig.ex, sig.sample_rate, aa), filter_freq(&sig.ey, sig.sample_rate, aa))
    } else {
        (sig.ex.clone(), sig.ey.clone())
    };
    let p: f64 = ex.iter().map(|v| v.norm_sqr()).sum::<f64>() / ex.len() as f64;
    if !(p > 0.0) {
        return Err(Error::Domain("x polarization carries no power".into()));
    }
    let norm = 1.0 / p;

    let probe = n_sym.min(4096);
    let mut best = (0usize, f64::NEG_INFINITY);
    for c in 0..COARSE_PHASES {
        let t0 = c as f64 / COARSE_PHASES as f64 * sps;
        let e: f64 = (0..probe)
            .map(|k| {
                let t = t0 + k as f64 * sps;
                interp(&ex, t).norm_sqr() + interp(&ey, t).norm_sqr()
            })
            .sum();
        if e > best.1 * (1.0 + 1e-12) {
            best = (c, e);
        }
    }
    let t0 = best.0 as f64 / COARSE_PHASES as f64 * sps;

    let kd_scale = |g: f64| (g, g * g / 2.0);
    let mut strobes = Vec::with_capacity(n_sym + 1);
    let mut t = t0;
    let mut rate = 0.0;
    let mut prev = interp(&ex, t);
    strobes.push(t);
    let end = t0 + sig.len() as f64 - 0.5 * sps;
    let mut k = 1usize;
    loop {
        let nominal = t + sps * (1.0 + rate);
        if nominal >= end {
            break;
        }
        let s = interp(&ex, nominal);
        let mid = interp(&ex, nominal - 0.5 * sps * (1.0 + rate));
        let e = (mid * (s - prev).conj()).re * norm;
        let (kp, ki) = kd_scale(if k < ACQUISITION_SYMBOLS {
            cfg.acquisition_gain
        } else {
            cfg.tracking_gain
        });
        rate = (rate - ki * e).clamp(-RATE_CLAMP, RATE_CLAMP);
        t = nominal - sps * kp * e;
        prev = interp(&ex, t);
        strobes.push(t);
        k += 1;
    }
    if rate.abs() >= RATE_CLAMP {
        return Err(Error::Convergence(format!(
            "timing loop frequency integrator saturated at {rate:e}"
        )));
    }

    let mut ox = Vec::with_capacity(2 * strobes.len());
    let mut oy = Vec::with_capacity(2 * strobes.len());
    for (i, &ts) in strobes.iter().enumerate() {
        let next = strobes.get(i + 1).copied().unwrap_or(ts + sps * (1.0 + rate));
        let tm = 0.5 * (ts + next);
        ox.push(interp(&ex, ts));
        ox.push(interp(&ex, tm));
        oy.push(interp(&ey, ts));
        oy.push(interp(&ey, tm));
    }
    let half = strobes.len() / 2;
    let tail = &strobes[half..];
    // Circular mean of the fractional offsets.
    let (sx, sy) = tail.iter().enumerate().fold((0.0, 0.0), |acc, (j, &ts)| {
        let frac = (ts - (half + j) as f64 * sps) / sps;
        let a = 2.0 * std::f64::consts::PI * frac;
        (acc.0 + a.cos(), acc.1 + a.sin())
    });
    let mean_offset_ui = (sy.atan2(sx) / (2.0 * std::f64::consts::PI)).rem_euclid(1.0);
    let mut out = DualPolWaveform::new(ox, oy, 2.0 * symbol_rate)?;
    out.center_wavelength = sig.center_wavelength;
    Ok((
        out,
        ClockReport {
            initial_offset_ui: best.0 as f64 / COARSE_PHASES as f64,
            mean_offset_ui,
            rate,
            symbols: strobes.len(),
        },
    ))
}
