use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{filter_freq, fft_in_place, ifft_in_place, bin_frequency};
use crate::error::{Error, Result};
use crate::waveform::DualPolWaveform;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Quadratic spectral phase coefficient (rad/Hz²) for `dispersion` ps/nm.
pub(crate) fn cd_phase_coefficient(dispersion_ps_per_nm: f64, wavelength: f64) -> f64 {
    // ps/nm → s/m is 1e-3
    PI * wavelength * wavelength * dispersion_ps_per_nm * 1e-3 / SPEED_OF_LIGHT
}

/// All-pass chromatic dispersion `exp(i·π·λ²·D/c·f²)` on both polarizations.
pub fn apply_cd(sig: &DualPolWaveform, dispersion_total: f64) -> DualPolWaveform {
    if dispersion_total == 0.0 {
        return sig.clone();
    }
    let beta = cd_phase_coefficient(dispersion_total, sig.center_wavelength);
    let h = |f: f64| Complex64::from_polar(1.0, beta * f * f);
    sig.with_samples(
        filter_freq(&sig.ex, sig.sample_rate, h),
        filter_freq(&sig.ey, sig.sample_rate, h),
    )
}

/// Euler angles of a unitary Jones rotation `Rz(phi)·Ry(alpha)·Rz(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JonesAngles {
    pub alpha: f64,
    pub phi: f64,
    pub theta: f64,
}

impl JonesAngles {
    pub fn new(alpha: f64, phi: f64, theta: f64) -> Self {
        Self { alpha, phi, theta }
    }

    /// Haar-distributed rotation.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let u: f64 = rng.random();
        Self {
            alpha: 0.5 * (1.0 - 2.0 * u).acos(),
            phi: rng.random::<f64>() * 2.0 * PI,
            theta: rng.random::<f64>() * 2.0 * PI,
        }
    }
}

/// Row-major 2×2 complex matrix acting on `(ex, ey)` column vectors.
pub type JonesMatrix = [[Complex64; 2]; 2];

fn matmul(a: &JonesMatrix, b: &JonesMatrix) -> JonesMatrix {
    let mut out = [[Complex64::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn jones_matrix(angles: JonesAngles) -> JonesMatrix {
    let rz = |p: f64| -> JonesMatrix {
        [
            [Complex64::from_polar(1.0, p / 2.0), Complex64::default()],
            [Complex64::default(), Complex64::from_polar(1.0, -p / 2.0)],
        ]
    };
    let (s, c) = angles.alpha.sin_cos();
    let ry: JonesMatrix = [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ];
    matmul(&matmul(&rz(angles.phi), &ry), &rz(angles.theta))
}

pub fn apply_jones_matrix(sig: &DualPolWaveform, m: &JonesMatrix) -> DualPolWaveform {
    let (ex, ey) = sig
        .ex
        .iter()
        .zip(&sig.ey)
        .map(|(&x, &y)| (m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y))
        .unzip();
    sig.with_samples(ex, ey)
}

pub fn apply_jones_rotation(sig: &DualPolWaveform, angles: JonesAngles) -> DualPolWaveform {
    apply_jones_matrix(sig, &jones_matrix(angles))
}

/// Carrier frequency offset `exp(i·2π·Δf·t)`.
pub fn apply_freq_offset(sig: &DualPolWaveform, freq_offset: f64) -> Result<DualPolWaveform> {
    if !(freq_offset.abs() < sig.sample_rate / 4.0) {
        return Err(Error::Parameter(format!(
            "frequency offset {freq_offset} Hz exceeds a quarter of the sample rate"
        )));
    }
    if freq_offset == 0.0 {
        return Ok(sig.clone());
    }
    let w = 2.0 * PI * freq_offset / sig.sample_rate;
    let rot: Vec<Complex64> = (0..sig.len()).map(|k| Complex64::from_polar(1.0, w * k as f64)).collect();
    let ex = sig.ex.iter().zip(&rot).map(|(a, r)| a * r).collect();
    let ey = sig.ey.iter().zip(&rot).map(|(a, r)| a * r).collect();
    Ok(sig.with_samples(ex, ey))
}

/// Amplitude response of the receive filter: super-Gaussian of order 2 with
/// 3-dB full width `bandwidth`.
pub fn bpf_response(f: f64, bandwidth: f64) -> f64 {
    (-(LN_2 / 2.0) * (2.0 * f / bandwidth).powi(4)).exp()
}

pub fn optical_bpf(sig: &DualPolWaveform, bandwidth: f64) -> Result<DualPolWaveform> {
    if !(bandwidth > 0.0) {
        return Err(Error::Parameter(format!("filter bandwidth must be > 0, got {bandwidth}")));
    }
    let n = sig.len();
    let h: Vec<f64> = (0..n).map(|k| bpf_response(bin_frequency(k, n, sig.sample_rate), bandwidth)).collect();
    let run = |x: &[Complex64]| {
        let mut buf = x.to_vec();
        fft_in_place(&mut buf);
        buf.iter_mut().zip(&h).for_each(|(v, &g)| *v *= g);
        ifft_in_place(&mut buf);
        buf
    };
    Ok(sig.with_samples(run(&sig.ex), run(&sig.ey)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_waveform(n: usize, seed: u64) -> DualPolWaveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, 1.0).unwrap();
        let mut c = || Complex64::new(g.sample(&mut rng), g.sample(&mut rng));
        let ex = (0..n).map(|_| c()).collect();
        let ey = (0..n).map(|_| c()).collect();
        DualPolWaveform::new(ex, ey, 64e9).unwrap()
    }

    fn power_ratio(a: &DualPolWaveform, b: &DualPolWaveform) -> f64 {
        a.mean_power() / b.mean_power()
    }

    #[test]
    fn cd_identity_inverse_and_power() {
        let x = random_waveform(4096, 1);
        assert_eq!(apply_cd(&x, 0.0), x);
        let y = apply_cd(&x, 4950.0);
        assert!((power_ratio(&y, &x) - 1.0).abs() < 1e-9);
        let back = apply_cd(&y, -4950.0);
        assert!(back.relative_rms_to(&x) < 1e-6);
    }

    #[test]
    fn cd_rms_broadening_matches_group_delay_spread() {
        // Oracle: an unchirped pulse through an all-pass quadratic phase gets
        // group delay τ(f) = λ²·D·f/c, so σ_t² grows by (λ²·D/c)²·σ_f².
        let n = 1 << 14;
        let fs = 64e9;
        let t0 = 1.0 / 16e9;
        let centre = n as f64 / 2.0;
        let pulse: Vec<Complex64> = (0..n)
            .map(|k| {
                let t = (k as f64 - centre) / fs;
                Complex64::new((-(t / (0.25 * t0)).powi(2) / 2.0).exp(), 0.0)
            })
            .collect();
        let w = DualPolWaveform::new(pulse.clone(), vec![Complex64::default(); n], fs).unwrap();
        let out = apply_cd(&w, 4950.0);

        let rms_t = |x: &[Complex64]| {
            let e: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let m: f64 = x.iter().enumerate().map(|(k, v)| k as f64 * v.norm_sqr()).sum::<f64>() / e;
            let v: f64 = x.iter().enumerate().map(|(k, v)| (k as f64 - m).powi(2) * v.norm_sqr()).sum::<f64>() / e;
            v.sqrt() / fs
        };
        let mut spec = pulse.clone();
        fft_in_place(&mut spec);
        let e: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        let var_f: f64 = spec
            .iter()
            .enumerate()
            .map(|(k, v)| bin_frequency(k, n, fs).powi(2) * v.norm_sqr())
            .sum::<f64>()
            / e;
        let lambda = w.center_wavelength;
        let spread = lambda * lambda * 4950e-3 / SPEED_OF_LIGHT;
        let expected = (rms_t(&pulse).powi(2) + spread * spread * var_f).sqrt();
        let got = rms_t(&out.ex);
        assert!((got / expected - 1.0).abs() < 0.02, "{got} vs {expected}");
        assert!(got > 3.0 * t0);
    }

    #[test]
    fn jones_examples() {
        let x = random_waveform(256, 2);
        let id = apply_jones_rotation(&x, JonesAngles::default());
        assert!(id.relative_rms_to(&x) < 1e-15);

        let sw = apply_jones_rotation(&x, JonesAngles::new(PI / 2.0, 0.0, 0.0));
        for k in 0..x.len() {
            assert!((sw.ex[k] + x.ey[k]).norm() < 1e-12);
            assert!((sw.ey[k] - x.ex[k]).norm() < 1e-12);
        }

        let a = JonesAngles::new(0.7, 1.1, -2.3);
        let m = jones_matrix(a);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!((det.norm() - 1.0).abs() < 1e-12);
        let herm: JonesMatrix = [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]];
        let y = apply_jones_matrix(&apply_jones_matrix(&x, &m), &herm);
        assert!(y.relative_rms_to(&x) < 1e-12);
        assert!((power_ratio(&apply_jones_matrix(&x, &m), &x) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn freq_offset_examples() {
        let x = random_waveform(1000, 3);
        assert_eq!(apply_freq_offset(&x, 0.0).unwrap(), x);
        let y = apply_freq_offset(&x, 1.3e9).unwrap();
        assert!((power_ratio(&y, &x) - 1.0).abs() < 1e-9);
        let z = apply_freq_offset(&y, -1.3e9).unwrap();
        assert!(z.relative_rms_to(&x) < 1e-12);
        assert!(apply_freq_offset(&x, 16e9).is_err());
    }

    #[test]
    fn freq_offset_moves_tone_peak() {
        let n = 4096;
        let fs = 64e9;
        let tone: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * 1e9 * k as f64 / fs))
            .collect();
        let w = DualPolWaveform::new(tone.clone(), tone, fs).unwrap();
        let shifted = apply_freq_offset(&w, 250e6).unwrap();
        let peak = |x: &[Complex64]| {
            let mut b = x.to_vec();
            fft_in_place(&mut b);
            let k = (0..n).max_by(|&i, &j| b[i].norm().total_cmp(&b[j].norm())).unwrap();
            bin_frequency(k, n, fs)
        };
        let df = peak(&shifted.ex) - peak(&w.ex);
        assert!((df - 250e6).abs() <= fs / n as f64, "{df}");
    }

    #[test]
    fn bpf_wideband_limit_and_noise_bandwidth() {
        // Smooth narrowband content passes a very wide filter untouched.
        let n = 8192;
        let fs = 64e9;
        let slow: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * 2e9 * k as f64 / fs))
            .collect();
        let w = DualPolWaveform::new(slow.clone(), slow, fs).unwrap();
        let out = optical_bpf(&w, 60e9).unwrap();
        assert!(out.relative_rms_to(&w) < 1e-3);

        // White noise: power ratio equals ∫|H|² df / fs. Reference value by
        // midpoint quadrature on a fine grid, independent of the FFT bins.
        let bw = 35e9;
        let m = 200_000;
        let df = fs / m as f64;
        let integral: f64 = (0..m)
            .map(|i| {
                let f = -fs / 2.0 + (i as f64 + 0.5) * df;
                bpf_response(f, bw).powi(2) * df
            })
            .sum();
        let expected = integral / fs;
        let noise = random_waveform(1 << 16, 4);
        let filtered = optical_bpf(&noise, bw).unwrap();
        let ratio = power_ratio(&filtered, &noise);
        assert!((ratio / expected - 1.0).abs() < 0.05, "{ratio} vs {expected}");
        assert!(ratio <= 1.0);
    }
}
