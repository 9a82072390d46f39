use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::constellation::OSNR_REF_BANDWIDTH;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::waveform::DualPolWaveform;

/// Adds white complex Gaussian noise to both polarizations so that the signal
/// power over the ASE power in 12.5 GHz equals `osnr_db`. `None` bypasses.
pub fn load_awgn_to_osnr(
    sig: &DualPolWaveform,
    osnr_db: Option<f64>,
    symbol_rate: f64,
    seed: u64,
) -> Result<DualPolWaveform> {
    let Some(osnr_db) = osnr_db else {
        return Ok(sig.clone());
    };
    if !(symbol_rate > 0.0) || !osnr_db.is_finite() {
        return Err(Error::Parameter(format!(
            "bad noise loading parameters: osnr {osnr_db} dB, symbol rate {symbol_rate}"
        )));
    }
    let p_sig = sig.mean_power();
    if !(p_sig > 0.0) {
        return Err(Error::Domain("cannot load noise onto a zero-power signal".into()));
    }
    // Noise in both polarizations over the full simulation bandwidth.
    let osnr = 10f64.powf(osnr_db / 10.0);
    let p_noise_total = p_sig / osnr * sig.sample_rate / OSNR_REF_BANDWIDTH;
    let per_dim = (p_noise_total / 4.0).sqrt();
    let g = Normal::new(0.0, per_dim).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rng = stream(seed, Stream::Noise);
    let mut add = |v: &[Complex64]| -> Vec<Complex64> {
        v.iter()
            .map(|s| s + Complex64::new(g.sample(&mut rng), g.sample(&mut rng)))
            .collect()
    };
    let ex = add(&sig.ex);
    let ey = add(&sig.ey);
    Ok(sig.with_samples(ex, ey))
}

/// OSNR (dB, 12.5 GHz reference) of `noisy` relative to `clean`; `+∞` when the
/// two are identical.
pub fn measure_osnr(noisy: &DualPolWaveform, clean: &DualPolWaveform) -> Result<f64> {
    noisy.same_shape(clean)?;
    let p_sig = clean.mean_power();
    let n = noisy.len().max(1) as f64;
    let p_noise: f64 = noisy
        .ex
        .iter()
        .zip(&clean.ex)
        .chain(noisy.ey.iter().zip(&clean.ey))
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / n;
    if p_noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    let in_ref = p_noise * OSNR_REF_BANDWIDTH / noisy.sample_rate;
    Ok(10.0 * (p_sig / in_ref).log10())
}

/// Common laser phase noise (Wiener process) on both polarizations.
pub fn apply_phase_noise(sig: &DualPolWaveform, linewidth_total: f64, seed: u64) -> Result<DualPolWaveform> {
    if !(linewidth_total >= 0.0) {
        return Err(Error::Parameter(format!("linewidth must be ≥ 0, got {linewidth_total}")));
    }
    if linewidth_total == 0.0 {
        return Ok(sig.clone());
    }
    let step = (2.0 * std::f64::consts::PI * linewidth_total / sig.sample_rate).sqrt();
    let g = Normal::new(0.0, step).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rng = stream(seed, Stream::PhaseNoise);
    let mut phi = 0.0;
    let rot: Vec<Complex64> = (0..sig.len())
        .map(|_| {
            let r = Complex64::from_polar(1.0, phi);
            phi += g.sample(&mut rng);
            r
        })
        .collect();
    let ex = sig.ex.iter().zip(&rot).map(|(a, r)| a * r).collect();
    let ey = sig.ey.iter().zip(&rot).map(|(a, r)| a * r).collect();
    Ok(sig.with_samples(ex, ey))
}
