//! Symmetric split-step integration of the Manakov equation over one span.

use num_complex::Complex64;

use super::linear::cd_phase_coefficient;
use super::FiberSpec;
use crate::dsp::{bin_frequency, fft_in_place, ifft_in_place};
use crate::error::{Error, Result};
use crate::waveform::DualPolWaveform;

const MANAKOV: f64 = 8.0 / 9.0;
/// Shortest step the adaptive rule may request before giving up, km.
const MIN_STEP_KM: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsfmStats {
    pub steps: usize,
    pub min_step_km: f64,
    pub max_step_nl_phase: f64,
    pub output_power: f64,
}

fn db_per_km_to_np(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 10.0
}

/// Power gain profile, integrated: returns ∫(g(z) − α) dz over `[z0, z1]` in
/// nepers of power.
struct GainProfile {
    alpha: f64,
    g0: f64,
    pump: f64,
    start: f64,
    end: f64,
}

impl GainProfile {
    fn new(f: &FiberSpec) -> Self {
        let alpha = db_per_km_to_np(f.attenuation);
        let total = db_per_km_to_np(f.raman_gain_db);
        let pump = db_per_km_to_np(f.pump_attenuation);
        let lr = f.raman_length_km.min(f.length_km);
        let g0 = if total == 0.0 {
            0.0
        } else if pump == 0.0 {
            total / lr
        } else {
            total * pump / (1.0 - (-pump * lr).exp())
        };
        Self {
            alpha,
            g0,
            pump,
            start: f.length_km - lr,
            end: f.length_km,
        }
    }

    fn integral(&self, z0: f64, z1: f64) -> f64 {
        let mut acc = -self.alpha * (z1 - z0);
        let a = z0.max(self.start);
        let b = z1.min(self.end);
        if self.g0 != 0.0 && b > a {
            // g(z) = g0·exp(−pump·(L − z)), grows towards the pumped end.
            acc += if self.pump == 0.0 {
                self.g0 * (b - a)
            } else {
                self.g0 / self.pump * ((-self.pump * (self.end - b)).exp() - (-self.pump * (self.end - a)).exp())
            };
        }
        acc
    }
}

struct LinearStep {
    f2: Vec<f64>,
    beta_per_km: f64,
    cached: Option<(f64, Vec<Complex64>)>,
}

impl LinearStep {
    fn apply(&mut self, ex: &mut [Complex64], ey: &mut [Complex64], dz: f64, amp: f64) {
        if dz == 0.0 && amp == 1.0 {
            return;
        }
        let hit = matches!(&self.cached, Some((d, _)) if *d == dz);
        if !hit {
            let b = self.beta_per_km * dz;
            let h = self.f2.iter().map(|&f2| Complex64::from_polar(1.0, b * f2)).collect();
            self.cached = Some((dz, h));
        }
        let h = &self.cached.as_ref().unwrap().1;
        for buf in [ex, ey] {
            fft_in_place(buf);
            for (v, &hk) in buf.iter_mut().zip(h) {
                *v *= hk * amp;
            }
            ifft_in_place(buf);
        }
    }
}

pub fn ssfm_span(sig: &DualPolWaveform, fiber: &FiberSpec) -> Result<DualPolWaveform> {
    ssfm_span_with_stats(sig, fiber).map(|(w, _)| w)
}

pub fn ssfm_span_with_stats(sig: &DualPolWaveform, fiber: &FiberSpec) -> Result<(DualPolWaveform, SsfmStats)> {
    fiber.validate()?;
    let n = sig.len();
    let mut ex = sig.ex.clone();
    let mut ey = sig.ey.clone();
    let gain = GainProfile::new(fiber);
    let mut lin = LinearStep {
        f2: (0..n).map(|k| bin_frequency(k, n, sig.sample_rate).powi(2)).collect(),
        beta_per_km: cd_phase_coefficient(fiber.dispersion, sig.center_wavelength),
        cached: None,
    };
    let max_step = 1.0 / fiber.steps_per_km;
    let nl = fiber.gamma * MANAKOV;
    let mut breakpoints: Vec<f64> = fiber.attenuator.iter().map(|a| a.position_km).collect();
    breakpoints.push(fiber.length_km);

    let mut stats = SsfmStats {
        steps: 0,
        min_step_km: f64::INFINITY,
        max_step_nl_phase: 0.0,
        output_power: 0.0,
    };
    // Linear propagation is carried lazily: `lin_from` is where the field
    // currently sits, `z` is how far the nonlinear steps have advanced.
    let mut z = 0.0;
    let mut lin_from = 0.0;
    for (bi, &stop) in breakpoints.iter().enumerate() {
        while stop - z > 1e-12 {
            let p_peak = ex
                .iter()
                .zip(&ey)
                .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
                .fold(0.0, f64::max);
            // Anticipate the power at the step midpoint, bounded by the gain.
            let mut dz = max_step.min(stop - z);
            if nl > 0.0 && p_peak > 0.0 {
                let grow = gain.integral(z, z + dz).max(0.0).exp();
                let limit = fiber.max_nl_phase / (nl * p_peak * grow);
                if limit < dz {
                    dz = limit;
                    if dz < MIN_STEP_KM {
                        return Err(Error::NumericalConfig(format!(
                            "step {dz:.3e} km needed at z = {z:.3} km for {p_peak:.3e} W peak power"
                        )));
                    }
                }
            }
            let mid = z + dz / 2.0;
            let amp = (gain.integral(lin_from, mid) / 2.0).exp();
            lin.apply(&mut ex, &mut ey, mid - lin_from, amp);
            lin_from = mid;
            if nl > 0.0 {
                let mut peak_phase: f64 = 0.0;
                for (a, b) in ex.iter_mut().zip(ey.iter_mut()) {
                    let phase = -nl * (a.norm_sqr() + b.norm_sqr()) * dz;
                    peak_phase = peak_phase.max(phase.abs());
                    let r = Complex64::from_polar(1.0, phase);
                    *a *= r;
                    *b *= r;
                }
                stats.max_step_nl_phase = stats.max_step_nl_phase.max(peak_phase);
            }
            stats.steps += 1;
            stats.min_step_km = stats.min_step_km.min(dz);
            z += dz;
        }
        z = stop;
        let amp = (gain.integral(lin_from, z) / 2.0).exp();
        lin.apply(&mut ex, &mut ey, z - lin_from, amp);
        lin_from = z;
        if let Some(att) = fiber.attenuator.filter(|_| bi + 1 < breakpoints.len()) {
            let a = 10f64.powf(-att.loss_db / 20.0);
            ex.iter_mut().chain(ey.iter_mut()).for_each(|v| *v *= a);
        }
    }
    let out = sig.with_samples(ex, ey);
    stats.output_power = out.mean_power();
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::super::{apply_cd, LumpedLoss};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn signal(n: usize, power_w: f64, seed: u64) -> DualPolWaveform {
        // Band-limited random field: white noise through a 20 GHz brick wall.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, 1.0).unwrap();
        let mut c = || Complex64::new(g.sample(&mut rng), g.sample(&mut rng));
        let ex: Vec<_> = (0..n).map(|_| c()).collect();
        let ey: Vec<_> = (0..n).map(|_| c()).collect();
        let lp = |f: f64| if f.abs() < 20e9 { Complex64::new(1.0, 0.0) } else { Complex64::default() };
        let ex = crate::dsp::filter_freq(&ex, 64e9, lp);
        let ey = crate::dsp::filter_freq(&ey, 64e9, lp);
        let mut w = DualPolWaveform::new(ex, ey, 64e9).unwrap();
        let p = w.mean_power();
        w.scale((power_w / p).sqrt());
        w
    }

    fn lossless(length: f64, d: f64, gamma: f64) -> FiberSpec {
        FiberSpec {
            length_km: length,
            attenuation: 0.0,
            dispersion: d,
            gamma,
            raman_gain_db: 0.0,
            steps_per_km: 1.0,
            ..FiberSpec::ssmf_300km()
        }
    }

    #[test]
    fn all_off_is_identity() {
        let s = signal(2048, 1e-3, 1);
        let out = ssfm_span(&s, &lossless(50.0, 0.0, 0.0)).unwrap();
        assert!(out.relative_rms_to(&s) < 1e-12);
    }

    #[test]
    fn linear_reduction_matches_cd() {
        let s = signal(4096, 1e-3, 2);
        let f = lossless(300.0, 16.5, 0.0);
        let out = ssfm_span(&s, &f).unwrap();
        let reference = apply_cd(&s, f.total_dispersion());
        assert!(out.relative_rms_to(&reference) < 1e-6);
    }

    #[test]
    fn pure_spm_preserves_modulus() {
        let s = signal(2048, 50e-3, 3);
        let out = ssfm_span(&s, &lossless(20.0, 0.0, 1.3)).unwrap();
        for k in 0..s.len() {
            let a = s.ex[k].norm_sqr() + s.ey[k].norm_sqr();
            let b = out.ex[k].norm_sqr() + out.ey[k].norm_sqr();
            assert!((a - b).abs() <= 1e-9 * a.max(1e-12), "{a} {b}");
        }
        // Phase rotation matches the closed form 8/9·γ·P·L.
        let k = 17;
        let p = s.ex[k].norm_sqr() + s.ey[k].norm_sqr();
        let expected = -MANAKOV * 1.3 * p * 20.0;
        let got = (out.ex[k] * s.ex[k].conj()).arg();
        let diff = (got - expected).rem_euclid(2.0 * std::f64::consts::PI);
        assert!(diff.min(2.0 * std::f64::consts::PI - diff) < 1e-9);
    }

    #[test]
    fn loss_and_raman_budget() {
        let s = signal(1024, 1e-3, 4);
        let mut f = FiberSpec::ssmf_300km();
        f.gamma = 0.0;
        f.raman_gain_db = 0.0;
        let out = ssfm_span(&s, &f).unwrap();
        let loss_db = 10.0 * (s.mean_power() / out.mean_power()).log10();
        assert!((loss_db - 63.0).abs() < 1e-6, "{loss_db}");

        f.raman_gain_db = 20.0;
        let out = ssfm_span(&s, &f).unwrap();
        let loss_db = 10.0 * (s.mean_power() / out.mean_power()).log10();
        assert!((loss_db - 43.0).abs() < 1e-6, "{loss_db}");

        f.attenuator = Some(LumpedLoss { position_km: 100.0, loss_db: 5.0 });
        let out = ssfm_span(&s, &f).unwrap();
        let loss_db = 10.0 * (s.mean_power() / out.mean_power()).log10();
        assert!((loss_db - 48.0).abs() < 1e-6, "{loss_db}");
    }

    #[test]
    fn raman_profile_integrates_to_total() {
        let f = FiberSpec::ssmf_300km();
        let g = GainProfile::new(&f);
        let raman_db = (g.integral(0.0, 300.0) + g.alpha * 300.0) * 10.0 / std::f64::consts::LN_10;
        assert!((raman_db - 20.0).abs() < 1e-9);
        assert_eq!(g.integral(0.0, 200.0), -g.alpha * 200.0);
    }

    #[test]
    fn step_halving_converges_at_operating_point() {
        // Reference: the same span at half the step limits; symmetric
        // splitting has O(dz²) local error so the difference bounds the error.
        let s = signal(4096, crate::dsp::dbm_to_watt(17.0), 5);
        let f = FiberSpec::ssmf_300km();
        let (a, stats) = ssfm_span_with_stats(&s, &f).unwrap();
        let mut fine = f.clone();
        fine.max_nl_phase /= 2.0;
        fine.steps_per_km *= 2.0;
        let b = ssfm_span(&s, &fine).unwrap();
        let d = a.relative_rms_to(&b);
        assert!(d < 1e-4, "{d}");
        assert!(stats.max_step_nl_phase < 0.05);
    }

    #[test]
    fn unsatisfiable_step_is_numerical_error() {
        let s = signal(256, 1e4, 6);
        let r = ssfm_span(&s, &lossless(10.0, 16.5, 1.3));
        assert!(matches!(r, Err(Error::NumericalConfig(_))));
    }

    #[test]
    fn invalid_fiber_rejected() {
        let s = signal(64, 1e-3, 7);
        let mut f = FiberSpec::ssmf_300km();
        f.length_km = 0.0;
        assert!(matches!(ssfm_span(&s, &f), Err(Error::Parameter(_))));
        let mut f = FiberSpec::ssmf_300km();
        f.steps_per_km = 0.0;
        assert!(ssfm_span(&s, &f).is_err());
    }
}
