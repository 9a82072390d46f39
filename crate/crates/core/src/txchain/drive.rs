//! Electrical drive generation and the optical field modulator.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::constellation::SymbolVec4;
use crate::dsp::{dbm_to_watt, fft_in_place, ifft_in_place, bin_frequency};
use crate::error::{Error, Result};
use crate::waveform::DualPolWaveform;

/// Four real drive lanes `(ix, qx, iy, qy)` in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveWaveform {
    pub lanes: [Vec<f64>; 4],
    pub samples_per_symbol: usize,
    pub symbol_rate: f64,
}

impl DriveWaveform {
    pub fn len(&self) -> usize {
        self.lanes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes[0].is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate * self.samples_per_symbol as f64
    }

    pub fn to_dump(&self) -> crate::waveform::LaneDump {
        crate::waveform::LaneDump {
            lanes: self.lanes.clone(),
            sample_rate: self.sample_rate(),
            symbol_rate: self.symbol_rate,
        }
    }
}

// Reverse Bessel polynomial of order 5: s^5 + 15 s^4 + 105 s^3 + 420 s^2 + 945 s + 945.
const BESSEL5: [f64; 6] = [945.0, 945.0, 420.0, 105.0, 15.0, 1.0];

fn bessel5_prototype(w: f64) -> Complex64 {
    let s = Complex64::new(0.0, w);
    let mut den = Complex64::new(0.0, 0.0);
    for &c in BESSEL5.iter().rev() {
        den = den * s + c;
    }
    Complex64::new(BESSEL5[0], 0.0) / den
}

/// 3-dB angular frequency of the unit-delay prototype.
fn bessel5_w3db() -> f64 {
    static W3: OnceLock<f64> = OnceLock::new();
    *W3.get_or_init(|| {
        let (mut lo, mut hi) = (0.1, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if bessel5_prototype(mid).norm_sqr() > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Frequency response of a 5th-order Bessel low-pass with 3-dB bandwidth `f3db`.
pub fn bessel5_response(f: f64, f3db: f64) -> Complex64 {
    bessel5_prototype(f / f3db * bessel5_w3db())
}

/// NRZ upsampling of each coordinate lane followed by an optional DAC
/// low-pass (`None` bypasses the filter). Filtering is circular over the
/// block, so a periodic symbol pattern yields a periodic drive.
pub fn generate_drive(
    symbols: &[SymbolVec4],
    samples_per_symbol: usize,
    dac_bandwidth: Option<f64>,
    symbol_rate: f64,
) -> Result<DriveWaveform> {
    if samples_per_symbol < 2 {
        return Err(Error::Parameter(format!(
            "samples_per_symbol must be ≥ 2, got {samples_per_symbol}"
        )));
    }
    if !(symbol_rate > 0.0) {
        return Err(Error::Parameter(format!("symbol rate must be > 0, got {symbol_rate}")));
    }
    if let Some(bw) = dac_bandwidth {
        if !(bw > 0.0) {
            return Err(Error::Parameter(format!("DAC bandwidth must be > 0, got {bw}")));
        }
    }
    let n = symbols.len() * samples_per_symbol;
    let mut lanes: [Vec<f64>; 4] = Default::default();
    for (k, lane) in lanes.iter_mut().enumerate() {
        lane.reserve(n);
        for s in symbols {
            let v = s.as_array()[k];
            lane.extend(std::iter::repeat_n(v, samples_per_symbol));
        }
    }
    if let Some(bw) = dac_bandwidth {
        let fs = symbol_rate * samples_per_symbol as f64;
        let h: Vec<Complex64> = (0..n).map(|k| bessel5_response(bin_frequency(k, n, fs), bw)).collect();
        // two real lanes per complex transform
        for pair in [(0usize, 1usize), (2, 3)] {
            let mut buf: Vec<Complex64> = lanes[pair.0]
                .iter()
                .zip(&lanes[pair.1])
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect();
            fft_in_place(&mut buf);
            for (v, hk) in buf.iter_mut().zip(&h) {
                *v *= hk;
            }
            ifft_in_place(&mut buf);
            lanes[pair.0] = buf.iter().map(|v| v.re).collect();
            lanes[pair.1] = buf.iter().map(|v| v.im).collect();
        }
    }
    Ok(DriveWaveform {
        lanes,
        samples_per_symbol,
        symbol_rate,
    })
}

/// Ideal linear dual-polarization IQ modulator. The y-polarization Q branch is
/// biased at extinction, so its lane is ignored. The field is scaled to the
/// requested mean launch power.
pub fn modulate(drive: &DriveWaveform, launch_power_dbm: f64) -> Result<DualPolWaveform> {
    let [ix, qx, iy, _blocked] = &drive.lanes;
    let ex: Vec<Complex64> = ix.iter().zip(qx).map(|(&i, &q)| Complex64::new(i, q)).collect();
    let ey: Vec<Complex64> = iy.iter().map(|&i| Complex64::new(i, 0.0)).collect();
    let mut w = DualPolWaveform::new(ex, ey, drive.sample_rate())?;
    let p = w.mean_power();
    if !(p > 0.0) {
        return Err(Error::Domain("drive carries no power".into()));
    }
    w.scale((dbm_to_watt(launch_power_dbm) / p).sqrt());
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{map_bits, simplex_codebook};

    #[test]
    fn bessel_normalization() {
        assert!((bessel5_response(0.0, 13e9) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((bessel5_response(13e9, 13e9).norm_sqr() - 0.5).abs() < 1e-9);
        // conjugate symmetric, so real lanes stay real
        let a = bessel5_response(5e9, 13e9);
        let b = bessel5_response(-5e9, 13e9);
        assert!((a - b.conj()).norm() < 1e-15);
    }

    #[test]
    fn bypass_is_exact_nrz() {
        let syms = map_bits(&simplex_codebook(), &[0, 1, 1, 1]).unwrap();
        let d = generate_drive(&syms, 3, None, 16e9).unwrap();
        assert_eq!(d.lanes[0], vec![-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]);
        assert_eq!(d.lanes[2], vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
        assert_eq!(d.lanes[3], vec![0.0; 6]);
    }

    #[test]
    fn constant_stream_passes_dc() {
        let syms = vec![SymbolVec4::new(1.0, -1.0, 1.0, 0.0); 64];
        let d = generate_drive(&syms, 4, Some(13e9), 16e9).unwrap();
        for (lane, want) in d.lanes.iter().zip([1.0, -1.0, 1.0, 0.0]) {
            assert!(lane.iter().all(|v| (v - want).abs() < 1e-12));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let syms = vec![SymbolVec4::default(); 4];
        assert!(generate_drive(&syms, 1, None, 16e9).is_err());
        assert!(generate_drive(&syms, 4, Some(0.0), 16e9).is_err());
    }

    #[test]
    fn modulator_blocks_qy_and_sets_power() {
        let syms = vec![SymbolVec4::new(1.0, 1.0, -1.0, 0.7); 16];
        let d = generate_drive(&syms, 2, None, 16e9).unwrap();
        let w = modulate(&d, 0.0).unwrap();
        assert!(w.ey.iter().all(|v| v.im == 0.0));
        assert!((w.mean_power() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn modulator_renormalizes_amplitude() {
        let syms = map_bits(&simplex_codebook(), &[0, 0, 1, 0, 1, 1, 0, 1]).unwrap();
        let d = generate_drive(&syms, 4, Some(13e9), 16e9).unwrap();
        let mut d2 = d.clone();
        for lane in d2.lanes.iter_mut() {
            lane.iter_mut().for_each(|v| *v *= 2.0);
        }
        let a = modulate(&d, 3.0).unwrap();
        let b = modulate(&d2, 3.0).unwrap();
        assert!(a.relative_rms_to(&b) < 1e-14);
    }
}
