//! Data-aided reference receiver: matched integrate-and-dump with genie
//! timing and per-polarization gain. Used only as a performance yardstick.

use num_complex::Complex64;

use crate::constellation::SymbolVec4;
use crate::error::{Error, Result};
use crate::waveform::DualPolWaveform;

#[derive(Debug, Clone, PartialEq)]
pub struct IdealOutput {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    /// Sample delay of the dump window that maximized the correlation.
    pub delay_samples: isize,
}

pub fn ideal_receive(sig: &DualPolWaveform, symbol_rate: f64, tx: &[SymbolVec4]) -> Result<IdealOutput> {
    let sps_f = sig.sample_rate / symbol_rate;
    let sps = sps_f.round() as usize;
    if sps == 0 || (sps_f - sps as f64).abs() > 1e-9 {
        return Err(Error::Parameter(format!("ideal receiver needs integer samples per symbol, got {sps_f}")));
    }
    let n = tx.len();
    if n == 0 || sig.len() != n * sps {
        return Err(Error::InputShape(format!(
            "{} samples do not hold {n} symbols at {sps} samples each",
            sig.len()
        )));
    }
    let len = sig.len() as isize;
    let dump = |buf: &[Complex64], delay: isize| -> Vec<Complex64> {
        (0..n)
            .map(|k| {
                let start = (k * sps) as isize + delay;
                (0..sps as isize)
                    .map(|i| buf[(start + i).rem_euclid(len) as usize])
                    .sum::<Complex64>()
                    / sps as f64
            })
            .collect()
    };
    let sx: Vec<Complex64> = tx.iter().map(|s| Complex64::new(s.ix, s.qx)).collect();
    let sy: Vec<Complex64> = tx.iter().map(|s| Complex64::new(s.iy, s.qy)).collect();
    let corr = |r: &[Complex64], s: &[Complex64]| -> Complex64 { r.iter().zip(s).map(|(a, b)| a * b.conj()).sum() };
    let span = 2 * sps as isize;
    let mut best = (0isize, f64::NEG_INFINITY);
    for d in -span..=span {
        let c = corr(&dump(&sig.ex, d), &sx).norm() + corr(&dump(&sig.ey, d), &sy).norm();
        if c > best.1 {
            best = (d, c);
        }
    }
    let d = best.0;
    let (rx, ry) = (dump(&sig.ex, d), dump(&sig.ey, d));
    let gain = |r: &[Complex64], s: &[Complex64]| -> Complex64 {
        let e: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        corr(r, s) / e.max(f64::MIN_POSITIVE)
    };
    let (gx, gy) = (gain(&rx, &sx), gain(&ry, &sy));
    let scale = |r: Vec<Complex64>, g: Complex64| -> Vec<Complex64> {
        if g.norm() == 0.0 {
            r
        } else {
            r.into_iter().map(|v| v / g).collect()
        }
    };
    Ok(IdealOutput {
        x: scale(rx, gx),
        y: scale(ry, gy),
        delay_samples: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{map_bits, simplex_codebook};
    use crate::txchain::{generate_drive, modulate};

    #[test]
    fn clean_nrz_is_recovered_exactly() {
        let bits: Vec<u8> = (0..512).map(|k| ((k * 13 + k / 5) % 2) as u8).collect();
        let sym = map_bits(&simplex_codebook(), &bits).unwrap();
        let drive = generate_drive(&sym, 4, None, 16e9).unwrap();
        let mut w = modulate(&drive, 0.0).unwrap();
        // A pure delay of 3 samples is found by the search.
        w.ex.rotate_right(3);
        w.ey.rotate_right(3);
        let out = ideal_receive(&w, 16e9, &sym).unwrap();
        assert_eq!(out.delay_samples, 3);
        for (k, s) in sym.iter().enumerate() {
            assert!((out.x[k] - Complex64::new(s.ix, s.qx)).norm() < 1e-9);
            assert!((out.y[k].re - s.iy).abs() < 1e-9);
        }
    }
}
