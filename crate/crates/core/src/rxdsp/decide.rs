use num_complex::Complex64;

use crate::constellation::{demap_ml, simplex_codebook, Format, SymbolVec4};
use crate::txchain::{differential_decode, BitStream};

/// Rescales tributaries to unit coordinates: x by its mean |Re|+|Im| and y
/// by its mean |Re| (simplex) or both by their mean |Re| (DP-BPSK).
pub fn normalize_tributaries(x: &[Complex64], y: &[Complex64], format: Format) -> Vec<SymbolVec4> {
    let n = x.len().max(1) as f64;
    let gx = match format {
        Format::Simplex3d => x.iter().map(|v| v.re.abs() + v.im.abs()).sum::<f64>() / (2.0 * n),
        Format::DpBpsk => x.iter().map(|v| v.re.abs()).sum::<f64>() / n,
    };
    let gy = y.iter().map(|v| v.re.abs()).sum::<f64>() / n;
    let (gx, gy) = (1.0 / gx.max(f64::MIN_POSITIVE), 1.0 / gy.max(f64::MIN_POSITIVE));
    x.iter()
        .zip(y)
        .map(|(a, b)| SymbolVec4::new(a.re * gx, a.im * gx, b.re * gy, b.im * gy))
        .collect()
}

/// Hard decisions: minimum-distance demapping for the simplex; per-lane sign
/// decisions followed by differential decoding for DP-BPSK.
pub fn decide_and_decode(x: &[Complex64], y: &[Complex64], format: Format) -> BitStream {
    let n = x.len().min(y.len());
    let bits = match format {
        Format::Simplex3d => {
            let cb = simplex_codebook();
            normalize_tributaries(&x[..n], &y[..n], format)
                .iter()
                .flat_map(|s| {
                    let (label, _) = demap_ml(&cb, s);
                    [((label >> 1) & 1) as u8, (label & 1) as u8]
                })
                .collect()
        }
        Format::DpBpsk => {
            let hard = |s: &[Complex64]| -> Vec<u8> { s.iter().map(|v| u8::from(v.re > 0.0)).collect() };
            let bx = differential_decode(&hard(&x[..n]));
            let by = differential_decode(&hard(&y[..n]));
            bx.iter().zip(&by).flat_map(|(&a, &b)| [a, b]).collect()
        }
    };
    BitStream::explicit(bits).expect("decisions are binary")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{dpbpsk_codebook, map_bits};
    use crate::txchain::differential_encode;

    fn tribs(s: &[SymbolVec4]) -> (Vec<Complex64>, Vec<Complex64>) {
        (
            s.iter().map(|v| Complex64::new(v.ix, v.qx)).collect(),
            s.iter().map(|v| Complex64::new(v.iy, v.qy)).collect(),
        )
    }

    #[test]
    fn simplex_all_labels() {
        let bits: Vec<u8> = vec![0, 0, 0, 1, 1, 0, 1, 1];
        let (x, y) = tribs(&map_bits(&simplex_codebook(), &bits).unwrap());
        assert_eq!(decide_and_decode(&x, &y, Format::Simplex3d).bits(), &bits[..]);
        // Scale invariance.
        let xs: Vec<Complex64> = x.iter().map(|v| v * 0.03).collect();
        let ys: Vec<Complex64> = y.iter().map(|v| v * 7.0).collect();
        assert_eq!(decide_and_decode(&xs, &ys, Format::Simplex3d).bits(), &bits[..]);
    }

    fn dp_round_trip_symbols(data: &[u8]) -> Vec<SymbolVec4> {
        let lane_x: Vec<u8> = data.iter().step_by(2).copied().collect();
        let lane_y: Vec<u8> = data.iter().skip(1).step_by(2).copied().collect();
        let ex = differential_encode(&lane_x);
        let ey = differential_encode(&lane_y);
        let inter: Vec<u8> = ex.iter().zip(&ey).flat_map(|(&a, &b)| [a, b]).collect();
        map_bits(&dpbpsk_codebook(), &inter).unwrap()
    }

    #[test]
    fn dpbpsk_differential_loopback() {
        let data: Vec<u8> = (0..64).map(|k| ((k * 7 + k / 3) % 2) as u8).collect();
        let (x, y) = tribs(&dp_round_trip_symbols(&data));
        assert_eq!(decide_and_decode(&x, &y, Format::DpBpsk).bits(), &data[..]);
        // A common π rotation is absorbed by the differential code except
        // for the very first symbol.
        let xr: Vec<Complex64> = x.iter().map(|v| -v).collect();
        let yr: Vec<Complex64> = y.iter().map(|v| -v).collect();
        assert_eq!(&decide_and_decode(&xr, &yr, Format::DpBpsk).bits()[2..], &data[2..]);
    }

    #[test]
    fn isolated_symbol_error_costs_two_bits() {
        let data: Vec<u8> = (0..200).map(|k| ((k * 5 + 1) % 3 % 2) as u8).collect();
        let (mut x, y) = tribs(&dp_round_trip_symbols(&data));
        x[40] = -x[40];
        let rx = decide_and_decode(&x, &y, Format::DpBpsk);
        let wrong: Vec<usize> = (0..data.len()).filter(|&i| rx.bits()[i] != data[i]).collect();
        assert_eq!(wrong, vec![80, 82]);
    }
}
