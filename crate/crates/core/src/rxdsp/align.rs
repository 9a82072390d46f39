//! Polarization pre-alignment and inter-tributary ambiguity resolution.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::decide::decide_and_decode;
use crate::channel::JonesMatrix;
use crate::constellation::Format;
use crate::error::{Error, Result};
use crate::metrics::synchronize_search;
use crate::txchain::BitStream;

const MIN_PARITY_SCORE: f64 = 0.75;

/// Demultiplexing matrix from the eigenvectors of the received coherency
/// matrix, strongest eigenvector to the x output. The simplex puts twice the
/// power on its x tributary, so this separates the tributaries up to a phase
/// each, independently of carrier phase and frequency.
pub fn coherency_demux(x: &[Complex64], y: &[Complex64]) -> Result<(JonesMatrix, f64)> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InputShape("tributaries must be equal length and non-empty".into()));
    }
    let n = x.len() as f64;
    let a: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
    let d: f64 = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
    let b: Complex64 = x.iter().zip(y).map(|(p, q)| p * q.conj()).sum::<Complex64>() / n;
    let mean = (a + d) / 2.0;
    let r = (((a - d) / 2.0).powi(2) + b.norm_sqr()).sqrt();
    let (l1, l2) = (mean + r, mean - r);
    let v1 = if b.norm() > 1e-15 * mean {
        let v = [b, Complex64::new(l1 - a, 0.0)];
        let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        [v[0] / norm, v[1] / norm]
    } else if a >= d {
        [Complex64::new(1.0, 0.0), Complex64::default()]
    } else {
        [Complex64::default(), Complex64::new(1.0, 0.0)]
    };
    let v2 = [-v1[1].conj(), v1[0].conj()];
    let m = [[v1[0].conj(), v1[1].conj()], [v2[0].conj(), v2[1].conj()]];
    Ok((m, l1 / l2.max(f64::MIN_POSITIVE)))
}

/// Block length of the pseudo-covariance estimate in [`bpsk_pair_demux`].
const PSEUDO_BLOCK: usize = 128;

/// Demultiplexing matrix for two real (BPSK) tributaries from the received
/// pseudo-covariance E[r·rᵀ] = e^{2jφ}·U·Uᵀ. Blocks are phase-aligned to
/// each other before summing so the carrier phase cancels. The Takagi
/// factor V of U·Uᵀ satisfies Vᴴ·U real orthogonal, so both outputs come out
/// on a line: a real mixture of the tributaries that a modulus criterion
/// can finish separating. Also returns the coherence of the block sum (1 for
/// a static channel).
pub fn bpsk_pair_demux(x: &[Complex64], y: &[Complex64]) -> Result<(JonesMatrix, f64)> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InputShape("tributaries must be equal length and non-empty".into()));
    }
    type Sym = [Complex64; 3];
    let mut acc: Sym = [Complex64::default(); 3];
    let mut total = 0.0;
    for (bx, by) in x.chunks(PSEUDO_BLOCK).zip(y.chunks(PSEUDO_BLOCK)) {
        let mut c: Sym = [Complex64::default(); 3];
        for (a, b) in bx.iter().zip(by) {
            c[0] += a * a;
            c[1] += a * b;
            c[2] += b * b;
        }
        let norm = (c[0].norm_sqr() + 2.0 * c[1].norm_sqr() + c[2].norm_sqr()).sqrt();
        total += norm;
        let ip = c[0] * acc[0].conj() + 2.0 * c[1] * acc[1].conj() + c[2] * acc[2].conj();
        let rot = if ip.norm() > 0.0 { ip.conj() / ip.norm() } else { Complex64::new(1.0, 0.0) };
        for (s, v) in acc.iter_mut().zip(c) {
            *s += v * rot;
        }
    }
    let coherence = (acc[0].norm_sqr() + 2.0 * acc[1].norm_sqr() + acc[2].norm_sqr()).sqrt() / total.max(f64::MIN_POSITIVE);
    // Real and imaginary parts of a symmetric unitary matrix commute, so one
    // real rotation diagonalizes both; use whichever combination has the
    // widest eigenvalue gap.
    let mut best = (-1.0, 0.0);
    for k in 0..4 {
        let t = k as f64 * std::f64::consts::FRAC_PI_4;
        let (c, s) = (t.cos(), t.sin());
        let m = |v: Complex64| c * v.re + s * v.im;
        let (s00, s01, s11) = (m(acc[0]), m(acc[1]), m(acc[2]));
        let gap = ((s00 - s11).powi(2) + 4.0 * s01 * s01).sqrt();
        if gap > best.0 {
            best = (gap, 0.5 * (2.0 * s01).atan2(s00 - s11));
        }
    }
    let (cp, sp) = (best.1.cos(), best.1.sin());
    // diagonal of Qᵀ·M·Q with Q = [[c, −s], [s, c]]
    let d1 = cp * cp * acc[0] + 2.0 * cp * sp * acc[1] + sp * sp * acc[2];
    let d2 = sp * sp * acc[0] - 2.0 * cp * sp * acc[1] + cp * cp * acc[2];
    let h1 = Complex64::from_polar(1.0, -0.5 * d1.arg());
    let h2 = Complex64::from_polar(1.0, -0.5 * d2.arg());
    let m = [[h1 * cp, h1 * sp], [-h2 * sp, h2 * cp]];
    Ok((m, coherence))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TributaryRotation {
    /// x was multiplied by `j^x_quarter_turns`.
    pub x_quarter_turns: u8,
    pub y_flipped: bool,
}

impl TributaryRotation {
    pub const IDENTITY: Self = Self {
        x_quarter_turns: 0,
        y_flipped: false,
    };

    fn all() -> impl Iterator<Item = Self> {
        (0..4u8).flat_map(|q| {
            [false, true].into_iter().map(move |f| Self {
                x_quarter_turns: q,
                y_flipped: f,
            })
        })
    }

    pub fn apply(self, x: &[Complex64], y: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let rx = Complex64::new(0.0, 1.0).powu(self.x_quarter_turns as u32);
        let ry = if self.y_flipped { -1.0 } else { 1.0 };
        (x.iter().map(|v| v * rx).collect(), y.iter().map(|v| v * ry).collect())
    }
}

/// Fraction of symbols obeying `sign(Re y) = −sign(Re x)·sign(Im x)`.
pub fn parity_score(x: &[Complex64], y: &[Complex64]) -> f64 {
    let ok = x
        .iter()
        .zip(y)
        .filter(|(a, b)| (b.re >= 0.0) == ((a.re >= 0.0) != (a.im >= 0.0)))
        .count();
    ok as f64 / x.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignOutput {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub rotation: TributaryRotation,
    pub parity_score: f64,
    /// Hypotheses tied on parity; the simplex has four.
    pub parity_ties: usize,
    pub reference_agreement: Option<f64>,
}

/// Scores all eight residual rotations by the simplex parity and breaks the
/// ties left by codebook symmetries against `reference_bits`.
pub fn tributary_align(x: &[Complex64], y: &[Complex64], reference_bits: Option<&BitStream>) -> Result<AlignOutput> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InputShape("tributaries must be equal length and non-empty".into()));
    }
    let scored: Vec<(TributaryRotation, f64)> = TributaryRotation::all()
        .map(|h| {
            let (a, b) = h.apply(x, y);
            (h, parity_score(&a, &b))
        })
        .collect();
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    if best < MIN_PARITY_SCORE {
        return Err(Error::AlignmentFailed { best_score: best });
    }
    let tied: Vec<TributaryRotation> = scored.iter().filter(|s| s.1 >= best - 1e-12).map(|s| s.0).collect();
    let mut choice = (tied[0], None);
    if let Some(reference) = reference_bits {
        let mut best_agree = f64::NEG_INFINITY;
        for &h in &tied {
            let (a, b) = h.apply(x, y);
            let bits = decide_and_decode(&a, &b, Format::Simplex3d);
            if bits.len() < reference.len() {
                return Err(Error::InputShape(format!(
                    "{} decoded bits cannot cover the {}-bit reference",
                    bits.len(),
                    reference.len()
                )));
            }
            let s = synchronize_search(reference, &bits)?;
            let agree = if s.polarity > 0 { s.agreement } else { 1.0 - s.agreement };
            if agree > best_agree {
                best_agree = agree;
                choice = (h, Some(agree));
            }
        }
    }
    let (xa, ya) = choice.0.apply(x, y);
    Ok(AlignOutput {
        x: xa,
        y: ya,
        rotation: choice.0,
        parity_score: best,
        parity_ties: tied.len(),
        reference_agreement: choice.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{jones_matrix, JonesAngles};
    use crate::constellation::{map_bits, simplex_codebook};
    use crate::txchain::de_bruijn_sequence;

    fn simplex_tribs(bits: &[u8]) -> (Vec<Complex64>, Vec<Complex64>) {
        let s = map_bits(&simplex_codebook(), bits).unwrap();
        (
            s.iter().map(|v| Complex64::new(v.ix, v.qx)).collect(),
            s.iter().map(|v| Complex64::new(v.iy, v.qy)).collect(),
        )
    }

    fn frame() -> BitStream {
        let db = de_bruijn_sequence(11).unwrap();
        let b = db.bits();
        BitStream::explicit((0..2048).flat_map(|k| [b[k], b[(k + 1024) % 2048]]).collect()).unwrap()
    }

    #[test]
    fn aligned_input_is_identity() {
        let f = frame();
        let (x, y) = simplex_tribs(f.bits());
        let out = tributary_align(&x, &y, Some(&f)).unwrap();
        assert_eq!(out.rotation, TributaryRotation::IDENTITY);
        assert_eq!(out.parity_score, 1.0);
        assert_eq!(out.reference_agreement, Some(1.0));
    }

    #[test]
    fn quarter_turn_removed() {
        let f = frame();
        let (x, y) = simplex_tribs(f.bits());
        let xr: Vec<Complex64> = x.iter().map(|v| v * Complex64::new(0.0, 1.0)).collect();
        assert!(parity_score(&xr, &y) < 0.75);
        let out = tributary_align(&xr, &y, Some(&f)).unwrap();
        assert!((out.parity_score - 1.0).abs() < 1e-12);
        assert_eq!(decide_and_decode(&out.x, &out.y, Format::Simplex3d).bits(), f.bits());
    }

    #[test]
    fn half_turn_on_x_is_a_symmetry() {
        // Exhaustive over the four points: negating (ix, qx) keeps
        // iy = −ix·qx, so p00↔p11 and p01↔p10.
        let cb = simplex_codebook();
        for p in cb.points() {
            let (ix, qx) = (-p.ix, -p.qx);
            let image = cb.points().iter().position(|q| q.ix == ix && q.qx == qx && q.iy == p.iy).unwrap();
            let src = cb.points().iter().position(|q| q == p).unwrap();
            assert_eq!(cb.labels()[image], 3 - cb.labels()[src]);
        }
        let f = frame();
        let (x, y) = simplex_tribs(f.bits());
        let xr: Vec<Complex64> = x.iter().map(|v| -v).collect();
        assert_eq!(parity_score(&xr, &y), 1.0);
        assert_eq!(parity_score(&x, &y), 1.0);
        let blind = tributary_align(&xr, &y, None).unwrap();
        assert_eq!(blind.parity_ties, 4);
        let out = tributary_align(&xr, &y, Some(&f)).unwrap();
        assert_eq!(decide_and_decode(&out.x, &out.y, Format::Simplex3d).bits(), f.bits());
    }

    #[test]
    fn noise_like_input_fails() {
        let x: Vec<Complex64> = (0..1000).map(|k| Complex64::from_polar(1.0, k as f64 * 0.37)).collect();
        let y: Vec<Complex64> = (0..1000).map(|k| Complex64::from_polar(1.0, k as f64 * 1.91)).collect();
        assert!(matches!(tributary_align(&x, &y, None), Err(Error::AlignmentFailed { .. })));
    }

    #[test]
    fn coherency_demux_inverts_rotation() {
        let f = frame();
        let (x, y) = simplex_tribs(f.bits());
        let u = jones_matrix(JonesAngles::new(1.1, 0.4, 2.0));
        let rx: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| u[0][0] * a + u[0][1] * b).collect();
        let ry: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| u[1][0] * a + u[1][1] * b).collect();
        let (m, ratio) = coherency_demux(&rx, &ry).unwrap();
        assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
        let mut c = [[Complex64::default(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = m[i][0] * u[0][j] + m[i][1] * u[1][j];
            }
        }
        assert!(c[0][1].norm() < 0.05 && c[1][0].norm() < 0.05, "{c:?}");
        assert!((c[0][0].norm() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn bpsk_pair_demux_puts_both_outputs_on_lines() {
        use crate::channel::{jones_matrix, JonesAngles};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let lineness = |v: &[Complex64]| {
            let s2: Complex64 = v.iter().map(|s| s * s).sum();
            s2.norm() / v.iter().map(|s| s.norm_sqr()).sum::<f64>()
        };
        for _ in 0..20 {
            let u = jones_matrix(JonesAngles::random(&mut rng));
            let n = 4096;
            let (mut x, mut y, mut carrier) = (Vec::new(), Vec::new(), Vec::new());
            for k in 0..n {
                let s1 = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let s2 = if rng.random::<bool>() { 1.0 } else { -1.0 };
                // slow common carrier drift
                let c = Complex64::from_polar(1.0, 0.001 * k as f64);
                carrier.push(c);
                x.push(c * (u[0][0] * s1 + u[0][1] * s2));
                y.push(c * (u[1][0] * s1 + u[1][1] * s2));
            }
            let (m, coh) = bpsk_pair_demux(&x, &y).unwrap();
            assert!(coh > 0.99, "{coh}");
            let out = |r: usize| -> Vec<Complex64> {
                (0..n).map(|k| (m[r][0] * x[k] + m[r][1] * y[k]) * carrier[k].conj()).collect()
            };
            let (ox, oy) = (out(0), out(1));
            assert!(lineness(&ox) > 0.999 && lineness(&oy) > 0.999);
            // unitary
            let p = m[0][0] * m[1][0].conj() + m[0][1] * m[1][1].conj();
            assert!(p.norm() < 1e-12);
        }
    }
}
