//! Frame sync, BER counting, Q-factor and log-BER regression.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{fft_in_place, ifft_in_place};
use crate::error::{Error, Result};
use crate::txchain::BitStream;

pub const CSV_SCHEMA_VERSION: u32 = 1;
/// Points with fewer errors than this are flagged low-confidence.
pub const MIN_CONFIDENT_ERRORS: u64 = 25;
pub const SYNC_THRESHOLD: f64 = 0.6;
/// Extrapolating a fit further than this past the measured range is flagged.
pub const EXTRAPOLATION_LIMIT_DB: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub x_value: f64,
    pub ber: f64,
    pub bits_counted: u64,
    pub errors: u64,
}

impl BerPoint {
    pub fn new(x_value: f64, errors: u64, bits_counted: u64) -> Result<Self> {
        if bits_counted == 0 {
            return Err(Error::Parameter("a BER point needs at least one bit".into()));
        }
        if errors > bits_counted {
            return Err(Error::Parameter(format!("{errors} errors in {bits_counted} bits")));
        }
        Ok(Self {
            x_value,
            ber: errors as f64 / bits_counted as f64,
            bits_counted,
            errors,
        })
    }

    pub fn at(self, x_value: f64) -> Self {
        Self { x_value, ..self }
    }

    /// Pools the counts of two measurements at the same x.
    pub fn merge(&self, other: &BerPoint) -> BerPoint {
        let bits = self.bits_counted + other.bits_counted;
        let errors = self.errors + other.errors;
        BerPoint {
            x_value: self.x_value,
            ber: errors as f64 / bits as f64,
            bits_counted: bits,
            errors,
        }
    }

    pub fn low_confidence(&self) -> bool {
        self.errors < MIN_CONFIDENT_ERRORS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitDomain {
    #[default]
    Log10Ber,
    QFactorDb,
}

impl FitDomain {
    fn transform(self, ber: f64) -> Result<f64> {
        match self {
            FitDomain::Log10Ber => Ok(ber.log10()),
            FitDomain::QFactorDb => q_from_ber(ber),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub domain: FitDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub points: Vec<BerPoint>,
    pub regression: Option<Regression>,
}

impl BerCurve {
    /// Sorts by x without fitting.
    pub fn from_points(mut points: Vec<BerPoint>) -> Self {
        points.sort_by(|a, b| a.x_value.total_cmp(&b.x_value));
        Self { points, regression: None }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_value,ber,bits_counted,errors\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{},{}", p.x_value, p.ber, p.bits_counted, p.errors);
        }
        match self.regression {
            Some(r) => {
                let _ = writeln!(
                    s,
                    "# schema_version={CSV_SCHEMA_VERSION} slope={} intercept={} domain={}",
                    r.slope,
                    r.intercept,
                    match r.domain {
                        FitDomain::Log10Ber => "log10_ber",
                        FitDomain::QFactorDb => "q_factor_db",
                    }
                );
            }
            None => {
                let _ = writeln!(s, "# schema_version={CSV_SCHEMA_VERSION} slope=none intercept=none");
            }
        }
        s
    }
}

fn polarity_bits(bits: &[u8]) -> impl Iterator<Item = f64> + '_ {
    bits.iter().map(|&b| if b == 0 { -1.0 } else { 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncResult {
    /// `rx[i]` lines up with `ref[(i + offset) % ref.len()]`.
    pub offset: usize,
    /// −1 when the received stream is the complement of the reference.
    pub polarity: i8,
    pub agreement: f64,
}

/// Cyclic correlation sweep over every offset. Polarity is taken from the
/// largest-magnitude correlation; ties go to the lowest offset.
pub fn synchronize_search(reference: &BitStream, rx: &BitStream) -> Result<SyncResult> {
    let l = reference.len();
    if l == 0 || rx.len() < l {
        return Err(Error::InputShape(format!(
            "sync needs rx length ≥ reference length > 0, got {} and {l}",
            rx.len()
        )));
    }
    let mut a: Vec<Complex64> = polarity_bits(reference.bits()).map(|v| Complex64::new(v, 0.0)).collect();
    let mut b = vec![Complex64::default(); l];
    for (i, v) in polarity_bits(rx.bits()).enumerate() {
        b[i % l].re += v;
    }
    fft_in_place(&mut a);
    fft_in_place(&mut b);
    let mut c: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y.conj()).collect();
    ifft_in_place(&mut c);
    let n = rx.len() as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for (o, v) in c.iter().enumerate() {
        let m = v.re.round().abs();
        if m > best.1 {
            best = (o, m);
        }
    }
    let (offset, _) = best;
    let corr = c[offset].re.round();
    let polarity = if corr < 0.0 { -1 } else { 1 };
    Ok(SyncResult {
        offset,
        polarity,
        agreement: (n + corr.abs()) / (2.0 * n),
    })
}

/// Like [`synchronize_search`] but rejects agreements below 0.6.
pub fn synchronize(reference: &BitStream, rx: &BitStream) -> Result<SyncResult> {
    let r = synchronize_search(reference, rx)?;
    if r.agreement < SYNC_THRESHOLD {
        return Err(Error::SyncFailed {
            offset: r.offset,
            agreement: r.agreement,
        });
    }
    Ok(r)
}

/// Hamming distance between `rx` and the cyclically shifted reference. The
/// returned point has `x_value = 0`; set it with [`BerPoint::at`].
pub fn count_ber(reference: &BitStream, rx: &BitStream, offset: usize) -> Result<BerPoint> {
    let l = reference.len();
    if l == 0 || rx.is_empty() {
        return Err(Error::InputShape("empty stream".into()));
    }
    let r = reference.bits();
    let errors = rx
        .bits()
        .iter()
        .enumerate()
        .filter(|&(i, &b)| b != r[(i + offset) % l])
        .count();
    BerPoint::new(0.0, errors as u64, rx.len() as u64)
}

pub fn fit_curve(points: &[BerPoint]) -> Result<BerCurve> {
    fit_curve_in(points, FitDomain::Log10Ber)
}

/// Least-squares line through the nonzero-BER points in the chosen domain.
pub fn fit_curve_in(points: &[BerPoint], domain: FitDomain) -> Result<BerCurve> {
    let mut curve = BerCurve::from_points(points.to_vec());
    let mut xy = Vec::new();
    for p in curve.points.iter().filter(|p| p.ber > 0.0) {
        xy.push((p.x_value, domain.transform(p.ber)?));
    }
    if xy.len() < 2 {
        return Err(Error::FitUndefined(format!(
            "{} of {} points have nonzero BER",
            xy.len(),
            points.len()
        )));
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::FitUndefined("all fitted points share one x value".into()));
    }
    let slope = sxy / sxx;
    curve.regression = Some(Regression {
        slope,
        intercept: my - slope * mx,
        domain,
    });
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequiredOsnr {
    pub value: f64,
    /// Set when the answer lies more than 2 dB outside the measured x range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn required_osnr(curve: &BerCurve, target_ber: f64) -> Result<RequiredOsnr> {
    let r = curve
        .regression
        .ok_or_else(|| Error::FitUndefined("curve has no regression".into()))?;
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(Error::Domain(format!("target BER {target_ber} outside (0, 0.5)")));
    }
    if r.slope == 0.0 {
        return Err(Error::FitUndefined("flat regression cannot be inverted".into()));
    }
    let value = (r.domain.transform(target_ber)? - r.intercept) / r.slope;
    let lo = curve.points.first().map_or(value, |p| p.x_value);
    let hi = curve.points.last().map_or(value, |p| p.x_value);
    let beyond = (lo - value).max(value - hi);
    let warning = (beyond > EXTRAPOLATION_LIMIT_DB)
        .then(|| format!("extrapolated {beyond:.2} dB beyond the measured range [{lo}, {hi}]"));
    Ok(RequiredOsnr { value, warning })
}

/// `Q_dB = 20·log10(√2·erfc⁻¹(2·ber))`; `−∞` at 0.5.
pub fn q_from_ber(ber: f64) -> Result<f64> {
    if !(ber > 0.0 && ber <= 0.5) {
        return Err(Error::Domain(format!("BER {ber} outside (0, 0.5)")));
    }
    if ber == 0.5 {
        return Ok(f64::NEG_INFINITY);
    }
    let y = 2.0 * ber;
    let mut x = statrs::function::erf::erfc_inv(y);
    // One Newton step against the same erfc used by `ber_from_q`.
    let d = -2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp();
    x -= (libm::erfc(x) - y) / d;
    Ok(20.0 * (std::f64::consts::SQRT_2 * x).log10())
}

pub fn ber_from_q(q_db: f64) -> f64 {
    let q = 10f64.powf(q_db / 20.0);
    0.5 * libm::erfc(q / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{dpbpsk_codebook, union_bound_ber, osnr_to_sigma};
    use crate::txchain::de_bruijn_sequence;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(v: Vec<u8>) -> BitStream {
        BitStream::explicit(v).unwrap()
    }

    fn rotate(v: &[u8], k: usize) -> Vec<u8> {
        (0..v.len()).map(|i| v[(i + k) % v.len()]).collect()
    }

    #[test]
    fn sync_identical_and_rotated() {
        let db = de_bruijn_sequence(11).unwrap();
        let s = synchronize(&db, &db).unwrap();
        assert_eq!((s.offset, s.polarity, s.agreement), (0, 1, 1.0));
        let rx = bits(rotate(db.bits(), 17));
        let s = synchronize(&db, &rx).unwrap();
        assert_eq!(s.offset, 17);
        assert_eq!(count_ber(&db, &rx, s.offset).unwrap().errors, 0);
    }

    #[test]
    fn sync_every_offset_is_error_free() {
        let db = de_bruijn_sequence(8).unwrap();
        for k in 0..db.len() {
            let rx = bits(rotate(db.bits(), k));
            let s = synchronize(&db, &rx).unwrap();
            assert_eq!(s.offset, k);
            assert_eq!(count_ber(&db, &rx, s.offset).unwrap().ber, 0.0);
        }
    }

    #[test]
    fn sync_detects_complement() {
        let db = de_bruijn_sequence(11).unwrap();
        let rx = bits(rotate(db.bits(), 5).iter().map(|b| b ^ 1).collect());
        let s = synchronize(&db, &rx).unwrap();
        assert_eq!((s.offset, s.polarity), (5, -1));
        assert_eq!(count_ber(&db, &rx, 5).unwrap().ber, 1.0);
    }

    #[test]
    fn independent_streams_fail_sync() {
        // Oracle: agreement of independent fair bits at a fixed offset is
        // Binomial(2048, 1/2)/2048 with σ ≈ 0.011; the max over 2048 offsets
        // stays near 0.5 + 4σ ≈ 0.545, so 0.6 (≈9σ) is never reached.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let a = bits((0..2048).map(|_| rng.random_range(0..2)).collect());
            let b = bits((0..2048).map(|_| rng.random_range(0..2)).collect());
            let r = synchronize_search(&a, &b).unwrap();
            assert!(r.agreement < 0.56, "{}", r.agreement);
            assert!(matches!(synchronize(&a, &b), Err(Error::SyncFailed { .. })));
        }
    }

    #[test]
    fn count_examples() {
        let db = de_bruijn_sequence(11).unwrap();
        let mut v: Vec<u8> = db.bits().iter().chain(db.bits()).copied().collect();
        let reference = bits(v.clone());
        v[1000] ^= 1;
        let p = count_ber(&reference, &bits(v), 0).unwrap();
        assert_eq!(p.bits_counted, 4096);
        assert_eq!(p.ber, 1.0 / 4096.0);
    }

    #[test]
    fn fit_two_points_exact() {
        let a = BerPoint::new(5.0, 100, 10_000).unwrap();
        let b = BerPoint::new(7.0, 1, 10_000).unwrap();
        let c = fit_curve(&[b.clone(), a.clone()]).unwrap();
        assert_eq!(c.points[0], a);
        let r = c.regression.unwrap();
        assert!((r.slope + 1.0).abs() < 1e-12);
        assert!((required_osnr(&c, 1e-2).unwrap().value - 5.0).abs() < 1e-12);
        assert!((required_osnr(&c, 1e-4).unwrap().value - 7.0).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_exact_line() {
        let pts: Vec<BerPoint> = (0..6)
            .map(|i| {
                let x = 4.0 + i as f64 * 0.5;
                let ber = 10f64.powf(-0.7 * x + 1.3);
                BerPoint { x_value: x, ber, bits_counted: 1 << 30, errors: (ber * (1u64 << 30) as f64) as u64 }
            })
            .collect();
        let r = fit_curve(&pts).unwrap().regression.unwrap();
        assert!((r.slope + 0.7).abs() < 1e-9);
        assert!((r.intercept - 1.3).abs() < 1e-9);
    }

    #[test]
    fn theory_curve_has_negative_slope() {
        let cb = dpbpsk_codebook();
        let pts: Vec<BerPoint> = [6.0, 7.0, 8.0, 9.0]
            .iter()
            .map(|&o| {
                let ber = union_bound_ber(&cb, osnr_to_sigma(o, 16e9, &cb).unwrap()).unwrap();
                BerPoint { x_value: o, ber, bits_counted: 1, errors: 0 }
            })
            .collect();
        let c = fit_curve(&pts).unwrap();
        assert!(c.regression.unwrap().slope < 0.0);
        let r3 = required_osnr(&c, 1e-3).unwrap().value;
        let r4 = required_osnr(&c, 1e-4).unwrap().value;
        assert!(r4 > r3);
    }

    #[test]
    fn all_zero_is_fit_undefined() {
        let p = BerPoint::new(10.0, 0, 1000).unwrap();
        assert!(matches!(fit_curve(&[p.clone(), p.at(11.0)]), Err(Error::FitUndefined(_))));
    }

    #[test]
    fn required_osnr_translates_and_warns() {
        let pts = vec![BerPoint::new(5.0, 100, 10_000).unwrap(), BerPoint::new(6.0, 10, 10_000).unwrap()];
        let shifted: Vec<_> = pts.iter().map(|p| p.clone().at(p.x_value + 1.0)).collect();
        let a = required_osnr(&fit_curve(&pts).unwrap(), 3e-3).unwrap();
        let b = required_osnr(&fit_curve(&shifted).unwrap(), 3e-3).unwrap();
        assert!((b.value - a.value - 1.0).abs() < 1e-12);
        assert!(a.warning.is_none());
        let far = required_osnr(&fit_curve(&pts).unwrap(), 1e-9).unwrap();
        assert!(far.warning.is_some());
    }

    #[test]
    fn q_examples() {
        let q = q_from_ber(0.022_750_1).unwrap();
        assert!((q - 20.0 * 2f64.log10()).abs() < 1e-4, "{q}");
        assert_eq!(q_from_ber(0.5).unwrap(), f64::NEG_INFINITY);
        assert!(q_from_ber(0.0).is_err());
        assert!(q_from_ber(0.7).is_err());
        for ber in [0.4, 0.1, 1e-3, 1e-6, 1e-12] {
            let back = ber_from_q(q_from_ber(ber).unwrap());
            assert!((back / ber - 1.0).abs() < 1e-12, "{ber} {back}");
        }
    }

    #[test]
    fn q_domain_fit() {
        let pts = vec![BerPoint::new(5.0, 100, 10_000).unwrap(), BerPoint::new(6.0, 10, 10_000).unwrap()];
        let c = fit_curve_in(&pts, FitDomain::QFactorDb).unwrap();
        let r = required_osnr(&c, 1e-2).unwrap().value;
        assert!((r - 5.0).abs() < 1e-9);
    }

    #[test]
    fn csv_layout() {
        let pts = vec![BerPoint::new(5.5, 3, 4096).unwrap(), BerPoint::new(6.0, 1, 4096).unwrap()];
        let csv = fit_curve(&pts).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x_value,ber,bits_counted,errors");
        assert_eq!(lines[1], "5.5,0.000732421875,4096,3");
        assert!(lines[3].starts_with("# schema_version=1 slope="));
        assert!(BerPoint::new(1.0, 3, 4096).unwrap().low_confidence());
    }
}
