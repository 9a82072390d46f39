//! Codebooks for the 3D-Simplex and DP-BPSK formats.
//!
//! Both formats carry two bits per symbol in four real dimensions
//! `(Ix, Qx, Iy, Qy)`. The simplex places its four points on alternating
//! corners of the `{±1}³` cube (a regular tetrahedron in `Ix, Qx, Iy`) and
//! never drives `Qy`. DP-BPSK drives `Ix` and `Iy` independently.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dsp::{db_to_linear, linear_to_db, q_function};
use crate::error::{Error, Result};

/// OSNR reference bandwidth: 0.1 nm at 1550 nm.
pub const OSNR_REF_BANDWIDTH: f64 = 12.5e9;

/// One modulation symbol as four real coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymbolVec4 {
    pub ix: f64,
    pub qx: f64,
    pub iy: f64,
    pub qy: f64,
}

impl SymbolVec4 {
    pub const fn new(ix: f64, qx: f64, iy: f64, qy: f64) -> Self {
        Self { ix, qx, iy, qy }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.ix, self.qx, self.iy, self.qy]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.as_array().iter().map(|v| v * v).sum()
    }

    pub fn distance_sqr(&self, other: &SymbolVec4) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn distance(&self, other: &SymbolVec4) -> f64 {
        self.distance_sqr(other).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.ix * s, self.qx * s, self.iy * s, self.qy * s)
    }
}

/// Modulation formats known to the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Format {
    #[serde(rename = "simplex3d")]
    Simplex3d,
    #[serde(rename = "dpbpsk")]
    DpBpsk,
}

impl Format {
    pub fn codebook(self) -> Codebook {
        match self {
            Format::Simplex3d => simplex_codebook(),
            Format::DpBpsk => dpbpsk_codebook(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Simplex3d => "simplex3d",
            Format::DpBpsk => "dpbpsk",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simplex3d" | "simplex" | "3d-simplex" => Ok(Format::Simplex3d),
            "dpbpsk" | "dp-bpsk" => Ok(Format::DpBpsk),
            other => Err(Error::Parameter(format!("unknown format `{other}`"))),
        }
    }
}

/// A labeled point set. Labels are integers whose binary digits, most
/// significant first, are the bit tuple carried by the point.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    name: String,
    points: Vec<SymbolVec4>,
    labels: Vec<u32>,
    bits_per_symbol: usize,
    // index of the point carrying each label value
    by_label: Vec<usize>,
}

impl Codebook {
    pub fn new(
        name: impl Into<String>,
        points: Vec<SymbolVec4>,
        labels: Vec<u32>,
        bits_per_symbol: usize,
    ) -> Result<Self> {
        let size = 1usize
            .checked_shl(bits_per_symbol as u32)
            .filter(|_| bits_per_symbol > 0 && bits_per_symbol < 16)
            .ok_or_else(|| Error::Codebook(format!("bad bit width {bits_per_symbol}")))?;
        if points.len() != size || labels.len() != size {
            return Err(Error::Codebook(format!(
                "expected {size} points and labels, got {} and {}",
                points.len(),
                labels.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::Codebook(format!("non-finite point {p:?}")));
        }
        let mut by_label = vec![usize::MAX; size];
        for (i, &l) in labels.iter().enumerate() {
            let slot = by_label
                .get_mut(l as usize)
                .ok_or_else(|| Error::Codebook(format!("label {l} exceeds bit width")))?;
            if *slot != usize::MAX {
                return Err(Error::Codebook(format!("duplicate label {l}")));
            }
            *slot = i;
        }
        for i in 0..size {
            for j in i + 1..size {
                if points[i] == points[j] {
                    return Err(Error::Codebook(format!("points {i} and {j} coincide")));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            points,
            labels,
            bits_per_symbol,
            by_label,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[SymbolVec4] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point_for_label(&self, label: u32) -> SymbolVec4 {
        self.points[self.by_label[label as usize]]
    }

    /// Bits of `label`, first bit first.
    pub fn label_bits(&self, label: u32) -> Vec<u8> {
        (0..self.bits_per_symbol)
            .rev()
            .map(|k| ((label >> k) & 1) as u8)
            .collect()
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Codebook::new(
            self.name.clone(),
            self.points.iter().map(|p| p.scaled(s)).collect(),
            self.labels.clone(),
            self.bits_per_symbol,
        )
    }
}

/// The 3D-Simplex codebook in table order `00, 01, 10, 11`.
pub fn simplex_codebook() -> Codebook {
    let points = vec![
        SymbolVec4::new(-1.0, -1.0, -1.0, 0.0),
        SymbolVec4::new(-1.0, 1.0, 1.0, 0.0),
        SymbolVec4::new(1.0, -1.0, 1.0, 0.0),
        SymbolVec4::new(1.0, 1.0, -1.0, 0.0),
    ];
    Codebook::new("simplex3d", points, vec![0b00, 0b01, 0b10, 0b11], 2)
        .expect("simplex table is a valid codebook")
}

/// DP-BPSK: first bit on `Ix`, second on `Iy`, `0 → −1`.
pub fn dpbpsk_codebook() -> Codebook {
    let labels = vec![0b00, 0b01, 0b10, 0b11];
    let points = labels
        .iter()
        .map(|&l: &u32| {
            let s = |b: u32| if b == 0 { -1.0 } else { 1.0 };
            SymbolVec4::new(s((l >> 1) & 1), 0.0, s(l & 1), 0.0)
        })
        .collect();
    Codebook::new("dpbpsk", points, labels, 2).expect("dpbpsk is a valid codebook")
}

/// Map a bit stream onto symbols, `bits_per_symbol` bits at a time.
pub fn map_bits(cb: &Codebook, bits: &[u8]) -> Result<Vec<SymbolVec4>> {
    let k = cb.bits_per_symbol();
    if bits.len() % k != 0 {
        return Err(Error::InputShape(format!(
            "{} bits is not a multiple of {k} bits per symbol",
            bits.len()
        )));
    }
    Ok(bits
        .chunks_exact(k)
        .map(|group| {
            let label = group.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b & 1));
            cb.point_for_label(label)
        })
        .collect())
}

/// Nearest-point decision in the 4-D Euclidean metric. Ties go to the lowest
/// codebook index.
pub fn demap_ml(cb: &Codebook, received: &SymbolVec4) -> (u32, f64) {
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, p) in cb.points().iter().enumerate() {
        let d2 = p.distance_sqr(received);
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    (cb.labels()[best], best_d2.sqrt())
}

pub fn min_distance(cb: &Codebook) -> f64 {
    let pts = cb.points();
    let mut d = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.min(pts[i].distance(&pts[j]));
        }
    }
    d
}

pub fn avg_power(cb: &Codebook) -> f64 {
    cb.points().iter().map(SymbolVec4::norm_sqr).sum::<f64>() / cb.len() as f64
}

/// Asymptotic (low-BER) OSNR advantage of `a` over `b` in dB, from the
/// power-normalized squared minimum distances.
pub fn asymptotic_gain_db(a: &Codebook, b: &Codebook) -> Result<f64> {
    let fom = |cb: &Codebook| -> Result<f64> {
        let d = min_distance(cb);
        let p = avg_power(cb);
        if d <= 0.0 || p <= 0.0 {
            return Err(Error::Domain(format!(
                "codebook `{}` has D_min={d}, P_avg={p}",
                cb.name()
            )));
        }
        Ok(d * d / p)
    };
    Ok(linear_to_db(fom(a)? / fom(b)?))
}

/// Standard deviation of white Gaussian noise per real dimension.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NoiseSigma(f64);

impl NoiseSigma {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::Domain(format!("noise sigma must be finite and ≥ 0, got {sigma}")));
        }
        Ok(Self(sigma))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn hamming(a: u32, b: u32) -> u32 {
    (a ^ b).count_ones()
}

/// Pairwise union bound on the bit error ratio with Hamming weighting.
pub fn union_bound_ber(cb: &Codebook, sigma: NoiseSigma) -> Result<f64> {
    let s = sigma.value();
    if s <= 0.0 {
        return Err(Error::Domain("union bound needs sigma > 0".into()));
    }
    let pts = cb.points();
    let labels = cb.labels();
    let mut acc = 0.0;
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i != j {
                let d = pts[i].distance(&pts[j]);
                acc += f64::from(hamming(labels[i], labels[j])) * q_function(d / (2.0 * s));
            }
        }
    }
    Ok(acc / (cb.len() * cb.bits_per_symbol()) as f64)
}

/// Result of a symbol-level Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McBer {
    pub ber: f64,
    pub errors: u64,
    pub bits: u64,
}

/// Monte-Carlo BER of ML detection with Gaussian noise on all four dimensions.
pub fn mc_ber_awgn(cb: &Codebook, sigma: NoiseSigma, n_symbols: usize, seed: u64) -> Result<McBer> {
    if n_symbols == 0 {
        return Err(Error::Parameter("n_symbols must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma.value()).map_err(|e| Error::Domain(e.to_string()))?;
    let n_labels = cb.len() as u32;
    let mut errors = 0u64;
    for _ in 0..n_symbols {
        let label = rng.random_range(0..n_labels);
        let p = cb.point_for_label(label);
        let r = SymbolVec4::new(
            p.ix + normal.sample(&mut rng),
            p.qx + normal.sample(&mut rng),
            p.iy + normal.sample(&mut rng),
            p.qy + normal.sample(&mut rng),
        );
        let (decided, _) = demap_ml(cb, &r);
        errors += u64::from(hamming(label, decided));
    }
    let bits = (n_symbols * cb.bits_per_symbol()) as u64;
    Ok(McBer {
        ber: errors as f64 / bits as f64,
        errors,
        bits,
    })
}

/// Per-dimension noise sigma at one sample per symbol for a target OSNR.
///
/// OSNR is total dual-polarization signal power over the ASE power (both
/// polarizations, both quadratures) in [`OSNR_REF_BANDWIDTH`], so
/// `σ² = P_avg · R_s / (4 · OSNR · B_ref)`.
pub fn osnr_to_sigma(osnr_db: f64, symbol_rate: f64, cb: &Codebook) -> Result<NoiseSigma> {
    if !(symbol_rate > 0.0) {
        return Err(Error::Parameter(format!("symbol rate must be > 0, got {symbol_rate}")));
    }
    let osnr = db_to_linear(osnr_db);
    let var = avg_power(cb) * symbol_rate / (4.0 * osnr * OSNR_REF_BANDWIDTH);
    NoiseSigma::new(var.sqrt())
}

/// Inverse of [`osnr_to_sigma`].
pub fn sigma_to_osnr_db(sigma: NoiseSigma, symbol_rate: f64, cb: &Codebook) -> f64 {
    let s2 = sigma.value() * sigma.value();
    linear_to_db(avg_power(cb) * symbol_rate / (4.0 * s2 * OSNR_REF_BANDWIDTH))
}
