//! Sampled dual-polarization field and the four-lane float dump format.
//!
//! Dumps are a raw file of interleaved little-endian `f64` quadruples plus a
//! small `key = value` sidecar carrying the rates:
//!
//! ```text
//! <stem>.f64le   ix qx iy qy ix qx iy qy ...
//! <stem>.toml    schema_version, layout, samples, sample_rate, symbol_rate
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_WAVELENGTH: f64 = 1550e-9;
pub const DUMP_SCHEMA_VERSION: u32 = 1;

/// Complex baseband field envelope of both polarizations, in √W.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolWaveform {
    pub ex: Vec<Complex64>,
    pub ey: Vec<Complex64>,
    pub sample_rate: f64,
    pub center_wavelength: f64,
}

impl DualPolWaveform {
    pub fn new(ex: Vec<Complex64>, ey: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if ex.len() != ey.len() {
            return Err(Error::InputShape(format!(
                "polarization lengths differ: {} vs {}",
                ex.len(),
                ey.len()
            )));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::Parameter(format!("sample rate must be > 0, got {sample_rate}")));
        }
        Ok(Self {
            ex,
            ey,
            sample_rate,
            center_wavelength: DEFAULT_WAVELENGTH,
        })
    }

    pub fn len(&self) -> usize {
        self.ex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ex.is_empty()
    }

    /// Mean of `|ex|² + |ey|²` (W).
    pub fn mean_power(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let s: f64 = self
            .ex
            .iter()
            .zip(&self.ey)
            .map(|(x, y)| x.norm_sqr() + y.norm_sqr())
            .sum();
        s / self.len() as f64
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.ex.iter_mut().chain(self.ey.iter_mut()) {
            *v *= factor;
        }
    }

    /// Copy with the same metadata and new samples.
    pub fn with_samples(&self, ex: Vec<Complex64>, ey: Vec<Complex64>) -> Self {
        debug_assert_eq!(ex.len(), ey.len());
        Self {
            ex,
            ey,
            sample_rate: self.sample_rate,
            center_wavelength: self.center_wavelength,
        }
    }

    pub fn same_shape(&self, other: &DualPolWaveform) -> Result<()> {
        if self.len() != other.len() || self.sample_rate != other.sample_rate {
            return Err(Error::InputShape(format!(
                "waveforms differ: {} samples @ {} Hz vs {} samples @ {} Hz",
                self.len(),
                self.sample_rate,
                other.len(),
                other.sample_rate
            )));
        }
        Ok(())
    }

    /// Relative RMS distance to `reference` over both polarizations.
    pub fn relative_rms_to(&self, reference: &DualPolWaveform) -> f64 {
        let num: f64 = self
            .ex
            .iter()
            .zip(&reference.ex)
            .chain(self.ey.iter().zip(&reference.ey))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = reference
            .ex
            .iter()
            .chain(&reference.ey)
            .map(|v| v.norm_sqr())
            .sum();
        (num / den).sqrt()
    }

    pub fn to_dump(&self, symbol_rate: f64) -> LaneDump {
        LaneDump {
            lanes: [
                self.ex.iter().map(|v| v.re).collect(),
                self.ex.iter().map(|v| v.im).collect(),
                self.ey.iter().map(|v| v.re).collect(),
                self.ey.iter().map(|v| v.im).collect(),
            ],
            sample_rate: self.sample_rate,
            symbol_rate,
        }
    }
}

/// Four real lanes with rate metadata, as written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneDump {
    pub lanes: [Vec<f64>; 4],
    pub sample_rate: f64,
    pub symbol_rate: f64,
}

impl LaneDump {
    /// Dump of complex symbol sequences at one sample per symbol.
    pub fn from_symbols(x: &[Complex64], y: &[Complex64], symbol_rate: f64) -> Self {
        LaneDump {
            lanes: [
                x.iter().map(|v| v.re).collect(),
                x.iter().map(|v| v.im).collect(),
                y.iter().map(|v| v.re).collect(),
                y.iter().map(|v| v.im).collect(),
            ],
            sample_rate: symbol_rate,
            symbol_rate,
        }
    }

    fn paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
        (dir.join(format!("{stem}.f64le")), dir.join(format!("{stem}.toml")))
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let n = self.lanes[0].len();
        if self.lanes.iter().any(|l| l.len() != n) {
            return Err(Error::InputShape("dump lanes differ in length".into()));
        }
        let (data, meta) = Self::paths(dir, stem);
        let mut bytes = Vec::with_capacity(n * 32);
        for i in 0..n {
            for lane in &self.lanes {
                bytes.extend_from_slice(&lane[i].to_le_bytes());
            }
        }
        fs::write(&data, bytes)?;
        let mut f = fs::File::create(meta)?;
        writeln!(f, "schema_version = {DUMP_SCHEMA_VERSION}")?;
        writeln!(f, "layout = \"ix,qx,iy,qy\"")?;
        writeln!(f, "samples = {n}")?;
        writeln!(f, "sample_rate = {:?}", self.sample_rate)?;
        writeln!(f, "symbol_rate = {:?}", self.symbol_rate)?;
        Ok(())
    }

    pub fn read(dir: &Path, stem: &str) -> Result<Self> {
        let (data, meta) = Self::paths(dir, stem);
        let text = fs::read_to_string(meta)?;
        let field = |key: &str| -> Result<f64> {
            text.lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .and_then(|(_, v)| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::InputShape(format!("sidecar lacks numeric `{key}`")))
        };
        let samples = field("samples")? as usize;
        let sample_rate = field("sample_rate")?;
        let symbol_rate = field("symbol_rate")?;
        let bytes = fs::read(data)?;
        if bytes.len() != samples * 32 {
            return Err(Error::InputShape(format!(
                "dump holds {} bytes, sidecar announces {samples} samples",
                bytes.len()
            )));
        }
        let mut lanes: [Vec<f64>; 4] = Default::default();
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            lanes[i % 4].push(v);
        }
        Ok(Self {
            lanes,
            sample_rate,
            symbol_rate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ex: Vec<Complex64> = (0..10).map(|k| Complex64::new(k as f64, 0.1 / (k as f64 + 1.0))).collect();
        let ey: Vec<Complex64> = (0..10).map(|k| Complex64::new(-(k as f64), 1e-300)).collect();
        let w = DualPolWaveform::new(ex, ey, 64e9).unwrap();
        let d = w.to_dump(16e9);
        d.write(dir.path(), "tx").unwrap();
        let back = LaneDump::read(dir.path(), "tx").unwrap();
        assert_eq!(back, d);
        let raw = fs::read(dir.path().join("tx.f64le")).unwrap();
        assert_eq!(raw.len(), 10 * 32);
        // second sample, qx lane
        assert_eq!(f64::from_le_bytes(raw[40..48].try_into().unwrap()), 0.05);
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let e = DualPolWaveform::new(vec![Complex64::default(); 3], vec![Complex64::default(); 2], 1.0);
        assert!(matches!(e, Err(Error::InputShape(_))));
    }
}
