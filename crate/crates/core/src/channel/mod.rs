//! Link impairments applied to a [`DualPolWaveform`](crate::waveform::DualPolWaveform).

mod linear;
mod noise;
mod ssfm;

use serde::{Deserialize, Serialize};

pub use linear::{
    apply_cd, apply_freq_offset, apply_jones_matrix, apply_jones_rotation, bpf_response,
    jones_matrix, optical_bpf, JonesAngles, JonesMatrix, SPEED_OF_LIGHT,
};
pub use noise::{apply_phase_noise, load_awgn_to_osnr, measure_osnr};
pub use ssfm::{ssfm_span, ssfm_span_with_stats, SsfmStats};

/// Single-span fiber description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub length_km: f64,
    /// dB/km
    pub attenuation: f64,
    /// ps/(nm·km)
    pub dispersion: f64,
    /// 1/(W·km)
    pub gamma: f64,
    /// Total distributed counter-pumped gain over `raman_length_km`, dB.
    #[serde(default)]
    pub raman_gain_db: f64,
    #[serde(default = "default_raman_length")]
    pub raman_length_km: f64,
    /// Pump attenuation setting the exponential gain profile, dB/km.
    #[serde(default = "default_pump_attenuation")]
    pub pump_attenuation: f64,
    /// Upper bound on the step density; the nonlinear-phase rule may take
    /// shorter steps.
    pub steps_per_km: f64,
    #[serde(default = "default_nl_phase")]
    pub max_nl_phase: f64,
    /// Lumped variable attenuator inside the span.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuator: Option<LumpedLoss>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LumpedLoss {
    pub position_km: f64,
    pub loss_db: f64,
}

fn default_raman_length() -> f64 {
    80.0
}

fn default_pump_attenuation() -> f64 {
    0.25
}

fn default_nl_phase() -> f64 {
    0.005
}

impl FiberSpec {
    /// 300 km of standard single-mode fiber with 63 dB total loss.
    pub fn ssmf_300km() -> Self {
        Self {
            length_km: 300.0,
            attenuation: 0.21,
            dispersion: 16.5,
            gamma: 1.3,
            raman_gain_db: 20.0,
            raman_length_km: default_raman_length(),
            pump_attenuation: default_pump_attenuation(),
            steps_per_km: 1.0,
            max_nl_phase: default_nl_phase(),
            attenuator: None,
        }
    }

    /// Accumulated dispersion `D·L` in ps/nm.
    pub fn total_dispersion(&self) -> f64 {
        self.dispersion * self.length_km
    }

    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if !(self.length_km > 0.0) {
            return Err(Error::Parameter(format!("fiber length must be > 0, got {}", self.length_km)));
        }
        if !(self.attenuation >= 0.0) {
            return Err(Error::Parameter(format!("attenuation must be ≥ 0, got {}", self.attenuation)));
        }
        if !(self.steps_per_km > 0.0) {
            return Err(Error::Parameter(format!("steps_per_km must be > 0, got {}", self.steps_per_km)));
        }
        if !(self.max_nl_phase > 0.0 && self.max_nl_phase <= 0.05) {
            return Err(Error::Parameter(format!(
                "max_nl_phase must be in (0, 0.05] rad, got {}",
                self.max_nl_phase
            )));
        }
        if self.raman_gain_db != 0.0 && !(self.raman_length_km > 0.0 && self.raman_length_km <= self.length_km) {
            return Err(Error::Parameter(format!(
                "Raman length must be in (0, L], got {}",
                self.raman_length_km
            )));
        }
        if let Some(a) = self.attenuator {
            if !(a.position_km > 0.0 && a.position_km < self.length_km) || a.loss_db < 0.0 {
                return Err(Error::Parameter(format!("bad attenuator {a:?}")));
            }
        }
        Ok(())
    }
}

/// Polarization mixing applied by the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JonesSetting {
    Fixed(JonesAngles),
    Mode(JonesMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JonesMode {
    Off,
    /// Haar-distributed rotation drawn per frame from the frame seed.
    Random,
}

impl Default for JonesSetting {
    fn default() -> Self {
        JonesSetting::Mode(JonesMode::Off)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpairmentConfig {
    /// `None` disables noise loading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osnr_db: Option<f64>,
    #[serde(default)]
    pub jones: JonesSetting,
    /// Sum of transmitter and LO linewidths, Hz.
    #[serde(default)]
    pub linewidth_total: f64,
    #[serde(default)]
    pub freq_offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bpf_bandwidth: Option<f64>,
}

impl Default for ImpairmentConfig {
    fn default() -> Self {
        Self {
            osnr_db: None,
            jones: JonesSetting::default(),
            linewidth_total: 0.0,
            freq_offset: 0.0,
            bpf_bandwidth: None,
        }
    }
}

impl ImpairmentConfig {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if !(self.linewidth_total >= 0.0) {
            return Err(Error::Parameter(format!(
                "linewidth must be ≥ 0, got {}",
                self.linewidth_total
            )));
        }
        if let Some(b) = self.bpf_bandwidth {
            if !(b > 0.0) {
                return Err(Error::Parameter(format!("filter bandwidth must be > 0, got {b}")));
            }
        }
        Ok(())
    }
}
