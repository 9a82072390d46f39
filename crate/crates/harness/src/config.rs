//! Scenario files.
//!
//! One scenario per TOML file. Top-level keys describe the sweep; nested
//! tables carry the transmitter, impairments, fiber, receiver and link
//! settings. See `configs/` for complete examples.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use simplexlink_core::channel::{FiberSpec, ImpairmentConfig};
use simplexlink_core::constellation::Format;
use simplexlink_core::metrics::FitDomain;
use simplexlink_core::rxdsp::{default_mode, ClockConfig, EqualizerConfig, RxChainConfig};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    BackToBack,
    LaunchPowerSweep,
    SpanLossSweep,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::BackToBack => "back_to_back",
            ScenarioKind::LaunchPowerSweep => "launch_power_sweep",
            ScenarioKind::SpanLossSweep => "span_loss_sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    #[default]
    Blind,
    /// Genie-timed matched filter with known-symbol gain (AWGN reference).
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transmitter {
    #[serde(default = "default_sps")]
    pub samples_per_symbol: usize,
    /// DAC 3-dB bandwidth, Hz; omitted means an ideal NRZ drive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dac_bandwidth: Option<f64>,
}

fn default_sps() -> usize {
    4
}

impl Default for Transmitter {
    fn default() -> Self {
        Self {
            samples_per_symbol: default_sps(),
            dac_bandwidth: Some(13e9),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DspSettings {
    #[serde(default)]
    pub receiver: ReceiverKind,
    #[serde(default = "yes")]
    pub cd_compensation: bool,
    #[serde(default = "yes")]
    pub clock_recovery: bool,
    #[serde(default)]
    pub clock: ClockConfig,
    #[serde(default = "yes")]
    pub polarization_prealign: bool,
    #[serde(default = "yes")]
    pub freq_offset_estimation: bool,
    #[serde(default = "default_taps")]
    pub num_taps: usize,
    #[serde(default = "default_step")]
    pub step_size: f64,
    /// Gear-shifted equalizer step for the first `acquisition_symbols`;
    /// omitted keeps the per-format default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquisition_step_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquisition_symbols: Option<usize>,
    #[serde(default = "default_convergence")]
    pub convergence_symbols: usize,
    #[serde(default = "default_kappa")]
    pub bpsk_kappa: f64,
    #[serde(default = "default_cpe_window")]
    pub cpe_window: usize,
    #[serde(default)]
    pub fit_domain: FitDomain,
}

fn yes() -> bool {
    true
}
fn default_taps() -> usize {
    13
}
fn default_step() -> f64 {
    1e-3
}
fn default_convergence() -> usize {
    2048
}
fn default_kappa() -> f64 {
    0.5
}
fn default_cpe_window() -> usize {
    129
}

impl Default for DspSettings {
    fn default() -> Self {
        toml::from_str("").expect("all fields defaulted")
    }
}

impl DspSettings {
    pub fn chain_config(&self, format: Format, dispersion_total: f64) -> RxChainConfig {
        let mut eq = EqualizerConfig::for_mode(default_mode(format));
        eq.num_taps = self.num_taps;
        eq.step_size = self.step_size;
        eq.convergence_symbols = self.convergence_symbols;
        eq.bpsk_kappa = self.bpsk_kappa;
        if let Some(a) = self.acquisition_step_size {
            eq.acquisition_step_size = Some(a);
        }
        if let Some(n) = self.acquisition_symbols {
            eq.acquisition_symbols = n;
        }
        RxChainConfig {
            dispersion_total: if self.cd_compensation { dispersion_total } else { 0.0 },
            clock_recovery: self.clock_recovery,
            clock: self.clock,
            polarization_prealign: self.polarization_prealign,
            freq_offset_estimation: self.freq_offset_estimation,
            equalizer: eq,
            cpe_window: self.cpe_window,
        }
    }
}

/// Maps sweep points to launch power and received OSNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkModel {
    /// Launch power for back-to-back runs and the span-loss default, dBm.
    #[serde(default)]
    pub launch_power_dbm: f64,
    /// Per-format launch power for span-loss sweeps, dBm.
    #[serde(default)]
    pub launch_power_per_format: BTreeMap<Format, f64>,
    /// Post-span OSNR at `reference_launch_dbm` (launch-power sweeps);
    /// it tracks launch power dB for dB.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osnr_at_reference: Option<f64>,
    #[serde(default = "default_reference_launch")]
    pub reference_launch_dbm: f64,
    /// Post-span OSNR at zero added loss (span-loss sweeps).
    #[serde(default = "default_baseline")]
    pub baseline_osnr: BTreeMap<Format, f64>,
}

fn default_reference_launch() -> f64 {
    17.0
}

fn default_baseline() -> BTreeMap<Format, f64> {
    BTreeMap::from([(Format::DpBpsk, 13.9), (Format::Simplex3d, 12.9)])
}

impl Default for LinkModel {
    fn default() -> Self {
        toml::from_str("").expect("all fields defaulted")
    }
}

impl LinkModel {
    pub fn span_launch_power(&self, format: Format) -> f64 {
        self.launch_power_per_format.get(&format).copied().unwrap_or(self.launch_power_dbm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub kind: ScenarioKind,
    pub formats: Vec<Format>,
    pub symbol_rate: f64,
    pub sweep_values: Vec<f64>,
    /// Replaces `sweep_values` for the named formats.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sweep_values_per_format: BTreeMap<Format, Vec<f64>>,
    #[serde(default = "default_frames")]
    pub frames_per_point: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub transmitter: Transmitter,
    #[serde(default)]
    pub impairments: ImpairmentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber: Option<FiberSpec>,
    #[serde(default)]
    pub dsp: DspSettings,
    #[serde(default)]
    pub link: LinkModel,
}

fn default_frames() -> usize {
    8
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid scenario: {e}"))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn sweep_for(&self, format: Format) -> &[f64] {
        self.sweep_values_per_format.get(&format).map_or(&self.sweep_values, |v| v.as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            bail!("schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})", self.schema_version);
        }
        if self.formats.is_empty() {
            bail!("formats: at least one format is required");
        }
        if !(self.symbol_rate > 0.0) {
            bail!("symbol_rate: must be > 0");
        }
        if self.frames_per_point == 0 {
            bail!("frames_per_point: must be ≥ 1");
        }
        for &f in &self.formats {
            let v = self.sweep_for(f);
            if v.is_empty() {
                bail!("sweep_values: empty for {f}");
            }
            let up = v.windows(2).all(|w| w[1] > w[0]);
            let down = v.windows(2).all(|w| w[1] < w[0]);
            if !(up || down) || v.iter().any(|x| !x.is_finite()) {
                bail!("sweep_values: must be finite and strictly monotone for {f}");
            }
        }
        if self.transmitter.samples_per_symbol < 2 {
            bail!("transmitter.samples_per_symbol: must be ≥ 2");
        }
        self.impairments.validate().context("impairments")?;
        match (self.kind, &self.fiber) {
            (ScenarioKind::BackToBack, Some(_)) => bail!("fiber: back_to_back scenarios take no fiber"),
            (ScenarioKind::LaunchPowerSweep | ScenarioKind::SpanLossSweep, None) => {
                bail!("fiber: required for {}", self.kind.name())
            }
            (_, Some(f)) => f.validate().context("fiber")?,
            _ => {}
        }
        if self.kind == ScenarioKind::LaunchPowerSweep && self.link.osnr_at_reference.is_none() {
            bail!("link.osnr_at_reference: required for launch_power_sweep");
        }
        if self.kind == ScenarioKind::SpanLossSweep {
            for f in &self.formats {
                if !self.link.baseline_osnr.contains_key(f) {
                    bail!("link.baseline_osnr: missing entry for {f}");
                }
            }
        }
        if self.dsp.receiver == ReceiverKind::Ideal && self.impairments.jones != Default::default() {
            bail!("dsp.receiver = \"ideal\" cannot undo polarization rotation; set impairments.jones = \"off\"");
        }
        for &f in &self.formats {
            self.dsp.chain_config(f, 0.0).equalizer.validate().context("dsp")?;
        }
        let w = self.dsp.cpe_window;
        if w < 5 || w % 2 == 0 {
            bail!("dsp.cpe_window: must be odd and ≥ 5");
        }
        Ok(())
    }
}

