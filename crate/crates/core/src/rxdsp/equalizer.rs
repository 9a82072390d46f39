//! T/2-spaced 2×2 butterfly FIR with blind error criteria.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DIVERGENCE_LIMIT: f64 = 1e3;
const SINGULARITY_CORRELATION: f64 = 0.9;
/// Output cross-correlation over one check interval that also counts as a
/// collapse onto one source. Independent tributaries give about 1/√256.
const SINGULARITY_OUTPUT_CORRELATION: f64 = 0.3;
const SINGULARITY_CHECK_EVERY: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EqualizerMode {
    CmaQpsk,
    BpskDD,
    SimplexCombined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualizerConfig {
    pub num_taps: usize,
    pub step_size: f64,
    pub mode: EqualizerMode,
    /// Target modulus of CMA outputs.
    pub cma_radius_sq: f64,
    pub convergence_symbols: usize,
    /// Weight of the two-symbol collinearity term.
    #[serde(default = "default_kappa")]
    pub bpsk_kappa: f64,
    /// Larger step used for the first `acquisition_symbols` symbols.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquisition_step_size: Option<f64>,
    #[serde(default)]
    pub acquisition_symbols: usize,
}

fn default_kappa() -> f64 {
    0.5
}

impl EqualizerConfig {
    pub fn for_mode(mode: EqualizerMode) -> Self {
        Self {
            num_taps: 13,
            step_size: 1e-3,
            mode,
            cma_radius_sq: match mode {
                EqualizerMode::BpskDD => 1.0,
                _ => 2.0,
            },
            convergence_symbols: 2048,
            bpsk_kappa: default_kappa(),
            acquisition_step_size: match mode {
                EqualizerMode::BpskDD => Some(3e-3),
                _ => None,
            },
            acquisition_symbols: match mode {
                EqualizerMode::BpskDD => 2048,
                _ => 0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_taps == 0 || self.num_taps % 2 == 0 {
            return Err(Error::Parameter(format!("num_taps must be odd and ≥ 1, got {}", self.num_taps)));
        }
        if !(self.step_size > 0.0 && self.step_size <= 0.1) {
            return Err(Error::Parameter(format!("step_size must be in (0, 0.1], got {}", self.step_size)));
        }
        if let Some(a) = self.acquisition_step_size {
            if !(a > 0.0 && a <= 0.1) {
                return Err(Error::Parameter(format!("acquisition_step_size must be in (0, 0.1], got {a}")));
            }
        }
        if self.acquisition_symbols > self.convergence_symbols {
            return Err(Error::Parameter(format!(
                "acquisition_symbols ({}) must not exceed convergence_symbols ({})",
                self.acquisition_symbols, self.convergence_symbols
            )));
        }
        if !(self.cma_radius_sq > 0.0) {
            return Err(Error::Parameter(format!("cma_radius_sq must be > 0, got {}", self.cma_radius_sq)));
        }
        Ok(())
    }

    /// Expected output powers `(x, y)` in the target constellation scale.
    fn output_powers(&self) -> (f64, f64) {
        match self.mode {
            EqualizerMode::CmaQpsk => (self.cma_radius_sq, self.cma_radius_sq),
            EqualizerMode::BpskDD => (1.0, 1.0),
            EqualizerMode::SimplexCombined => (self.cma_radius_sq, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualizerState {
    pub hxx: Vec<Complex64>,
    pub hxy: Vec<Complex64>,
    pub hyx: Vec<Complex64>,
    pub hyy: Vec<Complex64>,
    pub symbols_processed: usize,
    /// Times the y row was re-seeded after collapsing onto the x source.
    pub reinitializations: usize,
}

impl EqualizerState {
    pub fn center_spike(num_taps: usize) -> Self {
        let mut hxx = vec![Complex64::default(); num_taps];
        let mut hyy = hxx.clone();
        hxx[num_taps / 2] = Complex64::new(1.0, 0.0);
        hyy[num_taps / 2] = Complex64::new(1.0, 0.0);
        Self {
            hxy: vec![Complex64::default(); num_taps],
            hyx: vec![Complex64::default(); num_taps],
            hxx,
            hyy,
            symbols_processed: 0,
            reinitializations: 0,
        }
    }

    fn finite_and_bounded(&self) -> bool {
        self.hxx
            .iter()
            .chain(&self.hxy)
            .chain(&self.hyx)
            .chain(&self.hyy)
            .all(|t| t.is_finite() && t.norm() <= DIVERGENCE_LIMIT)
    }

    /// Normalized inner product of the concatenated x and y filter rows.
    pub fn row_correlation(&self) -> f64 {
        let dot: Complex64 = self
            .hxx
            .iter()
            .zip(&self.hyx)
            .chain(self.hxy.iter().zip(&self.hyy))
            .map(|(a, b)| a * b.conj())
            .sum();
        let nx: f64 = self.hxx.iter().chain(&self.hxy).map(|v| v.norm_sqr()).sum();
        let ny: f64 = self.hyx.iter().chain(&self.hyy).map(|v| v.norm_sqr()).sum();
        if nx == 0.0 || ny == 0.0 {
            return 0.0;
        }
        dot.norm() / (nx * ny).sqrt()
    }

    /// Re-seeds the y row as the time-reversed conjugate orthogonal
    /// complement of the x row.
    fn reinit_y_row(&mut self) {
        let n = self.hxx.len();
        for i in 0..n {
            self.hyx[i] = -self.hxy[n - 1 - i].conj();
            self.hyy[i] = self.hxx[n - 1 - i].conj();
        }
        self.reinitializations += 1;
    }
}

/// Blind error for an output against the squared-modulus target `r2`.
pub fn cma_error(out: Complex64, r2: f64) -> Complex64 {
    out * (r2 - out.norm_sqr())
}

/// Modulus term plus a penalty on the non-collinearity of two consecutive
/// outputs, which vanishes for antipodal points on any line.
pub fn bpsk_error(out: Complex64, prev: Complex64, kappa: f64) -> Complex64 {
    let z = out * prev.conj();
    cma_error(out, 1.0) - Complex64::new(0.0, kappa * z.im) * prev
}

/// Output symbols of both rows plus the final taps.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerOutput {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub state: EqualizerState,
}

pub fn butterfly_equalize(ux: &[Complex64], uy: &[Complex64], cfg: &EqualizerConfig) -> Result<EqualizerOutput> {
    equalize_from(ux, uy, cfg, EqualizerState::center_spike(cfg.num_taps))
}

/// Runs the butterfly over 2-sps input starting from `state`.
pub fn equalize_from(
    ux: &[Complex64],
    uy: &[Complex64],
    cfg: &EqualizerConfig,
    mut state: EqualizerState,
) -> Result<EqualizerOutput> {
    cfg.validate()?;
    if ux.len() != uy.len() {
        return Err(Error::InputShape(format!("input lengths differ: {} vs {}", ux.len(), uy.len())));
    }
    if state.hxx.len() != cfg.num_taps
        || state.hxy.len() != cfg.num_taps
        || state.hyx.len() != cfg.num_taps
        || state.hyy.len() != cfg.num_taps
    {
        return Err(Error::InputShape("equalizer state taps do not match num_taps".into()));
    }
    let n_sym = ux.len() / 2;
    if n_sym < cfg.convergence_symbols.max(1) {
        return Err(Error::InputShape(format!(
            "{n_sym} symbols is shorter than the {} convergence symbols",
            cfg.convergence_symbols
        )));
    }
    let (px, py) = cfg.output_powers();
    let p_in: f64 = ux.iter().chain(uy).map(|v| v.norm_sqr()).sum::<f64>() / ux.len() as f64;
    if !(p_in > 0.0) {
        return Err(Error::Domain("equalizer input carries no power".into()));
    }
    let g = ((px + py) / p_in).sqrt();
    let ux: Vec<Complex64> = ux.iter().map(|v| v * g).collect();
    let uy: Vec<Complex64> = uy.iter().map(|v| v * g).collect();

    let nt = cfg.num_taps;
    let half = (nt / 2) as isize;
    let len = ux.len() as isize;
    let mu_acq = cfg.acquisition_step_size.unwrap_or(cfg.step_size);
    let mut wx = vec![Complex64::default(); nt];
    let mut wy = vec![Complex64::default(); nt];
    let mut out_x = Vec::with_capacity(n_sym);
    let mut out_y = Vec::with_capacity(n_sym);
    let (mut prev_x, mut prev_y) = (Complex64::default(), Complex64::default());
    let (mut sxy, mut sxx, mut syy) = (Complex64::default(), 0.0, 0.0);
    for k in 0..n_sym {
        let c = 2 * k as isize;
        for j in 0..nt {
            let idx = (c + j as isize - half).rem_euclid(len) as usize;
            wx[j] = ux[idx];
            wy[j] = uy[idx];
        }
        let dot = |h: &[Complex64], w: &[Complex64]| -> Complex64 { h.iter().zip(w).map(|(a, b)| a * b).sum() };
        let x = dot(&state.hxx, &wx) + dot(&state.hxy, &wy);
        let y = dot(&state.hyx, &wx) + dot(&state.hyy, &wy);
        let (ex, ey) = match cfg.mode {
            EqualizerMode::CmaQpsk => (cma_error(x, cfg.cma_radius_sq), cma_error(y, cfg.cma_radius_sq)),
            EqualizerMode::BpskDD => (bpsk_error(x, prev_x, cfg.bpsk_kappa), bpsk_error(y, prev_y, cfg.bpsk_kappa)),
            EqualizerMode::SimplexCombined => (cma_error(x, cfg.cma_radius_sq), bpsk_error(y, prev_y, cfg.bpsk_kappa)),
        };
        let mu = if k < cfg.acquisition_symbols { mu_acq } else { cfg.step_size };
        let (ex, ey) = (ex * mu, ey * mu);
        for j in 0..nt {
            let (cx, cy) = (wx[j].conj(), wy[j].conj());
            state.hxx[j] += ex * cx;
            state.hxy[j] += ex * cy;
            state.hyx[j] += ey * cx;
            state.hyy[j] += ey * cy;
        }
        state.symbols_processed += 1;
        if !state.finite_and_bounded() {
            return Err(Error::Divergence {
                symbols_processed: state.symbols_processed,
            });
        }
        sxy += x * y.conj();
        sxx += x.norm_sqr();
        syy += y.norm_sqr();
        if k % SINGULARITY_CHECK_EVERY == SINGULARITY_CHECK_EVERY - 1 {
            let out_corr = sxy.norm() / (sxx * syy).sqrt().max(f64::MIN_POSITIVE);
            if state.row_correlation() > SINGULARITY_CORRELATION || out_corr > SINGULARITY_OUTPUT_CORRELATION {
                state.reinit_y_row();
            }
            (sxy, sxx, syy) = (Complex64::default(), 0.0, 0.0);
        }
        prev_x = x;
        prev_y = y;
        out_x.push(x);
        out_y.push(y);
    }
    Ok(EqualizerOutput {
        x: out_x,
        y: out_y,
        state,
    })
}
