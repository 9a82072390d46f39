//! Closed-form reference curves.

use anyhow::{bail, Result};
use simplexlink_core::constellation::{osnr_to_sigma, union_bound_ber, Format};
use simplexlink_core::dsp::q_function;

/// Reference BER at one OSNR: the union bound for the simplex, and the exact
/// differentially decoded BPSK rate 2p(1 − p), p = Q(1/σ), for DP-BPSK.
pub fn theory_ber(format: Format, osnr_db: f64, symbol_rate: f64) -> Result<f64> {
    let cb = format.codebook();
    let sigma = osnr_to_sigma(osnr_db, symbol_rate, &cb)?;
    Ok(match format {
        Format::Simplex3d => union_bound_ber(&cb, sigma)?,
        Format::DpBpsk => {
            let p = q_function(1.0 / sigma.value());
            2.0 * p * (1.0 - p)
        }
    })
}

/// OSNR at which [`theory_ber`] equals `ber`, by bisection.
pub fn theory_osnr_for_ber(format: Format, ber: f64, symbol_rate: f64) -> Result<f64> {
    if !(ber > 0.0 && ber < 0.5) {
        bail!("target BER must lie in (0, 0.5), got {ber}");
    }
    let (mut lo, mut hi) = (-20.0f64, 40.0f64);
    if theory_ber(format, hi, symbol_rate)? > ber || theory_ber(format, lo, symbol_rate)? < ber {
        bail!("BER {ber} is outside the tabulated OSNR range");
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if theory_ber(format, mid, symbol_rate)? > ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Inclusive OSNR grid `a:b:step`.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("range must be a:b:step, got {spec:?}");
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| anyhow::anyhow!("range field {p:?}: {e}")))
        .collect::<Result<_>>()?;
    let (a, b, step) = (v[0], v[1], v[2]);
    if !(a.is_finite() && b.is_finite() && step.is_finite()) {
        bail!("range fields must be finite");
    }
    if a > b {
        bail!("range start {a} exceeds end {b}");
    }
    if !(step > 0.0) {
        bail!("range step must be > 0, got {step}");
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| a + k as f64 * step).collect())
}
