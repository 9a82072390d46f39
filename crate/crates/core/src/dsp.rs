//! Small numeric helpers shared by the channel and receiver modules.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};


thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// In-place forward FFT (unnormalized).
pub fn fft_in_place(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), false).process(buf);
    }
}

/// In-place inverse FFT, normalized by `1/N` so that `ifft(fft(x)) == x`.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), true).process(buf);
    }
    let scale = 1.0 / buf.len().max(1) as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Signed frequency of FFT bin `k` for a length-`n` transform at `sample_rate`.
pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    let k = k as f64;
    let n_f = n as f64;
    if k < n_f / 2.0 {
        k * sample_rate / n_f
    } else {
        (k - n_f) * sample_rate / n_f
    }
}

/// Circular filtering by a frequency response given as a function of Hz.
pub fn filter_freq<F>(samples: &[Complex64], sample_rate: f64, response: F) -> Vec<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let n = samples.len();
    let mut buf = samples.to_vec();
    fft_in_place(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= response(bin_frequency(k, n, sample_rate));
    }
    ifft_in_place(&mut buf);
    buf
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Relative RMS difference `‖a − b‖ / ‖b‖`.
pub fn relative_rms(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        return num.sqrt();
    }
    (num / den).sqrt()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Optical power in watts for a level in dBm.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}
