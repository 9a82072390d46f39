use statrs::distribution::{ContinuousCDF, Normal};

use simplexlink_core::constellation::{
    dpbpsk_codebook, mc_ber_awgn, sigma_to_osnr_db, simplex_codebook, Codebook, NoiseSigma,
};

const SYMBOLS: usize = 2_000_000;

/// Sigma at which the Monte-Carlo BER crosses `target`. A fixed seed keeps
/// the noise draw common across sigmas, so the BER is monotone in sigma.
fn sigma_at(cb: &Codebook, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.05f64, 2.0f64);
    for _ in 0..30 {
        let mid = (lo * hi).sqrt();
        let ber = mc_ber_awgn(cb, NoiseSigma::new(mid).unwrap(), SYMBOLS, 11).unwrap().ber;
        if ber > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo * hi).sqrt()
}

#[test]
fn gain_at_fixed_ber_stays_below_asymptote_and_shrinks_toward_high_ber() {
    let (s, b) = (simplex_codebook(), dpbpsk_codebook());
    let q_inv = |p: f64| -Normal::standard().inverse_cdf(p);
    let mut gains = Vec::new();
    for target in [1e-4, 1e-3, 1e-2] {
        let sb = sigma_at(&b, target);
        // DP-BPSK crosses where Q(1/σ) = target.
        let exact = 1.0 / q_inv(target);
        let ob = sigma_to_osnr_db(NoiseSigma::new(sb).unwrap(), 16e9, &b);
        let oe = sigma_to_osnr_db(NoiseSigma::new(exact).unwrap(), 16e9, &b);
        // Three binomial sigmas of the BER estimate, mapped to dB through the
        // local slope of ln Q(x) with x = 1/σ ∝ 10^(OSNR/20).
        let x = 1.0 / exact;
        let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let slope = phi / target * x * std::f64::consts::LN_10 / 20.0;
        let tol = 3.0 / (target * (2 * SYMBOLS) as f64).sqrt() / slope;
        assert!((ob - oe).abs() < tol, "dpbpsk at {target:e}: {ob:.3} vs {oe:.3} dB (tol {tol:.3})");
        let os = sigma_to_osnr_db(NoiseSigma::new(sigma_at(&s, target)).unwrap(), 16e9, &s);
        gains.push(ob - os);
    }
    assert!(gains.iter().all(|&g| g > 0.3 && g < 1.2494), "{gains:?}");
    assert!(gains[0] > gains[1] && gains[1] > gains[2], "{gains:?}");
}
