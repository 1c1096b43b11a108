//! Small gamma-function helpers shared by the fractional kernels.

use statrs::function::gamma::ln_gamma;

/// 1/Γ(x), returning exactly 0 at the poles x = 0, -1, -2, ... and for
/// arguments large enough that 1/Γ underflows.
pub(crate) fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 {
        if x == x.round() {
            return 0.0;
        }
        // Reflection: 1/Gamma(x) = Gamma(1-x) sin(pi x) / pi.
        let (ln_s, sign) = ln_sin_pi_abs(x);
        let ln_mag = ln_gamma(1.0 - x) + ln_s - std::f64::consts::PI.ln();
        if ln_mag > 700.0 {
            return sign * f64::INFINITY;
        }
        return sign * ln_mag.exp();
    }
    if x > 171.0 {
        return 0.0;
    }
    (-ln_gamma(x)).exp()
}

/// (ln|sin(pi x)|, sign of sin(pi x)) with the argument reduced to the
/// nearest integer so that accuracy is kept for large |x|.
pub(crate) fn ln_sin_pi_abs(x: f64) -> (f64, f64) {
    let r = x.round();
    let f = x - r;
    let s = (std::f64::consts::PI * f).sin();
    // sin(pi x) = (-1)^r sin(pi f)
    let parity = if (r as i64) % 2 == 0 { 1.0 } else { -1.0 };
    let signed = parity * s;
    (s.abs().ln(), signed.signum())
}
