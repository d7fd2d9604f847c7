//! Modified Bessel function K₀ for positive real arguments.

use super::quad::{integrate, QuadTol};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// K₀(t) for t > 0 from K₀(t) = ∫₀^∞ exp(−t cosh u) du.
///
/// Arguments below 1e-3 use the ascending series instead. Returns +∞ at 0.
pub fn bessel_k0(t: f64) -> f64 {
    assert!(t >= 0.0, "K0 needs a nonnegative argument");
    if t == 0.0 {
        return f64::INFINITY;
    }
    if t < 1e-3 {
        return k0_series(t);
    }
    // exp(−t cosh u) < 1e-300 beyond this point
    let u_max = (700.0 / t).max(1.0).acosh() + 1.0;
    let tol = QuadTol {
        abs: 1e-16,
        rel: 1e-13,
        max_intervals: 2000,
    };
    match integrate(|u| (-t * u.cosh()).exp(), 0.0, u_max, &[], tol) {
        Ok((v, _)) => v,
        Err(_) => k0_series(t),
    }
}

fn k0_series(t: f64) -> f64 {
    let q = 0.25 * t * t;
    let lead = -((0.5 * t).ln() + EULER_GAMMA);
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = lead;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        let add = term * (lead + harmonic);
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k0_matches_reference_values() {
        // scipy.special.k0
        for (t, r) in [
            (2.0, 0.113_893_872_749_533_4),
            (1.0, 0.421_024_438_240_708_3),
            (0.1, 2.427_069_024_702_017),
        ] {
            assert!((bessel_k0(t) - r).abs() < 1e-12 * r, "K0({t}) = {}", bessel_k0(t));
        }
    }

    #[test]
    fn series_and_integral_agree_at_switch() {
        let t = 1e-3;
        let a = k0_series(t);
        let b = bessel_k0(t * 1.000_001);
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn large_argument_decays() {
        let t: f64 = 30.0;
        let asym = (std::f64::consts::PI / (2.0 * t)).sqrt() * (-t).exp() * (1.0 - 1.0 / (8.0 * t));
        assert!((bessel_k0(t) - asym).abs() < 1e-3 * asym);
    }
}
