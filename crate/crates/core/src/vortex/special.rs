//! Modified Bessel functions of the second kind, used for the exponential
//! tails of the profile and of the zero modes.

/// `K_ν(x)` for `x > 0` from `∫_0^∞ exp(-x cosh t) cosh(ν t) dt`.
///
/// The integrand is analytic and doubly-exponentially decaying, so the
/// trapezoidal rule converges geometrically in the step size.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k requires x > 0");
    // Scale out exp(-x) so large arguments do not underflow the sum.
    let step = 0.05;
    let mut sum = 0.5;
    let mut k = 1usize;
    loop {
        let t = k as f64 * step;
        let term = (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        k += 1;
        if k > 100_000 {
            break;
        }
    }
    sum * step * (-x).exp()
}

/// `K_1(x) / K_0(x)` without forming the exponentially small factors.
pub fn bessel_k1_over_k0(x: f64) -> f64 {
    let step = 0.05;
    let (mut s0, mut s1) = (0.5, 0.5);
    let mut k = 1usize;
    loop {
        let t = k as f64 * step;
        let w = (-x * (t.cosh() - 1.0)).exp();
        s0 += w;
        s1 += w * t.cosh();
        if w < 1e-18 * s0 {
            break;
        }
        k += 1;
        if k > 100_000 {
            break;
        }
    }
    s1 / s0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matches_tabulated_values() {
        // Abramowitz & Stegun table 9.8.
        assert_relative_eq!(bessel_k(0.0, 1.0), 0.421_024_438_240_708_3, max_relative = 1e-13);
        assert_relative_eq!(bessel_k(1.0, 1.0), 0.601_907_230_197_234_6, max_relative = 1e-13);
        assert_relative_eq!(bessel_k(0.0, 10.0), 1.778_006_231_616_917e-5, max_relative = 1e-12);
        assert_relative_eq!(bessel_k(1.0, 10.0), 1.864_877_345_382_558e-5, max_relative = 1e-12);
    }

    #[test]
    fn ratio_consistent_with_functions() {
        for &x in &[0.5, 2.0, 11.3, 40.0] {
            assert_relative_eq!(
                bessel_k1_over_k0(x),
                bessel_k(1.0, x) / bessel_k(0.0, x),
                max_relative = 1e-13
            );
        }
    }
}
