//! Matrix coefficients of the form `(p + i q) · √2^k · s`, with `p, q, k`
//! integers and `s` a floating-point complex number.
//!
//! Constant factors (`i`, `2`, `√2`, `1/√2`) are multiplied into the integer
//! part exactly, so two assemblies that reach the same coefficient through
//! different chains of constant factors round to the same bits.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Exact {
    re: i64,
    im: i64,
    sqrt2_pow: i32,
    scalar: Complex64,
}

impl Exact {
    pub(crate) fn new(scalar: Complex64) -> Self {
        Self { re: 1, im: 0, sqrt2_pow: 0, scalar }
    }

    pub(crate) fn real(scalar: f64) -> Self {
        Self::new(Complex64::new(scalar, 0.0))
    }

    /// Multiply by `(re + i im) · √2^sqrt2_pow`.
    pub(crate) fn times(self, re: i64, im: i64, sqrt2_pow: i32) -> Self {
        let mut out = Self {
            re: self.re * re - self.im * im,
            im: self.re * im + self.im * re,
            sqrt2_pow: self.sqrt2_pow + sqrt2_pow,
            scalar: self.scalar,
        };
        out.normalize();
        out
    }

    pub(crate) fn times_i(self) -> Self {
        self.times(0, 1, 0)
    }

    /// Canonical form: factors of two leave the Gaussian integer for the
    /// `√2` exponent.
    fn normalize(&mut self) {
        if self.re == 0 && self.im == 0 {
            self.sqrt2_pow = 0;
            return;
        }
        while self.re % 2 == 0 && self.im % 2 == 0 {
            self.re /= 2;
            self.im /= 2;
            self.sqrt2_pow += 2;
        }
    }

    pub(crate) fn value(&self) -> Complex64 {
        let unit = Complex64::new(self.re as f64, self.im as f64);
        let base = self.scalar * unit * 2f64.powi(self.sqrt2_pow.div_euclid(2));
        if self.sqrt2_pow.rem_euclid(2) == 1 {
            base * std::f64::consts::SQRT_2
        } else {
            base
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt2_round_trip_is_exact() {
        let s = Complex64::new(0.3, -1.7);
        let a = Exact::new(s).times(0, -1, 1).times(0, 1, -1);
        assert_eq!(a, Exact::new(s));
        assert_eq!(a.value(), s);
    }

    #[test]
    fn different_chains_share_canonical_form() {
        let s = Complex64::new(0.25, 0.5);
        // 2i · (i / √2) = -√2
        let via_boson = Exact::new(s).times(0, 2, 0).times(0, 1, -1);
        let direct = Exact::new(s).times(-1, 0, 1);
        assert_eq!(via_boson, direct);
        assert_eq!(via_boson.value().re.to_bits(), direct.value().re.to_bits());
    }

    #[test]
    fn value_matches_float_product() {
        let s = Complex64::new(1.25, -0.5);
        let v = Exact::new(s).times(-1, 0, 1).value();
        assert!((v - s * -std::f64::consts::SQRT_2).norm() < 1e-15);
    }
}
