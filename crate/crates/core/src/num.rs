//! Arbitrary-precision complex arithmetic on top of MPFR floats.
//!
//! `Complex` is a plain (re, im) pair of `rug::Float`. The working precision
//! of a value is the minimum of its parts' precisions, and every binary
//! operation produces a result at the minimum precision of its operands.

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;
use std::fmt;

pub use rug::Float as Real;

/// Default working precision in bits.
pub const DEFAULT_PREC: u32 = 256;

/// π at the requested precision.
pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

/// Euler's constant γ at the requested precision.
pub fn euler_gamma(prec: u32) -> Float {
    Float::with_val(prec, Constant::Euler)
}

/// 2^e as a float of the given precision (e may be negative).
pub fn two_pow(prec: u32, e: i32) -> Float {
    Float::with_val(prec, Float::i_exp(1, e))
}

/// n! as an exact float (exact while n! fits in `prec` bits).
pub fn factorial(prec: u32, n: u32) -> Float {
    Float::with_val(prec, Float::factorial(n))
}

/// ζ(k) for integer k ≥ 2.
pub fn zeta_u(prec: u32, k: u32) -> Float {
    Float::with_val(prec, Float::zeta_u(k))
}

/// Arbitrary-precision complex number.
#[derive(Clone, PartialEq)]
pub struct Complex {
    pub re: Float,
    pub im: Float,
}

impl Complex {
    pub fn new(re: Float, im: Float) -> Self {
        Complex { re, im }
    }

    pub fn zero(prec: u32) -> Self {
        Complex { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn one(prec: u32) -> Self {
        Complex { re: Float::with_val(prec, 1), im: Float::new(prec) }
    }

    pub fn i(prec: u32) -> Self {
        Complex { re: Float::new(prec), im: Float::with_val(prec, 1) }
    }

    pub fn from_i64(prec: u32, x: i64) -> Self {
        Complex { re: Float::with_val(prec, x), im: Float::new(prec) }
    }

    pub fn from_f64(prec: u32, x: f64) -> Self {
        Complex { re: Float::with_val(prec, x), im: Float::new(prec) }
    }

    pub fn from_real(re: Float) -> Self {
        let prec = re.prec();
        Complex { re, im: Float::new(prec) }
    }

    pub fn from_parts_f64(prec: u32, re: f64, im: f64) -> Self {
        Complex { re: Float::with_val(prec, re), im: Float::with_val(prec, im) }
    }

    /// Parse a pair of decimal strings at the given precision.
    pub fn parse_decimal(prec: u32, re: &str, im: &str) -> Option<Self> {
        let re = Float::parse(re).ok()?;
        let im = Float::parse(im).ok()?;
        Some(Complex { re: Float::with_val(prec, re), im: Float::with_val(prec, im) })
    }

    /// Working precision: minimum of the two parts.
    pub fn prec(&self) -> u32 {
        self.re.prec().min(self.im.prec())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn conj(&self) -> Self {
        Complex { re: self.re.clone(), im: Float::with_val(self.im.prec(), -&self.im) }
    }

    pub fn neg(&self) -> Self {
        Complex {
            re: Float::with_val(self.re.prec(), -&self.re),
            im: Float::with_val(self.im.prec(), -&self.im),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let p = self.prec().min(rhs.prec());
        Complex {
            re: Float::with_val(p, &self.re + &rhs.re),
            im: Float::with_val(p, &self.im + &rhs.im),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let p = self.prec().min(rhs.prec());
        Complex {
            re: Float::with_val(p, &self.re - &rhs.re),
            im: Float::with_val(p, &self.im - &rhs.im),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let p = self.prec().min(rhs.prec());
        let mut re = Float::with_val(p, &self.re * &rhs.re);
        re -= Float::with_val(p, &self.im * &rhs.im);
        let mut im = Float::with_val(p, &self.re * &rhs.im);
        im += Float::with_val(p, &self.im * &rhs.re);
        Complex { re, im }
    }

    pub fn div(&self, rhs: &Self) -> Self {
        let p = self.prec().min(rhs.prec());
        let den = rhs.norm_sq();
        let num = self.mul(&rhs.conj());
        Complex {
            re: Float::with_val(p, &num.re / &den),
            im: Float::with_val(p, &num.im / &den),
        }
    }

    pub fn scale(&self, f: &Float) -> Self {
        let p = self.prec().min(f.prec());
        Complex {
            re: Float::with_val(p, &self.re * f),
            im: Float::with_val(p, &self.im * f),
        }
    }

    pub fn scale_i64(&self, k: i64) -> Self {
        let p = self.prec();
        Complex {
            re: Float::with_val(p, &self.re * k),
            im: Float::with_val(p, &self.im * k),
        }
    }

    pub fn div_i64(&self, k: i64) -> Self {
        let p = self.prec();
        Complex {
            re: Float::with_val(p, &self.re / k),
            im: Float::with_val(p, &self.im / k),
        }
    }

    /// Multiplication by i.
    pub fn mul_i(&self) -> Self {
        Complex {
            re: Float::with_val(self.im.prec(), -&self.im),
            im: self.re.clone(),
        }
    }

    pub fn recip(&self) -> Self {
        Complex::one(self.prec()).div(self)
    }

    pub fn norm_sq(&self) -> Float {
        let p = self.prec();
        let mut s = Float::with_val(p, &self.re * &self.re);
        s += Float::with_val(p, &self.im * &self.im);
        s
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.clone().hypot(&self.im))
    }

    /// Principal argument in (-π, π].
    pub fn arg(&self) -> Float {
        Float::with_val(self.prec(), self.im.clone().atan2(&self.re))
    }

    /// Principal logarithm: ln|z| + i·Arg z.
    pub fn ln(&self) -> Self {
        Complex { re: self.abs().ln(), im: self.arg() }
    }

    pub fn exp(&self) -> Self {
        let p = self.prec();
        let r = self.re.clone().exp();
        let (s, c) = self.im.clone().sin_cos(Float::new(p));
        Complex {
            re: Float::with_val(p, &r * &c),
            im: Float::with_val(p, &r * &s),
        }
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        if self.is_zero() {
            return Complex::zero(self.prec());
        }
        let p = self.prec();
        let r = self.abs();
        let half = Float::with_val(p, 0.5);
        let m = Float::with_val(p, r.pow(&half));
        let a = Float::with_val(p, self.arg() * &half);
        let (s, c) = a.sin_cos(Float::new(p));
        Complex {
            re: Float::with_val(p, &m * &c),
            im: Float::with_val(p, &m * &s),
        }
    }

    /// Principal complex power z^w = exp(w·Ln z).
    pub fn powc(&self, w: &Complex) -> Self {
        if self.is_zero() {
            let p = self.prec().min(w.prec());
            return if w.is_zero() { Complex::one(p) } else { Complex::zero(p) };
        }
        self.ln().mul(w).exp()
    }

    /// Integer power by repeated squaring.
    pub fn powi(&self, mut e: i64) -> Self {
        let p = self.prec();
        if e == 0 {
            return Complex::one(p);
        }
        let mut base = if e < 0 { self.recip() } else { self.clone() };
        if e < 0 {
            e = -e;
        }
        let mut acc = Complex::one(p);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// |self - rhs| as a float.
    pub fn dist(&self, rhs: &Self) -> Float {
        self.sub(rhs).abs()
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    /// Decimal string pair with enough digits to round-trip the precision.
    pub fn to_decimal_pair(&self) -> (String, String) {
        (real_to_decimal(&self.re), real_to_decimal(&self.im))
    }
}

/// Decimal string with round-trip digits for the float's precision.
pub fn real_to_decimal(f: &Float) -> String {
    let digits = (f.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2;
    format!("{:.*e}", digits, f)
}

impl fmt::Debug for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.20e}, {:.20e})", self.re, self.im)
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{:.10e}", self.re)
        } else if self.im.is_sign_positive() {
            write!(f, "{:.10e}+{:.10e}i", self.re, self.im)
        } else {
            write!(f, "{:.10e}{:.10e}i", self.re, self.im)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_propagates_as_minimum() {
        let a = Complex::from_f64(256, 1.5);
        let b = Complex::from_f64(128, 2.5);
        assert_eq!(a.mul(&b).prec(), 128);
        assert_eq!(a.add(&b).prec(), 128);
        assert_eq!(a.div(&b).prec(), 128);
    }

    #[test]
    fn ln_exp_roundtrip() {
        let z = Complex::from_parts_f64(256, -0.7, 1.9);
        let back = z.ln().exp();
        let tol = two_pow(256, -240);
        assert!(z.dist(&back) < tol);
    }

    #[test]
    fn principal_branch_of_ln() {
        // Just below the negative real axis the argument is near -π.
        let z = Complex::from_parts_f64(256, -1.0, -1e-30);
        assert!(z.arg().to_f64() < -3.14);
        let z = Complex::from_parts_f64(256, -1.0, 1e-30);
        assert!(z.arg().to_f64() > 3.14);
    }

    #[test]
    fn powi_matches_mul() {
        let z = Complex::from_parts_f64(256, 0.3, -1.2);
        let z3 = z.mul(&z).mul(&z);
        assert!(z.powi(3).dist(&z3) < two_pow(256, -245));
        let inv = z.powi(-1).mul(&z);
        assert!(inv.dist(&Complex::one(256)) < two_pow(256, -245));
    }
}
