//! The constants κ_p(λ) = 2πi · dᵖ/dtᵖ (e^{-iπt}/Γ(1-t)) |_{t=λ}.
//!
//! The function h(t) = e^{-iπt}/Γ(1-t) is entire. Its Taylor series at 0 is
//! built from ln Γ(1-t) = γt + Σ_{k≥2} ζ(k) tᵏ/k, so
//! h(t) = exp(g(t)) with g(t) = -(γ + iπ)t - Σ_{k≥2} ζ(k) tᵏ/k,
//! and κ_p is evaluated by termwise differentiation of that series.

use crate::num::{euler_gamma, pi, two_pow, zeta_u, Complex};
use rug::Float;

/// Cached Taylor coefficients of h(t) = e^{-iπt}/Γ(1-t) at t = 0.
pub struct KappaTable {
    pub prec: u32,
    coeffs: Vec<Complex>,
}

impl KappaTable {
    /// Build the table with enough terms for |λ| ≲ 4 at the given precision.
    pub fn new(prec: u32) -> Self {
        let nterms = (prec as usize) + 64;
        let mut g = vec![Complex::zero(prec); nterms + 1];
        g[1] = Complex {
            re: Float::with_val(prec, -euler_gamma(prec)),
            im: Float::with_val(prec, -pi(prec)),
        };
        for k in 2..=nterms {
            let z = zeta_u(prec, k as u32);
            g[k] = Complex {
                re: Float::with_val(prec, -(z / k as u32)),
                im: Float::new(prec),
            };
        }
        // h = exp(g) via h' = g'·h, h_0 = 1:
        // m·h_m = Σ_{i=1..m} i·g_i·h_{m-i}
        let mut h = vec![Complex::zero(prec); nterms + 1];
        h[0] = Complex::one(prec);
        for m in 1..=nterms {
            let mut acc = Complex::zero(prec);
            for i in 1..=m {
                if g[i].is_zero() {
                    continue;
                }
                acc = acc.add(&g[i].scale_i64(i as i64).mul(&h[m - i]));
            }
            h[m] = acc.div_i64(m as i64);
        }
        KappaTable { prec, coeffs: h }
    }

    /// h^{(p)}(λ) = Σ_{k≥p} c_k · k!/(k-p)! · λ^{k-p}.
    fn deriv_at(&self, p: usize, lam: &Complex) -> Complex {
        let prec = self.prec;
        let mut sum = Complex::zero(prec);
        // falling-factorial prefactor k!/(k-p)!
        let mut pow = Complex::one(prec); // λ^{k-p}
        let tiny = two_pow(prec, -(prec as i32) - 16);
        let mut last_small = 0usize;
        for k in p..self.coeffs.len() {
            let mut ff = Complex::one(prec);
            for j in 0..p {
                ff = ff.scale_i64((k - j) as i64);
            }
            let term = self.coeffs[k].mul(&ff).mul(&pow);
            sum = sum.add(&term);
            let scale = {
                let s = sum.abs();
                if s < 1 { Float::with_val(prec, 1) } else { s }
            };
            if term.abs() < Float::with_val(prec, &tiny * &scale) {
                last_small += 1;
                if last_small >= 4 {
                    break;
                }
            } else {
                last_small = 0;
            }
            pow = pow.mul(lam);
        }
        sum
    }

    /// κ_p(λ) = 2πi · h^{(p)}(λ).
    pub fn kappa(&self, p: usize, lam: &Complex) -> Complex {
        let prec = self.prec;
        let two_pi_i = Complex {
            re: Float::new(prec),
            im: Float::with_val(prec, 2 * &pi(prec)),
        };
        two_pi_i.mul(&self.deriv_at(p, lam))
    }
}

/// One-shot κ_p(λ) (builds a table; use [`KappaTable`] for repeated calls).
pub fn kappa(prec: u32, p: usize, lam: &Complex) -> Complex {
    KappaTable::new(prec).kappa(p, lam)
}
