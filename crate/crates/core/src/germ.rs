//! Log-polynomial germs: finite sums Σ c·ξ^{λ+shift-1}·lnᵖξ with the
//! variation operator in closed form.

use crate::num::{pi, two_pow, Complex};
use rug::Float;

/// One monomial c·ξ^{λ+shift-1}·lnᵖξ of a germ; λ is the class
/// representative with real part in [0,1).
#[derive(Clone, Debug)]
pub struct GermTerm {
    pub lam: Complex,
    pub shift: i64,
    pub p: u32,
    pub coeff: Complex,
}

impl GermTerm {
    /// The monomial exponent λ + shift - 1.
    pub fn exponent(&self) -> Complex {
        self.lam.add(&Complex::from_i64(self.lam.prec(), self.shift - 1))
    }

    /// Is this a holomorphic monomial (integer exponent ≥ 0, no log)?
    pub fn is_holomorphic(&self) -> bool {
        if self.p != 0 {
            return false;
        }
        let prec = self.lam.prec();
        let tol = two_pow(prec, -((prec / 4) as i32));
        self.lam.abs() <= tol && self.shift >= 1
    }
}

/// A finite log-polynomial germ anchored at a singular point.
#[derive(Clone, Debug)]
pub struct LogPolynomialGerm {
    pub center: Complex,
    pub terms: Vec<GermTerm>,
}

impl LogPolynomialGerm {
    pub fn zero(center: Complex) -> Self {
        LogPolynomialGerm { center, terms: Vec::new() }
    }

    pub fn prec(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.coeff.prec())
            .min()
            .unwrap_or(self.center.prec())
    }

    /// No duplicate (λ mod Z represented by (lam, shift), p) monomials.
    pub fn is_canonical(&self) -> bool {
        for (i, a) in self.terms.iter().enumerate() {
            for b in &self.terms[i + 1..] {
                let tol = two_pow(a.lam.prec(), -((a.lam.prec() / 4) as i32));
                if a.p == b.p && a.shift == b.shift && a.lam.dist(&b.lam) <= tol {
                    return false;
                }
            }
        }
        true
    }

    /// Majors of simple-moderate singularities carry no holomorphic term
    /// and no pole deeper than 1/ξ.
    pub fn is_simple_moderate_major(&self) -> bool {
        self.terms.iter().all(|t| t.shift >= 0 && !t.is_holomorphic())
    }

    /// Evaluate at ξ = r·e^{iα} with the continuously tracked argument α
    /// (ln ξ = ln r + iα).
    pub fn eval_polar(&self, r: &Float, alpha: &Float) -> Complex {
        let prec = self.prec().min(r.prec()).min(alpha.prec());
        let lnxi = Complex { re: r.clone().ln(), im: alpha.clone() };
        let mut acc = Complex::zero(prec);
        for t in &self.terms {
            let power = t.exponent().mul(&lnxi).exp();
            let mut lp = Complex::one(prec);
            for _ in 0..t.p {
                lp = lp.mul(&lnxi);
            }
            acc = acc.add(&t.coeff.mul(&power).mul(&lp));
        }
        acc
    }

    /// Merge duplicate monomials and drop negligible coefficients.
    pub fn normalized(mut self, drop_tol: &Float) -> Self {
        let mut out: Vec<GermTerm> = Vec::new();
        for t in self.terms.drain(..) {
            let tol = two_pow(t.lam.prec(), -((t.lam.prec() / 4) as i32));
            if let Some(existing) = out
                .iter_mut()
                .find(|e| e.p == t.p && e.shift == t.shift && e.lam.dist(&t.lam) <= tol)
            {
                existing.coeff = existing.coeff.add(&t.coeff);
            } else {
                out.push(t);
            }
        }
        out.retain(|t| t.coeff.abs() > *drop_tol);
        out.sort_by(|a, b| {
            let ea = (a.shift, a.p, a.lam.re.to_f64());
            let eb = (b.shift, b.p, b.lam.re.to_f64());
            ea.partial_cmp(&eb).unwrap()
        });
        LogPolynomialGerm { center: self.center, terms: out }
    }

    /// The variation var φ̌(ξ) = φ̌(ξ) - φ̌(ξe^{-2πi}) in closed form:
    /// var(ξ^μ lnᵖξ) = ξ^μ·(lnᵖξ - e^{-2πiμ}(lnξ - 2πi)ᵖ).
    pub fn variation(&self) -> LogPolynomialGerm {
        let prec = self.prec();
        let drop = two_pow(prec, -(prec as i32) + 12);
        let mut terms = Vec::new();
        for t in &self.terms {
            // e^{-2πiμ} = e^{-2πiλ} (integer shifts drop out)
            let minus_two_pi = Float::with_val(prec, -2 * &pi(prec));
            let rot = t.lam.mul(&Complex { re: Float::new(prec), im: minus_two_pi.clone() }).exp();
            // leading term: (1 - e^{-2πiλ})·ξ^μ lnᵖ
            let lead = Complex::one(prec).sub(&rot);
            terms.push(GermTerm { lam: t.lam.clone(), shift: t.shift, p: t.p, coeff: t.coeff.mul(&lead) });
            // lower log powers: -e^{-2πiλ}·C(p,s)(-2πi)^{p-s}·ξ^μ lnˢ
            let m2pi_i = Complex { re: Float::new(prec), im: minus_two_pi };
            let mut binom = 1i64;
            for s in (0..t.p).rev() {
                // C(p, s): iterate downward
                binom = binom * (s as i64 + 1) / (t.p as i64 - s as i64);
                let mut w = Complex::from_i64(prec, binom);
                for _ in 0..(t.p - s) {
                    w = w.mul(&m2pi_i);
                }
                let coeff = t.coeff.mul(&rot).mul(&w).neg();
                terms.push(GermTerm { lam: t.lam.clone(), shift: t.shift, p: s, coeff });
            }
        }
        LogPolynomialGerm { center: self.center.clone(), terms }.normalized(&drop)
    }

    /// Pointwise product (used by the product-rule check).
    pub fn mul(&self, rhs: &Self) -> LogPolynomialGerm {
        let prec = self.prec().min(rhs.prec());
        let drop = two_pow(prec, -(prec as i32) + 12);
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &rhs.terms {
                // ξ^{λa+sa-1}·ξ^{λb+sb-1} = ξ^{(λa+λb)+(sa+sb-1)-1}; reduce
                // λa+λb into [0,1) by an integer carried into the shift.
                let lam_sum = a.lam.add(&b.lam);
                let carry = lam_sum.re.to_f64().floor() as i64;
                let lam = lam_sum.sub(&Complex::from_i64(prec, carry));
                terms.push(GermTerm {
                    lam,
                    shift: a.shift + b.shift - 1 + carry,
                    p: a.p + b.p,
                    coeff: a.coeff.mul(&b.coeff),
                });
            }
        }
        LogPolynomialGerm { center: self.center.clone(), terms }.normalized(&drop)
    }
}

/// Numeric variation of a function accessor: values on two consecutive
/// sheets, var E(r, α) = E(r, α) - E(r, α - 2π).
pub fn variation_numeric(
    mut eval: impl FnMut(&Float, &Float) -> Complex,
    r: &Float,
    alpha: &Float,
) -> Complex {
    let prec = alpha.prec();
    let below = Float::with_val(prec, alpha - Float::with_val(prec, 2 * &pi(prec)));
    let a = eval(r, alpha);
    let b = eval(r, &below);
    a.sub(&b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::DEFAULT_PREC as P;

    fn term(lam: f64, shift: i64, p: u32, coeff: Complex) -> GermTerm {
        GermTerm { lam: Complex::from_f64(P, lam), shift, p, coeff }
    }

    fn two_pi_i() -> Complex {
        Complex { re: Float::new(P), im: Float::with_val(P, 2 * &pi(P)) }
    }

    #[test]
    fn var_of_log_over_two_pi_i_is_one() {
        // ln ξ / 2πi: λ=0, shift=1, p=1
        let g = LogPolynomialGerm {
            center: Complex::zero(P),
            terms: vec![term(0.0, 1, 1, two_pi_i().recip())],
        };
        let v = g.variation();
        assert_eq!(v.terms.len(), 1);
        let t = &v.terms[0];
        assert_eq!((t.p, t.shift), (0, 1));
        assert!(t.coeff.dist(&Complex::one(P)) < two_pow(P, -200));
    }

    #[test]
    fn var_iterated_on_log_powers() {
        // var^p((ln/2πi)^p) = p! and var^{p+1} = 0
        for p in 1..=3u32 {
            let c = two_pi_i().recip().powi(p as i64);
            let mut g = LogPolynomialGerm {
                center: Complex::zero(P),
                terms: vec![term(0.0, 1, p, c)],
            };
            for _ in 0..p {
                g = g.variation();
            }
            assert_eq!(g.terms.len(), 1);
            let mut fact = Complex::one(P);
            for k in 2..=p as i64 {
                fact = fact.scale_i64(k);
            }
            assert!(g.terms[0].coeff.dist(&fact) < two_pow(P, -180), "p={p}");
            assert_eq!(g.terms[0].p, 0);
            let gone = g.variation();
            assert!(gone.terms.is_empty(), "var^{{p+1}} must vanish, p={p}");
        }
    }

    #[test]
    fn var_of_complex_power() {
        // var(ξ^λ) = (1-e^{-2πiλ})ξ^λ; zero for λ ∈ Z
        let lam = Complex::from_parts_f64(P, 0.37, -0.11);
        let g = LogPolynomialGerm {
            center: Complex::zero(P),
            terms: vec![GermTerm { lam: lam.clone(), shift: 1, p: 0, coeff: Complex::one(P) }],
        };
        let v = g.variation();
        assert_eq!(v.terms.len(), 1);
        let expect = Complex::one(P).sub(
            &lam.mul(&Complex { re: Float::new(P), im: Float::with_val(P, -2 * &pi(P)) }).exp(),
        );
        assert!(v.terms[0].coeff.dist(&expect) < two_pow(P, -200));
        // integer λ (here 0): variation kills the monomial
        let gi = LogPolynomialGerm {
            center: Complex::zero(P),
            terms: vec![term(0.0, 3, 0, Complex::from_f64(P, 2.5))],
        };
        assert!(gi.variation().terms.is_empty());
    }

    #[test]
    fn var_squared_of_pure_pole_is_zero() {
        // 1/ξ: λ=0, shift=0, p=0 — λ ≡ -1 ∈ Z so var is already 0
        let g = LogPolynomialGerm {
            center: Complex::zero(P),
            terms: vec![term(0.0, 0, 0, Complex::one(P))],
        };
        let v = g.variation();
        assert!(v.terms.is_empty());
        assert!(v.variation().terms.is_empty());
    }

    #[test]
    fn product_rule() {
        // var(fg) = var(f)g + f var(g) - var(f)var(g)
        let f = LogPolynomialGerm {
            center: Complex::zero(P),
            terms: vec![GermTerm {
                lam: Complex::from_parts_f64(P, 0.3, 0.2),
                shift: 0,
                p: 1,
                coeff: Complex::from_parts_f64(P, 1.25, -0.5),
            }],
        };
        let g = LogPolynomialGerm {
            center: Complex::zero(P),
            terms: vec![
                GermTerm {
                    lam: Complex::from_parts_f64(P, 0.6, -0.4),
                    shift: 1,
                    p: 2,
                    coeff: Complex::from_parts_f64(P, -0.75, 2.0),
                },
                term(0.0, 1, 1, Complex::from_f64(P, 0.5)),
            ],
        };
        let lhs = f.mul(&g).variation();
        let vf = f.variation();
        let vg = g.variation();
        let rhs_terms = [vf.mul(&g), f.mul(&vg), vf.mul(&vg)];
        let mut rhs = LogPolynomialGerm { center: Complex::zero(P), terms: Vec::new() };
        for (i, part) in rhs_terms.iter().enumerate() {
            for t in &part.terms {
                let c = if i == 2 { t.coeff.neg() } else { t.coeff.clone() };
                rhs.terms.push(GermTerm { lam: t.lam.clone(), shift: t.shift, p: t.p, coeff: c });
            }
        }
        let rhs = rhs.normalized(&two_pow(P, -200));
        // compare by evaluation at a few polar points
        for (r, a) in [(0.3, -1.0), (0.07, -4.0), (0.5, -2.2)] {
            let rr = Float::with_val(P, r);
            let aa = Float::with_val(P, a);
            let d = lhs.eval_polar(&rr, &aa).dist(&rhs.eval_polar(&rr, &aa));
            assert!(d < two_pow(P, -180), "at ({r},{a}): {d:e}");
        }
    }

    #[test]
    fn var_of_power_times_log_leading_structure() {
        // var(ξ^λ lnᵖξ) = (1-e^{-2πiλ})ξ^λ lnᵖξ + lower log-degree terms
        let lam = Complex::from_parts_f64(P, 0.42, 0.0);
        let g = LogPolynomialGerm {
            center: Complex::zero(P),
            terms: vec![GermTerm { lam: lam.clone(), shift: 1, p: 2, coeff: Complex::one(P) }],
        };
        let v = g.variation();
        let lead = v.terms.iter().find(|t| t.p == 2).expect("leading log power kept");
        let expect = Complex::one(P).sub(
            &lam.mul(&Complex { re: Float::new(P), im: Float::with_val(P, -2 * &pi(P)) }).exp(),
        );
        assert!(lead.coeff.dist(&expect) < two_pow(P, -200));
        assert!(v.terms.iter().any(|t| t.p < 2), "lower log terms present");
    }

    #[test]
    fn numeric_variation_matches_closed_form() {
        // identity check hosted numerically: for λ ∉ Z,
        // (1 - e^{-2πiλ})·ξ^λ equals the loop difference of ξ^λ
        let lam = Complex::from_parts_f64(P, 0.73, 0.19);
        let r = Float::with_val(P, 0.4);
        let alpha = Float::new(P); // argument 0 vs -2π
        let eval = |rr: &Float, aa: &Float| {
            let lnxi = Complex { re: rr.clone().ln(), im: aa.clone() };
            lam.mul(&lnxi).exp()
        };
        let got = variation_numeric(eval, &r, &alpha);
        let rot = lam
            .mul(&Complex { re: Float::new(P), im: Float::with_val(P, -2 * &pi(P)) })
            .exp();
        let xi_lam = {
            let lnxi = Complex { re: r.clone().ln(), im: alpha.clone() };
            lam.mul(&lnxi).exp()
        };
        let expect = Complex::one(P).sub(&rot).mul(&xi_lam);
        assert!(got.dist(&expect) < two_pow(P, -200));
    }
}
