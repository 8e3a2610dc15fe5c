//! Truncated formal power series with high-precision complex coefficients.

use crate::error::{CoreError, Result};
use crate::num::{factorial, two_pow, Complex};
use rug::Float;

/// Which plane the series lives in.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Var {
    /// Laplace plane (the original variable).
    X,
    /// Borel plane.
    Xi,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Xi => "xi",
        }
    }
}

/// Order-N truncated power series: coefficients for powers 0..=N.
#[derive(Clone, Debug)]
pub struct TruncatedSeries {
    pub var: Var,
    pub coeffs: Vec<Complex>,
}

/// Binary operations accepted by [`series_arith`].
#[derive(Clone, Copy, Debug)]
pub enum SeriesOp {
    Add,
    Mul,
}

/// Spec-level entry point dispatching on the operation tag.
pub fn series_arith(a: &TruncatedSeries, b: &TruncatedSeries, op: SeriesOp) -> Result<TruncatedSeries> {
    match op {
        SeriesOp::Add => a.add(b),
        SeriesOp::Mul => a.mul(b),
    }
}

impl TruncatedSeries {
    pub fn new(var: Var, coeffs: Vec<Complex>) -> Self {
        assert!(!coeffs.is_empty(), "a series needs at least its constant term");
        TruncatedSeries { var, coeffs }
    }

    pub fn zero(var: Var, prec: u32, order: usize) -> Self {
        TruncatedSeries { var, coeffs: vec![Complex::zero(prec); order + 1] }
    }

    pub fn one(var: Var, prec: u32, order: usize) -> Self {
        let mut s = Self::zero(var, prec, order);
        s.coeffs[0] = Complex::one(prec);
        s
    }

    /// Truncation order N (= number of coefficients minus one).
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn prec(&self) -> u32 {
        self.coeffs.iter().map(|c| c.prec()).min().unwrap()
    }

    fn check_var(&self, rhs: &Self) -> Result<()> {
        if self.var != rhs.var {
            return Err(CoreError::VarMismatch(self.var.name(), rhs.var.name()));
        }
        Ok(())
    }

    /// Coefficientwise sum, truncated to the smaller order.
    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_var(rhs)?;
        let n = self.order().min(rhs.order());
        let coeffs = (0..=n).map(|m| self.coeffs[m].add(&rhs.coeffs[m])).collect();
        Ok(TruncatedSeries { var: self.var, coeffs })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.check_var(rhs)?;
        let n = self.order().min(rhs.order());
        let coeffs = (0..=n).map(|m| self.coeffs[m].sub(&rhs.coeffs[m])).collect();
        Ok(TruncatedSeries { var: self.var, coeffs })
    }

    /// Cauchy product, truncated to the smaller order.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.check_var(rhs)?;
        let n = self.order().min(rhs.order());
        let prec = self.prec().min(rhs.prec());
        let mut coeffs = vec![Complex::zero(prec); n + 1];
        for m in 0..=n {
            let mut acc = Complex::zero(prec);
            for i in 0..=m {
                acc = acc.add(&self.coeffs[i].mul(&rhs.coeffs[m - i]));
            }
            coeffs[m] = acc;
        }
        Ok(TruncatedSeries { var: self.var, coeffs })
    }

    pub fn scale(&self, c: &Complex) -> Self {
        TruncatedSeries {
            var: self.var,
            coeffs: self.coeffs.iter().map(|a| a.mul(c)).collect(),
        }
    }

    /// Horner evaluation at a point.
    pub fn eval(&self, z: &Complex) -> Complex {
        let mut acc = Complex::zero(self.prec().min(z.prec()));
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(z).add(c);
        }
        acc
    }

    /// Termwise derivative (order drops by one).
    pub fn derivative(&self) -> Self {
        let prec = self.prec();
        if self.order() == 0 {
            return Self::zero(self.var, prec, 0);
        }
        let coeffs = (1..=self.order())
            .map(|m| self.coeffs[m].scale_i64(m as i64))
            .collect();
        TruncatedSeries { var: self.var, coeffs }
    }

    /// Termwise antiderivative vanishing at 0 (order grows by one).
    pub fn integral(&self) -> Self {
        let prec = self.prec();
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(Complex::zero(prec));
        for (m, c) in self.coeffs.iter().enumerate() {
            coeffs.push(c.div_i64((m + 1) as i64));
        }
        TruncatedSeries { var: self.var, coeffs }
    }

    /// Formal Borel transform of a series with zero constant term:
    /// the coefficient of ξ^{m-1} is the coefficient of x^m divided by Γ(m).
    ///
    /// The output series in ξ has order N-1.
    pub fn borel(&self) -> Result<TruncatedSeries> {
        if self.var != Var::X {
            return Err(CoreError::VarMismatch(self.var.name(), "x"));
        }
        let prec = self.prec();
        let tol = two_pow(prec, -((prec / 2) as i32));
        if self.coeffs[0].abs() > tol {
            return Err(CoreError::NonzeroConstantTerm(format!("{:e}", self.coeffs[0].abs())));
        }
        let n = self.order();
        let mut coeffs = Vec::with_capacity(n.max(1));
        for m in 1..=n {
            // Γ(m) = (m-1)!
            let g = factorial(prec, (m - 1) as u32);
            coeffs.push(Complex {
                re: Float::with_val(prec, &self.coeffs[m].re / &g),
                im: Float::with_val(prec, &self.coeffs[m].im / &g),
            });
        }
        if coeffs.is_empty() {
            coeffs.push(Complex::zero(prec));
        }
        Ok(TruncatedSeries { var: Var::Xi, coeffs })
    }

    /// Taylor re-centering: coefficients of the same polynomial around `z0 + h`.
    /// Exact for polynomials; for truncations this is the usual shift.
    pub fn taylor_shift(&self, h: &Complex) -> Self {
        let n = self.order();
        let prec = self.prec().min(h.prec());
        let mut out = vec![Complex::zero(prec); n + 1];
        // Horner-style shift: repeatedly divide by (u - h).
        let mut work = self.coeffs.clone();
        for j in 0..=n {
            for m in (j..n).rev() {
                let t = work[m + 1].mul(h);
                work[m] = work[m].add(&t);
            }
            out[j] = work[j].clone();
        }
        TruncatedSeries { var: self.var, coeffs: out }
    }

    pub fn max_abs(&self) -> Float {
        let mut m = Float::new(self.prec());
        for c in &self.coeffs {
            let a = c.abs();
            if a > m {
                m = a;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::DEFAULT_PREC as P;

    fn series(var: Var, vals: &[f64]) -> TruncatedSeries {
        TruncatedSeries::new(var, vals.iter().map(|&v| Complex::from_f64(P, v)).collect())
    }

    #[test]
    fn polynomial_identity_one_plus_x_times_one_minus_x() {
        let a = series(Var::X, &[1.0, 1.0, 0.0]);
        let b = series(Var::X, &[1.0, -1.0, 0.0]);
        let p = a.mul(&b).unwrap();
        let expect = [1.0, 0.0, -1.0];
        for (c, e) in p.coeffs.iter().zip(expect) {
            assert!(c.dist(&Complex::from_f64(P, e)).to_f64() < 1e-70);
        }
    }

    #[test]
    fn multiplication_by_one_is_identity() {
        let a = series(Var::X, &[3.0, -2.0, 0.5, 7.25]);
        let one = TruncatedSeries::one(Var::X, P, 3);
        let p = a.mul(&one).unwrap();
        for (c, e) in p.coeffs.iter().zip(&a.coeffs) {
            assert!(c.dist(e).to_f64() == 0.0);
        }
    }

    #[test]
    fn geometric_squared_by_hand() {
        // (Σ x^m)² = Σ (m+1) x^m, checked by direct convolution for m ≤ 5.
        let g = series(Var::X, &[1.0; 6]);
        let sq = g.mul(&g).unwrap();
        for m in 0..=5 {
            let e = Complex::from_f64(P, (m + 1) as f64);
            assert!(sq.coeffs[m].dist(&e).to_f64() < 1e-70);
        }
    }

    #[test]
    fn var_mismatch_is_an_error() {
        let a = series(Var::X, &[1.0]);
        let b = series(Var::Xi, &[1.0]);
        assert!(a.mul(&b).is_err());
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn truncation_to_min_order() {
        let a = series(Var::X, &[1.0, 1.0, 1.0, 1.0]);
        let b = series(Var::X, &[1.0, 1.0]);
        assert_eq!(a.mul(&b).unwrap().order(), 1);
        assert_eq!(a.add(&b).unwrap().order(), 1);
    }

    #[test]
    fn borel_of_monomials() {
        // x → 1 (constant in ξ)
        let x = series(Var::X, &[0.0, 1.0]);
        let b = x.borel().unwrap();
        assert_eq!(b.var, Var::Xi);
        assert!(b.coeffs[0].dist(&Complex::one(P)).to_f64() < 1e-70);
        // x³ → ξ²/2
        let x3 = series(Var::X, &[0.0, 0.0, 0.0, 1.0]);
        let b = x3.borel().unwrap();
        assert!(b.coeffs[2].dist(&Complex::from_f64(P, 0.5)).to_f64() < 1e-70);
        assert!(b.coeffs[0].is_zero() && b.coeffs[1].is_zero());
    }

    #[test]
    fn borel_rejects_constant_term() {
        let s = series(Var::X, &[1.0, 1.0]);
        assert!(matches!(s.borel(), Err(CoreError::NonzeroConstantTerm(_))));
    }

    #[test]
    fn borel_euler_row_gives_geometric() {
        // -Σ_{m≥2} (m-1)! x^m → -Σ_{m≥1} ξ^m
        let prec = P;
        let n = 12;
        let mut coeffs = vec![Complex::zero(prec); n + 1];
        let mut fact = 1f64;
        for m in 2..=n {
            fact *= (m - 1) as f64;
            // recompute exactly to avoid f64 overflow at larger m
            let f = factorial(prec, (m - 1) as u32);
            coeffs[m] = Complex { re: Float::with_val(prec, -&f), im: Float::new(prec) };
            let _ = fact;
        }
        let s = TruncatedSeries::new(Var::X, coeffs);
        let b = s.borel().unwrap();
        for m in 1..n {
            assert!(
                b.coeffs[m].dist(&Complex::from_f64(prec, -1.0)).to_f64() < 1e-70,
                "coefficient {m}"
            );
        }
        assert!(b.coeffs[0].is_zero());
    }

    #[test]
    fn taylor_shift_evaluates_consistently() {
        let a = series(Var::Xi, &[1.0, -2.0, 3.0, 0.25, -0.125]);
        let h = Complex::from_parts_f64(P, 0.3, -0.1);
        let shifted = a.taylor_shift(&h);
        // p(h + u) at u = 0.05 equals p(z) at z = h + 0.05
        let u = Complex::from_f64(P, 0.05);
        let z = h.add(&u);
        let lhs = shifted.eval(&u);
        let rhs = a.eval(&z);
        assert!(lhs.dist(&rhs).to_f64() < 1e-70);
    }
}
