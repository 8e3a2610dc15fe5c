//! The Connection-to-Stokes linear map and its inverse, the per-ω split of
//! Stokes matrices, and the Hankel-quadrature cross-check.
//!
//! Entrywise, with κ_p(λ) = 2πi·dᵖ/dtᵖ(e^{-iπt}/Γ(1-t))|_λ,
//!
//!   C^{(j,ℓ);(k,r)} = Σ_{p=0}^{n_j-ℓ+r-1} κ_p(λ_j-λ_k)·H_p^{(j,ℓ);(k,r)},
//!   H_p = Σ_{ℓ'-r'=p-r+1} (-1)^{r-1-r'} K⁺^{(j,ℓ+ℓ');(k,r'+1)} / ((r-1-r')!·ℓ'!),
//!
//! which is triangular in the Jordan offsets with invertible diagonal
//! κ₀(λ_j-λ_k) ≠ 0, so the inverse map is a back-substitution.

use crate::error::{CoreError, Result};
use crate::kappa::KappaTable;
use crate::matrix::{nilpotent_log, Matrix, NilpotentMatrix};
use crate::num::{pi, two_pow, Complex};
use crate::system::LevelOneSystem;
use rug::Float;

/// A Stokes-Ramis matrix I + C in a direction θ*.
#[derive(Clone, Debug)]
pub struct StokesMatrix {
    pub theta_star: Float,
    /// C (so the Stokes-Ramis matrix is I + C); nilpotent with the ω pattern.
    pub c: Matrix,
}

impl StokesMatrix {
    /// Pattern invariant: block (j,k) vanishes unless a_j - a_k lies on the
    /// ray of θ*; diagonal blocks vanish; C is nilpotent.
    pub fn validate(&self, sys: &LevelOneSystem) -> Result<()> {
        let st = sys.structure();
        let tol = sys.value_tol();
        let angle_tol = sys.angle_tol();
        for j in 0..st.count() {
            for k in 0..st.count() {
                let d = sys.blocks[j].a.sub(&sys.blocks[k].a);
                let on_ray = if d.abs() <= tol {
                    false
                } else {
                    let da = crate::system::principal_arg(&d.arg());
                    let diff = Float::with_val(sys.prec(), &da - &self.theta_star).abs();
                    let two_pi = Float::with_val(sys.prec(), 2 * &pi(sys.prec()));
                    let wrapped = Float::with_val(sys.prec(), &diff - &two_pi).abs();
                    diff <= angle_tol || wrapped <= angle_tol
                };
                if on_ray {
                    continue;
                }
                for r in 0..st.sizes[j] {
                    for c in 0..st.sizes[k] {
                        if self.c[(st.offsets[j] + r, st.offsets[k] + c)].abs() > tol {
                            return Err(CoreError::Validation(vec![format!(
                                "Stokes block ({},{}) must vanish off the θ* ray",
                                j + 1,
                                k + 1
                            )]));
                        }
                    }
                }
            }
        }
        NilpotentMatrix::certify(self.c.clone())?;
        Ok(())
    }
}

/// connection_to_stokes: evaluate the corollary entrywise.
pub fn connection_to_stokes(
    k_plus: &crate::major::ConnectionMatrix,
    sys: &LevelOneSystem,
) -> Result<StokesMatrix> {
    let prec = sys.prec();
    let st = sys.structure();
    let table = KappaTable::new(prec);
    let mut c = Matrix::zero(prec, sys.n, sys.n);
    let ktot = &k_plus.total;
    for j in 0..st.count() {
        for k in 0..st.count() {
            let lam = sys.blocks[j].lam.sub(&sys.blocks[k].lam);
            let nj = st.sizes[j];
            let nk = st.sizes[k];
            // cache κ_p for p up to nj-1 + nk-1
            let kappas: Vec<Complex> = (0..=(nj - 1 + nk - 1)).map(|p| table.kappa(p, &lam)).collect();
            for l in 1..=nj {
                for r in 1..=nk {
                    let mut acc = Complex::zero(prec);
                    // Σ over ℓ' ≥ 0, 0 ≤ r' ≤ r-1 with K entry (ℓ+ℓ', r'+1)
                    for lp in 0..=(nj - l) {
                        for rp in 0..r {
                            let p = lp + (r - 1 - rp);
                            let kk = &ktot[(st.offsets[j] + l - 1 + lp, st.offsets[k] + rp)];
                            if kk.is_zero() {
                                continue;
                            }
                            let mut w = Complex::one(prec);
                            for t in 1..=lp {
                                w = w.div_i64(t as i64);
                            }
                            for t in 1..=(r - 1 - rp) {
                                w = w.div_i64(t as i64);
                            }
                            if (r - 1 - rp) % 2 == 1 {
                                w = w.neg();
                            }
                            acc = acc.add(&kappas[p].mul(&w).mul(kk));
                        }
                    }
                    c[(st.offsets[j] + l - 1, st.offsets[k] + r - 1)] = acc;
                }
            }
        }
    }
    let sm = StokesMatrix { theta_star: k_plus.theta_star.clone(), c };
    sm.validate(sys)?;
    Ok(sm)
}

/// stokes_to_connection: invert the map by back-substitution
/// (rows bottom-up, columns left-to-right inside each block pair).
pub fn stokes_to_connection(
    sm: &StokesMatrix,
    sys: &LevelOneSystem,
) -> Result<crate::major::ConnectionMatrix> {
    let prec = sys.prec();
    let st = sys.structure();
    let table = KappaTable::new(prec);
    let tol = sys.value_tol();
    let mut ktot = Matrix::zero(prec, sys.n, sys.n);
    for j in 0..st.count() {
        for k in 0..st.count() {
            let lam = sys.blocks[j].lam.sub(&sys.blocks[k].lam);
            let nj = st.sizes[j];
            let nk = st.sizes[k];
            let kappas: Vec<Complex> = (0..=(nj - 1 + nk - 1)).map(|p| table.kappa(p, &lam)).collect();
            if kappas[0].abs() <= tol {
                // cannot occur for Re λ ∈ (-1,1): 1/Γ(1-t) has no zero there
                return Err(CoreError::KappaZero(format!("{}", lam)));
            }
            // skip zero blocks quickly
            let mut any = false;
            for l in 0..nj {
                for r in 0..nk {
                    if !sm.c[(st.offsets[j] + l, st.offsets[k] + r)].is_zero() {
                        any = true;
                    }
                }
            }
            if !any {
                continue;
            }
            for l in (1..=nj).rev() {
                for r in 1..=nk {
                    // C_{(l,r)} = κ₀ K_{l,r} + Σ_{(ℓ',r') ≠ (0,r-1)} ...
                    let mut acc = sm.c[(st.offsets[j] + l - 1, st.offsets[k] + r - 1)].clone();
                    for lp in 0..=(nj - l) {
                        for rp in 0..r {
                            if lp == 0 && rp == r - 1 {
                                continue;
                            }
                            let p = lp + (r - 1 - rp);
                            let kk = &ktot[(st.offsets[j] + l - 1 + lp, st.offsets[k] + rp)];
                            if kk.is_zero() {
                                continue;
                            }
                            let mut w = Complex::one(prec);
                            for t in 1..=lp {
                                w = w.div_i64(t as i64);
                            }
                            for t in 1..=(r - 1 - rp) {
                                w = w.div_i64(t as i64);
                            }
                            if (r - 1 - rp) % 2 == 1 {
                                w = w.neg();
                            }
                            acc = acc.sub(&kappas[p].mul(&w).mul(kk));
                        }
                    }
                    ktot[(st.offsets[j] + l - 1, st.offsets[k] + r - 1)] = acc.div(&kappas[0]);
                }
            }
        }
    }
    // split per ω for the report
    let sv = crate::system::stokes_values(sys);
    let angle_tol = sys.angle_tol();
    let mut per_omega = Vec::new();
    if let Some(d) = sv.direction_at(&sm.theta_star, &angle_tol) {
        for omega in &d.omegas {
            let mut m = Matrix::zero(prec, sys.n, sys.n);
            for j in 0..st.count() {
                for k in 0..st.count() {
                    let diff = sys.blocks[j].a.sub(&sys.blocks[k].a);
                    if diff.dist(omega) > tol {
                        continue;
                    }
                    for r in 0..st.sizes[j] {
                        for c in 0..st.sizes[k] {
                            m[(st.offsets[j] + r, st.offsets[k] + c)] =
                                ktot[(st.offsets[j] + r, st.offsets[k] + c)].clone();
                        }
                    }
                }
            }
            per_omega.push((omega.clone(), m));
        }
    }
    Ok(crate::major::ConnectionMatrix {
        theta_star: sm.theta_star.clone(),
        per_omega,
        total: ktot,
        germs: Vec::new(),
        fit_residual: Float::new(prec),
    })
}

/// delta_plus_split: mask C per Stokes value ω; the masked parts sum back
/// to C exactly (entries are copied bit for bit).
pub fn delta_plus_split(sm: &StokesMatrix, sys: &LevelOneSystem) -> Vec<(Complex, Matrix)> {
    let prec = sys.prec();
    let st = sys.structure();
    let tol = sys.value_tol();
    let sv = crate::system::stokes_values(sys);
    let angle_tol = sys.angle_tol();
    let mut out = Vec::new();
    if let Some(d) = sv.direction_at(&sm.theta_star, &angle_tol) {
        for omega in &d.omegas {
            let mut m = Matrix::zero(prec, sys.n, sys.n);
            let mut nonzero = false;
            for j in 0..st.count() {
                for k in 0..st.count() {
                    let diff = sys.blocks[j].a.sub(&sys.blocks[k].a);
                    if diff.dist(omega) > tol {
                        continue;
                    }
                    for r in 0..st.sizes[j] {
                        for c in 0..st.sizes[k] {
                            let v = sm.c[(st.offsets[j] + r, st.offsets[k] + c)].clone();
                            if !v.is_zero() {
                                nonzero = true;
                            }
                            m[(st.offsets[j] + r, st.offsets[k] + c)] = v;
                        }
                    }
                }
            }
            if nonzero {
                out.push((omega.clone(), m));
            }
        }
    }
    out
}

/// Numerical Hankel quadrature of ∫_{γ₀} ξ^{t-1} e^{-ξ} dξ where γ₀ rings
/// ℝ⁺ with arguments from -2π to 0 (two rays at distance δ plus a circle),
/// truncated at Re ξ = T. Cross-checks κ₀, and with log factors κ_p.
pub fn hankel_power_integral(prec: u32, t: &Complex, log_power: u32, delta: f64, trunc: f64) -> Complex {
    // leg 1: incoming ray, arg = -2π: ξ = u·e^{-2πi}, u from T down to δ
    // leg 2: circle of radius δ: arg from -2π to 0
    // leg 3: outgoing ray, arg = 0: u from δ to T
    let nodes = 96;
    let two_pi = Float::with_val(prec, 2 * &pi(prec));
    let integrand = |lnxi: &Complex, xi: &Complex| -> Complex {
        // ξ^{t-1}·ln^p ξ·e^{-ξ}
        let tm1 = t.sub(&Complex::one(prec));
        let mut v = tm1.mul(lnxi).exp();
        for _ in 0..log_power {
            v = v.mul(lnxi);
        }
        v.mul(&xi.neg().exp())
    };
    let mut total = Complex::zero(prec);
    // geometric panels for the rays
    let mut edges = vec![delta];
    let mut x = delta;
    while x < trunc {
        x *= 2.0;
        edges.push(x.min(trunc));
    }
    let gl = gauss_legendre(prec, nodes);
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let fa = Float::with_val(prec, a);
        let fb = Float::with_val(prec, b);
        for (xk, wk) in &gl {
            // map [-1,1] to [a,b], midpoint arithmetic at precision
            let half = Float::with_val(prec, Float::with_val(prec, &fb - &fa) / 2u32);
            let mid = Float::with_val(prec, Float::with_val(prec, &fb + &fa) / 2u32);
            let u = Float::with_val(prec, &half * xk) + &mid;
            let u = Float::with_val(prec, u);
            let wgt = Float::with_val(prec, &half * wk);
            // incoming: arg -2π, direction du decreasing ⇒ sign -1
            let ln_in = Complex { re: u.clone().ln(), im: Float::with_val(prec, -&two_pi) };
            let xi_in = Complex { re: u.clone(), im: Float::new(prec) };
            let v_in = integrand(&ln_in, &xi_in).scale(&wgt).neg();
            // outgoing: arg 0
            let ln_out = Complex { re: u.clone().ln(), im: Float::new(prec) };
            let v_out = integrand(&ln_out, &xi_in).scale(&wgt);
            total = total.add(&v_in).add(&v_out);
        }
    }
    // circle: ξ = δe^{iα}, α from -2π to 0, dξ = iδe^{iα} dα
    let dl = Float::with_val(prec, delta);
    for (xk, wk) in &gl {
        let alpha = Float::with_val(prec, &pi(prec) * xk) - &pi(prec); // [-2π,0] via α = π(x-1)
        let lnxi = Complex { re: dl.clone().ln(), im: alpha.clone() };
        let (s, c) = alpha.clone().sin_cos(Float::new(prec));
        let xi = Complex { re: c, im: s }.scale(&dl);
        let dxi = xi.mul_i();
        let wgt = Float::with_val(prec, &pi(prec) * wk);
        total = total.add(&integrand(&lnxi, &xi).mul(&dxi).scale(&wgt));
    }
    total
}

/// Hankel-quadrature evaluation of the full Connection-to-Stokes integral
/// C = ∫_{γ₀} (1/ξ)·ξ^L·K⁺·ξ^{-L}·e^{-ξ} dξ (cross-check route).
pub fn hankel_connection_integral(sys: &LevelOneSystem, ktot: &Matrix) -> Matrix {
    let prec = sys.prec();
    let st = sys.structure();
    let mut c = Matrix::zero(prec, sys.n, sys.n);
    for j in 0..st.count() {
        for k in 0..st.count() {
            let lam = sys.blocks[j].lam.sub(&sys.blocks[k].lam);
            let nj = st.sizes[j];
            let nk = st.sizes[k];
            for l in 0..nj {
                for r in 0..nk {
                    let mut acc = Complex::zero(prec);
                    for lp in 0..(nj - l) {
                        for rp in 0..=r {
                            let kk = &ktot[(st.offsets[j] + l + lp, st.offsets[k] + rp)];
                            if kk.is_zero() {
                                continue;
                            }
                            let p = lp + (r - rp);
                            let mut w = Complex::one(prec);
                            for t in 1..=lp {
                                w = w.div_i64(t as i64);
                            }
                            for t in 1..=(r - rp) {
                                w = w.div_i64(t as i64);
                            }
                            if (r - rp) % 2 == 1 {
                                w = w.neg();
                            }
                            let integral = hankel_power_integral(prec, &lam, p as u32, 1e-3, 50.0);
                            acc = acc.add(&integral.mul(&w).mul(kk));
                        }
                    }
                    c[(st.offsets[j] + l, st.offsets[k] + r)] = acc;
                }
            }
        }
    }
    c
}

/// Gauss-Legendre nodes/weights on [-1, 1] at working precision
/// (Newton iteration on the Legendre recurrence).
pub fn gauss_legendre(prec: u32, n: usize) -> Vec<(Float, Float)> {
    let mut out = Vec::with_capacity(n);
    let pi_v = pi(prec);
    for i in 0..n {
        // Chebyshev-like initial guess
        let theta = Float::with_val(prec, &pi_v * Float::with_val(prec, (i as f64 + 0.75) / (n as f64 + 0.5)));
        let mut x = theta.cos();
        x = -x;
        for _ in 0..200 {
            // Legendre P_n(x) and P'_n(x) by recurrence
            let mut p0 = Float::with_val(prec, 1);
            let mut p1 = x.clone();
            for k in 2..=n {
                let xk = Float::with_val(prec, &x * &p1);
                let mut pk = Float::with_val(prec, &xk * (2 * k as u32 - 1));
                pk -= Float::with_val(prec, &p0 * (k as u32 - 1));
                pk /= k as u32;
                p0 = p1;
                p1 = pk;
            }
            // P'_n = n(xP_n - P_{n-1})/(x²-1)
            let num = Float::with_val(prec, Float::with_val(prec, &x * &p1) - &p0) * n as u32;
            let den = Float::with_val(prec, x.clone().square() - 1u32);
            let dp = Float::with_val(prec, &num / &den);
            let step = Float::with_val(prec, &p1 / &dp);
            x -= &step;
            if step.abs() < two_pow(prec, -(prec as i32) + 8) {
                break;
            }
        }
        // weight 2/((1-x²)P'_n(x)²)
        let mut p0 = Float::with_val(prec, 1);
        let mut p1 = x.clone();
        for k in 2..=n {
            let xk = Float::with_val(prec, &x * &p1);
            let mut pk = Float::with_val(prec, &xk * (2 * k as u32 - 1));
            pk -= Float::with_val(prec, &p0 * (k as u32 - 1));
            pk /= k as u32;
            p0 = p1;
            p1 = pk;
        }
        let num = Float::with_val(prec, Float::with_val(prec, &x * &p1) - &p0) * n as u32;
        let den = Float::with_val(prec, x.clone().square() - 1u32);
        let dp = Float::with_val(prec, &num / &den);
        let omx = Float::with_val(prec, 1u32 - x.clone().square());
        let w = Float::with_val(prec, 2u32 / Float::with_val(prec, &omx * &dp.clone().square()));
        out.push((x, w));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::major::ConnectionMatrix;
    use crate::num::{euler_gamma, DEFAULT_PREC as P};
    use crate::system::JordanBlockSpec;
    use rand::{Rng, SeedableRng};

    fn resonant4x4() -> LevelOneSystem {
        let blocks = vec![
            JordanBlockSpec { a: Complex::zero(P), lam: Complex::zero(P), size: 1 },
            JordanBlockSpec { a: Complex::one(P), lam: Complex::zero(P), size: 3 },
        ];
        let b1 = Matrix::zero(P, 4, 4);
        let mut b2 = Matrix::zero(P, 4, 4);
        for r in 1..4 {
            b2[(r, 0)] = Complex::one(P);
        }
        LevelOneSystem::new(blocks, vec![b1, b2])
    }

    fn exact_k_4x4() -> Matrix {
        let mut k = Matrix::zero(P, 4, 4);
        k[(3, 0)] = Complex::one(P);
        k[(2, 0)] = Complex { re: Float::with_val(P, 2), im: pi(P) };
        k[(1, 0)] = {
            let mut re = Float::with_val(P, 6);
            re -= &pi(P).clone().square();
            re /= 2;
            Complex { re, im: Float::with_val(P, 2 * &pi(P)) }
        };
        k
    }

    fn boxed_c_4x4() -> (Complex, Complex, Complex) {
        // C^{(2,1)} = (6π - π³/6 - 4πγ + πγ²)i, C^{(3,1)} = 2π(2-γ)i, C^{(4,1)} = 2πi
        let pi_v = pi(P);
        let g = euler_gamma(P);
        let c41 = Complex { re: Float::new(P), im: Float::with_val(P, 2 * &pi_v) };
        let c31 = {
            let mut v = Float::with_val(P, 2 - &g);
            v *= &pi_v;
            v *= 2;
            Complex { re: Float::new(P), im: v }
        };
        let c21 = {
            let mut v = Float::with_val(P, 6 * &pi_v);
            let mut pi3 = Float::with_val(P, pi_v.clone().square());
            pi3 *= &pi_v;
            pi3 /= 6;
            v -= &pi3;
            v -= Float::with_val(P, 4 * Float::with_val(P, &pi_v * &g));
            v += Float::with_val(P, &pi_v * &g.clone().square());
            Complex { re: Float::new(P), im: v }
        };
        (c21, c31, c41)
    }

    fn cm_from_k(sys: &LevelOneSystem, k: Matrix, theta: Float) -> ConnectionMatrix {
        let sv = crate::system::stokes_values(sys);
        let tol = sys.angle_tol();
        let per = sv
            .direction_at(&theta, &tol)
            .map(|d| {
                d.omegas
                    .iter()
                    .map(|w| (w.clone(), k.clone()))
                    .collect::<Vec<_>>()
            })
            .unwrap_or_default();
        ConnectionMatrix {
            theta_star: theta,
            per_omega: per,
            total: k,
            germs: Vec::new(),
            fit_residual: Float::new(P),
        }
    }

    #[test]
    fn boxed_stokes_multipliers_from_exact_k() {
        let sys = resonant4x4();
        let cm = cm_from_k(&sys, exact_k_4x4(), Float::new(P));
        let sm = connection_to_stokes(&cm, &sys).unwrap();
        let (c21, c31, c41) = boxed_c_4x4();
        assert!(sm.c[(1, 0)].dist(&c21).to_f64() < 1e-10, "{:?}", sm.c[(1, 0)]);
        assert!(sm.c[(2, 0)].dist(&c31).to_f64() < 1e-10);
        assert!(sm.c[(3, 0)].dist(&c41).to_f64() < 1e-10);
        // everything else zero
        for r in 0..4 {
            for c in 0..4 {
                if c == 0 && r > 0 {
                    continue;
                }
                assert!(sm.c[(r, c)].is_zero());
            }
        }
    }

    #[test]
    fn zero_connection_gives_zero_stokes_and_back() {
        let sys = resonant4x4();
        let cm = cm_from_k(&sys, Matrix::zero(P, 4, 4), Float::new(P));
        let sm = connection_to_stokes(&cm, &sys).unwrap();
        assert!(sm.c.max_abs().is_zero());
        let back = stokes_to_connection(&sm, &sys).unwrap();
        assert!(back.total.max_abs().is_zero());
    }

    #[test]
    fn round_trip_on_boxed_values() {
        let sys = resonant4x4();
        let cm = cm_from_k(&sys, exact_k_4x4(), Float::new(P));
        let sm = connection_to_stokes(&cm, &sys).unwrap();
        let back = stokes_to_connection(&sm, &sys).unwrap();
        let err = back.total.sub(&cm.total).max_abs();
        assert!(err < two_pow(P, -200), "round trip err {err:e}");
    }

    #[test]
    fn diagonal_case_matches_hankel_integral() {
        // all n_j = 1: single entry k at (j,k): C = κ₀(λ_j-λ_k)·k,
        // cross-checked against the numerical Hankel integral.
        let blocks = vec![
            JordanBlockSpec { a: Complex::zero(P), lam: Complex::zero(P), size: 1 },
            JordanBlockSpec {
                a: Complex::one(P),
                lam: Complex::from_parts_f64(P, 0.35, -0.6),
                size: 1,
            },
        ];
        let mut b2 = Matrix::zero(P, 2, 2);
        b2[(1, 0)] = Complex::one(P);
        let sys = LevelOneSystem::new(blocks, vec![Matrix::zero(P, 2, 2), b2]);
        let mut k = Matrix::zero(P, 2, 2);
        k[(1, 0)] = Complex::from_parts_f64(P, 1.7, 0.4);
        let cm = cm_from_k(&sys, k.clone(), Float::new(P));
        let sm = connection_to_stokes(&cm, &sys).unwrap();
        let hank = hankel_connection_integral(&sys, &k);
        let d = sm.c[(1, 0)].dist(&hank[(1, 0)]);
        let rel = (d / sm.c[(1, 0)].abs()).to_f64();
        assert!(rel < 1e-8, "hankel cross-check rel err {rel:e}");
    }

    #[test]
    fn hankel_integral_reproduces_kappa_with_logs() {
        // ∫ ξ^{t-1} lnᵖξ e^{-ξ} dξ over γ₀ = κ_p(t)
        let table = KappaTable::new(P);
        for (t_re, t_im, p) in [(0.0, 0.0, 0u32), (0.3, -0.2, 1), (0.45, 0.15, 2)] {
            let t = Complex::from_parts_f64(P, t_re, t_im);
            let got = hankel_power_integral(P, &t, p, 1e-3, 50.0);
            let want = table.kappa(p as usize, &t);
            let rel = (got.dist(&want) / want.abs()).to_f64();
            assert!(rel < 1e-8, "t=({t_re},{t_im}) p={p}: rel {rel:e}");
        }
    }

    #[test]
    fn random_pattern_round_trips() {
        // round trip on pattern-respecting K for block shapes up to n = 8
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let shapes: Vec<Vec<(f64, f64, usize)>> = vec![
            vec![(0.0, 0.0, 1), (1.0, 0.31, 2)],
            vec![(0.0, 0.0, 2), (1.0, 0.0, 3), (-1.0, 0.77, 3)],
            vec![(0.0, 0.0, 1), (2.0, 0.5, 3), (1.0, 0.9, 2), (-1.0, 0.0, 2)],
        ];
        for shape in &shapes {
            let blocks: Vec<JordanBlockSpec> = shape
                .iter()
                .map(|&(a, lam, size)| JordanBlockSpec {
                    a: Complex::from_f64(P, a),
                    lam: Complex::from_f64(P, lam),
                    size,
                })
                .collect();
            let n: usize = shape.iter().map(|s| s.2).sum();
            let sys = LevelOneSystem::new(blocks, vec![Matrix::zero(P, n, n)]);
            let st = sys.structure();
            // K supported on blocks with a_j - a_k = 1 (θ* = 0 ray)
            let mut k = Matrix::zero(P, n, n);
            for j in 0..st.count() {
                for kb in 0..st.count() {
                    let d = sys.blocks[j].a.sub(&sys.blocks[kb].a);
                    if d.dist(&Complex::one(P)).to_f64() > 1e-30 {
                        continue;
                    }
                    for r in 0..st.sizes[j] {
                        for c in 0..st.sizes[kb] {
                            k[(st.offsets[j] + r, st.offsets[kb] + c)] = Complex::from_parts_f64(
                                P,
                                rng.gen_range(-2.0..2.0),
                                rng.gen_range(-2.0..2.0),
                            );
                        }
                    }
                }
            }
            let cm = cm_from_k(&sys, k.clone(), Float::new(P));
            let sm = connection_to_stokes(&cm, &sys).unwrap();
            let back = stokes_to_connection(&sm, &sys).unwrap();
            let err = back.total.sub(&k).max_abs().to_f64();
            assert!(err < 1e-10, "round trip {err:e}");
        }
    }

    #[test]
    fn delta_split_sums_back_exactly() {
        let sys = resonant4x4();
        let cm = cm_from_k(&sys, exact_k_4x4(), Float::new(P));
        let sm = connection_to_stokes(&cm, &sys).unwrap();
        let parts = delta_plus_split(&sm, &sys);
        assert_eq!(parts.len(), 1);
        let mut sum = Matrix::zero(P, 4, 4);
        for (_, m) in &parts {
            sum = sum.add(m);
        }
        assert!(sum.sub(&sm.c).max_abs().is_zero(), "bitwise resum");
    }
}
