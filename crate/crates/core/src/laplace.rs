//! Lateral Borel-Laplace summation and Stokes matrices from lateral jumps.
//!
//! The sum to the right (left) of an anti-Stokes direction θ is the Laplace
//! integral of the Borel transform along the ray rotated by -ε (+ε). The
//! jump between the two lateral sums of the same column block is a linear
//! expression in the unknown Stokes multipliers, solved in least squares
//! over a grid of sample points on the bisector.

use crate::borel_ode::BlockOdeWalker;
use crate::connstokes::{gauss_legendre, StokesMatrix};
use crate::error::{CoreError, Result};
use crate::homological::{borel_first_block, solve_homological, BorelBlockSeries, Cols};
use crate::matrix::Matrix;
use crate::num::{pi, two_pow, Complex};
use crate::path::PathSpec;
use crate::system::{principal_arg, stokes_values, LevelOneSystem};
use rug::Float;

/// Which side of the direction the sum continues from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// s_{θ⁺}: limit of sums from θ - ε (passes singularities positively).
    Plus,
    /// s_{θ⁻}: limit of sums from θ + ε.
    Minus,
}

/// One lateral-sum evaluation.
#[derive(Clone, Debug)]
pub struct LateralSumSample {
    pub x: Complex,
    pub side: Side,
    /// n × n_cols value of the lateral sum of the column block
    pub value: Matrix,
    /// crude quadrature error estimate (coarse/fine node difference)
    pub quad_error: Float,
}

/// Cached Borel values of one column block along a rotated ray.
pub struct RayCache {
    /// ray direction e^{iθ'}
    pub dir: Complex,
    /// panel-ordered node abscissas t and Gauss weights (fine rule)
    nodes: Vec<(Float, Float)>,
    /// coarse-rule flags: nodes also used by the embedded coarse rule
    values: Vec<Matrix>,
    coarse: Vec<(Float, Float)>,
    coarse_values: Vec<Matrix>,
    delta: Matrix,
}

fn ray_panels(prec: u32, sys: &LevelOneSystem, cb0: usize, t_max: f64) -> Vec<(f64, f64)> {
    // panel edges: fine near the origin, geometric growth, plus splits near
    // the moduli of the singular values projected on the ray
    let mut marks = vec![0.0f64];
    let mut t = 0.05f64;
    while t < t_max {
        marks.push(t);
        t *= 1.7;
    }
    marks.push(t_max);
    let tolv = sys.value_tol();
    for b in &sys.blocks {
        let d = b.a.sub(&sys.blocks[cb0].a);
        if d.abs() > tolv {
            let m = d.abs().to_f64();
            if m < t_max {
                marks.push(m * 0.8);
                marks.push(m);
                marks.push(m * 1.25);
            }
        }
    }
    let _ = prec;
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    marks.windows(2).map(|w| (w[0], w[1])).collect()
}

impl RayCache {
    /// March the Borel ODE along the ray once, collecting values at every
    /// quadrature node of both the fine and the embedded coarse rule.
    pub fn build(
        sys: &LevelOneSystem,
        cb: usize,
        order: usize,
        theta_prime: &Float,
        t_max: f64,
    ) -> Result<RayCache> {
        let prec = sys.prec();
        let cb0 = cb - 1;
        let f = solve_homological(sys, order, Cols::Block(cb))?;
        let borel = borel_first_block(&f)?;
        let (s, c) = theta_prime.clone().sin_cos(Float::new(prec));
        let dir = Complex { re: c, im: s };

        let panels = ray_panels(prec, sys, cb0, t_max);
        let fine = gauss_legendre(prec, 32);
        let coarse = gauss_legendre(prec, 16);
        let mut nodes: Vec<(Float, Float)> = Vec::new();
        let mut coarse_nodes: Vec<(Float, Float)> = Vec::new();
        for (a, b) in &panels {
            // exact dyadic edges; do the midpoint arithmetic at precision
            let fa = Float::with_val(prec, *a);
            let fb = Float::with_val(prec, *b);
            let half = Float::with_val(prec, Float::with_val(prec, &fb - &fa) / 2u32);
            let mid = Float::with_val(prec, Float::with_val(prec, &fb + &fa) / 2u32);
            for (xk, wk) in &fine {
                let t = Float::with_val(prec, Float::with_val(prec, &half * xk) + &mid);
                let w = Float::with_val(prec, &half * wk);
                nodes.push((t, w));
            }
            for (xk, wk) in &coarse {
                let t = Float::with_val(prec, Float::with_val(prec, &half * xk) + &mid);
                let w = Float::with_val(prec, &half * wk);
                coarse_nodes.push((t, w));
            }
        }
        // march in order of increasing t, taking series values inside the
        // convergence disc and ODE continuation beyond
        let mut rho_min = Float::with_val(prec, 1e30);
        for b in &sys.blocks {
            let d = b.a.sub(&sys.blocks[cb0].a);
            if d.abs() > sys.value_tol() && d.abs() < rho_min {
                rho_min = d.abs();
            }
        }
        let series_cut = Float::with_val(prec, &rho_min / 5u32);
        let seed = dir.scale(&series_cut);
        let mut walker = BlockOdeWalker::new(sys, cb, &borel, &seed)?;

        let mut all: Vec<(usize, bool, Float)> = Vec::new();
        for (i, (t, _)) in nodes.iter().enumerate() {
            all.push((i, true, t.clone()));
        }
        for (i, (t, _)) in coarse_nodes.iter().enumerate() {
            all.push((i, false, t.clone()));
        }
        all.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());

        let mut values = vec![Matrix::zero(prec, sys.n, borel.coeffs[0].cols); nodes.len()];
        let mut coarse_values = vec![Matrix::zero(prec, sys.n, borel.coeffs[0].cols); coarse_nodes.len()];
        for (i, is_fine, t) in all {
            let xi = dir.scale(&t);
            let v = if t <= series_cut {
                // direct series evaluation inside the disc
                let mut acc = Matrix::zero(prec, sys.n, borel.coeffs[0].cols);
                for m in (0..=borel.order()).rev() {
                    acc = acc.scale(&xi).add(&borel.coeffs[m]);
                }
                acc
            } else {
                walker.advance_to(&xi)?;
                walker.value().clone()
            };
            if is_fine {
                values[i] = v;
            } else {
                coarse_values[i] = v;
            }
        }
        Ok(RayCache {
            dir,
            nodes,
            values,
            coarse: coarse_nodes,
            coarse_values,
            delta: borel.delta.clone(),
        })
    }

    /// Laplace integral at x: δ-part + ∫ Ĝ(ξ)e^{-ξ/x} dξ along the ray.
    pub fn laplace_at(&self, x: &Complex) -> (Matrix, Float) {
        let prec = x.prec();
        let inv_x = x.recip();
        let quad = |nodes: &[(Float, Float)], values: &[Matrix]| {
            let mut acc = Matrix::zero(prec, values[0].rows, values[0].cols);
            for ((t, w), v) in nodes.iter().zip(values) {
                let xi = self.dir.scale(t);
                let e = xi.mul(&inv_x).neg().exp();
                let factor = e.mul(&self.dir).scale(w);
                acc = acc.add(&v.scale(&factor));
            }
            acc
        };
        let fine = quad(&self.nodes, &self.values);
        let coarse = quad(&self.coarse, &self.coarse_values);
        let err = fine.sub(&coarse).max_abs();
        (fine.add(&self.delta), err)
    }
}

/// Lateral offset ε: min(0.05, angular gap to the nearest other anti-Stokes
/// direction / 4).
pub fn lateral_epsilon(sys: &LevelOneSystem, theta_star: &Float) -> Float {
    let prec = sys.prec();
    let sv = stokes_values(sys);
    let mut gap = Float::with_val(prec, 2 * &pi(prec));
    for d in &sv.directions {
        let mut diff = Float::with_val(prec, &d.theta_star - theta_star).abs();
        let two_pi = Float::with_val(prec, 2 * &pi(prec));
        while diff > Float::with_val(prec, &two_pi / 2u32) {
            diff = Float::with_val(prec, &diff - &two_pi).abs();
        }
        if diff.to_f64() > 1e-12 && diff < gap {
            gap = diff;
        }
    }
    let quarter = Float::with_val(prec, &gap / 4u32);
    let cap = Float::with_val(prec, 0.05);
    if quarter < cap {
        quarter
    } else {
        cap
    }
}

/// How far along the ray the integral must run before the kernel tail is
/// negligible at every sample |x| ≤ x_max.
fn ray_horizon(prec: u32, x_max: f64, eps: f64) -> f64 {
    let digits = prec as f64 * std::f64::consts::LN_2 + 24.0;
    x_max * digits / eps.cos()
}

/// Compute the lateral sum of one column block at one point.
pub fn lateral_sum(
    sys: &LevelOneSystem,
    cb: usize,
    order: usize,
    theta_star: &Float,
    side: Side,
    x: &Complex,
) -> Result<LateralSumSample> {
    let prec = sys.prec();
    let eps = lateral_epsilon(sys, theta_star);
    let theta_prime = match side {
        Side::Plus => Float::with_val(prec, theta_star - &eps),
        Side::Minus => Float::with_val(prec, theta_star + &eps),
    };
    let horizon = ray_horizon(prec, x.abs().to_f64(), eps.to_f64());
    let cache = RayCache::build(sys, cb, order, &theta_prime, horizon)?;
    let (value, quad_error) = cache.laplace_at(x);
    Ok(LateralSumSample { x: x.clone(), side, value, quad_error })
}

/// Jump-fit result with its linear-system residual.
#[derive(Clone, Debug)]
pub struct JumpFit {
    pub stokes: StokesMatrix,
    pub residual: Float,
    pub quad_error: Float,
}

/// Extract the Stokes matrix in direction θ* from the jumps of lateral sums
/// over a grid of sample points on the bisecting ray.
pub fn stokes_from_jumps(
    sys: &LevelOneSystem,
    theta_star: &Float,
    order: usize,
    rhos: &[f64],
) -> Result<JumpFit> {
    let prec = sys.prec();
    let st = sys.structure();
    let tol = sys.value_tol();
    let angle_tol = sys.angle_tol();
    let sv = stokes_values(sys);
    let eps = lateral_epsilon(sys, theta_star);
    let (sin_t, cos_t) = theta_star.clone().sin_cos(Float::new(prec));
    let dir_x = Complex { re: cos_t, im: sin_t };

    // unknown pattern: blocks (j,k) with a_j - a_k on the θ* ray
    let mut unknowns: Vec<(usize, usize, usize, usize, Complex)> = Vec::new(); // (j,k,l,r,ω)
    for j in 0..st.count() {
        for k in 0..st.count() {
            let d = sys.blocks[j].a.sub(&sys.blocks[k].a);
            if d.abs() <= tol {
                continue;
            }
            let da = principal_arg(&d.arg());
            let diff = Float::with_val(prec, &da - theta_star).abs();
            let two_pi = Float::with_val(prec, 2 * &pi(prec));
            let wrapped = Float::with_val(prec, &diff - &two_pi).abs();
            if diff > angle_tol && wrapped > angle_tol {
                continue;
            }
            for l in 0..st.sizes[j] {
                for r in 0..st.sizes[k] {
                    unknowns.push((j, k, l, r, d.clone()));
                }
            }
        }
    }
    let zero_c = StokesMatrix { theta_star: theta_star.clone(), c: Matrix::zero(prec, sys.n, sys.n) };
    if unknowns.is_empty() {
        return Ok(JumpFit { stokes: zero_c, residual: Float::new(prec), quad_error: Float::new(prec) });
    }
    if rhos.len() < 2 {
        return Err(CoreError::IllConditioned("need at least two sample moduli".into()));
    }

    // ray caches per column block and side
    let x_max = rhos.iter().cloned().fold(0.0f64, f64::max);
    let horizon = ray_horizon(prec, x_max, eps.to_f64());
    let theta_p = Float::with_val(prec, theta_star - &eps);
    let theta_m = Float::with_val(prec, theta_star + &eps);
    let mut plus_cache = Vec::new();
    let mut minus_cache = Vec::new();
    for cb in 1..=st.count() {
        plus_cache.push(RayCache::build(sys, cb, order, &theta_p, horizon)?);
        minus_cache.push(RayCache::build(sys, cb, order, &theta_m, horizon)?);
    }

    // assemble equations: per sample, per matrix entry
    let nu = unknowns.len();
    let mut rows_a: Vec<Vec<Complex>> = Vec::new();
    let mut rows_b: Vec<Complex> = Vec::new();
    let mut quad_worst = Float::new(prec);
    for rho in rhos {
        let x = dir_x.scale(&Float::with_val(prec, *rho));
        let ln_x = Complex { re: Float::with_val(prec, rho.ln()), im: theta_star.clone() };
        // lateral sums of the full matrix
        let mut s_plus = Matrix::zero(prec, sys.n, sys.n);
        let mut s_minus = Matrix::zero(prec, sys.n, sys.n);
        for cb in 1..=st.count() {
            let (vp, ep) = plus_cache[cb - 1].laplace_at(&x);
            let (vm, em) = minus_cache[cb - 1].laplace_at(&x);
            if ep > quad_worst {
                quad_worst = ep.clone();
            }
            if em > quad_worst {
                quad_worst = em.clone();
            }
            for rr in 0..sys.n {
                for cc in 0..st.sizes[cb - 1] {
                    s_plus[(rr, st.offsets[cb - 1] + cc)] = vp[(rr, cc)].clone();
                    s_minus[(rr, st.offsets[cb - 1] + cc)] = vm[(rr, cc)].clone();
                }
            }
        }
        let jump = s_plus.sub(&s_minus);
        // coefficient of unknown (j,k,l,r): s_minus · e^{-ω/x} x^L E x^{-L}
        // where (x^L E_{(j,l),(k,r)} x^{-L})_{(j,l̃),(k,r̃)} is supported on
        // l̃ ≤ l, r̃ ≥ r with log factors.
        let mut coeff_mats: Vec<Matrix> = Vec::with_capacity(nu);
        for (j, k, l, r, omega) in &unknowns {
            let lamd = sys.blocks[*j].lam.sub(&sys.blocks[*k].lam);
            let e_fac = omega.div(&x).neg().exp();
            let x_lam = lamd.mul(&ln_x).exp();
            let mut conj = Matrix::zero(prec, sys.n, sys.n);
            for lt in 0..=*l {
                for rt in *r..st.sizes[*k] {
                    // (x^{J} E x^{-J}) entry: ln^{l-lt}/ (l-lt)! · (-ln)^{rt-r}/(rt-r)!
                    let mut w = Complex::one(prec);
                    for t in 0..(l - lt) {
                        w = w.mul(&ln_x).div_i64((t + 1) as i64);
                    }
                    for t in 0..(rt - r) {
                        w = w.mul(&ln_x.neg()).div_i64((t + 1) as i64);
                    }
                    conj[(st.offsets[*j] + lt, st.offsets[*k] + rt)] = w;
                }
            }
            let m = s_minus.mul(&conj).scale(&e_fac.mul(&x_lam));
            coeff_mats.push(m);
        }
        // one equation per entry of the jump columns touched by the pattern
        for cc in 0..sys.n {
            let k_block = st.block_of(cc);
            if !unknowns.iter().any(|u| u.1 == k_block) {
                continue;
            }
            for rr in 0..sys.n {
                let mut row: Vec<Complex> = Vec::with_capacity(nu);
                for m in &coeff_mats {
                    row.push(m[(rr, cc)].clone());
                }
                rows_a.push(row);
                rows_b.push(jump[(rr, cc)].clone());
            }
        }
    }

    // row equilibration and least squares
    let neq = rows_a.len();
    let mut a = Matrix::zero(prec, neq, nu);
    let mut b = Matrix::zero(prec, neq, 1);
    for (i, row) in rows_a.iter().enumerate() {
        let mut scale = Float::new(prec);
        for c in row {
            let v = c.abs();
            if v > scale {
                scale = v;
            }
        }
        if scale.is_zero() {
            scale = Float::with_val(prec, 1);
        }
        let inv = Float::with_val(prec, 1 / &scale);
        for (jx, c) in row.iter().enumerate() {
            a[(i, jx)] = c.scale(&inv);
        }
        b[(i, 0)] = rows_b[i].scale(&inv);
    }
    let sol = a.lstsq(&b).map_err(|_| CoreError::IllConditioned("jump-fit design".into()))?;
    // residual
    let mut res = Float::new(prec);
    for i in 0..neq {
        let mut acc = Complex::zero(prec);
        for jx in 0..nu {
            acc = acc.add(&a[(i, jx)].mul(&sol[(jx, 0)]));
        }
        let d = acc.dist(&b[(i, 0)]);
        if d > res {
            res = d;
        }
    }
    let mut c = Matrix::zero(prec, sys.n, sys.n);
    for (u, (j, k, l, r, _)) in unknowns.iter().enumerate() {
        c[(st.offsets[*j] + l, st.offsets[*k] + r)] = sol[(u, 0)].clone();
    }
    let _ = sv;
    let sm = StokesMatrix { theta_star: theta_star.clone(), c };
    sm.validate(sys)?;
    Ok(JumpFit { stokes: sm, residual: res, quad_error: quad_worst })
}

/// Direct Laplace transform of a germ-free convergent series along a ray —
/// sanity helper: a convergent series' lateral sum equals its plain value.
pub fn laplace_of_series(
    series: &BorelBlockSeries,
    theta_prime: &Float,
    x: &Complex,
    t_max: f64,
) -> Matrix {
    let prec = x.prec();
    let (s, c) = theta_prime.clone().sin_cos(Float::new(prec));
    let dir = Complex { re: c, im: s };
    let gl = gauss_legendre(prec, 48);
    let mut edges = vec![0.0f64, 0.05];
    let mut t = 0.05;
    while t < t_max {
        t *= 1.6;
        edges.push(t.min(t_max));
    }
    let mut acc = Matrix::zero(prec, series.coeffs[0].rows, series.coeffs[0].cols);
    let inv_x = x.recip();
    for w in edges.windows(2) {
        let fa = Float::with_val(prec, w[0]);
        let fb = Float::with_val(prec, w[1]);
        let half = Float::with_val(prec, Float::with_val(prec, &fb - &fa) / 2u32);
        let mid = Float::with_val(prec, Float::with_val(prec, &fb + &fa) / 2u32);
        for (xk, wk) in &gl {
            let tt = Float::with_val(prec, Float::with_val(prec, &half * xk) + &mid);
            let xi = dir.scale(&tt);
            let mut v = Matrix::zero(prec, series.coeffs[0].rows, series.coeffs[0].cols);
            for m in (0..=series.order()).rev() {
                v = v.scale(&xi).add(&series.coeffs[m]);
            }
            let e = xi.mul(&inv_x).neg().exp();
            let wgt = Float::with_val(prec, &half * wk);
            acc = acc.add(&v.scale(&e.mul(&dir).scale(&wgt)));
        }
    }
    acc.add(&series.delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::DEFAULT_PREC as P;
    use crate::system::JordanBlockSpec;

    fn euler_subsystem() -> LevelOneSystem {
        let blocks = vec![
            JordanBlockSpec { a: Complex::zero(P), lam: Complex::zero(P), size: 1 },
            JordanBlockSpec { a: Complex::one(P), lam: Complex::zero(P), size: 1 },
        ];
        let mut b2 = Matrix::zero(P, 2, 2);
        b2[(1, 0)] = Complex::one(P);
        LevelOneSystem::new(blocks, vec![Matrix::zero(P, 2, 2), b2])
    }

    #[test]
    fn lateral_sums_agree_off_stokes_directions() {
        // θ = π carries no Stokes value of the first column block of the
        // Euler system; the two lateral sums agree to quadrature accuracy.
        let sys = euler_subsystem();
        let theta = Float::with_val(P, -&pi(P));
        let x = Complex::from_f64(P, -0.1);
        let p = lateral_sum(&sys, 1, 40, &theta, Side::Plus, &x).unwrap();
        let m = lateral_sum(&sys, 1, 40, &theta, Side::Minus, &x).unwrap();
        let d = p.value.sub(&m.value).max_abs();
        assert!(d.to_f64() < 1e-25, "lateral mismatch {:e}", d);
        // and the value matches an independent quadrature of the closed
        // form 1 - 1/(1-ξ) along the undeflected ray
        let gl = gauss_legendre(P, 64);
        let one = Complex::one(P);
        let neg = Complex::from_i64(P, -1);
        let invx = x.recip();
        let mut acc = Complex::zero(P);
        let mut edges = vec![0.0f64, 0.05];
        let mut t = 0.05f64;
        while t < 25.0 {
            t *= 1.35;
            edges.push(t.min(25.0));
        }
        for w in edges.windows(2) {
            let fa = Float::with_val(P, w[0]);
            let fb = Float::with_val(P, w[1]);
            let half = Float::with_val(P, Float::with_val(P, &fb - &fa) / 2u32);
            let mid = Float::with_val(P, Float::with_val(P, &fb + &fa) / 2u32);
            for (xk, wk) in &gl {
                let tt = Float::with_val(P, Float::with_val(P, &half * xk) + &mid);
                let xi = neg.scale(&tt);
                let f = one.sub(&one.div(&one.sub(&xi)));
                let e = xi.mul(&invx).neg().exp();
                acc = acc.add(&f.mul(&e).mul(&neg).scale(&Float::with_val(P, &half * wk)));
            }
        }
        let dd = p.value[(1, 0)].dist(&acc);
        assert!(dd.to_f64() < 1e-25, "closed-form quadrature mismatch {:e}", dd);
    }

    #[test]
    fn euler_jump_reproduces_two_pi_i() {
        // s_{0+} - s_{0-} = 2πi e^{-1/x} for the Euler-type entry
        let sys = euler_subsystem();
        let theta = Float::new(P);
        let x = Complex::from_f64(P, 0.1);
        let p = lateral_sum(&sys, 1, 40, &theta, Side::Plus, &x).unwrap();
        let m = lateral_sum(&sys, 1, 40, &theta, Side::Minus, &x).unwrap();
        let jump = p.value.sub(&m.value);
        let expect = Complex {
            re: Float::new(P),
            im: Float::with_val(P, 2 * &pi(P)),
        }
        .mul(&Complex::from_f64(P, -10.0).exp());
        let rel = (jump[(1, 0)].dist(&expect) / expect.abs()).to_f64();
        assert!(rel < 1e-9, "jump rel err {rel:e}");
        assert!(jump[(0, 0)].abs().to_f64() < 1e-30);
    }

    #[test]
    fn zero_series_sums_to_zero_jump() {
        let mut sys = euler_subsystem();
        sys.b_coeffs = vec![];
        // B = 0: F̃ = I, the Borel part vanishes; both sides equal I-slice
        let f = solve_homological(&sys, 10, Cols::FirstBlock).unwrap();
        let borel = borel_first_block(&f).unwrap();
        let x = Complex::from_f64(P, 0.08);
        let v = laplace_of_series(&borel, &Float::new(P), &x, 10.0);
        assert!(v[(1, 0)].is_zero());
        assert!(v[(0, 0)].dist(&Complex::one(P)).to_f64() < 1e-40);
    }
}
