//! Near-diagonal Padé approximants: exact rational detection and stepwise
//! re-expansion along a path.

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::num::{two_pow, Complex};
use crate::series::{TruncatedSeries, Var};
use rug::Float;

/// A rational function P/Q with Q(0) = 1.
#[derive(Clone, Debug)]
pub struct RationalFn {
    pub num: Vec<Complex>,
    pub den: Vec<Complex>,
}

impl RationalFn {
    pub fn eval(&self, z: &Complex) -> Complex {
        poly_eval(&self.num, z).div(&poly_eval(&self.den, z))
    }

    /// Poles as f64 approximations (for clearance checks).
    pub fn pole_guesses(&self) -> Vec<(f64, f64)> {
        poly_roots_f64(&self.den)
    }
}

pub fn poly_eval(p: &[Complex], z: &Complex) -> Complex {
    let prec = z.prec();
    let mut acc = Complex::zero(prec);
    for c in p.iter().rev() {
        acc = acc.mul(z).add(c);
    }
    acc
}

/// Taylor-shift a polynomial: coefficients of p(h + u) in u.
pub fn poly_shift_pub(p: &[Complex], h: &Complex) -> Vec<Complex> {
    poly_shift(p, h)
}

fn poly_shift(p: &[Complex], h: &Complex) -> Vec<Complex> {
    let n = p.len();
    let mut work = p.to_vec();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        for m in (j..n.saturating_sub(1)).rev() {
            let t = work[m + 1].mul(h);
            work[m] = work[m].add(&t);
        }
        out.push(work[j].clone());
    }
    out
}

fn poly_roots_f64(p: &[Complex]) -> Vec<(f64, f64)> {
    // Durand-Kerner on f64; step control only, not a deliverable value.
    let deg = p.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let a: Vec<(f64, f64)> = p.iter().map(|c| c.to_f64_pair()).collect();
    let cx = |re: f64, im: f64| (re, im);
    let cmul = |x: (f64, f64), y: (f64, f64)| (x.0 * y.0 - x.1 * y.1, x.0 * y.1 + x.1 * y.0);
    let csub = |x: (f64, f64), y: (f64, f64)| (x.0 - y.0, x.1 - y.1);
    let cdiv = |x: (f64, f64), y: (f64, f64)| {
        let d = y.0 * y.0 + y.1 * y.1;
        ((x.0 * y.0 + x.1 * y.1) / d, (x.1 * y.0 - x.0 * y.1) / d)
    };
    let peval = |z: (f64, f64)| {
        let mut acc = cx(0.0, 0.0);
        for c in a.iter().rev() {
            acc = cmul(acc, z);
            acc = (acc.0 + c.0, acc.1 + c.1);
        }
        acc
    };
    let mut roots: Vec<(f64, f64)> = (0..deg)
        .map(|k| {
            let ang = 0.7 + 2.0 * std::f64::consts::PI * k as f64 / deg as f64;
            (1.3 * ang.cos(), 1.3 * ang.sin())
        })
        .collect();
    let lead = a[deg];
    for _ in 0..200 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let mut den = lead;
            for j in 0..deg {
                if i != j {
                    den = cmul(den, csub(roots[i], roots[j]));
                }
            }
            if den.0 == 0.0 && den.1 == 0.0 {
                continue;
            }
            let delta = cdiv(peval(roots[i]), den);
            roots[i] = csub(roots[i], delta);
            moved = moved.max(delta.0.hypot(delta.1));
        }
        if moved < 1e-13 {
            break;
        }
    }
    roots
}

/// Does the segment [0, u] cross the approximant's pole string?
///
/// The poles of a near-diagonal approximant line up along the branch cut
/// of the function the data encodes; stepping between two adjacent poles
/// silently lands on the principal sheet. The guard computes all nearby
/// denominator roots (variable scaled to the step length) and refuses when
/// the segment passes a pole closer than the local string spacing.
fn segment_hits_pole(q: &[Complex], u: &Complex) -> bool {
    let uf = u.to_f64_pair();
    let ulen = uf.0.hypot(uf.1);
    if ulen == 0.0 || q.len() < 2 {
        return false;
    }
    // scale the variable so the region of interest is |w| ~ 1
    let scale = 8.0 * ulen;
    let mut qf: Vec<(f64, f64)> = q
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let (re, im) = c.to_f64_pair();
            let f = scale.powi(k as i32);
            (re * f, im * f)
        })
        .collect();
    let mx = qf.iter().map(|c| c.0.hypot(c.1)).fold(0.0f64, f64::max);
    if mx == 0.0 || !mx.is_finite() {
        return false;
    }
    for c in qf.iter_mut() {
        c.0 /= mx;
        c.1 /= mx;
    }
    // drop negligible leading coefficients to keep Durand-Kerner sane
    while let Some(last) = qf.last() {
        if last.0.hypot(last.1) < 1e-12 && qf.len() > 2 {
            qf.pop();
        } else {
            break;
        }
    }
    let deg = qf.len() - 1;
    if deg == 0 {
        return false;
    }
    let cmul = |x: (f64, f64), y: (f64, f64)| (x.0 * y.0 - x.1 * y.1, x.0 * y.1 + x.1 * y.0);
    let csub = |x: (f64, f64), y: (f64, f64)| (x.0 - y.0, x.1 - y.1);
    let cdiv = |x: (f64, f64), y: (f64, f64)| {
        let d = y.0 * y.0 + y.1 * y.1;
        ((x.0 * y.0 + x.1 * y.1) / d, (x.1 * y.0 - x.0 * y.1) / d)
    };
    let eval = |z: (f64, f64)| {
        let mut acc = (0.0, 0.0);
        for c in qf.iter().rev() {
            acc = cmul(acc, z);
            acc = (acc.0 + c.0, acc.1 + c.1);
        }
        acc
    };
    let lead = qf[deg];
    let mut roots: Vec<(f64, f64)> = (0..deg)
        .map(|k| {
            let ang = 0.4 + 2.0 * std::f64::consts::PI * k as f64 / deg as f64;
            (1.1 * ang.cos(), 1.1 * ang.sin())
        })
        .collect();
    for _ in 0..300 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let mut den = lead;
            for j in 0..deg {
                if i != j {
                    den = cmul(den, csub(roots[i], roots[j]));
                }
            }
            if den.0 == 0.0 && den.1 == 0.0 {
                continue;
            }
            let delta = cdiv(eval(roots[i]), den);
            roots[i] = csub(roots[i], delta);
            moved = moved.max(delta.0.hypot(delta.1));
        }
        if moved < 1e-12 {
            break;
        }
    }
    // back to the unscaled frame, keep roots within a few step lengths
    let near: Vec<(f64, f64)> = roots
        .iter()
        .map(|r| (r.0 * scale, r.1 * scale))
        .filter(|r| r.0.is_finite() && r.1.is_finite() && r.0.hypot(r.1) < 24.0 * ulen)
        .collect();
    if near.len() < 2 {
        return false;
    }
    let seg_dist = |p: (f64, f64)| {
        let t = ((p.0 * uf.0 + p.1 * uf.1) / (ulen * ulen)).clamp(0.0, 1.0);
        (p.0 - uf.0 * t).hypot(p.1 - uf.1 * t)
    };
    for (i, p) in near.iter().enumerate() {
        let d = seg_dist(*p);
        let spacing = near
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| (p.0 - q.0).hypot(p.1 - q.1))
            .fold(f64::INFINITY, f64::min);
        if spacing.is_finite() && d < 0.7 * spacing {
            return true;
        }
    }
    false
}

/// Compute the [l/m] Padé approximant of the series (q_0 = 1).
pub fn pade(coeffs: &[Complex], l: usize, m: usize) -> Result<RationalFn> {
    assert!(l + m < coeffs.len(), "series too short for [{l}/{m}]");
    let prec = coeffs.iter().map(|c| c.prec()).min().unwrap();
    let mut den = vec![Complex::one(prec)];
    if m > 0 {
        // Σ_{j=0..m} q_j c_{l+s-j} = 0 for s = 1..m
        let a = Matrix::from_fn(prec, m, m, |s, j| {
            let idx = l as isize + (s as isize + 1) - (j as isize + 1);
            if idx >= 0 && (idx as usize) < coeffs.len() {
                coeffs[idx as usize].clone()
            } else {
                Complex::zero(prec)
            }
        });
        let b = Matrix::from_fn(prec, m, 1, |s, _| coeffs[l + s + 1].neg());
        let q = a.solve(&b)?;
        for j in 0..m {
            den.push(q[(j, 0)].clone());
        }
    }
    let mut num = Vec::with_capacity(l + 1);
    for i in 0..=l {
        let mut acc = Complex::zero(prec);
        for j in 0..=i.min(m) {
            acc = acc.add(&den[j].mul(&coeffs[i - j]));
        }
        num.push(acc);
    }
    Ok(RationalFn { num, den })
}

/// Expand P/Q back into a Taylor series of the given order.
fn rational_series(r: &RationalFn, prec: u32, order: usize) -> Vec<Complex> {
    let mut out = Vec::with_capacity(order + 1);
    let q0 = &r.den[0];
    for i in 0..=order {
        let mut acc = if i < r.num.len() { r.num[i].clone() } else { Complex::zero(prec) };
        for j in 1..=i.min(r.den.len() - 1) {
            acc = acc.sub(&r.den[j].mul(&out[i - j]));
        }
        out.push(acc.div(q0));
    }
    out
}

/// Detect whether the series is (numerically exactly) a rational function:
/// scan denominator degrees upward and accept the first approximant that
/// reproduces every given coefficient to 2^{-precision/2} relative to the
/// coefficient scale.
pub fn detect_rational(coeffs: &[Complex]) -> Option<RationalFn> {
    let n = coeffs.len() - 1;
    let prec = coeffs.iter().map(|c| c.prec()).min()?;
    let scale = {
        let mut s = Float::new(prec);
        for c in coeffs {
            let a = c.abs();
            if a > s {
                s = a;
            }
        }
        if s.is_zero() {
            return Some(RationalFn { num: vec![Complex::zero(prec)], den: vec![Complex::one(prec)] });
        }
        s
    };
    let tol = Float::with_val(prec, two_pow(prec, -((prec / 2) as i32)) * &scale);
    for m in 0..=(n.saturating_sub(1)) / 2 {
        let l = n - 1 - m;
        let Ok(r) = pade(coeffs, l, m) else { continue };
        let back = rational_series(&r, prec, n);
        let ok = coeffs.iter().zip(&back).all(|(a, b)| a.dist(b) <= tol);
        if ok {
            return Some(r);
        }
    }
    None
}

/// Stepwise Padé re-expansion along a polyline: at each node the current
/// Taylor data is converted to a near-diagonal approximant, evaluated, and
/// shifted to the next center by exact polynomial shift plus series division.
pub struct PadeWalker {
    center: Complex,
    coeffs: Vec<Complex>,
    /// worst observed disagreement between consecutive-order approximants
    pub agreement: Float,
}

impl PadeWalker {
    pub fn new(series: &TruncatedSeries) -> Self {
        assert!(series.coeffs.len() >= 8, "need at least 8 coefficients");
        let prec = series.prec();
        PadeWalker {
            center: Complex::zero(prec),
            coeffs: series.coeffs.clone(),
            agreement: Float::new(prec),
        }
    }

    fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Value at z (relative to the absolute plane), with a stabilization
    /// estimate across three consecutive approximant orders.
    pub fn value(&mut self, z: &Complex) -> Result<Complex> {
        let u = z.sub(&self.center);
        let n = self.order();
        let m2 = (n - 1) / 2;
        let mut vals = Vec::new();
        for dm in 0..3usize {
            let m = m2.saturating_sub(dm);
            let l = n - 1 - m;
            let r = pade(&self.coeffs, l, m)?;
            vals.push(r.eval(&u));
        }
        let d01 = vals[0].dist(&vals[1]);
        let d02 = vals[0].dist(&vals[2]);
        let worst = if d01 > d02 { d01 } else { d02 };
        if worst > self.agreement {
            self.agreement = worst.clone();
        }
        Ok(vals[0].clone())
    }

    /// Current near-diagonal approximant (diagnostics).
    pub fn debug_pade(&self) -> Result<RationalFn> {
        let n = self.order();
        let m = (n - 1) / 2;
        pade(&self.coeffs, n - 1 - m, m)
    }

    /// Re-center the representation at `z` by re-expanding the current
    /// near-diagonal approximant.
    ///
    /// Rational re-expansion is numerically self-reproducing, so the walker
    /// is stable over long paths; the price is that the approximant is a
    /// fixed single-valued function whose pole field marks the branch cut
    /// of the principal determination. A step segment that runs into that
    /// pole field means the requested path leaves the domain the series
    /// data can represent, and is reported as non-stabilizing.
    pub fn step_to(&mut self, z: &Complex) -> Result<()> {
        let prec = self.coeffs[0].prec();
        let u = z.sub(&self.center);
        if u.is_zero() {
            return Ok(());
        }
        let n = self.order();
        let m = (n - 1) / 2;
        let l = n - 1 - m;
        let r = pade(&self.coeffs, l, m)?;
        // refuse to step into the approximant's pole field: a crossing means
        // the requested path leaves the principal domain encoded in the data
        if segment_hits_pole(&r.den, &u) {
            return Err(CoreError::NonStabilizing {
                achieved: format!("{:e}", self.agreement),
            });
        }
        let num = poly_shift(&r.num, &u);
        let den = poly_shift(&r.den, &u);
        if den[0].abs() < two_pow(prec, -((prec / 2) as i32)) {
            return Err(CoreError::NonStabilizing { achieved: format!("{:e}", self.agreement) });
        }
        self.coeffs = rational_series(&RationalFn { num, den }, prec, n);
        self.center = z.clone();
        Ok(())
    }

    /// Walk a polyline, refining steps to stay within half the distance to
    /// the singular support, and report values at the requested nodes.
    pub fn walk(
        &mut self,
        nodes: &[Complex],
        singular: &[Complex],
        report_at: &[usize],
    ) -> Result<Vec<Complex>> {
        let prec = self.coeffs[0].prec();
        let mut out = Vec::with_capacity(report_at.len());
        let mut want = report_at.iter().peekable();
        for (i, node) in nodes.iter().enumerate() {
            // substep toward node
            loop {
                let d = node.sub(&self.center);
                if d.is_zero() {
                    break;
                }
                let dist_sing = singular
                    .iter()
                    .map(|s| self.center.dist(s))
                    .fold(Float::with_val(prec, 1e30), |a, b| if b < a { b } else { a });
                let hmax = Float::with_val(prec, &dist_sing * 45u32) / 100u32;
                if d.abs() <= hmax {
                    self.step_to(node)?;
                    break;
                }
                let dir = d.scale(&Float::with_val(prec, hmax / d.abs()));
                let next = self.center.add(&dir);
                self.step_to(&next)?;
            }
            while let Some(&&w) = want.peek() {
                if w == i {
                    let node = node.clone();
                    out.push(self.value(&node)?);
                    want.next();
                } else {
                    break;
                }
            }
        }
        Ok(out)
    }
}

/// Continuation of a scalar ξ-series to a single point along a path.
///
/// Rung (i): if the series is detected to be exactly rational the closed
/// form is evaluated (rational functions are single-valued, so the path
/// only matters through its endpoint). Otherwise the stepwise Padé walker
/// re-expands along the path.
pub fn pade_continue(
    ts: &TruncatedSeries,
    path_nodes: &[Complex],
    singular: &[Complex],
) -> Result<Complex> {
    assert_eq!(ts.var, Var::Xi);
    let end = path_nodes.last().unwrap();
    if let Some(r) = detect_rational(&ts.coeffs) {
        return Ok(r.eval(end));
    }
    let mut walker = PadeWalker::new(ts);
    let last = path_nodes.len() - 1;
    let vals = walker.walk(path_nodes, singular, &[last])?;
    Ok(vals.into_iter().next().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::DEFAULT_PREC as P;

    fn geometric(order: usize) -> TruncatedSeries {
        // 1 - 1/(1-ξ) = -ξ/(1-ξ) = -Σ_{m≥1} ξ^m
        let mut c = vec![Complex::zero(P)];
        for _ in 1..=order {
            c.push(Complex::from_i64(P, -1));
        }
        TruncatedSeries::new(Var::Xi, c)
    }

    #[test]
    fn geometric_series_detected_as_rational() {
        let r = detect_rational(&geometric(40).coeffs).expect("rational");
        // evaluate at ζ = 2: 1 - 1/(1-2) = 2
        let v = r.eval(&Complex::from_i64(P, 2));
        assert!(v.dist(&Complex::from_i64(P, 2)) < two_pow(P, -200));
        // denominator degree 1
        assert!(r.den.len() == 2);
    }

    #[test]
    fn polynomial_series_is_detected_and_evaluated_exactly() {
        let mut c = vec![Complex::zero(P); 12];
        c[0] = Complex::from_f64(P, 3.0);
        c[3] = Complex::from_f64(P, -0.5);
        let ts = TruncatedSeries::new(Var::Xi, c);
        let r = detect_rational(&ts.coeffs).expect("polynomial is rational");
        let z = Complex::from_parts_f64(P, 1.7, -2.3);
        let want = ts.eval(&z);
        assert!(r.eval(&z).dist(&want) < two_pow(P, -200));
    }

    #[test]
    fn log_series_is_not_rational() {
        // ln(1-ξ) = -Σ ξ^m/m has no exact rational form
        let mut c = vec![Complex::zero(P)];
        for m in 1..=40i64 {
            c.push(Complex::from_i64(P, -1).div_i64(m));
        }
        assert!(detect_rational(&c).is_none());
    }

    #[test]
    fn rational_continuation_off_tube_accuracy() {
        // Padé continuation of a rational test series equals the closed
        // form to 1e-20 for |ζ| ≤ 3 off a ν = 0.1 tube around ℝ⁺∩sing.
        // f(ξ) = (1+ξ/3)/((1-ξ)(1+ξ/2)) with poles at 1 and -2.
        let prec = P;
        let mut c: Vec<Complex> = Vec::new();
        // series by division
        let num = [Complex::one(prec), Complex::one(prec).div_i64(3)];
        let den = [
            Complex::one(prec),
            Complex::from_f64(prec, -0.5),
            Complex::from_f64(prec, -0.5),
        ];
        for i in 0..=40usize {
            let mut acc = if i < num.len() { num[i].clone() } else { Complex::zero(prec) };
            for j in 1..=i.min(den.len() - 1) {
                acc = acc.sub(&den[j].mul(&c[i - j]));
            }
            c.push(acc.div(&den[0]));
        }
        let ts = TruncatedSeries::new(Var::Xi, c);
        let closed = |z: &Complex| {
            let n = Complex::one(prec).add(&z.div_i64(3));
            // same exact 1/3 as the series construction
            let d1 = Complex::one(prec).sub(z);
            let d2 = Complex::one(prec).add(&z.div_i64(2));
            n.div(&d1.mul(&d2))
        };
        let sing = [Complex::one(prec), Complex::from_i64(prec, -2)];
        for (re, im) in [(2.0, 1.0), (-1.0, 1.5), (0.5, -2.5), (2.9, -0.3), (-0.4, 0.2)] {
            let z = Complex::from_parts_f64(prec, re, im);
            let path = [Complex::zero(prec), z.clone()];
            let v = pade_continue(&ts, &path, &sing, ).unwrap();
            let w = closed(&z);
            assert!(
                v.dist(&w).to_f64() < 1e-20,
                "at ({re},{im}): err {:e}",
                v.dist(&w)
            );
        }
    }

    #[test]
    fn stepwise_walker_swings_around_a_branch_point() {
        // ĥ(ξ) = ln(1-ξ): walk to 0.5, then swing around ξ=1 from relative
        // argument -π up to -π/4 (staying on the principal domain).
        let prec = P;
        let mut c = vec![Complex::zero(prec)];
        for m in 1..=48i64 {
            c.push(Complex::from_i64(prec, -1).div_i64(m));
        }
        let ts = TruncatedSeries::new(Var::Xi, c);
        let sing = [Complex::one(prec)];
        let center = Complex::one(prec);
        let r = Float::with_val(prec, 0.5);
        let mut nodes = vec![Complex::zero(prec)];
        for k in 0..=18usize {
            // α from -π to -π/4
            let a = -std::f64::consts::PI * (1.0 - 0.75 * k as f64 / 18.0);
            let ang = Float::with_val(prec, a);
            let (s, co) = ang.sin_cos(Float::new(prec));
            nodes.push(center.add(&Complex { re: co, im: s }.scale(&r)));
        }
        let mut w = PadeWalker::new(&ts);
        let last = nodes.len() - 1;
        let got = w.walk(&nodes, &sing, &[last]).unwrap().remove(0);
        // at relative argument α: 1-ξ = -r e^{iα}, arg(1-ξ) = α + π
        let a_end = -std::f64::consts::FRAC_PI_4;
        let want = Complex::from_parts_f64(prec, 0.5f64.ln(), a_end + std::f64::consts::PI);
        assert!(got.dist(&want).to_f64() < 1e-5, "got {got:?}, want {want:?}");
        // a full clockwise loop would cross the approximant's pole field:
        // the walker must refuse rather than silently lose the sheet
        let mut loop_nodes = vec![Complex::zero(prec)];
        for k in 0..=48usize {
            let a = -std::f64::consts::PI * (1.0 + 2.0 * k as f64 / 48.0);
            let ang = Float::with_val(prec, a);
            let (s, co) = ang.sin_cos(Float::new(prec));
            loop_nodes.push(center.add(&Complex { re: co, im: s }.scale(&r)));
        }
        let mut w2 = PadeWalker::new(&ts);
        let last = loop_nodes.len() - 1;
        let res = w2.walk(&loop_nodes, &sing, &[last]);
        assert!(
            matches!(res, Err(crate::error::CoreError::NonStabilizing { .. })),
            "full loop must be refused"
        );
    }
}
