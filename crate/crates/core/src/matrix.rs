//! Dense complex matrices, linear solves, and the unipotent log/exp pair.

use crate::error::{CoreError, Result};
use crate::num::{two_pow, Complex};
use rug::Float;

/// Dense row-major matrix of high-precision complex entries.
#[derive(Clone, Debug)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Complex>,
}

impl Matrix {
    pub fn zero(prec: u32, rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![Complex::zero(prec); rows * cols] }
    }

    pub fn identity(prec: u32, n: usize) -> Self {
        let mut m = Self::zero(prec, n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one(prec);
        }
        m
    }

    /// Identity truncated to its first `cols` columns.
    pub fn identity_slice(prec: u32, n: usize, cols: usize) -> Self {
        let mut m = Self::zero(prec, n, cols);
        for i in 0..cols.min(n) {
            m[(i, i)] = Complex::one(prec);
        }
        m
    }

    pub fn from_fn(prec: u32, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        let mut m = Self::zero(prec, rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn prec(&self) -> u32 {
        self.data.iter().map(|c| c.prec()).min().unwrap_or(crate::num::DEFAULT_PREC)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a = a.add(b);
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a = a.sub(b);
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows);
        let prec = self.prec().min(rhs.prec());
        let mut out = Self::zero(prec, self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let t = a.mul(&rhs[(k, j)]);
                    out[(i, j)] = out[(i, j)].add(&t);
                }
            }
        }
        out
    }

    pub fn scale(&self, c: &Complex) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = a.mul(c);
        }
        out
    }

    /// Entrywise division by a real scalar (exact when MPFR division is).
    pub fn div_real(&self, f: &Float) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            let p = a.prec().min(f.prec());
            *a = Complex {
                re: Float::with_val(p, &a.re / f),
                im: Float::with_val(p, &a.im / f),
            };
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = a.neg();
        }
        out
    }

    pub fn max_abs(&self) -> Float {
        let mut m = Float::new(self.prec());
        for c in &self.data {
            let a = c.abs();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn is_zero_to(&self, tol: &Float) -> bool {
        self.max_abs() <= *tol
    }

    /// Solve A·X = B for square A by LU with partial pivoting.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(self.rows, rhs.rows);
        let n = self.rows;
        let prec = self.prec().min(rhs.prec());
        let mut a = self.clone();
        let mut b = rhs.clone();
        for col in 0..n {
            let mut piv = col;
            let mut best = a[(col, col)].norm_sq();
            for r in col + 1..n {
                let v = a[(r, col)].norm_sq();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best.is_zero() {
                return Err(CoreError::IllConditioned(format!("zero pivot at column {col}")));
            }
            if piv != col {
                for j in 0..n {
                    let t = a[(col, j)].clone();
                    a[(col, j)] = a[(piv, j)].clone();
                    a[(piv, j)] = t;
                }
                for j in 0..b.cols {
                    let t = b[(col, j)].clone();
                    b[(col, j)] = b[(piv, j)].clone();
                    b[(piv, j)] = t;
                }
            }
            let d = a[(col, col)].clone();
            for r in col + 1..n {
                if a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].div(&d);
                for j in col..n {
                    let t = f.mul(&a[(col, j)]);
                    a[(r, j)] = a[(r, j)].sub(&t);
                }
                for j in 0..b.cols {
                    let t = f.mul(&b[(col, j)]);
                    b[(r, j)] = b[(r, j)].sub(&t);
                }
            }
        }
        let mut x = Matrix::zero(prec, n, rhs.cols);
        for j in 0..rhs.cols {
            for r in (0..n).rev() {
                let mut acc = b[(r, j)].clone();
                for k in r + 1..n {
                    let t = a[(r, k)].mul(&x[(k, j)]);
                    acc = acc.sub(&t);
                }
                x[(r, j)] = acc.div(&a[(r, r)]);
            }
        }
        Ok(x)
    }

    /// Round every entry to the given precision.
    pub fn with_prec(&self, prec: u32) -> Matrix {
        let mut out = Matrix::zero(prec, self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let c = &self[(i, j)];
                out[(i, j)] = Complex {
                    re: Float::with_val(prec, &c.re),
                    im: Float::with_val(prec, &c.im),
                };
            }
        }
        out
    }

    pub fn conj_transpose(&self) -> Matrix {
        let mut out = Matrix::zero(self.prec(), self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Least squares via the normal equations at full precision.
    pub fn lstsq(&self, rhs: &Matrix) -> Result<Matrix> {
        let at = self.conj_transpose();
        let ata = at.mul(self);
        let atb = at.mul(rhs);
        ata.solve(&atb)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = Complex;
    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex {
        &mut self.data[i * self.cols + j]
    }
}

/// A matrix certified nilpotent by explicit powering.
#[derive(Clone, Debug)]
pub struct NilpotentMatrix {
    mat: Matrix,
    /// Smallest k with M^k ≈ 0 (≤ dimension).
    pub index: usize,
}

impl NilpotentMatrix {
    /// Certify nilpotency: some power M^k, k ≤ n, vanishes to
    /// 2^{-precision/2} relative to an entrywise magnitude envelope.
    ///
    /// The envelope |M|^k (computed on absolute values, so free of
    /// cancellation) bounds how large the entries of M^k could legitimately
    /// be before collapsing, which keeps the zero test tight for matrices
    /// with large entries.
    pub fn certify(mat: Matrix) -> Result<Self> {
        assert_eq!(mat.rows, mat.cols);
        let n = mat.rows;
        let prec = mat.prec();
        let tol = two_pow(prec, -((prec / 2) as i32));
        let env = Matrix::from_fn(64, n, n, |i, j| Complex::from_real(Float::with_val(64, mat[(i, j)].abs())));
        let mut env_pow = env.clone();
        let mut pow = mat.clone();
        let mut k = 1usize;
        while k <= n {
            let g = env_pow.max_abs();
            let one = Float::with_val(prec, 1);
            let g = if g > one { g } else { one };
            let t = Float::with_val(prec, &tol * &g);
            if pow.is_zero_to(&t) {
                return Ok(NilpotentMatrix { mat, index: k });
            }
            pow = pow.mul(&mat);
            env_pow = env_pow.mul(&env);
            k += 1;
        }
        Err(CoreError::NotNilpotent { n, residual: format!("{:e}", pow.max_abs()) })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }
}

/// Guard bits covering the growth of N^k entries during the finite series.
fn series_guard_bits(n: usize, scale: &Float) -> u32 {
    let s = scale.to_f64().max(1.0) * n.max(1) as f64;
    (n as f64 * (s.log2() + 2.0) + 32.0).ceil() as u32
}

/// log(I + N) = Σ_{k≥1} (-1)^{k+1} N^k / k, truncated at the nilpotency index.
///
/// The argument is M = I + N; the result is nilpotent.
pub fn nilpotent_log(m: &Matrix) -> Result<NilpotentMatrix> {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let prec = m.prec();
    let nil = NilpotentMatrix::certify(m.sub(&Matrix::identity(prec, n)))
        .map_err(|_| CoreError::NotUnipotent)?;
    let wide = prec + series_guard_bits(n, &nil.matrix().max_abs());
    let nmat = nil.matrix().with_prec(wide);
    let mut acc = Matrix::zero(wide, n, n);
    let mut pow = nmat.clone();
    for k in 1..nil.index {
        let sign = if k % 2 == 1 { 1 } else { -1 };
        let term = pow.scale(&Complex::from_i64(wide, sign).div_i64(k as i64));
        acc = acc.add(&term);
        pow = pow.mul(&nmat);
    }
    NilpotentMatrix::certify(acc.with_prec(prec))
}

/// exp(N) = Σ_{k≥0} N^k / k! for nilpotent N (finite sum).
pub fn nilpotent_exp(n: &NilpotentMatrix) -> Matrix {
    let dim = n.matrix().rows;
    let prec = n.matrix().prec();
    let wide = prec + series_guard_bits(dim, &n.matrix().max_abs());
    let nmat = n.matrix().with_prec(wide);
    let mut acc = Matrix::identity(wide, dim);
    let mut term = nmat.clone();
    let mut k = 1usize;
    loop {
        acc = acc.add(&term);
        if k >= n.index {
            break;
        }
        k += 1;
        term = term.mul(&nmat).scale(&Complex::one(wide).div_i64(k as i64));
    }
    acc.with_prec(prec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::DEFAULT_PREC as P;

    fn upper_shift(n: usize, vals: &[(usize, usize, f64)]) -> Matrix {
        let mut m = Matrix::zero(P, n, n);
        for &(i, j, v) in vals {
            m[(i, j)] = Complex::from_f64(P, v);
        }
        m
    }

    #[test]
    fn log_of_identity_is_zero() {
        let id = Matrix::identity(P, 4);
        let l = nilpotent_log(&id).unwrap();
        assert!(l.matrix().max_abs().is_zero());
    }

    #[test]
    fn log_truncates_when_square_vanishes() {
        // N with N² = 0: log(I+N) = N
        let n = upper_shift(3, &[(0, 2, 1.75)]);
        let m = Matrix::identity(P, 3).add(&n);
        let l = nilpotent_log(&m).unwrap();
        assert!(l.matrix().sub(&n).max_abs() < two_pow(P, -200));
    }

    #[test]
    fn paper_index_pattern_13x13() {
        // I + c·E_{2,1} + d·E_{1,8} + e·E_{2,8}: log has E_{2,8} entry e - cd/2.
        let (c, d, e) = (0.8125, -2.5, 0.046875);
        let n = upper_shift(13, &[(1, 0, c), (0, 7, d), (1, 7, e)]);
        let m = Matrix::identity(P, 13).add(&n);
        let l = nilpotent_log(&m).unwrap();
        let expect = Complex::from_f64(P, e - c * d / 2.0);
        assert!(l.matrix()[(1, 7)].dist(&expect) < two_pow(P, -200));
        // all other touched entries unchanged
        assert!(l.matrix()[(1, 0)].dist(&Complex::from_f64(P, c)) < two_pow(P, -200));
        assert!(l.matrix()[(0, 7)].dist(&Complex::from_f64(P, d)) < two_pow(P, -200));
    }

    #[test]
    fn exp_log_roundtrip_random_strictly_upper() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 5, 9, 16] {
            let mut m = Matrix::identity(P, n);
            for i in 0..n {
                for j in i + 1..n {
                    m[(i, j)] = Complex::from_parts_f64(P, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                }
            }
            let l = nilpotent_log(&m).unwrap();
            let back = nilpotent_exp(&l);
            let err = back.sub(&m).max_abs();
            assert!(err < two_pow(P, -(P as i32 - 16)), "n={n}, err={:e}", err);
        }
    }

    #[test]
    fn non_nilpotent_is_rejected() {
        let mut m = Matrix::identity(P, 2);
        m[(1, 0)] = Complex::from_f64(P, 1.0);
        m[(0, 1)] = Complex::from_f64(P, 1.0);
        // M - I has entries off both triangles: (M-I)² = I ≠ 0
        assert!(nilpotent_log(&m).is_err());
    }

    #[test]
    fn lu_solve_small_system() {
        let a = Matrix::from_fn(P, 3, 3, |i, j| Complex::from_f64(P, ((i * 3 + j) as f64).sin() + if i == j { 3.0 } else { 0.0 }));
        let x_true = Matrix::from_fn(P, 3, 1, |i, _| Complex::from_parts_f64(P, i as f64 + 0.5, -(i as f64)));
        let b = a.mul(&x_true);
        let x = a.solve(&b).unwrap();
        assert!(x.sub(&x_true).max_abs() < two_pow(P, -220));
    }
}
