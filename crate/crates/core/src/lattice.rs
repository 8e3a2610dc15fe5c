//! The exponential-torus lattice: ℤ-basis of ℤΩ and integer weight vectors.
//!
//! Rational-complex Stokes values get an exact basis through rational
//! reconstruction plus a two-column Hermite normal form; everything else
//! requires a user-supplied basis, validated by high-precision integer
//! relation detection (LLL on a scaled embedding).

use crate::error::{CoreError, Result};
use crate::num::{two_pow, Complex};
use crate::system::LevelOneSystem;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rug::Float;

/// ℤ-lattice basis of ℤΩ with the integer weights of every block.
#[derive(Clone, Debug)]
pub struct TorusGrading {
    pub basis: Vec<Complex>,
    /// weights[j] = integer coordinates of a_j in the basis
    pub weights: Vec<Vec<i64>>,
}

impl TorusGrading {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

/// Continued-fraction rational reconstruction of a float, with denominator
/// bounded by 2^max_den_bits and residual below tol.
fn rational_reconstruct(x: &Float, max_den_bits: u32, tol: &Float) -> Option<BigRational> {
    let prec = x.prec();
    let mut p_prev = BigInt::one();
    let mut p = BigInt::from(x.clone().floor().to_f64() as i64);
    let mut q_prev = BigInt::zero();
    let mut q = BigInt::one();
    let mut frac = Float::with_val(prec, x - &Float::with_val(prec, x.clone().floor()));
    let bound = BigInt::one() << max_den_bits;
    for _ in 0..200 {
        // check current convergent
        let approx = rational_to_float(prec, &BigRational::new(p.clone(), q.clone()));
        if Float::with_val(prec, x - &approx).abs() < *tol {
            return Some(BigRational::new(p, q));
        }
        if frac.is_zero() {
            return None;
        }
        let inv = Float::with_val(prec, 1 / &frac);
        let a = inv.clone().floor();
        let ai = BigInt::from(a.to_f64() as i64);
        frac = Float::with_val(prec, &inv - &a);
        let p_new = &ai * &p + &p_prev;
        let q_new = &ai * &q + &q_prev;
        p_prev = p;
        q_prev = q;
        p = p_new;
        q = q_new;
        if q > bound {
            return None;
        }
    }
    None
}

fn rational_to_float(prec: u32, r: &BigRational) -> Float {
    let num = Float::parse(r.numer().to_string()).unwrap();
    let den = Float::parse(r.denom().to_string()).unwrap();
    Float::with_val(prec, Float::with_val(prec, num) / Float::with_val(prec, den))
}

/// Hermite-style basis of the ℤ-module generated by 2-column integer rows.
fn hnf_2col(mut rows: Vec<(BigInt, BigInt)>) -> Vec<(BigInt, BigInt)> {
    rows.retain(|(a, b)| !a.is_zero() || !b.is_zero());
    // sweep first coordinate to a single gcd row
    loop {
        let mut idx: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].0.is_zero()).collect();
        if idx.len() <= 1 {
            break;
        }
        idx.sort_by_key(|&i| rows[i].0.abs());
        let (small, big) = (idx[0], idx[1]);
        let q = &rows[big].0 / &rows[small].0;
        let (sa, sb) = rows[small].clone();
        rows[big].0 -= &q * &sa;
        rows[big].1 -= &q * &sb;
        rows.retain(|(a, b)| !a.is_zero() || !b.is_zero());
    }
    // gcd the second coordinates of the x=0 rows
    loop {
        let mut idx: Vec<usize> = (0..rows.len())
            .filter(|&i| rows[i].0.is_zero() && !rows[i].1.is_zero())
            .collect();
        if idx.len() <= 1 {
            break;
        }
        idx.sort_by_key(|&i| rows[i].1.abs());
        let (small, big) = (idx[0], idx[1]);
        let q = &rows[big].1 / &rows[small].1;
        let s = rows[small].1.clone();
        rows[big].1 -= &q * &s;
        rows.retain(|(a, b)| !a.is_zero() || !b.is_zero());
    }
    // reduce the leading row's second coordinate modulo the y-generator
    let ygen = rows
        .iter()
        .find(|(a, b)| a.is_zero() && !b.is_zero())
        .map(|(_, b)| b.clone());
    if let Some(g) = ygen {
        for r in rows.iter_mut() {
            if !r.0.is_zero() {
                let q = &r.1 / &g;
                r.1 -= &q * &g;
            }
        }
    }
    rows
}

/// Exact LLL reduction with δ = 3/4 over BigInt rows.
fn lll_reduce(basis: &mut Vec<Vec<BigInt>>) {
    let n = basis.len();
    if n <= 1 {
        return;
    }
    let dim = basis[0].len();
    let delta = BigRational::new(BigInt::from(3), BigInt::from(4));
    let gram = |basis: &Vec<Vec<BigInt>>| -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
        let mut mu = vec![vec![BigRational::zero(); n]; n];
        let mut bstar_sq = vec![BigRational::zero(); n];
        let mut bstar: Vec<Vec<BigRational>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut v: Vec<BigRational> = basis[i]
                .iter()
                .map(|x| BigRational::from_integer(x.clone()))
                .collect();
            for j in 0..i {
                if bstar_sq[j].is_zero() {
                    continue;
                }
                let mut num = BigRational::zero();
                for d in 0..dim {
                    num += BigRational::from_integer(basis[i][d].clone()) * &bstar[j][d];
                }
                mu[i][j] = num / &bstar_sq[j];
                for d in 0..dim {
                    let t = &mu[i][j] * &bstar[j][d];
                    v[d] -= t;
                }
            }
            let mut sq = BigRational::zero();
            for d in 0..dim {
                sq += &v[d] * &v[d];
            }
            bstar_sq[i] = sq;
            bstar.push(v);
        }
        (mu, bstar_sq)
    };
    let (mut mu, mut bstar_sq) = gram(basis);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut k = 1usize;
    let mut guard = 0usize;
    while k < n {
        guard += 1;
        if guard > 100_000 {
            break;
        }
        // size-reduce row k (μ updates are local, no recompute needed)
        for j in (0..k).rev() {
            if mu[k][j].abs() > half {
                let r = round_rational(&mu[k][j]);
                if !r.is_zero() {
                    for d in 0..dim {
                        let t = &r * &basis[j][d];
                        basis[k][d] -= t;
                    }
                    let rq = BigRational::from_integer(r);
                    for t in 0..j {
                        let upd = &rq * &mu[j][t];
                        mu[k][t] -= upd;
                    }
                    mu[k][j] -= rq;
                }
            }
        }
        // Lovász condition between k-1 and k
        let lhs = &bstar_sq[k] + &(&mu[k][k - 1] * &mu[k][k - 1]) * &bstar_sq[k - 1];
        let rhs = &delta * &bstar_sq[k - 1];
        if lhs < rhs {
            basis.swap(k, k - 1);
            let g = gram(basis);
            mu = g.0;
            bstar_sq = g.1;
            k = k.max(2) - 1;
        } else {
            k += 1;
        }
    }
}

fn round_rational(r: &BigRational) -> BigInt {
    use num_integer::Integer;
    let two = BigInt::from(2);
    let num = r.numer() * &two + r.denom();
    let den = r.denom() * &two;
    num.div_floor(&den)
}

fn float_to_scaled_int(x: &Float, scale_bits: u32) -> BigInt {
    let prec = x.prec();
    let scaled = Float::with_val(prec, x * &two_pow(prec, scale_bits as i32));
    let rounded = scaled.round();
    // exact conversion through the decimal string of the integer value
    let s = rounded.to_integer().map(|i| i.to_string()).unwrap_or_else(|| "0".into());
    s.parse::<BigInt>().unwrap_or_else(|_| BigInt::zero())
}

/// Find a small integer relation Σ m_i v_i ≈ 0 among complex values, or
/// None when the values appear independent at the working precision.
pub fn integer_relation(values: &[Complex], coeff_bound: i64) -> Option<Vec<i64>> {
    let m = values.len();
    if m == 0 {
        return None;
    }
    let prec = values.iter().map(|v| v.prec()).min().unwrap();
    // enough bits to separate genuine relations (small coefficients) from
    // accidental near-relations, nowhere near full precision
    let scale_bits = 96u32.min(prec / 2 + 16);
    // scale values to comparable magnitude 1
    let mut mx = Float::new(prec);
    for v in values {
        let a = v.abs();
        if a > mx {
            mx = a;
        }
    }
    if mx.is_zero() {
        return Some(std::iter::once(1).chain(std::iter::repeat(0)).take(m).collect());
    }
    let rows: Vec<Vec<BigInt>> = (0..m)
        .map(|i| {
            let mut row = vec![BigInt::zero(); m + 2];
            row[i] = BigInt::one();
            let re = Float::with_val(prec, &values[i].re / &mx);
            let im = Float::with_val(prec, &values[i].im / &mx);
            row[m] = float_to_scaled_int(&re, scale_bits);
            row[m + 1] = float_to_scaled_int(&im, scale_bits);
            row
        })
        .collect();
    let mut basis = rows;
    lll_reduce(&mut basis);
    // look for a reduced vector whose embedded residual is tiny and whose
    // coefficients are small
    let residual_bound = BigInt::one() << (scale_bits / 2);
    for v in &basis {
        let coeffs = &v[..m];
        if coeffs.iter().all(|c| c.is_zero()) {
            continue;
        }
        if coeffs.iter().any(|c| c.abs() > BigInt::from(coeff_bound)) {
            continue;
        }
        if v[m].abs() < residual_bound && v[m + 1].abs() < residual_bound {
            return Some(
                coeffs
                    .iter()
                    .map(|c| {
                        let s = c.to_string();
                        s.parse::<i64>().unwrap()
                    })
                    .collect(),
            );
        }
    }
    None
}

/// Integer coordinates of ω in the basis, by relation detection.
pub fn weights_of_value(basis: &[Complex], omega: &Complex, coeff_bound: i64) -> Result<Vec<i64>> {
    let prec = omega.prec();
    if omega.abs().is_zero() {
        return Ok(vec![0; basis.len()]);
    }
    let mut values = basis.to_vec();
    values.push(omega.clone());
    let rel = integer_relation(&values, coeff_bound)
        .ok_or_else(|| CoreError::NonIntegralCoordinates(format!("{}", omega)))?;
    let c = rel[basis.len()];
    if c == 0 {
        return Err(CoreError::NonIntegralCoordinates(format!("{}", omega)));
    }
    let mut w = Vec::with_capacity(basis.len());
    for v in &rel[..basis.len()] {
        if v % c != 0 {
            return Err(CoreError::NonIntegralCoordinates(format!("{}", omega)));
        }
        w.push(-(v / c));
    }
    // verify the residual at full precision
    let mut acc = Complex::zero(prec);
    for (wi, b) in w.iter().zip(basis) {
        acc = acc.add(&b.scale_i64(*wi));
    }
    let tol = {
        let scale = {
            let mut s = omega.abs();
            for b in basis {
                let a = b.abs();
                if a > s {
                    s = a;
                }
            }
            s
        };
        Float::with_val(prec, &two_pow(prec, -((prec / 2) as i32)) * &scale)
    };
    if acc.dist(omega) > tol {
        return Err(CoreError::NonIntegralCoordinates(format!("{}", omega)));
    }
    Ok(w)
}

fn check_independent(basis: &[Complex], coeff_bound: i64) -> Result<()> {
    if basis.len() <= 1 {
        return Ok(());
    }
    if let Some(rel) = integer_relation(basis, coeff_bound) {
        return Err(CoreError::DependentBasis(rel));
    }
    Ok(())
}

/// Build the torus grading: validate a user basis, or construct one by
/// exact rational reconstruction and Hermite reduction.
pub fn lattice_basis(sys: &LevelOneSystem, user_basis: Option<&[Complex]>) -> Result<TorusGrading> {
    let prec = sys.prec();
    let tolz = sys.value_tol();
    let values: Vec<Complex> = sys.blocks.iter().map(|b| b.a.clone()).collect();
    let nonzero: Vec<&Complex> = values.iter().filter(|a| a.abs() > tolz).collect();
    if nonzero.is_empty() {
        return Ok(TorusGrading { basis: Vec::new(), weights: vec![Vec::new(); values.len()] });
    }
    let max_weight = 64i64;
    if let Some(user) = user_basis {
        check_independent(user, 2 * max_weight)?;
        let mut weights = Vec::with_capacity(values.len());
        for a in &values {
            weights.push(weights_of_value(user, a, max_weight)?);
        }
        return Ok(TorusGrading { basis: user.to_vec(), weights });
    }
    // rational reconstruction of every Stokes value
    let max_den_bits = prec / 8;
    let tol = two_pow(prec, -((prec / 2) as i32));
    let mut rats: Vec<(BigRational, BigRational)> = Vec::with_capacity(values.len());
    for a in &values {
        let re = rational_reconstruct(&a.re, max_den_bits, &tol).ok_or(CoreError::NoExactBasis)?;
        let im = rational_reconstruct(&a.im, max_den_bits, &tol).ok_or(CoreError::NoExactBasis)?;
        rats.push((re, im));
    }
    // common denominator, integer 2-vectors, Hermite basis
    let mut lcm = BigInt::one();
    for (re, im) in &rats {
        lcm = lcm_bigint(&lcm, re.denom());
        lcm = lcm_bigint(&lcm, im.denom());
    }
    let rows: Vec<(BigInt, BigInt)> = rats
        .iter()
        .map(|(re, im)| {
            (
                re.numer() * (&lcm / re.denom()),
                im.numer() * (&lcm / im.denom()),
            )
        })
        .collect();
    let hnf = hnf_2col(rows);
    let basis: Vec<Complex> = hnf
        .iter()
        .map(|(x, y)| {
            let re = rational_to_float(prec, &BigRational::new(x.clone(), lcm.clone()));
            let im = rational_to_float(prec, &BigRational::new(y.clone(), lcm.clone()));
            Complex { re, im }
        })
        .collect();
    let mut weights = Vec::with_capacity(values.len());
    for a in &values {
        weights.push(weights_of_value(&basis, a, max_weight)?);
    }
    Ok(TorusGrading { basis, weights })
}

fn lcm_bigint(a: &BigInt, b: &BigInt) -> BigInt {
    use num_integer::Integer;
    a.lcm(b)
}
