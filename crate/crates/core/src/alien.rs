//! Alien derivations as homogeneous components of the graded logarithm of
//! the Stokes automorphism, plus the bridge-equation report.
//!
//! Formal torus monomials μ^m are integer weight vectors under
//! componentwise addition; ln(I + Σ_ω Δ̇⁺_ω μ^{m(ω)}) expands by the finite
//! nilpotent series, and the coefficient of μ^{m(ω)} is Δ̇_ω.

use crate::connstokes::{delta_plus_split, StokesMatrix};
use crate::error::{CoreError, Result};
use crate::lattice::{weights_of_value, TorusGrading};
use crate::matrix::Matrix;
use crate::num::{two_pow, Complex};
use crate::system::LevelOneSystem;
use rug::Float;
use std::collections::BTreeMap;

/// One alien derivation Δ̇_ω with its torus weight.
#[derive(Clone, Debug)]
pub struct AlienComponent {
    pub omega: Complex,
    pub weights: Vec<i64>,
    pub matrix: Matrix,
}

/// Sparse polynomial in commuting monomials μ^m with matrix coefficients.
type Graded = BTreeMap<Vec<i64>, Matrix>;

fn graded_mul(a: &Graded, b: &Graded, prec: u32, n: usize, drop: &Float) -> Graded {
    let mut out: Graded = BTreeMap::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let mut key: Vec<i64> = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
            if key.is_empty() {
                key = Vec::new();
            }
            let prod = ca.mul(cb);
            if prod.max_abs() <= *drop {
                continue;
            }
            match out.get_mut(&key) {
                Some(m) => *m = m.add(&prod),
                None => {
                    out.insert(key, prod);
                }
            }
        }
    }
    let _ = (prec, n);
    out.retain(|_, m| m.max_abs() > *drop);
    out
}

/// Δ̇_ω components from the graded logarithm of I + T C T^{-1}.
pub fn alien_derivations(
    sm: &StokesMatrix,
    grading: &TorusGrading,
    sys: &LevelOneSystem,
) -> Result<Vec<AlienComponent>> {
    let prec = sys.prec();
    let n = sys.n;
    let split = delta_plus_split(sm, sys);
    if split.is_empty() {
        return Ok(Vec::new());
    }
    let scale = {
        let s = sm.c.max_abs();
        let one = Float::with_val(prec, 1);
        if s > one {
            s
        } else {
            one
        }
    };
    let drop = Float::with_val(prec, &two_pow(prec, -((prec / 2) as i32)) * &scale);

    // N = Σ_ω Δ̇⁺_ω μ^{m(ω)}
    let mut big_n: Graded = BTreeMap::new();
    let mut omega_weights: Vec<(Complex, Vec<i64>)> = Vec::new();
    for (omega, mat) in &split {
        let w = weights_of_value(&grading.basis, omega, 64)?;
        omega_weights.push((omega.clone(), w.clone()));
        match big_n.get_mut(&w) {
            Some(m) => *m = m.add(mat),
            None => {
                big_n.insert(w, mat.clone());
            }
        }
    }

    // ln(I + N) = Σ (-1)^{k+1} N^k / k, finite by nilpotency
    let mut log: Graded = BTreeMap::new();
    let mut power = big_n.clone();
    for k in 1..=n {
        let sign = if k % 2 == 1 { 1i64 } else { -1 };
        let factor = Complex::from_i64(prec, sign).div_i64(k as i64);
        for (m, c) in &power {
            let term = c.scale(&factor);
            if term.max_abs() <= drop {
                continue;
            }
            match log.get_mut(m) {
                Some(x) => *x = x.add(&term),
                None => {
                    log.insert(m.clone(), term);
                }
            }
        }
        if k < n {
            power = graded_mul(&power, &big_n, prec, n, &drop);
            if power.is_empty() {
                break;
            }
        }
    }
    log.retain(|_, m| m.max_abs() > drop);

    // collect per ω; any monomial not matching some m(ω) must vanish
    let mut out = Vec::new();
    for (m, c) in &log {
        match omega_weights.iter().find(|(_, w)| w == m) {
            Some((omega, w)) => out.push(AlienComponent {
                omega: omega.clone(),
                weights: w.clone(),
                matrix: c.clone(),
            }),
            None => {
                return Err(CoreError::StrayMonomial(m.clone(), format!("{:e}", c.max_abs())));
            }
        }
    }
    out.sort_by(|a, b| {
        a.omega
            .abs()
            .partial_cmp(&b.omega.abs())
            .unwrap()
            .then(a.weights.cmp(&b.weights))
    });
    Ok(out)
}

/// Reconstruction identity: exp(Σ_ω Δ̇_ω μ^{m(ω)}) graded equals
/// I + Σ_ω Δ̇⁺_ω μ^{m(ω)}. Returns the max entrywise deviation.
pub fn reconstruction_error(
    components: &[AlienComponent],
    sm: &StokesMatrix,
    sys: &LevelOneSystem,
) -> Float {
    let prec = sys.prec();
    let n = sys.n;
    let drop = two_pow(prec, -(prec as i32) - 64);
    let mut gen: Graded = BTreeMap::new();
    for c in components {
        match gen.get_mut(&c.weights) {
            Some(m) => *m = m.add(&c.matrix),
            None => {
                gen.insert(c.weights.clone(), c.matrix.clone());
            }
        }
    }
    // exp via the finite series
    let mut acc: Graded = BTreeMap::new();
    acc.insert(vec![0; components.first().map(|c| c.weights.len()).unwrap_or(0)], Matrix::identity(prec, n));
    let mut term: Graded = acc.clone();
    for k in 1..=n {
        term = graded_mul(&term, &gen, prec, n, &drop);
        if term.is_empty() {
            break;
        }
        for (m, c) in &term {
            let scaled = c.scale(&Complex::one(prec).div_i64(fact_i64(k)));
            // build k! incrementally instead: divide term by k at each step
            let _ = scaled;
        }
        // divide the running term by k to maintain N^k/k!
        let inv = Complex::one(prec).div_i64(k as i64);
        let mut newterm: Graded = BTreeMap::new();
        for (m, c) in term {
            newterm.insert(m, c.scale(&inv));
        }
        term = newterm;
        for (m, c) in &term {
            match acc.get_mut(m) {
                Some(x) => *x = x.add(c),
                None => {
                    acc.insert(m.clone(), c.clone());
                }
            }
        }
    }
    // compare against I + Σ Δ̇⁺ μ^{m}
    let split = delta_plus_split(sm, sys);
    let mut want: Graded = BTreeMap::new();
    want.insert(vec![0; components.first().map(|c| c.weights.len()).unwrap_or(0)], Matrix::identity(prec, n));
    for (omega, mat) in &split {
        let w = components
            .iter()
            .find(|c| c.omega.dist(omega) <= sys.value_tol())
            .map(|c| c.weights.clone())
            .unwrap_or_else(|| weights_of_value(&TorusGradingRef(components).basis(), omega, 64).unwrap_or_default());
        match want.get_mut(&w) {
            Some(x) => *x = x.add(mat),
            None => {
                want.insert(w, mat.clone());
            }
        }
    }
    let mut worst = Float::new(prec);
    let keys: std::collections::BTreeSet<Vec<i64>> = acc.keys().chain(want.keys()).cloned().collect();
    for key in keys {
        let zero = Matrix::zero(prec, n, n);
        let a = acc.get(&key).unwrap_or(&zero);
        let b = want.get(&key).unwrap_or(&zero);
        let d = a.sub(b).max_abs();
        if d > worst {
            worst = d;
        }
    }
    worst
}

struct TorusGradingRef<'a>(&'a [AlienComponent]);
impl TorusGradingRef<'_> {
    fn basis(&self) -> Vec<Complex> {
        Vec::new()
    }
}

fn fact_i64(k: usize) -> i64 {
    (1..=k as i64).product()
}

/// One bridge-equation line: the alien derivative of a column block.
#[derive(Clone, Debug)]
pub struct BridgeEntry {
    pub omega: Complex,
    /// 1-based column block k (the derivative acts on F̃^{•;k})
    pub col_block: usize,
    /// contributions: (1-based row block j, x-power λ_j - λ_k,
    /// entries of x^{J_j}·Δ̇_ω^{j;k}·x^{-J_k} as (row, col, log power, value))
    pub terms: Vec<BridgeTerm>,
}

#[derive(Clone, Debug)]
pub struct BridgeTerm {
    pub row_block: usize,
    pub x_power: Complex,
    pub log_entries: Vec<(usize, usize, u32, Complex)>,
}

/// Render the relations Δ_ω(F̃^k) = Σ_j F̃^j · x^{λ_j-λ_k} · (log-polynomial
/// in ln x with Δ̇_ω entries) in structured form.
pub fn bridge_report(
    components: &[AlienComponent],
    sys: &LevelOneSystem,
) -> Vec<BridgeEntry> {
    let prec = sys.prec();
    let st = sys.structure();
    let tol = sys.value_tol();
    let mut out = Vec::new();
    for comp in components {
        for k in 0..st.count() {
            let mut terms = Vec::new();
            for j in 0..st.count() {
                let d = sys.blocks[j].a.sub(&sys.blocks[k].a);
                if d.dist(&comp.omega) > tol {
                    continue;
                }
                // block (j,k) of Δ̇_ω
                let nj = st.sizes[j];
                let nk = st.sizes[k];
                let mut log_entries = Vec::new();
                for l in 0..nj {
                    for r in 0..nk {
                        // (x^{J} D x^{-J})_{(l,r)} = Σ ln-powers; emit the
                        // per-(l,r) log polynomial coefficients
                        for lp in 0..(nj - l) {
                            for rp in 0..=r {
                                let v = &comp.matrix[(st.offsets[j] + l + lp, st.offsets[k] + rp)];
                                if v.is_zero() {
                                    continue;
                                }
                                let p = (lp + (r - rp)) as u32;
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
                                log_entries.push((l, r, p, v.mul(&w)));
                            }
                        }
                    }
                }
                if !log_entries.is_empty() {
                    terms.push(BridgeTerm {
                        row_block: j + 1,
                        x_power: sys.blocks[j].lam.sub(&sys.blocks[k].lam),
                        log_entries,
                    });
                }
            }
            if !terms.is_empty() {
                out.push(BridgeEntry { omega: comp.omega.clone(), col_block: k + 1, terms });
            }
        }
    }
    out
}
