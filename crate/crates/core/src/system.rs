//! Data model for level-one systems in prepared form.
//!
//! A system x²Y' = A(x)Y is described by its normal-form blocks
//! A₀(x) = ⊕_j (a_j I + x(λ_j I + J_{n_j})) together with the perturbation
//! B(x) = A(x) - A₀(x), given by its coefficient matrices of x, x², ...

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::num::{two_pow, Complex};
use rug::Float;

/// One Jordan block of the normal form: Stokes value a, exponent of formal
/// monodromy λ, block size.
#[derive(Clone, Debug)]
pub struct JordanBlockSpec {
    pub a: Complex,
    pub lam: Complex,
    pub size: usize,
}

/// Row/column offsets of the Jordan block structure.
#[derive(Clone, Debug)]
pub struct BlockStructure {
    pub sizes: Vec<usize>,
    pub offsets: Vec<usize>,
    pub n: usize,
}

impl BlockStructure {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut n = 0;
        for &s in &sizes {
            offsets.push(n);
            n += s;
        }
        BlockStructure { sizes, offsets, n }
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Block index owning the given absolute row.
    pub fn block_of(&self, row: usize) -> usize {
        let mut b = 0;
        while b + 1 < self.sizes.len() && self.offsets[b + 1] <= row {
            b += 1;
        }
        b
    }
}

/// Level-one linear system in prepared form.
#[derive(Clone, Debug)]
pub struct LevelOneSystem {
    pub blocks: Vec<JordanBlockSpec>,
    /// b_coeffs[i] is the coefficient matrix of x^{i+1} in B(x).
    pub b_coeffs: Vec<Matrix>,
    pub n: usize,
}

impl LevelOneSystem {
    pub fn new(blocks: Vec<JordanBlockSpec>, b_coeffs: Vec<Matrix>) -> Self {
        let n = blocks.iter().map(|b| b.size).sum();
        LevelOneSystem { blocks, b_coeffs, n }
    }

    pub fn prec(&self) -> u32 {
        self.blocks
            .iter()
            .flat_map(|b| [b.a.prec(), b.lam.prec()])
            .chain(self.b_coeffs.iter().map(|m| m.prec()))
            .min()
            .unwrap_or(crate::num::DEFAULT_PREC)
    }

    pub fn structure(&self) -> BlockStructure {
        BlockStructure::new(self.blocks.iter().map(|b| b.size).collect())
    }

    /// Coefficient matrix of x^m in B(x) (m ≥ 1), zero beyond the truncation.
    pub fn b_coeff(&self, m: usize) -> Matrix {
        if m >= 1 && m <= self.b_coeffs.len() {
            self.b_coeffs[m - 1].clone()
        } else {
            Matrix::zero(self.prec(), self.n, self.n)
        }
    }

    /// Truncation order M of B.
    pub fn b_order(&self) -> usize {
        self.b_coeffs.len()
    }

    /// The matrix L = ⊕ (λ_j I + J_{n_j}) of exponents of formal monodromy.
    pub fn l_matrix(&self) -> Matrix {
        let prec = self.prec();
        let st = self.structure();
        let mut l = Matrix::zero(prec, self.n, self.n);
        for (j, b) in self.blocks.iter().enumerate() {
            let off = st.offsets[j];
            for r in 0..b.size {
                l[(off + r, off + r)] = b.lam.clone();
                if r + 1 < b.size {
                    l[(off + r, off + r + 1)] = Complex::one(prec);
                }
            }
        }
        l
    }

    /// Tolerance used to decide whether two Stokes values coincide.
    pub fn value_tol(&self) -> Float {
        two_pow(self.prec(), -((self.prec() / 2) as i32))
    }

    /// Angle tolerance for direction matching (2^{-precision/4} radians).
    pub fn angle_tol(&self) -> Float {
        two_pow(self.prec(), -((self.prec() / 4) as i32))
    }

    pub fn same_stokes_value(&self, i: usize, j: usize) -> bool {
        self.blocks[i].a.dist(&self.blocks[j].a) <= self.value_tol()
    }
}

/// Diagnostics from [`validate_prepared`].
#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub violations: Vec<String>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(CoreError::Validation(self.violations))
        }
    }
}

/// Check the prepared-form normalization conditions on the input data.
///
/// Checked: 0 ≤ Re λ_j < 1 for every block; a_1 = λ_1 = 0; the x-coefficient
/// of B vanishes on blocks (j,k) with a_j = a_k; not all a_j equal (single
/// level one); shape consistency of the B coefficients.
pub fn validate_prepared(sys: &LevelOneSystem) -> Diagnostics {
    let mut v = Vec::new();
    let tol = sys.value_tol();
    if sys.blocks.is_empty() {
        return Diagnostics { violations: vec!["system has no blocks".into()] };
    }
    for (j, b) in sys.blocks.iter().enumerate() {
        if b.size < 1 {
            v.push(format!("block {} has size 0", j + 1));
        }
        let re = b.lam.re.to_f64();
        if !(0.0..1.0).contains(&re) {
            v.push(format!(
                "condition (5) violated: Re lambda_{} = {} not in [0,1)",
                j + 1,
                re
            ));
        }
    }
    if sys.blocks[0].a.abs() > tol || sys.blocks[0].lam.abs() > tol {
        v.push("condition (6) violated: a_1 = lambda_1 = 0 required".into());
    }
    let all_equal = (1..sys.blocks.len()).all(|j| sys.same_stokes_value(0, j));
    if all_equal {
        v.push("single-level-one assumption violated: all a_j equal".into());
    }
    for m in &sys.b_coeffs {
        if m.rows != sys.n || m.cols != sys.n {
            v.push(format!("B coefficient has shape {}x{}, expected {0}x{0}", m.rows, m.cols));
        }
    }
    if !sys.b_coeffs.is_empty() {
        let st = sys.structure();
        let b1 = &sys.b_coeffs[0];
        if b1.rows == sys.n && b1.cols == sys.n {
            for j in 0..st.count() {
                for k in 0..st.count() {
                    if !sys.same_stokes_value(j, k) {
                        continue;
                    }
                    for r in 0..st.sizes[j] {
                        for c in 0..st.sizes[k] {
                            if b1[(st.offsets[j] + r, st.offsets[k] + c)].abs() > tol {
                                v.push(format!(
                                    "B is O(x) on block ({},{}) with a_{0} = a_{1}; it must be O(x^2)",
                                    j + 1,
                                    k + 1
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    Diagnostics { violations: v }
}

/// Result of moving block k to the front: the shifted system, the recorded
/// integer λ-shifts per (new) block, and the block permutation used.
#[derive(Clone, Debug)]
pub struct NormalizedSystem {
    pub system: LevelOneSystem,
    /// σ such that (λ_j - λ_k) - σ_j has real part in [0,1), in new block order.
    pub lam_shifts: Vec<i64>,
    /// new block index -> old block index
    pub permutation: Vec<usize>,
}

/// Describe the study of the k-th column-block: block k moved to front,
/// every a_j replaced by a_j - a_k, every λ_j reduced to the representative
/// of λ_j - λ_k with real part in [0,1) (integer shift recorded).
pub fn normalize_block(sys: &LevelOneSystem, k: usize) -> NormalizedSystem {
    assert!(k >= 1 && k <= sys.blocks.len(), "block index out of range");
    let k0 = k - 1;
    let prec = sys.prec();
    let mut permutation = Vec::with_capacity(sys.blocks.len());
    permutation.push(k0);
    permutation.extend((0..sys.blocks.len()).filter(|&j| j != k0));

    let ak = sys.blocks[k0].a.clone();
    let lk = sys.blocks[k0].lam.clone();
    let mut blocks = Vec::with_capacity(sys.blocks.len());
    let mut lam_shifts = Vec::with_capacity(sys.blocks.len());
    for &old in &permutation {
        let b = &sys.blocks[old];
        let a = b.a.sub(&ak);
        let dl = b.lam.sub(&lk);
        let shift = dl.re.to_f64().floor() as i64;
        let lam = dl.sub(&Complex::from_i64(prec, shift));
        lam_shifts.push(shift);
        blocks.push(JordanBlockSpec { a, lam, size: b.size });
    }

    let old_st = sys.structure();
    let new_st = BlockStructure::new(blocks.iter().map(|b| b.size).collect());
    let b_coeffs = sys
        .b_coeffs
        .iter()
        .map(|m| {
            let mut out = Matrix::zero(prec, sys.n, sys.n);
            for (new_j, &old_j) in permutation.iter().enumerate() {
                for (new_k, &old_k) in permutation.iter().enumerate() {
                    for r in 0..new_st.sizes[new_j] {
                        for c in 0..new_st.sizes[new_k] {
                            out[(new_st.offsets[new_j] + r, new_st.offsets[new_k] + c)] =
                                m[(old_st.offsets[old_j] + r, old_st.offsets[old_k] + c)].clone();
                        }
                    }
                }
            }
            out
        })
        .collect();

    NormalizedSystem {
        system: LevelOneSystem::new(blocks, b_coeffs),
        lam_shifts,
        permutation,
    }
}

/// An anti-Stokes direction with the Stokes values it supports.
#[derive(Clone, Debug)]
pub struct Direction {
    /// Principal determination θ* ∈ (-2π, 0].
    pub theta_star: Float,
    /// Members of 𝛀_θ sorted by modulus.
    pub omegas: Vec<Complex>,
}

/// Ω, 𝛀 and the anti-Stokes direction map of a system.
#[derive(Clone, Debug)]
pub struct StokesValueSet {
    /// Distinct Stokes values a_j (0 included).
    pub omega: Vec<Complex>,
    /// Distinct non-zero differences a_j - a_k.
    pub bold_omega: Vec<Complex>,
    /// Anti-Stokes directions, sorted by θ*.
    pub directions: Vec<Direction>,
}

impl StokesValueSet {
    /// Direction entry matching θ* within the angle tolerance, if any.
    pub fn direction_at(&self, theta_star: &Float, angle_tol: &Float) -> Option<&Direction> {
        self.directions.iter().find(|d| {
            let diff = Float::with_val(theta_star.prec(), &d.theta_star - theta_star);
            diff.abs() <= *angle_tol
        })
    }
}

/// Canonicalize an argument to the principal determination (-2π, 0].
pub fn principal_arg(arg: &Float) -> Float {
    let prec = arg.prec();
    let two_pi = Float::with_val(prec, 2 * &crate::num::pi(prec));
    let mut a = arg.clone();
    while a > 0 {
        a -= &two_pi;
    }
    while a <= Float::with_val(prec, -&two_pi) {
        a += &two_pi;
    }
    a
}

fn dedup_complex(values: Vec<Complex>, tol: &Float) -> Vec<Complex> {
    let mut out: Vec<Complex> = Vec::new();
    for v in values {
        if !out.iter().any(|w| w.dist(&v) <= *tol) {
            out.push(v);
        }
    }
    out.sort_by(|a, b| {
        let (ar, ai) = a.to_f64_pair();
        let (br, bi) = b.to_f64_pair();
        ar.partial_cmp(&br).unwrap().then(ai.partial_cmp(&bi).unwrap())
    });
    out
}

/// Compute Ω, 𝛀 and the anti-Stokes direction map.
pub fn stokes_values(sys: &LevelOneSystem) -> StokesValueSet {
    let tol = sys.value_tol();
    let angle_tol = sys.angle_tol();
    let prec = sys.prec();

    let omega = dedup_complex(sys.blocks.iter().map(|b| b.a.clone()).collect(), &tol);
    let mut diffs = Vec::new();
    for j in &sys.blocks {
        for k in &sys.blocks {
            let d = j.a.sub(&k.a);
            if d.abs() > tol {
                diffs.push(d);
            }
        }
    }
    let bold_omega = dedup_complex(diffs, &tol);

    let mut directions: Vec<Direction> = Vec::new();
    for w in &bold_omega {
        let theta = principal_arg(&w.arg());
        match directions.iter_mut().find(|d| {
            let diff = Float::with_val(prec, &d.theta_star - &theta);
            diff.abs() <= angle_tol
        }) {
            Some(d) => d.omegas.push(w.clone()),
            None => directions.push(Direction { theta_star: theta, omegas: vec![w.clone()] }),
        }
    }
    for d in directions.iter_mut() {
        d.omegas.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    }
    directions.sort_by(|a, b| a.theta_star.partial_cmp(&b.theta_star).unwrap());
    StokesValueSet { omega, bold_omega, directions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::DEFAULT_PREC as P;

    /// The resonant 4×4 system: blocks (a=0, λ=0, n=1) and (a=1, λ=0, n=3),
    /// B(x) = x²(E_21 + E_31 + E_41).
    pub(crate) fn resonant4x4() -> LevelOneSystem {
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

    #[test]
    fn resonant4x4_is_prepared() {
        assert!(validate_prepared(&resonant4x4()).passed());
    }

    #[test]
    fn condition6_violation_detected() {
        let mut sys = resonant4x4();
        sys.blocks[0].lam = Complex::from_f64(P, 0.5);
        let d = validate_prepared(&sys);
        assert!(!d.passed());
        assert!(d.violations.iter().any(|m| m.contains("condition (6)")));
    }

    #[test]
    fn degenerate_all_a_equal_detected() {
        let mut sys = resonant4x4();
        sys.blocks[1].a = Complex::zero(P);
        // B's x² block now sits on a_j = a_k, but the x coefficient is zero,
        // so only the level assumption trips.
        let d = validate_prepared(&sys);
        assert!(d.violations.iter().any(|m| m.contains("single-level-one")));
    }

    #[test]
    fn stokes_values_of_resonant4x4() {
        let sv = stokes_values(&resonant4x4());
        assert_eq!(sv.omega.len(), 2);
        assert_eq!(sv.bold_omega.len(), 2); // {+1, -1}
        assert_eq!(sv.directions.len(), 2); // θ = 0 and θ = π
        let thetas: Vec<f64> = sv.directions.iter().map(|d| d.theta_star.to_f64()).collect();
        assert!(thetas.iter().any(|t| t.abs() < 1e-30));
        assert!(thetas.iter().any(|t| (t + std::f64::consts::PI).abs() < 1e-12));
    }

    #[test]
    fn conjugate_pair_directions() {
        let blocks = vec![
            JordanBlockSpec { a: Complex::zero(P), lam: Complex::zero(P), size: 1 },
            JordanBlockSpec { a: Complex::i(P), lam: Complex::zero(P), size: 1 },
        ];
        let sys = LevelOneSystem::new(blocks, vec![]);
        let sv = stokes_values(&sys);
        assert_eq!(sv.bold_omega.len(), 2); // {i, -i}
        let thetas: Vec<f64> = sv.directions.iter().map(|d| d.theta_star.to_f64()).collect();
        // principal determinations: π/2 → -3π/2, and -π/2
        assert!(thetas.iter().any(|t| (t + 3.0 * std::f64::consts::FRAC_PI_2).abs() < 1e-12));
        assert!(thetas.iter().any(|t| (t + std::f64::consts::FRAC_PI_2).abs() < 1e-12));
    }

    #[test]
    fn opposite_directions_carry_negated_values() {
        let sv = stokes_values(&resonant4x4());
        for d in &sv.directions {
            for w in &d.omegas {
                assert!(
                    sv.bold_omega.iter().any(|v| v.dist(&w.neg()).to_f64() < 1e-60),
                    "negation closure"
                );
            }
        }
    }

    #[test]
    fn normalize_block_identity_for_first_block() {
        let sys = resonant4x4();
        let ns = normalize_block(&sys, 1);
        assert_eq!(ns.permutation, vec![0, 1]);
        assert!(ns.lam_shifts.iter().all(|&s| s == 0));
        for (a, b) in ns.system.blocks.iter().zip(&sys.blocks) {
            assert!(a.a.dist(&b.a).is_zero());
            assert!(a.lam.dist(&b.lam).is_zero());
        }
    }

    #[test]
    fn normalize_block_shifts_stokes_values() {
        // k = 2: front block a = 0, the other a = 0 - 1 = -1; directions flip.
        let sys = resonant4x4();
        let ns = normalize_block(&sys, 2);
        assert_eq!(ns.permutation, vec![1, 0]);
        assert!(ns.system.blocks[0].a.is_zero());
        assert!(ns.system.blocks[1].a.dist(&Complex::from_i64(P, -1)).to_f64() < 1e-70);
        let sv = stokes_values(&ns.system);
        // 𝛀 is negation-invariant, so it is unchanged setwise
        let sv0 = stokes_values(&sys);
        for w in &sv.bold_omega {
            assert!(sv0.bold_omega.iter().any(|v| v.dist(w).to_f64() < 1e-60));
        }
        assert!(validate_prepared(&ns.system).passed());
    }

    #[test]
    fn normalize_block_records_lambda_shift() {
        let blocks = vec![
            JordanBlockSpec { a: Complex::zero(P), lam: Complex::zero(P), size: 1 },
            JordanBlockSpec { a: Complex::one(P), lam: Complex::from_f64(P, 0.75), size: 1 },
        ];
        let sys = LevelOneSystem::new(blocks, vec![]);
        let ns = normalize_block(&sys, 2);
        // λ_1 - λ_2 = -0.75 → representative 0.25, shift -1
        assert_eq!(ns.lam_shifts, vec![0, -1]);
        assert!((ns.system.blocks[1].lam.re.to_f64() - 0.25).abs() < 1e-70);
        assert!(validate_prepared(&ns.system).passed());
    }
}
