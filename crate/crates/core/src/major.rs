//! Principal-major extraction in the Borel plane and assembly of the
//! connection matrices K⁺.
//!
//! Around a Stokes value ω the continuation of a column block along γ⁺ is
//! sampled on rings spanning several sheets; a least-squares fit of the
//! finite monomial model ξ^{λ+s-1}·lnᵖξ dictated by the singularity
//! structure recovers the principal major. The connection block k is the
//! coefficient matrix of the dominant monomial ξ^{λ_j-λ_k-1}.

use crate::borel_ode::BlockOdeWalker;
use crate::error::{CoreError, Result};
use crate::germ::{GermTerm, LogPolynomialGerm};
use crate::homological::{borel_first_block, solve_homological, Cols};
use crate::matrix::Matrix;
use crate::num::{two_pow, Complex};
use crate::path::{extend_radial, extend_spiral, gamma_plus, PathSpec};
use crate::system::{principal_arg, stokes_values, LevelOneSystem};
use rug::Float;

/// Sampling and fitting controls.
#[derive(Clone, Debug)]
pub struct ExtractionConfig {
    /// Ring radii as fractions of the clearance ν (default ν/4, ν/8).
    pub radius_fractions: Vec<f64>,
    pub angles_per_turn: usize,
    pub turns: usize,
    /// Number of analytic-coefficient shifts kept per exponent class.
    pub shifts: usize,
    /// Relative tolerance on the fit residual.
    pub fit_tol: f64,
    /// Relative drop tolerance for germ coefficients.
    pub drop_tol: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            radius_fractions: vec![0.25, 0.125],
            angles_per_turn: 24,
            turns: 3,
            shifts: 8,
            fit_tol: 1e-8,
            drop_tol: 1e-10,
        }
    }
}

/// Result of extracting the principal major of one column block at ω.
#[derive(Clone, Debug)]
pub struct MajorExtraction {
    /// Germ of each entry: (global row, column within the block, germ).
    pub germs: Vec<(usize, usize, LogPolynomialGerm)>,
    /// n × n_cb connection block: coefficient of ξ^{λ_j-λ_cb-1}.
    pub k_block: Matrix,
    /// max relative fit residual over all samples and entries
    pub fit_residual: Float,
    /// consistency of the dominant block with the ξ^{J}·k·ξ^{-J} structure
    pub jordan_consistency: Float,
}

/// Connection matrix of a direction: per-ω blocks and their sum.
#[derive(Clone, Debug)]
pub struct ConnectionMatrix {
    pub theta_star: Float,
    pub per_omega: Vec<(Complex, Matrix)>,
    pub total: Matrix,
    /// (ω, global row, global col, germ) for every extracted entry
    pub germs: Vec<(Complex, usize, usize, LogPolynomialGerm)>,
    pub fit_residual: Float,
}

impl ConnectionMatrix {
    /// The zero-pattern invariant: block (j,k) vanishes unless a_j - a_k = ω.
    pub fn assert_pattern(&self, sys: &LevelOneSystem) -> Result<()> {
        let st = sys.structure();
        let tol = sys.value_tol();
        for (omega, mat) in &self.per_omega {
            for j in 0..st.count() {
                for k in 0..st.count() {
                    let d = sys.blocks[j].a.sub(&sys.blocks[k].a);
                    let is_omega = d.dist(omega) <= tol;
                    if is_omega {
                        continue;
                    }
                    for r in 0..st.sizes[j] {
                        for c in 0..st.sizes[k] {
                            if !mat[(st.offsets[j] + r, st.offsets[k] + c)].is_zero() {
                                return Err(CoreError::FitResidual {
                                    residual: "nonzero entry outside the ω pattern".into(),
                                    tolerance: "0".into(),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Monomial grid of the fit model for one row-block.
struct FitModel {
    /// (exponent e, log power p, slot for the dominant ξ^{λ_j-λ_cb-1})
    columns: Vec<(Complex, u32, bool)>,
}

fn build_model(
    sys: &LevelOneSystem,
    cb0: usize,
    j: usize,
    omega: &Complex,
    cfg: &ExtractionConfig,
) -> Result<FitModel> {
    let prec = sys.prec();
    let tol = sys.value_tol();
    let lam_cb = &sys.blocks[cb0].lam;
    let n_cb = sys.blocks[cb0].size;
    let st = sys.structure();

    struct Class {
        rep: Complex,
        members: Vec<(i64, u32, bool)>, // (integer offset of exponent from rep, log bound, dominant?)
    }
    let mut classes: Vec<Class> = Vec::new();
    let merge_tol = two_pow(prec, -((prec / 4) as i32));
    let mut add = |e: Complex, pmax: u32, dominant: bool, classes: &mut Vec<Class>| {
        let fl = e.re.to_f64().floor() as i64;
        let rep = e.sub(&Complex::from_i64(prec, fl));
        for c in classes.iter_mut() {
            if c.rep.dist(&rep) <= merge_tol {
                c.members.push((fl, pmax, dominant));
                return;
            }
        }
        classes.push(Class { rep, members: vec![(fl, pmax, dominant)] });
    };

    // dominant block: only when a_j - a_cb = ω
    let dj = sys.blocks[j].a.sub(&sys.blocks[cb0].a);
    if dj.dist(omega) <= tol {
        let e = sys.blocks[j].lam.sub(lam_cb).sub(&Complex::one(prec));
        let pmax = (sys.blocks[j].size - 1 + n_cb - 1) as u32;
        add(e, pmax, true, &mut classes);
    }
    // remainder classes from every block resonant at ω
    for (l, bl) in sys.blocks.iter().enumerate() {
        let dl = bl.a.sub(&sys.blocks[cb0].a);
        if dl.dist(omega) > tol {
            continue;
        }
        let e = bl.lam.sub(lam_cb);
        let lam_zero = e.abs() <= tol;
        let mut pmax = (st.sizes[l] - 1 + n_cb - 1) as u32;
        if lam_zero {
            pmax += 1;
        }
        add(e, pmax, false, &mut classes);
    }
    // congruent-but-distinct exponent representatives cannot occur for
    // reduced λ data; if tolerance merging ever conflates two separated
    // values, report the ambiguity instead of resolving it silently
    for (i, a) in classes.iter().enumerate() {
        for b in &classes[i + 1..] {
            let d = a.rep.sub(&b.rep);
            if d.abs() <= Float::with_val(prec, &merge_tol * 16u32) {
                return Err(CoreError::ModelAmbiguity(
                    format!("{}", a.rep),
                    format!("{}", b.rep),
                ));
            }
        }
    }
    // holomorphic absorber for the regular part of f̂ at ω
    let has_zero_class = classes.iter().any(|c| c.rep.abs() <= merge_tol);
    if !has_zero_class {
        add(Complex::one(prec), 0, false, &mut classes); // exponent 1 ≡ rep 0 shift 1
    }

    let mut columns = Vec::new();
    for c in &classes {
        let min_off = c.members.iter().map(|m| m.0).min().unwrap();
        let pmax = c.members.iter().map(|m| m.1).max().unwrap();
        for s in 0..=(cfg.shifts as i64) {
            let e = c.rep.add(&Complex::from_i64(prec, min_off + s));
            for p in 0..=pmax {
                let dominant_slot =
                    c.members.iter().any(|m| m.2 && m.0 == min_off + s) && p == 0;
                columns.push((e.clone(), p, dominant_slot));
            }
        }
    }
    Ok(FitModel { columns })
}

/// Ring samples of a column block around ω continued along γ⁺.
pub struct RingSamples {
    /// (r, tracked argument α)
    pub points: Vec<(Float, Float)>,
    /// value matrices (n × n_cb)
    pub values: Vec<Matrix>,
}

/// Continue the column block `cb` (1-based) along γ⁺ toward ω and collect
/// ring samples on `cfg.turns` sheets at each configured radius.
pub fn ring_samples(
    sys: &LevelOneSystem,
    cb: usize,
    order: usize,
    omega: &Complex,
    theta_star: &Float,
    cfg: &ExtractionConfig,
) -> Result<RingSamples> {
    let prec = sys.prec();
    let cb0 = cb - 1;
    let f = solve_homological(sys, order, Cols::Block(cb))?;
    let borel = borel_first_block(&f)?;

    // singular support of this column block (0 handled separately)
    let tol = sys.value_tol();
    let mut support: Vec<Complex> = Vec::new();
    for b in &sys.blocks {
        let d = b.a.sub(&sys.blocks[cb0].a);
        if d.abs() > tol && !support.iter().any(|s| s.dist(&d) <= tol) {
            support.push(d);
        }
    }
    // clearance ν = 0.1 × min distance between distinct support points (with 0)
    let mut min_dist = Float::with_val(prec, 1e30);
    {
        let mut pts = support.clone();
        pts.push(Complex::zero(prec));
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d = pts[i].dist(&pts[j]);
                if d < min_dist {
                    min_dist = d;
                }
            }
        }
    }
    let nu = Float::with_val(prec, &min_dist / 10u32);

    // collinear singular points strictly between 0 and ω (to bypass)
    let angle_tol = sys.angle_tol();
    let on_ray: Vec<Complex> = support
        .iter()
        .filter(|w| {
            let da = principal_arg(&w.arg());
            let diff = Float::with_val(prec, &da - theta_star).abs();
            let two_pi = Float::with_val(prec, 2 * &crate::num::pi(prec));
            let wrapped = Float::with_val(prec, &diff - &two_pi).abs();
            (diff <= angle_tol || wrapped <= angle_tol) && w.abs() < omega.abs()
        })
        .cloned()
        .collect();

    let mut points = Vec::new();
    let mut values = Vec::new();
    let start_arg = Float::with_val(prec, theta_star - &crate::num::pi(prec));
    // seed the ODE on the first leg, a quarter of the way to the nearest
    // singular point
    let seed_len = {
        let mut m = omega.abs();
        for s in &support {
            let d = s.abs();
            if d < m {
                m = d;
            }
        }
        Float::with_val(prec, &m / 4u32)
    };
    let dirc = {
        let (si, co) = theta_star.clone().sin_cos(Float::new(prec));
        Complex { re: co, im: si }
    };
    let seed = dirc.scale(&seed_len);

    for frac in cfg.radius_fractions.iter() {
        let r = Float::with_val(prec, &nu * Float::with_val(prec, *frac));
        let mut path = gamma_plus(prec, theta_star, omega, &on_ray, &nu, &r);
        // start at the seed, not at the origin
        path.nodes[0] = seed.clone();
        extend_spiral(&mut path, omega, &r, &start_arg, cfg.turns, cfg.angles_per_turn);
        let mut full_support = support.clone();
        full_support.push(Complex::zero(prec));
        path.validate_clearance(&full_support, &nu)?;
        let mut walker = BlockOdeWalker::new(sys, cb, &borel, &seed)?;
        let vals = walker.follow(&path)?;
        for (stop, v) in path.samples.iter().zip(vals) {
            let (rr, aa) = stop.polar.clone().unwrap();
            points.push((rr, aa));
            values.push(v);
        }
    }
    Ok(RingSamples { points, values })
}

/// Fit the finite singular model to ring samples and extract the principal
/// major and connection block of one column block at ω.
pub fn extract_principal_major(
    sys: &LevelOneSystem,
    cb: usize,
    samples: &RingSamples,
    omega: &Complex,
    cfg: &ExtractionConfig,
) -> Result<MajorExtraction> {
    let prec = sys.prec();
    let cb0 = cb - 1;
    let st = sys.structure();
    let n_cb = st.sizes[cb0];
    let tol = sys.value_tol();

    let mut k_block = Matrix::zero(prec, sys.n, n_cb);
    let mut germs = Vec::new();
    let mut worst_residual = Float::new(prec);
    let mut worst_consistency = Float::new(prec);

    for j in 0..st.count() {
        let model = build_model(sys, cb0, j, omega, cfg)?;
        let ncols = model.columns.len();
        let nrows = samples.points.len();
        if nrows < 2 * ncols {
            return Err(CoreError::IllConditioned(format!(
                "{nrows} samples for {ncols} model columns"
            )));
        }
        // design matrix, shared by every entry of the row block
        let mut design = Matrix::zero(prec, nrows, ncols);
        let mut col_scale = vec![Float::with_val(prec, 1); ncols];
        for (ci, (e, p, _)) in model.columns.iter().enumerate() {
            let mut mx = Float::new(prec);
            for (si, (r, a)) in samples.points.iter().enumerate() {
                let lnxi = Complex { re: r.clone().ln(), im: a.clone() };
                let mut v = e.mul(&lnxi).exp();
                for _ in 0..*p {
                    v = v.mul(&lnxi);
                }
                let va = v.abs();
                if va > mx {
                    mx = va;
                }
                design[(si, ci)] = v;
            }
            if mx.is_zero() {
                mx = Float::with_val(prec, 1);
            }
            for si in 0..nrows {
                design[(si, ci)] = design[(si, ci)].scale(&Float::with_val(prec, 1 / &mx));
            }
            col_scale[ci] = mx;
        }
        let at = design.conj_transpose();
        let ata = at.mul(&design);

        // fitted (unscaled) coefficients per entry of the row block
        let mut coeffs: Vec<Vec<Complex>> = Vec::with_capacity(st.sizes[j] * n_cb);
        for lr in 0..st.sizes[j] {
            let row = st.offsets[j] + lr;
            for c in 0..n_cb {
                let rhs = Matrix::from_fn(prec, nrows, 1, |si, _| samples.values[si][(row, c)].clone());
                let atb = at.mul(&rhs);
                let sol = ata.solve(&atb)?;
                let mut scale = Float::with_val(prec, 1);
                for si in 0..nrows {
                    let a = samples.values[si][(row, c)].abs();
                    if a > scale {
                        scale = a.clone();
                    }
                }
                let mut res = Float::new(prec);
                for si in 0..nrows {
                    let mut acc = Complex::zero(prec);
                    for ci in 0..ncols {
                        acc = acc.add(&design[(si, ci)].mul(&sol[(ci, 0)]));
                    }
                    let d = acc.dist(&samples.values[si][(row, c)]);
                    if d > res {
                        res = d;
                    }
                }
                res /= &scale;
                if res > worst_residual {
                    worst_residual = res.clone();
                }
                if res.to_f64() > cfg.fit_tol {
                    return Err(CoreError::FitResidual {
                        residual: format!("{:e}", res),
                        tolerance: format!("{:e}", cfg.fit_tol),
                    });
                }
                let unscaled: Vec<Complex> = (0..ncols)
                    .map(|ci| sol[(ci, 0)].div(&Complex::from_real(col_scale[ci].clone())))
                    .collect();
                let drop = Float::with_val(prec, &scale * Float::with_val(prec, cfg.drop_tol));
                let mut terms = Vec::new();
                for (ci, (e, p, dominant)) in model.columns.iter().enumerate() {
                    let coeff = unscaled[ci].clone();
                    if *dominant {
                        k_block[(row, c)] = coeff.clone();
                    }
                    if coeff.abs() <= drop {
                        continue;
                    }
                    let fl = e.re.to_f64().floor() as i64;
                    let lam = e.sub(&Complex::from_i64(prec, fl));
                    let term = GermTerm { lam, shift: fl + 1, p: *p, coeff };
                    if term.is_holomorphic() {
                        continue; // the principal major never contains a holomorphic term
                    }
                    terms.push(term);
                }
                let g = LogPolynomialGerm { center: omega.clone(), terms }.normalized(&drop);
                germs.push((row, c, g));
                coeffs.push(unscaled);
            }
        }

        // Jordan-structure consistency on the dominant exponent:
        // the lnᵖ coefficient of entry (ℓ,c) must equal
        // Σ_{ℓ'+(c-c')=p} (-1)^{c-c'} k_{ℓ+ℓ',c'} / (ℓ'!·(c-c')!).
        let dj = sys.blocks[j].a.sub(&sys.blocks[cb0].a);
        if dj.dist(omega) <= tol {
            let e_dom = sys.blocks[j].lam.sub(&sys.blocks[cb0].lam).sub(&Complex::one(prec));
            let nj = st.sizes[j];
            let scale = {
                let s = k_block.max_abs();
                let one = Float::with_val(prec, 1);
                if s > one { s } else { one }
            };
            for lr in 0..nj {
                for c in 0..n_cb {
                    let fitted = &coeffs[lr * n_cb + c];
                    for (ci, (e, p, _)) in model.columns.iter().enumerate() {
                        if *p == 0 || e.dist(&e_dom) > tol {
                            continue;
                        }
                        let mut predict = Complex::zero(prec);
                        for lp in 0..=(*p as usize) {
                            let cp = *p as usize - lp;
                            if lr + lp >= nj || c < cp {
                                continue;
                            }
                            let mut w = Complex::one(prec);
                            for t in 1..=lp {
                                w = w.div_i64(t as i64);
                            }
                            for t in 1..=cp {
                                w = w.div_i64(t as i64);
                            }
                            if cp % 2 == 1 {
                                w = w.neg();
                            }
                            predict = predict.add(&w.mul(&k_block[(st.offsets[j] + lr + lp, c - cp)]));
                        }
                        let d = Float::with_val(prec, fitted[ci].dist(&predict) / &scale);
                        if d > worst_consistency {
                            worst_consistency = d;
                        }
                    }
                }
            }
        }
    }

    Ok(MajorExtraction {
        germs,
        k_block,
        fit_residual: worst_residual,
        jordan_consistency: worst_consistency,
    })
}

/// Assemble the connection matrix K⁺_θ = Σ_{ω ∈ 𝛀_θ} K⁺_(ω).
pub fn connection_matrix(
    sys: &LevelOneSystem,
    theta_star: &Float,
    order: usize,
    cfg: &ExtractionConfig,
) -> Result<ConnectionMatrix> {
    let prec = sys.prec();
    let st = sys.structure();
    let sv = stokes_values(sys);
    let tol = sys.value_tol();
    let angle_tol = sys.angle_tol();

    let omegas: Vec<Complex> = match sv.direction_at(theta_star, &angle_tol) {
        Some(d) => d.omegas.clone(),
        None => Vec::new(),
    };

    let mut per_omega: Vec<(Complex, Matrix)> = Vec::new();
    let mut germs = Vec::new();
    let mut worst = Float::new(prec);
    for omega in &omegas {
        let mut mat = Matrix::zero(prec, sys.n, sys.n);
        for cb in 1..=st.count() {
            // does any row block see ω from this column block?
            let seen = sys
                .blocks
                .iter()
                .any(|b| b.a.sub(&sys.blocks[cb - 1].a).dist(omega) <= tol);
            if !seen {
                continue;
            }
            let samples = ring_samples(sys, cb, order, omega, theta_star, cfg)
                .map_err(|e| e.at_stage("continuation"))?;
            let ext = extract_principal_major(sys, cb, &samples, omega, cfg)
                .map_err(|e| e.at_stage("major-fit"))?;
            if ext.fit_residual > worst {
                worst = ext.fit_residual.clone();
            }
            for (row, c, g) in ext.germs {
                germs.push((omega.clone(), row, st.offsets[cb - 1] + c, g));
            }
            // place the k block, enforcing the zero pattern exactly
            for j in 0..st.count() {
                let dj = sys.blocks[j].a.sub(&sys.blocks[cb - 1].a);
                if dj.dist(omega) > tol {
                    continue;
                }
                for r in 0..st.sizes[j] {
                    for c in 0..st.sizes[cb - 1] {
                        mat[(st.offsets[j] + r, st.offsets[cb - 1] + c)] =
                            ext.k_block[(st.offsets[j] + r, c)].clone();
                    }
                }
            }
        }
        per_omega.push((omega.clone(), mat));
    }

    let mut total = Matrix::zero(prec, sys.n, sys.n);
    for (_, m) in &per_omega {
        total = total.add(m);
    }
    let cm = ConnectionMatrix {
        theta_star: theta_star.clone(),
        per_omega,
        total,
        germs,
        fit_residual: worst,
    };
    cm.assert_pattern(sys)?;
    Ok(cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{pi, DEFAULT_PREC as P};
    use crate::system::JordanBlockSpec;

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

    #[test]
    fn connection_constants_of_resonant4x4() {
        let sys = resonant4x4();
        let cfg = ExtractionConfig::default();
        let cm = connection_matrix(&sys, &Float::new(P), 40, &cfg).unwrap();
        assert_eq!(cm.per_omega.len(), 1);
        // K first column: (0, k2, k3, k4) with k4 = 1, k3 = 2+πi,
        // k2 = ½(6-π²+4πi)
        let k4 = Complex::one(P);
        let k3 = Complex { re: Float::with_val(P, 2), im: pi(P) };
        let k2 = {
            let mut re = Float::with_val(P, 6);
            re -= &pi(P).clone().square();
            re /= 2;
            Complex { re, im: Float::with_val(P, 2 * &pi(P)) }
        };
        let t = &cm.total;
        assert!(t[(3, 0)].dist(&k4).to_f64() < 1e-8, "k4: {:?}", t[(3, 0)]);
        assert!(t[(2, 0)].dist(&k3).to_f64() < 1e-8, "k3: {:?}", t[(2, 0)]);
        assert!(t[(1, 0)].dist(&k2).to_f64() < 1e-8, "k2: {:?}", t[(1, 0)]);
        // all other entries vanish identically
        for r in 0..4 {
            for c in 0..4 {
                if c == 0 && r > 0 {
                    continue;
                }
                assert!(t[(r, c)].is_zero(), "entry ({r},{c})");
            }
        }
    }

    #[test]
    fn trivial_direction_gives_zero_matrix() {
        let sys = resonant4x4();
        let cfg = ExtractionConfig::default();
        // θ = π: the only Stokes value there is -1, seen by column block 2
        let theta = Float::with_val(P, -&pi(P));
        let cm = connection_matrix(&sys, &theta, 40, &cfg).unwrap();
        assert!(cm.total.max_abs().to_f64() < 1e-8, "K_π = {:e}", cm.total.max_abs());
        // a non-anti-Stokes direction yields an empty section
        let cm2 = connection_matrix(&sys, &Float::with_val(P, -2.1), 40, &cfg).unwrap();
        assert!(cm2.per_omega.is_empty());
        assert!(cm2.total.max_abs().is_zero());
    }
}
