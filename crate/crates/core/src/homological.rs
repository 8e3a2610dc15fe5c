//! Order-by-order solution of the homological system
//! x²dF̃/dx - A₀(x)F̃ + F̃A₀(x) = B(x)F̃ with F̃(0) = I.
//!
//! Identifying the coefficient of x^m and splitting A₀ = D + xL
//! (D block-scalar, L the monodromy-exponent matrix) gives, per block (j,k),
//!
//!   (a_j - a_k)·F_m^{j;k} = (m-1)F_{m-1}^{j;k} - [L, F_{m-1}]^{j;k}
//!                           - (Σ_{i=1..m} B_i F_{m-i})^{j;k}.
//!
//! Blocks with a_j ≠ a_k divide out by (a_j - a_k); blocks with a_j = a_k
//! are determined by the same identity written at order m+1, a scalar plus
//! nilpotent Sylvester equation solved from the last row up and the first
//! column on (the elimination order of the paper's iteration).

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::num::{factorial, two_pow, Complex};
use crate::system::LevelOneSystem;
use rug::Float;

/// Which columns of F̃ to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cols {
    /// The first column-block f̃ (block 1).
    FirstBlock,
    /// A single column-block, 1-based.
    Block(usize),
    /// All columns, assembled block by block.
    All,
}

/// Coefficients of a (column-block of the) formal gauge transformation.
#[derive(Clone, Debug)]
pub struct BlockMatrixSeries {
    /// coeffs[m] is the n×n_cols coefficient of x^m.
    pub coeffs: Vec<Matrix>,
    /// 1-based column-block index, or None when all columns are present.
    pub col_block: Option<usize>,
    /// Row offset of the identity slice in coeff 0.
    pub col_offset: usize,
}

impl BlockMatrixSeries {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }
}

/// Borel transform of a column-block series: the removed identity slice is
/// reported separately as the δ part.
#[derive(Clone, Debug)]
pub struct BorelBlockSeries {
    /// coeffs[m] is the n×n_cols coefficient of ξ^m.
    pub coeffs: Vec<Matrix>,
    /// δ·(identity slice) carried by the constant term of the x-series.
    pub delta: Matrix,
    pub col_block: Option<usize>,
    pub col_offset: usize,
}

impl BorelBlockSeries {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Taylor series of one entry as a scalar ξ-series.
    pub fn entry_series(&self, row: usize, col: usize) -> crate::series::TruncatedSeries {
        crate::series::TruncatedSeries::new(
            crate::series::Var::Xi,
            self.coeffs.iter().map(|m| m[(row, col)].clone()).collect(),
        )
    }
}

/// Elimination order inside a block used by the Sylvester solve. Both walk
/// the dependency graph (needs row below, column to the left); they must
/// produce identical coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elimination {
    ColumnMajor,
    RowMajor,
}

fn solve_column_block(
    sys: &LevelOneSystem,
    cb: usize, // 0-based column block
    order: usize,
    elim: Elimination,
) -> Result<BlockMatrixSeries> {
    let prec = sys.prec();
    let st = sys.structure();
    let nc = st.sizes[cb];
    let col_off = st.offsets[cb];
    let a_cb = sys.blocks[cb].a.clone();
    let lam_cb = sys.blocks[cb].lam.clone();
    let tol = sys.value_tol();
    let m_b = sys.b_order();

    // F_0 = identity slice at the cb columns
    let mut f: Vec<Matrix> = Vec::with_capacity(order + 2);
    let mut f0 = Matrix::zero(prec, sys.n, nc);
    for c in 0..nc {
        f0[(col_off + c, c)] = Complex::one(prec);
    }
    f.push(f0);

    // commutator with L restricted to the cb columns:
    // (L F)^{j} - F (λ_cb I + J_{n_cb})
    let l_full = sys.l_matrix();
    let commutator = |fm: &Matrix| -> Matrix {
        let lf = l_full.mul(fm);
        let mut fr = Matrix::zero(prec, sys.n, nc);
        for r in 0..sys.n {
            for c in 0..nc {
                // (F · (λ_cb I + J))_{r,c} = λ_cb F_{r,c} + F_{r,c-1}
                let mut v = fm[(r, c)].mul(&lam_cb);
                if c > 0 {
                    v = v.add(&fm[(r, c - 1)]);
                }
                fr[(r, c)] = v;
            }
        }
        lf.sub(&fr)
    };

    // convolution term Σ_{i=1..m} B_i F_{m-i}, with F available up to m-1
    let conv = |f: &[Matrix], m: usize| -> Matrix {
        let mut acc = Matrix::zero(prec, sys.n, nc);
        for i in 1..=m.min(m_b) {
            if m - i >= f.len() {
                continue;
            }
            acc = acc.add(&sys.b_coeffs[i - 1].mul(&f[m - i]));
        }
        acc
    };

    for m in 1..=order {
        let prev = &f[m - 1];
        let mut rhs = prev.scale(&Complex::from_i64(prec, (m - 1) as i64));
        rhs = rhs.sub(&commutator(prev));
        rhs = rhs.sub(&conv(&f, m));

        let mut fm = Matrix::zero(prec, sys.n, nc);
        // different-a row-blocks: divide by (a_j - a_cb)
        for j in 0..st.count() {
            let da = sys.blocks[j].a.sub(&a_cb);
            if da.abs() <= tol {
                continue;
            }
            for r in 0..st.sizes[j] {
                for c in 0..nc {
                    fm[(st.offsets[j] + r, c)] = rhs[(st.offsets[j] + r, c)].div(&da);
                }
            }
        }

        // same-a row-blocks from the order-(m+1) identity:
        // (m - (λ_j - λ_cb))F - J_j F + F J_cb = (Σ_{i=1..m+1} B_i F_{m+1-i})^{j}
        // The i=1 term only touches the different-a rows of F_m just filled.
        let mut with_fm = f.clone();
        with_fm.push(fm);
        let r_next = conv(&with_fm, m + 1);
        let mut fm = with_fm.pop().unwrap();
        for j in 0..st.count() {
            let da = sys.blocks[j].a.sub(&a_cb);
            if da.abs() > tol {
                continue;
            }
            let mu = Complex::from_i64(prec, m as i64).sub(&sys.blocks[j].lam.sub(&lam_cb));
            if mu.abs() <= tol {
                return Err(CoreError::SingularStep { j: j + 1, k: cb + 1, row: 0, m });
            }
            let nj = st.sizes[j];
            let off = st.offsets[j];
            let solve_entry = |fm: &mut Matrix, l: usize, c: usize| {
                // μF_{l,c} - F_{l+1,c} + F_{l,c-1} = R_{l,c}
                let mut v = r_next[(off + l, c)].clone();
                if l + 1 < nj {
                    v = v.add(&fm[(off + l + 1, c)]);
                }
                if c > 0 {
                    v = v.sub(&fm[(off + l, c - 1)]);
                }
                fm[(off + l, c)] = v.div(&mu);
            };
            match elim {
                Elimination::ColumnMajor => {
                    for c in 0..nc {
                        for l in (0..nj).rev() {
                            solve_entry(&mut fm, l, c);
                        }
                    }
                }
                Elimination::RowMajor => {
                    for l in (0..nj).rev() {
                        for c in 0..nc {
                            solve_entry(&mut fm, l, c);
                        }
                    }
                }
            }
        }
        f.push(fm);
    }

    Ok(BlockMatrixSeries { coeffs: f, col_block: Some(cb + 1), col_offset: col_off })
}

/// Solve the homological system to the given order.
pub fn solve_homological(sys: &LevelOneSystem, order: usize, cols: Cols) -> Result<BlockMatrixSeries> {
    solve_homological_with(sys, order, cols, Elimination::ColumnMajor)
}

/// Same as [`solve_homological`] with an explicit elimination order
/// (the two orders must agree; exposed for the uniqueness check).
pub fn solve_homological_with(
    sys: &LevelOneSystem,
    order: usize,
    cols: Cols,
    elim: Elimination,
) -> Result<BlockMatrixSeries> {
    crate::system::validate_prepared(sys).into_result()?;
    match cols {
        Cols::FirstBlock => solve_column_block(sys, 0, order, elim),
        Cols::Block(k) => {
            assert!(k >= 1 && k <= sys.blocks.len(), "column block out of range");
            solve_column_block(sys, k - 1, order, elim)
        }
        Cols::All => {
            let prec = sys.prec();
            let st = sys.structure();
            let mut coeffs = vec![Matrix::zero(prec, sys.n, sys.n); order + 1];
            for k in 0..st.count() {
                let part = solve_column_block(sys, k, order, elim)?;
                for (m, pm) in part.coeffs.iter().enumerate() {
                    for r in 0..sys.n {
                        for c in 0..st.sizes[k] {
                            coeffs[m][(r, st.offsets[k] + c)] = pm[(r, c)].clone();
                        }
                    }
                }
            }
            Ok(BlockMatrixSeries { coeffs, col_block: None, col_offset: 0 })
        }
    }
}

/// Max scaled residual of the homological identity over orders m ≤ N.
///
/// Substituting the computed series back, the coefficient identity reads
/// res_m = (m-1)F_{m-1} - [D,F_m] - [L,F_{m-1}] - Σ B_i F_{m-i} = 0,
/// where the commutators are taken against the column block's data.
pub fn homological_residual(sys: &LevelOneSystem, series: &BlockMatrixSeries) -> Float {
    let prec = sys.prec();
    let st = sys.structure();
    let l_full = sys.l_matrix();
    let col_blocks: Vec<usize> = match series.col_block {
        Some(k) => vec![k - 1],
        None => (0..st.count()).collect(),
    };
    let mut worst = Float::new(prec);
    for m in 1..series.coeffs.len() {
        let fm = &series.coeffs[m];
        let fprev = &series.coeffs[m - 1];
        let mut res = fprev.scale(&Complex::from_i64(prec, (m - 1) as i64));
        // -[D, F_m]
        let mut dcom = Matrix::zero(prec, sys.n, fm.cols);
        let mut col_cursor = 0usize;
        for &cb in &col_blocks {
            let a_cb = &sys.blocks[cb].a;
            for c in 0..st.sizes[cb] {
                for j in 0..st.count() {
                    let da = sys.blocks[j].a.sub(a_cb);
                    for r in 0..st.sizes[j] {
                        dcom[(st.offsets[j] + r, col_cursor + c)] =
                            fm[(st.offsets[j] + r, col_cursor + c)].mul(&da);
                    }
                }
            }
            col_cursor += st.sizes[cb];
        }
        res = res.sub(&dcom);
        // -[L, F_{m-1}]
        let lf = l_full.mul(fprev);
        let mut fl = Matrix::zero(prec, sys.n, fm.cols);
        let mut col_cursor = 0usize;
        for &cb in &col_blocks {
            let lam_cb = &sys.blocks[cb].lam;
            for c in 0..st.sizes[cb] {
                for r in 0..sys.n {
                    let mut v = fprev[(r, col_cursor + c)].mul(lam_cb);
                    if c > 0 {
                        v = v.add(&fprev[(r, col_cursor + c - 1)]);
                    }
                    fl[(r, col_cursor + c)] = v;
                }
            }
            col_cursor += st.sizes[cb];
        }
        res = res.sub(&lf.sub(&fl));
        // -Σ B_i F_{m-i}
        for i in 1..=m.min(sys.b_order()) {
            res = res.sub(&sys.b_coeffs[i - 1].mul(&series.coeffs[m - i]));
        }
        let scale = {
            let s = fm.max_abs();
            let one = Float::with_val(prec, 1);
            if s > one {
                s
            } else {
                one
            }
        };
        let r = Float::with_val(prec, res.max_abs() / scale);
        if r > worst {
            worst = r;
        }
    }
    worst
}

/// Entrywise Borel transform of (series - identity slice); the identity is
/// returned as the δ part.
pub fn borel_first_block(series: &BlockMatrixSeries) -> Result<BorelBlockSeries> {
    let n_rows = series.coeffs[0].rows;
    let n_cols = series.coeffs[0].cols;
    let prec = series.coeffs[0].prec();
    // coeff 0 must be the identity slice at the recorded offset
    let mut delta = Matrix::zero(prec, n_rows, n_cols);
    {
        let c0 = &series.coeffs[0];
        let tol = two_pow(prec, -((prec / 2) as i32));
        let off = series.col_offset;
        for c in 0..n_cols {
            for r in 0..n_rows {
                let want = if r == off + c { 1 } else { 0 };
                let d = c0[(r, c)].sub(&Complex::from_i64(prec, want)).abs();
                if d > tol {
                    return Err(CoreError::NonzeroConstantTerm(
                        "column-block series must start at an identity slice".into(),
                    ));
                }
            }
        }
        for c in 0..n_cols {
            delta[(off + c, c)] = Complex::one(prec);
        }
    }
    let order = series.order();
    let mut coeffs = Vec::with_capacity(order.max(1));
    for m in 1..=order {
        let g = factorial(prec, (m - 1) as u32);
        coeffs.push(series.coeffs[m].div_real(&g));
    }
    if coeffs.is_empty() {
        coeffs.push(Matrix::zero(prec, n_rows, n_cols));
    }
    Ok(BorelBlockSeries {
        coeffs,
        delta,
        col_block: series.col_block,
        col_offset: series.col_offset,
    })
}
