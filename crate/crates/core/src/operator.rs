//! Gram blocks of the centered series and the block-tridiagonal operator built from them.
//!
//! For `V = (W_1, ..., W_L)` stacked row-wise, the loss
//!
//! ```text
//! -(1 - λ) Σ_i |W_i X|² + λ Σ_{i<L} |W_i P - W_{i+1} Q|²
//! ```
//!
//! equals `-V' H V` with `H` block-tridiagonal:
//!
//! ```text
//! D_1 = (1-λ)Cxx - λCpp
//! D_i = (1-λ)Cxx - λ(Cpp + Cqq)      1 < i < L
//! D_L = (1-λ)Cxx - λCqq
//! H_{i,i+1} = λCpq,  H_{i+1,i} = λCpq'
//! ```
//!
//! where `P` drops the first column of `X` and `Q` drops the last one.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};

use crate::error::{Result, StpcaError};
use crate::series::SeriesMatrix;

/// Largest `nL` for which a dense `H` may be assembled.
pub const DENSE_LIMIT: usize = 400;

/// `XX'`, `PP'`, `QQ'` and `PQ'` of a centered `n × m` series.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlocks {
    pub cxx: DMatrix<f64>,
    pub cpp: DMatrix<f64>,
    pub cqq: DMatrix<f64>,
    pub cpq: DMatrix<f64>,
    pub n: usize,
    pub m: usize,
}

pub fn gram_blocks(centered: &SeriesMatrix) -> Result<GramBlocks> {
    let x = centered.values();
    let (n, m) = x.shape();
    if m < 2 {
        return Err(StpcaError::InsufficientSamples { needed: 2, got: m });
    }
    let p = x.columns(1, m - 1);
    let q = x.columns(0, m - 1);
    let cxx = x * x.transpose();
    let cpp = p * p.transpose();
    let cqq = q * q.transpose();
    let cpq = p * q.transpose();
    Ok(GramBlocks {
        cxx: symmetrize(cxx),
        cpp: symmetrize(cpp),
        cqq: symmetrize(cqq),
        cpq,
        n,
        m,
    })
}

// Products like A·A' can differ from their transpose in the last bit.
fn symmetrize(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// Matrix-free `H(X)` of dimension `nL × nL`.
#[derive(Debug, Clone)]
pub struct BlockTridiagOperator {
    blocks: GramBlocks,
    lambda: f64,
    embedding_dim: usize,
    diag_first: DMatrix<f64>,
    diag_mid: DMatrix<f64>,
    diag_last: DMatrix<f64>,
    upper: DMatrix<f64>,
    lower: DMatrix<f64>,
}

impl BlockTridiagOperator {
    pub fn new(blocks: GramBlocks, lambda: f64, embedding_dim: usize) -> Result<Self> {
        if embedding_dim == 0 {
            return Err(StpcaError::Parameter("embedding dimension must be positive".into()));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(StpcaError::Parameter(format!(
                "lambda must lie in [0, 1], got {lambda}"
            )));
        }
        let base = &blocks.cxx * (1.0 - lambda);
        let (diag_first, diag_mid, diag_last) = if embedding_dim == 1 {
            (base.clone(), base.clone(), base)
        } else {
            (
                &base - &blocks.cpp * lambda,
                &base - (&blocks.cpp + &blocks.cqq) * lambda,
                &base - &blocks.cqq * lambda,
            )
        };
        let upper = &blocks.cpq * lambda;
        let lower = upper.transpose();
        Ok(Self {
            blocks,
            lambda,
            embedding_dim,
            diag_first,
            diag_mid,
            diag_last,
            upper,
            lower,
        })
    }

    pub fn blocks(&self) -> &GramBlocks {
        &self.blocks
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn block_size(&self) -> usize {
        self.blocks.n
    }

    /// `nL`.
    pub fn dim(&self) -> usize {
        self.blocks.n * self.embedding_dim
    }

    /// Diagonal block `i` (0-based).
    pub fn diagonal_block(&self, i: usize) -> &DMatrix<f64> {
        if self.embedding_dim == 1 || i == 0 {
            &self.diag_first
        } else if i + 1 == self.embedding_dim {
            &self.diag_last
        } else {
            &self.diag_mid
        }
    }

    /// `λ·Cpq`, the block at `(i, i+1)`.
    pub fn upper_block(&self) -> &DMatrix<f64> {
        &self.upper
    }

    /// Writes `H·v` into `out`. Cost `O(L n²)`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let dim = self.dim();
        if v.len() != dim || out.len() != dim {
            return Err(StpcaError::Shape(format!(
                "operator of dimension {dim} applied to vector of length {} (output {})",
                v.len(),
                out.len()
            )));
        }
        let n = self.blocks.n;
        let l = self.embedding_dim;
        // Column i of the n × L views is block i of the vector.
        let vm = DMatrixView::from_slice(v, n, l);
        let mut om = DMatrixViewMut::from_slice(out, n, l);
        if l == 1 {
            om.gemm(1.0, &self.diag_first, &vm, 0.0);
            return Ok(());
        }
        om.gemm(1.0, &self.diag_mid, &vm, 0.0);
        om.columns_mut(0, l - 1)
            .gemm(1.0, &self.upper, &vm.columns(1, l - 1), 1.0);
        om.columns_mut(1, l - 1)
            .gemm(1.0, &self.lower, &vm.columns(0, l - 1), 1.0);
        // End blocks miss one of the two difference terms.
        om.column_mut(0)
            .gemv(self.lambda, &self.blocks.cqq, &vm.column(0), 1.0);
        om.column_mut(l - 1)
            .gemv(self.lambda, &self.blocks.cpp, &vm.column(l - 1), 1.0);
        Ok(())
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    /// Upper bound on the spectral radius: the largest absolute row sum.
    pub fn gershgorin_bound(&self) -> f64 {
        let n = self.blocks.n;
        let l = self.embedding_dim;
        let row_abs = |a: &DMatrix<f64>, r: usize| a.row(r).iter().map(|x| x.abs()).sum::<f64>();
        let mut bound = 0.0f64;
        for i in 0..l {
            let d = self.diagonal_block(i);
            for r in 0..n {
                let mut s = row_abs(d, r);
                if i + 1 < l {
                    s += row_abs(&self.upper, r);
                }
                if i > 0 {
                    s += row_abs(&self.lower, r);
                }
                bound = bound.max(s);
            }
        }
        bound
    }

    /// Dense `H`, only for `nL <= DENSE_LIMIT`.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let dim = self.dim();
        if dim > DENSE_LIMIT {
            return Err(StpcaError::Parameter(format!(
                "refusing to assemble a dense {dim}×{dim} operator (limit {DENSE_LIMIT})"
            )));
        }
        let n = self.blocks.n;
        let l = self.embedding_dim;
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..l {
            h.view_mut((i * n, i * n), (n, n))
                .copy_from(self.diagonal_block(i));
            if i + 1 < l {
                h.view_mut((i * n, (i + 1) * n), (n, n)).copy_from(&self.upper);
                h.view_mut(((i + 1) * n, i * n), (n, n)).copy_from(&self.lower);
            }
        }
        Ok(h)
    }
}

/// Block Cholesky factor of `σI - H`, eliminated block by block along the
/// tridiagonal.
#[derive(Debug, Clone)]
pub struct ShiftedFactor {
    sigma: f64,
    n: usize,
    chol: Vec<DMatrix<f64>>,
    // `L_i⁻¹ U` with `U = -λ·Cpq` the coupling block of `σI - H`.
    coupling: Vec<DMatrix<f64>>,
}

impl ShiftedFactor {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.n * self.chol.len()
    }

    /// Writes `(σI - H)⁻¹ b` into `out`.
    pub fn solve_into(&self, b: &[f64], out: &mut [f64]) -> Result<()> {
        let dim = self.dim();
        if b.len() != dim || out.len() != dim {
            return Err(StpcaError::Shape(format!(
                "factor of dimension {dim} applied to vector of length {} (output {})",
                b.len(),
                out.len()
            )));
        }
        let n = self.n;
        let l = self.chol.len();
        let mut g: Vec<DVector<f64>> = Vec::with_capacity(l);
        for i in 0..l {
            let mut gi = DVector::from_column_slice(&b[i * n..(i + 1) * n]);
            if i > 0 {
                gi.gemv_tr(-1.0, &self.coupling[i - 1], &g[i - 1], 1.0);
            }
            self.chol[i].solve_lower_triangular_mut(&mut gi);
            g.push(gi);
        }
        let mut next: Option<DVector<f64>> = None;
        for i in (0..l).rev() {
            let mut xi = g[i].clone();
            if let Some(x) = &next {
                xi.gemv(-1.0, &self.coupling[i], x, 1.0);
            }
            self.chol[i].tr_solve_lower_triangular_mut(&mut xi);
            out[i * n..(i + 1) * n].copy_from_slice(xi.as_slice());
            next = Some(xi);
        }
        Ok(())
    }
}

impl BlockTridiagOperator {
    /// Factors `σI - H`. `None` when it is not numerically positive definite,
    /// which means `σ` does not clear the top eigenvalue.
    pub fn shifted_cholesky(&self, sigma: f64) -> Option<ShiftedFactor> {
        let n = self.blocks.n;
        let l = self.embedding_dim;
        let u = -&self.upper;
        let mut chol = Vec::with_capacity(l);
        let mut coupling: Vec<DMatrix<f64>> = Vec::with_capacity(l.saturating_sub(1));
        for i in 0..l {
            let mut s = DMatrix::identity(n, n) * sigma - self.diagonal_block(i);
            if i > 0 {
                let y = &coupling[i - 1];
                s.gemm_tr(-1.0, y, y, 1.0);
            }
            let lower = nalgebra::Cholesky::new(s)?.unpack();
            if i + 1 < l {
                coupling.push(lower.solve_lower_triangular(&u)?);
            }
            chol.push(lower);
        }
        Some(ShiftedFactor {
            sigma,
            n,
            chol,
            coupling,
        })
    }
}

/// One-shot `H·v`.
pub fn h_matvec(op: &BlockTridiagOperator, v: &[f64]) -> Result<Vec<f64>> {
    op.apply(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_case() -> GramBlocks {
        gram_blocks(&SeriesMatrix::from_rows(&[vec![1.0, -1.0]]).unwrap()).unwrap()
    }

    #[test]
    fn hand_multiplied_blocks() {
        let g = unit_case();
        assert_eq!(g.cxx[(0, 0)], 2.0);
        assert_eq!(g.cpp[(0, 0)], 1.0);
        assert_eq!(g.cqq[(0, 0)], 1.0);
        assert_eq!(g.cpq[(0, 0)], -1.0);
    }

    #[test]
    fn zero_series_gives_zero_blocks() {
        let x = SeriesMatrix::new(DMatrix::zeros(3, 5)).unwrap();
        let g = gram_blocks(&x).unwrap();
        for b in [&g.cxx, &g.cpp, &g.cqq, &g.cpq] {
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn two_by_two_operator() {
        let op = BlockTridiagOperator::new(unit_case(), 0.5, 2).unwrap();
        assert_eq!(op.apply(&[1.0, 0.0]).unwrap(), vec![0.5, -0.5]);
        let h = op.to_dense().unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        assert_eq!(op.gershgorin_bound(), 1.0);
    }

    #[test]
    fn lambda_zero_is_block_diagonal() {
        let x = SeriesMatrix::from_rows(&[vec![1.0, 2.0, -1.0, 0.5], vec![0.0, -2.0, 1.0, 3.0]])
            .unwrap();
        let g = gram_blocks(&x).unwrap();
        let cxx = g.cxx.clone();
        let op = BlockTridiagOperator::new(g, 0.0, 3).unwrap();
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let hv = op.apply(&v).unwrap();
        for i in 0..3 {
            let vi = nalgebra::DVector::from_column_slice(&v[2 * i..2 * i + 2]);
            let expect = &cxx * vi;
            assert_eq!(&hv[2 * i..2 * i + 2], expect.as_slice());
        }
    }

    #[test]
    fn shape_errors() {
        let op = BlockTridiagOperator::new(unit_case(), 0.5, 2).unwrap();
        assert!(matches!(op.apply(&[1.0]), Err(StpcaError::Shape(_))));
        assert!(BlockTridiagOperator::new(unit_case(), 1.5, 2).is_err());
        let big = gram_blocks(&SeriesMatrix::new(DMatrix::from_fn(21, 3, |i, j| (i * j) as f64)).unwrap())
            .unwrap();
        let op = BlockTridiagOperator::new(big, 0.5, 20).unwrap();
        assert!(op.to_dense().is_err());
    }

    #[test]
    fn shifted_solve_inverts_and_certifies() {
        let x = SeriesMatrix::from_rows(&[
            vec![1.0, 2.0, -1.0, 0.5, 0.3],
            vec![0.0, -2.0, 1.0, 3.0, -0.4],
            vec![0.7, 0.1, -1.2, 0.2, 1.1],
        ])
        .unwrap();
        let op = BlockTridiagOperator::new(gram_blocks(&x).unwrap(), 0.7, 4).unwrap();
        let h = op.to_dense().unwrap();
        let top = h.symmetric_eigenvalues().max();
        assert!(op.shifted_cholesky(top - 1e-6).is_none());
        let f = op.shifted_cholesky(top + 0.5).unwrap();
        let b: Vec<f64> = (0..op.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut sol = vec![0.0; op.dim()];
        f.solve_into(&b, &mut sol).unwrap();
        let a = DMatrix::identity(op.dim(), op.dim()) * (top + 0.5) - h;
        let back = a * DVector::from_column_slice(&sol);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}
