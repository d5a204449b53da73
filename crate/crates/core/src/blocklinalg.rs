//! Block-structured symmetric linear algebra.
//!
//! The central type is [`BlockTridiagonalMatrix`], a symmetric matrix whose only
//! nonzero blocks sit on the block diagonal and the first block off-diagonals.
//! Log-determinants and solves run through the pivot-block (Schur complement)
//! recursion
//!
//! ```text
//! D_1 = B_1,   D_k = B_k - U_{k-1}^T D_{k-1}^{-1} U_{k-1},   log det M = sum_k log det D_k
//! ```
//!
//! where `B_k` are the diagonal blocks and `U_k` the block `(k, k+1)`. Each pivot is
//! factored with a dense Cholesky, so the cost is linear in the number of blocks.
//!
//! Block sizes may vary from block to block, and zero-sized blocks are allowed. The
//! entropy oracle relies on this: the measurement covariance of a schedule has one
//! block per time step, sized by the number of measurement rows selected there.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated (and then removed) when building symmetric blocks.
const SYMMETRY_TOL: f64 = 1e-10;

/// Log-determinant of a dense symmetric positive definite matrix, in nats.
///
/// The empty matrix has determinant one.
pub fn logdet_dense(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::dims(format!(
            "log-det of a non-square {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    let chol = Cholesky::new(m.clone()).ok_or_else(Error::not_pd)?;
    Ok(cholesky_logdet(&chol))
}

/// Inverse of a dense symmetric positive definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::dims("inverse of a non-square matrix"));
    }
    if m.is_empty() {
        return Ok(m.clone());
    }
    let chol = Cholesky::new(m.clone()).ok_or_else(Error::not_pd)?;
    let mut inv = chol.inverse();
    symmetrize_in_place(&mut inv);
    Ok(inv)
}

pub(crate) fn cholesky_logdet(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub(crate) fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Checks a square block for symmetry and returns its symmetrized copy.
pub(crate) fn checked_symmetric(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::dims(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = 1.0 + m.amax();
    let asym = (&m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(format!("{what}: max asymmetry {asym:e}")));
    }
    let mut m = m;
    symmetrize_in_place(&mut m);
    Ok(m)
}

/// Symmetric block-tridiagonal matrix.
///
/// Diagonal block `k` is `d_k x d_k`; the upper off-diagonal block `k` sits at block
/// position `(k, k+1)` and is `d_k x d_{k+1}`. The lower blocks are the transposes and
/// are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonalMatrix {
    diag: Vec<DMatrix<f64>>,
    upper: Vec<DMatrix<f64>>,
}

impl BlockTridiagonalMatrix {
    /// Builds the matrix from its diagonal blocks and its `K - 1` upper blocks.
    ///
    /// Diagonal blocks are checked for symmetry and symmetrized.
    pub fn new(diag: Vec<DMatrix<f64>>, upper: Vec<DMatrix<f64>>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::dims("block-tridiagonal matrix needs at least one block"));
        }
        if upper.len() + 1 != diag.len() {
            return Err(Error::dims(format!(
                "{} diagonal blocks need {} off-diagonal blocks, got {}",
                diag.len(),
                diag.len() - 1,
                upper.len()
            )));
        }
        let diag = diag
            .into_iter()
            .enumerate()
            .map(|(k, b)| checked_symmetric(b, &format!("diagonal block {k}")))
            .collect::<Result<Vec<_>>>()?;
        for (k, u) in upper.iter().enumerate() {
            let want = (diag[k].nrows(), diag[k + 1].nrows());
            if u.shape() != want {
                return Err(Error::dims(format!(
                    "off-diagonal block {k} is {:?}, expected {:?}",
                    u.shape(),
                    want
                )));
            }
        }
        Ok(Self { diag, upper })
    }

    /// Identity with `num_blocks` blocks of size `block_dim`.
    pub fn identity(block_dim: usize, num_blocks: usize) -> Self {
        Self::block_diagonal(vec![DMatrix::identity(block_dim, block_dim); num_blocks.max(1)])
    }

    /// Block-diagonal matrix (all off-diagonal blocks zero).
    pub fn block_diagonal(diag: Vec<DMatrix<f64>>) -> Self {
        let upper = diag
            .windows(2)
            .map(|w| DMatrix::zeros(w[0].nrows(), w[1].nrows()))
            .collect();
        Self { diag, upper }
    }

    pub fn num_blocks(&self) -> usize {
        self.diag.len()
    }

    /// Common block size, if every block has the same size.
    pub fn block_dim(&self) -> Option<usize> {
        let d = self.diag[0].nrows();
        self.diag.iter().all(|b| b.nrows() == d).then_some(d)
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.diag.iter().map(|b| b.nrows()).collect()
    }

    /// Total dimension of the assembled matrix.
    pub fn dim(&self) -> usize {
        self.diag.iter().map(|b| b.nrows()).sum()
    }

    pub fn diag_block(&self, k: usize) -> &DMatrix<f64> {
        &self.diag[k]
    }

    /// Block `(k, k+1)`.
    pub fn upper_block(&self, k: usize) -> &DMatrix<f64> {
        &self.upper[k]
    }

    pub fn diag_blocks(&self) -> &[DMatrix<f64>] {
        &self.diag
    }

    pub fn upper_blocks(&self) -> &[DMatrix<f64>] {
        &self.upper
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.diag.len() + 1);
        let mut acc = 0;
        off.push(0);
        for b in &self.diag {
            acc += b.nrows();
            off.push(acc);
        }
        off
    }

    /// Assembles the full dense matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let off = self.offsets();
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (k, b) in self.diag.iter().enumerate() {
            m.view_mut((off[k], off[k]), b.shape()).copy_from(b);
        }
        for (k, u) in self.upper.iter().enumerate() {
            m.view_mut((off[k], off[k + 1]), u.shape()).copy_from(u);
            m.view_mut((off[k + 1], off[k]), (u.ncols(), u.nrows()))
                .copy_from(&u.transpose());
        }
        m
    }

    /// Matrix-vector product without assembling the matrix.
    pub fn mul_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::dims(format!(
                "vector of length {} against a {}-dimensional matrix",
                x.len(),
                self.dim()
            )));
        }
        let off = self.offsets();
        let mut y = DVector::zeros(x.len());
        for k in 0..self.diag.len() {
            let dk = self.diag[k].nrows();
            let xk = x.rows(off[k], dk);
            let mut yk = &self.diag[k] * xk;
            if k > 0 {
                let dp = self.diag[k - 1].nrows();
                yk += self.upper[k - 1].transpose() * x.rows(off[k - 1], dp);
            }
            if k + 1 < self.diag.len() {
                let dn = self.diag[k + 1].nrows();
                yk += &self.upper[k] * x.rows(off[k + 1], dn);
            }
            y.rows_mut(off[k], dk).copy_from(&yk);
        }
        Ok(y)
    }

    /// Adds a block-diagonal matrix with square blocks matching this matrix's blocks.
    pub fn add_block_diagonal(&self, d: &BlockDiagonalMatrix) -> Result<Self> {
        if d.num_blocks() != self.num_blocks() {
            return Err(Error::dims(format!(
                "adding {} diagonal blocks to a matrix with {} blocks",
                d.num_blocks(),
                self.num_blocks()
            )));
        }
        let diag = self
            .diag
            .iter()
            .zip(d.blocks())
            .enumerate()
            .map(|(k, (a, b))| {
                if a.shape() != b.shape() {
                    Err(Error::dims(format!(
                        "block {k}: {:?} + {:?}",
                        a.shape(),
                        b.shape()
                    )))
                } else {
                    let mut s = a + b;
                    symmetrize_in_place(&mut s);
                    Ok(s)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            diag,
            upper: self.upper.clone(),
        })
    }

    /// Returns `self + eps * I`.
    pub fn shifted(&self, eps: f64) -> Self {
        let diag = self
            .diag
            .iter()
            .map(|b| {
                let n = b.nrows();
                b + DMatrix::identity(n, n) * eps
            })
            .collect();
        Self {
            diag,
            upper: self.upper.clone(),
        }
    }

    /// Runs the pivot-block recursion. Fails if any pivot is not positive definite,
    /// which happens exactly when the assembled matrix is not.
    pub fn factor(&self) -> Result<BlockTridiagonalFactor> {
        let mut pivots: Vec<Cholesky<f64, Dyn>> = Vec::with_capacity(self.diag.len());
        for (k, b) in self.diag.iter().enumerate() {
            let mut pivot = b.clone();
            if k > 0 && !self.upper[k - 1].is_empty() {
                let u = &self.upper[k - 1];
                let x = pivots[k - 1].solve(u);
                pivot -= u.transpose() * x;
                symmetrize_in_place(&mut pivot);
            }
            let chol =
                Cholesky::new(pivot).ok_or(Error::NotPositiveDefinite { block: Some(k) })?;
            pivots.push(chol);
        }
        Ok(BlockTridiagonalFactor {
            pivots,
            upper: self.upper.clone(),
        })
    }

    /// Log-determinant in nats.
    pub fn logdet(&self) -> Result<f64> {
        Ok(self.factor()?.logdet())
    }

    /// Solves `M x = b` by block forward and back substitution.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.dim() {
            return Err(Error::dims(format!(
                "right-hand side of length {} against a {}-dimensional matrix",
                b.len(),
                self.dim()
            )));
        }
        Ok(self.factor()?.solve(b))
    }
}

/// Free-function form of [`BlockTridiagonalMatrix::logdet`].
pub fn logdet_block_tridiagonal(m: &BlockTridiagonalMatrix) -> Result<f64> {
    m.logdet()
}

/// Free-function form of [`BlockTridiagonalMatrix::solve`].
pub fn solve_block_tridiagonal(m: &BlockTridiagonalMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    m.solve(b)
}

/// Free-function form of [`BlockTridiagonalMatrix::add_block_diagonal`].
pub fn add_block_diagonal(
    m: &BlockTridiagonalMatrix,
    d: &BlockDiagonalMatrix,
) -> Result<BlockTridiagonalMatrix> {
    m.add_block_diagonal(d)
}

/// Factored block-tridiagonal matrix: one Cholesky factor per pivot block.
#[derive(Debug, Clone)]
pub struct BlockTridiagonalFactor {
    pivots: Vec<Cholesky<f64, Dyn>>,
    upper: Vec<DMatrix<f64>>,
}

impl BlockTridiagonalFactor {
    pub fn logdet(&self) -> f64 {
        self.pivots.iter().map(cholesky_logdet).sum()
    }

    /// Dimension of the factored matrix.
    pub fn dim(&self) -> usize {
        self.pivots.iter().map(|c| c.l_dirty().nrows()).sum()
    }

    /// Solves `M x = b`. `b` must have length [`Self::dim`].
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let dims: Vec<usize> = self.pivots.iter().map(|c| c.l_dirty().nrows()).collect();
        let mut off = vec![0usize; dims.len() + 1];
        for (k, d) in dims.iter().enumerate() {
            off[k + 1] = off[k] + d;
        }
        let nb = dims.len();
        // Forward: w_k = b_k - U_{k-1}^T D_{k-1}^{-1} w_{k-1}
        let mut w: Vec<DVector<f64>> = Vec::with_capacity(nb);
        for k in 0..nb {
            let mut wk: DVector<f64> = b.rows(off[k], dims[k]).into_owned();
            if k > 0 && dims[k] > 0 && dims[k - 1] > 0 {
                let t = self.pivots[k - 1].solve(&w[k - 1]);
                wk -= self.upper[k - 1].transpose() * t;
            }
            w.push(wk);
        }
        // Back: x_k = D_k^{-1} (w_k - U_k x_{k+1})
        let mut x = DVector::zeros(b.len());
        for k in (0..nb).rev() {
            if dims[k] == 0 {
                continue;
            }
            let mut rhs = w[k].clone();
            if k + 1 < nb && dims[k + 1] > 0 {
                rhs -= &self.upper[k] * x.rows(off[k + 1], dims[k + 1]);
            }
            let xk = self.pivots[k].solve(&rhs);
            x.rows_mut(off[k], dims[k]).copy_from(&xk);
        }
        x
    }
}

/// Block-diagonal matrix with rectangular blocks. Off-block entries are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockDiagonalMatrix {
    blocks: Vec<DMatrix<f64>>,
}

impl BlockDiagonalMatrix {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Self {
        Self { blocks }
    }

    pub fn zeros(block_dim: usize, num_blocks: usize) -> Self {
        Self::new(vec![DMatrix::zeros(block_dim, block_dim); num_blocks])
    }

    pub fn identity(block_dim: usize, num_blocks: usize) -> Self {
        Self::new(vec![DMatrix::identity(block_dim, block_dim); num_blocks])
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &DMatrix<f64> {
        &self.blocks[k]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn nrows(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    pub fn ncols(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        let (mut r, mut c) = (0, 0);
        for b in &self.blocks {
            m.view_mut((r, c), b.shape()).copy_from(b);
            r += b.nrows();
            c += b.ncols();
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.blocks.iter().map(|b| b.transpose()).collect())
    }

    /// Blockwise inverse. Every block must be square and positive definite.
    pub fn spd_inverse(&self) -> Result<Self> {
        Ok(Self::new(
            self.blocks.iter().map(spd_inverse).collect::<Result<Vec<_>>>()?,
        ))
    }

    /// Sum of blockwise log-determinants (square SPD blocks only).
    pub fn logdet(&self) -> Result<f64> {
        self.blocks.iter().map(logdet_dense).sum()
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.ncols() {
            return Err(Error::dims(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.ncols()
            )));
        }
        let mut y = DVector::zeros(self.nrows());
        let (mut r, mut c) = (0, 0);
        for b in &self.blocks {
            let yb = b * x.rows(c, b.ncols());
            y.rows_mut(r, b.nrows()).copy_from(&yb);
            r += b.nrows();
            c += b.ncols();
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar_blocks(vals: &[f64]) -> Vec<DMatrix<f64>> {
        vals.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect()
    }

    #[test]
    fn identity_logdet_is_zero() {
        let m = BlockTridiagonalMatrix::identity(2, 3);
        assert_eq!(m.logdet().unwrap(), 0.0);
        assert_eq!(m.block_dim(), Some(2));
        assert_eq!(m.dim(), 6);
    }

    #[test]
    fn diagonal_logdet() {
        let m = BlockTridiagonalMatrix::new(scalar_blocks(&[2.0, 2.0, 2.0]), scalar_blocks(&[0.0, 0.0]))
            .unwrap();
        assert!((m.logdet().unwrap() - 3.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn dense_logdet_examples() {
        assert!((logdet_dense(&dmatrix![4.0]).unwrap() - 4f64.ln()).abs() < 1e-14);
        assert_eq!(logdet_dense(&DMatrix::identity(5, 5)).unwrap(), 0.0);
        assert!((logdet_dense(&dmatrix![2.0, 1.0; 1.0, 2.0]).unwrap() - 3f64.ln()).abs() < 1e-14);
        assert_eq!(logdet_dense(&DMatrix::zeros(0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn dense_logdet_rejects_indefinite_and_rectangular() {
        assert_eq!(
            logdet_dense(&dmatrix![1.0, 2.0; 2.0, 1.0]),
            Err(Error::NotPositiveDefinite { block: None })
        );
        assert!(matches!(
            logdet_dense(&DMatrix::zeros(2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn add_identity_blocks() {
        let m = BlockTridiagonalMatrix::identity(1, 2);
        let s = m.add_block_diagonal(&BlockDiagonalMatrix::identity(1, 2)).unwrap();
        assert_eq!(s.diag_blocks(), &scalar_blocks(&[2.0, 2.0])[..]);
        assert_eq!(s.upper_blocks(), &scalar_blocks(&[0.0])[..]);
        let z = m.add_block_diagonal(&BlockDiagonalMatrix::zeros(1, 2)).unwrap();
        assert_eq!(z, m);
    }

    #[test]
    fn add_rejects_mismatched_blocks() {
        let m = BlockTridiagonalMatrix::identity(2, 2);
        assert!(m.add_block_diagonal(&BlockDiagonalMatrix::identity(2, 3)).is_err());
        assert!(m.add_block_diagonal(&BlockDiagonalMatrix::identity(1, 2)).is_err());
    }

    #[test]
    fn solve_examples() {
        let id = BlockTridiagonalMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![1.0, -2.0, 3.5, 0.25]);
        assert_eq!(id.solve(&b).unwrap(), b);

        let m = BlockTridiagonalMatrix::new(scalar_blocks(&[2.0, 2.0]), scalar_blocks(&[0.0])).unwrap();
        let x = m.solve(&DVector::from_vec(vec![2.0, 4.0])).unwrap();
        assert!((x - DVector::from_vec(vec![1.0, 2.0])).amax() < 1e-14);

        assert!(matches!(
            m.solve(&DVector::zeros(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn construction_checks() {
        assert!(matches!(
            BlockTridiagonalMatrix::new(vec![dmatrix![1.0, 2.0; 0.0, 1.0]], vec![]),
            Err(Error::NotSymmetric(_))
        ));
        assert!(BlockTridiagonalMatrix::new(scalar_blocks(&[1.0, 1.0]), vec![]).is_err());
        assert!(BlockTridiagonalMatrix::new(
            vec![DMatrix::identity(2, 2), DMatrix::identity(1, 1)],
            vec![DMatrix::zeros(1, 2)]
        )
        .is_err());
    }

    #[test]
    fn indefinite_reports_failing_pivot() {
        // [[1, 2], [2, 1]] split into scalar blocks: second pivot is 1 - 4 = -3.
        let m = BlockTridiagonalMatrix::new(scalar_blocks(&[1.0, 1.0]), scalar_blocks(&[2.0])).unwrap();
        assert_eq!(m.logdet(), Err(Error::NotPositiveDefinite { block: Some(1) }));
    }

    #[test]
    fn variable_and_empty_blocks() {
        let diag = vec![
            dmatrix![2.0, 0.5; 0.5, 1.0],
            DMatrix::zeros(0, 0),
            dmatrix![3.0],
        ];
        let upper = vec![DMatrix::zeros(2, 0), DMatrix::zeros(0, 1)];
        let m = BlockTridiagonalMatrix::new(diag, upper).unwrap();
        let dense = m.to_dense();
        assert_eq!(dense.shape(), (3, 3));
        assert!((m.logdet().unwrap() - logdet_dense(&dense).unwrap()).abs() < 1e-14);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = m.solve(&b).unwrap();
        assert!((&dense * &x - &b).amax() < 1e-14);
    }

    #[test]
    fn mul_vec_matches_dense() {
        let m = BlockTridiagonalMatrix::new(
            vec![dmatrix![4.0, 1.0; 1.0, 3.0], dmatrix![5.0]],
            vec![dmatrix![0.5; -1.0]],
        )
        .unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        assert!((m.mul_vec(&x).unwrap() - m.to_dense() * &x).amax() < 1e-15);
    }

    #[test]
    fn block_diagonal_basics() {
        let d = BlockDiagonalMatrix::new(vec![dmatrix![1.0, 2.0], DMatrix::zeros(0, 2), dmatrix![3.0; 4.0]]);
        assert_eq!((d.nrows(), d.ncols()), (3, 5));
        let dense = d.to_dense();
        assert_eq!(dense[(0, 1)], 2.0);
        assert_eq!(dense[(2, 4)], 4.0);
        assert_eq!(d.transpose().to_dense(), dense.transpose());
        let x = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0, 2.0]);
        assert_eq!(d.mul_vec(&x).unwrap(), &dense * &x);
    }
}
