//! Linear systems with the block structure `A = aI + (I + J) ⊗ M`.
//!
//! `I + J` is the `(d-1) x (d-1)` matrix with 2 on the diagonal and 1
//! elsewhere. Its eigenvalues are `d` (on the all-ones direction) and 1
//! (multiplicity `d-2`), so `A` splits into `(aI + dM)` acting on block
//! averages and `(aI + M)` acting on deviations from the average. Only those
//! two `k x k` matrices are ever factorized.

use nalgebra::{Cholesky, DMatrix, DMatrixView, DVector, Dyn};

use crate::error::{check_len, Error, Result};

/// Something that applies the inverse of a symmetric positive definite matrix.
pub trait SpdSolver {
    fn dim(&self) -> usize;

    fn solve(&self, v: &DVector<f64>) -> DVector<f64>;

    fn log_det(&self) -> f64;
}

/// Dense Cholesky factorization.
#[derive(Debug, Clone)]
pub struct CholeskySolver(Cholesky<f64, Dyn>);

impl CholeskySolver {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Cholesky::new(m).map(Self).ok_or(Error::NotPositiveDefinite)
    }
}

impl SpdSolver for CholeskySolver {
    fn dim(&self) -> usize {
        self.0.l_dirty().nrows()
    }

    fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.0.solve(v)
    }

    fn log_det(&self) -> f64 {
        let l = self.0.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

/// `(M + c u u')^{-1}` from a stored `M^{-1}` via Sherman–Morrison.
#[derive(Debug, Clone)]
pub struct RankOneSolver<'a> {
    inv: &'a DMatrix<f64>,
    inv_u: DVector<f64>,
    scale: f64,
    log_det_base: Option<f64>,
    log_factor: f64,
}

impl<'a> RankOneSolver<'a> {
    pub fn new(inv: &'a DMatrix<f64>, u: &DVector<f64>, c: f64) -> Self {
        let inv_u = inv * u;
        let denom = 1.0 + c * u.dot(&inv_u);
        Self {
            inv,
            inv_u,
            scale: c / denom,
            log_det_base: None,
            log_factor: denom.ln(),
        }
    }

    /// Supplies `ln det M` so that [`SpdSolver::log_det`] is available.
    pub fn with_base_log_det(mut self, log_det: f64) -> Self {
        self.log_det_base = Some(log_det);
        self
    }
}

impl SpdSolver for RankOneSolver<'_> {
    fn dim(&self) -> usize {
        self.inv.nrows()
    }

    fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let base = self.inv * v;
        let coef = self.scale * self.inv_u.dot(v);
        base - &self.inv_u * coef
    }

    fn log_det(&self) -> f64 {
        self.log_det_base.expect("base log-determinant not supplied") + self.log_factor
    }
}

/// In-place rank-one update `inv <- (M + c u u')^{-1}` given `inv = M^{-1}`.
pub fn sherman_morrison_update(inv: &mut DMatrix<f64>, u: &DVector<f64>, c: f64) {
    let inv_u = &*inv * u;
    let denom = 1.0 + c * u.dot(&inv_u);
    inv.ger(-c / denom, &inv_u, &inv_u, 1.0);
}

/// Lower Cholesky factor that grows by one row and column at a time.
///
/// Storage is over-allocated and doubled when full, so appending is
/// amortized `O(t)` rather than a full copy per trial.
#[derive(Debug, Clone)]
pub struct GrowingCholesky {
    buf: DMatrix<f64>,
    len: usize,
}

impl Default for GrowingCholesky {
    fn default() -> Self {
        Self::new()
    }
}

impl GrowingCholesky {
    pub fn new() -> Self {
        Self { buf: DMatrix::zeros(0, 0), len: 0 }
    }

    pub fn dim(&self) -> usize {
        self.len
    }

    fn l(&self) -> DMatrixView<'_, f64> {
        self.buf.view((0, 0), (self.len, self.len))
    }

    /// The new last row `(l', delta)` of the factor after appending column
    /// `col` (whose last entry is the new diagonal element).
    pub fn border(&self, col: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let t = self.dim();
        check_len(t + 1, col.len())?;
        let head = col.rows(0, t).into_owned();
        let row = self.l().solve_lower_triangular(&head).ok_or(Error::NotPositiveDefinite)?;
        let sq = col[t] - row.norm_squared();
        if !(sq > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok((row, sq.sqrt()))
    }

    pub fn push(&mut self, row: &DVector<f64>, delta: f64) {
        let t = self.len;
        if t == self.buf.nrows() {
            let cap = (2 * t).max(16);
            let old = std::mem::replace(&mut self.buf, DMatrix::zeros(0, 0));
            self.buf = old.resize(cap, cap, 0.0);
        }
        for j in 0..t {
            self.buf[(t, j)] = row[j];
        }
        self.buf[(t, t)] = delta;
        self.len = t + 1;
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.len).map(|i| self.buf[(i, i)].ln()).sum::<f64>()
    }

    /// Solver for the bordered matrix without committing the border.
    pub fn bordered(&self, row: DVector<f64>, delta: f64) -> BorderedSolver<'_> {
        BorderedSolver { l: self.l(), row, delta, base: self }
    }
}

/// Solves with `[[L, 0], [l', delta]] [[L, 0], [l', delta]]'`.
#[derive(Debug, Clone)]
pub struct BorderedSolver<'a> {
    l: DMatrixView<'a, f64>,
    row: DVector<f64>,
    delta: f64,
    base: &'a GrowingCholesky,
}

impl SpdSolver for BorderedSolver<'_> {
    fn dim(&self) -> usize {
        self.l.nrows() + 1
    }

    fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let t = self.l.nrows();
        let head = v.rows(0, t).into_owned();
        let z1 = self.l.solve_lower_triangular(&head).expect("factor is nonsingular");
        let z2 = (v[t] - self.row.dot(&z1)) / self.delta;
        let w2 = z2 / self.delta;
        let rhs = z1 - &self.row * w2;
        let w1 = self.l.tr_solve_lower_triangular(&rhs).expect("factor is nonsingular");
        let mut out = DVector::zeros(t + 1);
        out.rows_mut(0, t).copy_from(&w1);
        out[t] = w2;
        out
    }

    fn log_det(&self) -> f64 {
        self.base.log_det() + 2.0 * self.delta.ln()
    }
}

/// `A^{-1} ((1 + e_i) ⊗ k)` for every `i`: block `j` equals
/// `common + [i == j] * own`.
#[derive(Debug, Clone)]
pub struct StackedResponse {
    pub common: DVector<f64>,
    pub own: DVector<f64>,
}

/// Factored `aI + (I + J) ⊗ M` for `d` classes (`d - 1` blocks).
#[derive(Debug, Clone)]
pub struct StructuredSystem<S> {
    d: usize,
    /// Factor of `aI + M`.
    single: S,
    /// Factor of `aI + dM`.
    full: S,
}

impl StructuredSystem<CholeskySolver> {
    pub fn factor(a: f64, d: usize, m: &DMatrix<f64>) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidParameter(format!("ridge must be positive, got {a}")));
        }
        if d < 2 {
            return Err(Error::InvalidParameter(format!("need d >= 2 classes, got {d}")));
        }
        let k = m.nrows();
        let eye = DMatrix::<f64>::identity(k, k);
        let single = CholeskySolver::new(&eye * a + m)?;
        let full = CholeskySolver::new(&eye * a + m * d as f64)?;
        Ok(Self { d, single, full })
    }
}

impl<S: SpdSolver> StructuredSystem<S> {
    /// Assembles from factors of `aI + M` and `aI + dM`.
    pub fn from_parts(d: usize, single: S, full: S) -> Self {
        debug_assert_eq!(single.dim(), full.dim());
        Self { d, single, full }
    }

    pub fn blocks(&self) -> usize {
        self.d - 1
    }

    pub fn block_size(&self) -> usize {
        self.full.dim()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.blocks();
        let k = self.block_size();
        check_len(m * k, rhs.len())?;
        let mut mean = DVector::zeros(k);
        for j in 0..m {
            mean += rhs.rows(j * k, k);
        }
        mean /= m as f64;
        let avg_part = self.full.solve(&mean);
        let mut out = DVector::zeros(m * k);
        for j in 0..m {
            let mut block = out.rows_mut(j * k, k);
            block.copy_from(&avg_part);
            if m > 1 {
                let dev = rhs.rows(j * k, k) - &mean;
                block += self.single.solve(&dev);
            }
        }
        Ok(out)
    }

    pub fn stacked_response(&self, k_vec: &DVector<f64>) -> StackedResponse {
        let m = self.blocks() as f64;
        let p = self.full.solve(k_vec);
        let q = self.single.solve(k_vec);
        StackedResponse {
            common: p * (1.0 + 1.0 / m) - &q / m,
            own: q,
        }
    }

    /// `ln det A = ln det(aI + dM) + (d - 2) ln det(aI + M)`.
    pub fn log_det(&self) -> f64 {
        let mut ld = self.full.log_det();
        if self.d > 2 {
            ld += (self.d - 2) as f64 * self.single.log_det();
        }
        ld
    }
}

/// `A^{-1} rhs` for `A = aI + (I + J) ⊗ M` with `d` classes.
pub fn solve_structured(a: f64, d: usize, m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    StructuredSystem::factor(a, d, m)?.solve(rhs)
}

/// The full `(d-1)k x (d-1)k` matrix `aI + (I + J) ⊗ M`.
pub fn assemble_dense(a: f64, d: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    let blocks = d - 1;
    let k = m.nrows();
    let mut out = DMatrix::zeros(blocks * k, blocks * k);
    for bi in 0..blocks {
        for bj in 0..blocks {
            let w = if bi == bj { 2.0 } else { 1.0 };
            out.view_mut((bi * k, bj * k), (k, k)).copy_from(&(m * w));
        }
    }
    for i in 0..blocks * k {
        out[(i, i)] += a;
    }
    out
}
