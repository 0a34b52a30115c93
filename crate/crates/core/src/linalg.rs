//! Dense kernels: policy matrices, LU solves and Woodbury block updates.

use dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve};
use faer::{Accum, MatMut, MatRef, Par};
use thiserror::Error;

use crate::arm::{Policy, RestlessArm};

/// Relative pivot magnitude below which a matrix is declared singular.
pub const PIVOT_TOL: f64 = 1e-12;

// Right-hand sides are solved in column blocks of this width to bound scratch.
const RHS_BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot})")]
    Singular { pivot: usize },
    #[error("inner Woodbury core is singular")]
    InnerSingular,
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must be rows*cols");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        if self.rows > 0 && rhs.cols > 0 {
            faer::linalg::matmul::matmul(
                out.view_mut(),
                Accum::Replace,
                self.view(),
                rhs.view(),
                1.0,
                Par::Seq,
            );
        }
        out
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Self {
        self.zip(rhs, |a, b| a - b)
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Self {
        self.zip(rhs, |a, b| a + b)
    }

    fn zip(&self, rhs: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_vec(self.rows, self.cols, data)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    /// Infinity norm (largest absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn view(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.data, self.rows, self.cols)
    }

    fn view_mut(&mut self) -> MatMut<'_, f64> {
        MatMut::from_row_major_slice_mut(&mut self.data, self.rows, self.cols)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Vector-valued affine function `c0 + λ c1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineVector {
    pub c0: Vec<f64>,
    pub c1: Vec<f64>,
}

impl AffineVector {
    pub fn at(&self, lambda: f64) -> Vec<f64> {
        self.c0
            .iter()
            .zip(&self.c1)
            .map(|(a, b)| a + lambda * b)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.c0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c0.is_empty()
    }
}

pub(crate) fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Evaluation matrix of `policy` under the average criterion: first column
/// all ones, column j ≥ 1 equal to e_j minus column j of the policy matrix.
#[allow(non_snake_case)]
pub fn build_A_matrix(arm: &RestlessArm, policy: &Policy) -> DenseMatrix {
    let n = arm.n();
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let p = arm.policy_row(policy, i);
        let row = &mut a.data[i * n..(i + 1) * n];
        row[0] = 1.0;
        for j in 1..n {
            row[j] = -p[j];
        }
        if i > 0 {
            row[i] += 1.0;
        }
    }
    a
}

/// `I - β P^π`, the discounted evaluation matrix.
pub fn build_discounted_matrix(arm: &RestlessArm, policy: &Policy, beta: f64) -> DenseMatrix {
    let n = arm.n();
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let p = arm.policy_row(policy, i);
        let row = &mut a.data[i * n..(i + 1) * n];
        for j in 0..n {
            row[j] = -beta * p[j];
        }
        row[i] += 1.0;
    }
    a
}

/// Row `i` of Δ: `P1 - P0` with the first column zeroed (average
/// criterion), or `β (P1 - P0)` in full (discounted).
pub fn fill_delta_row(arm: &RestlessArm, beta: Option<f64>, i: usize, out: &mut [f64]) {
    let n = arm.n();
    let p0 = &arm.p0()[i * n..(i + 1) * n];
    let p1 = &arm.p1()[i * n..(i + 1) * n];
    match beta {
        None => {
            out[0] = 0.0;
            for j in 1..n {
                out[j] = p1[j] - p0[j];
            }
        }
        Some(b) => {
            for j in 0..n {
                out[j] = b * (p1[j] - p0[j]);
            }
        }
    }
}

pub fn build_delta(arm: &RestlessArm, beta: Option<f64>) -> DenseMatrix {
    let n = arm.n();
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        fill_delta_row(arm, beta, i, &mut d.data[i * n..(i + 1) * n]);
    }
    d
}

/// In-place LU factorization with partial pivoting of a column-major matrix.
pub(crate) struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    perm_inv: Vec<usize>,
}

impl Lu {
    /// Factors the column-major `n × n` matrix held in `a`.
    pub(crate) fn factor(n: usize, mut a: Vec<f64>) -> Result<Self, LinalgError> {
        assert_eq!(a.len(), n * n);
        let scale = max_abs(&a);
        let mut perm = vec![0usize; n];
        let mut perm_inv = vec![0usize; n];
        if n > 0 {
            let mut mem = MemBuffer::new(factor::lu_in_place_scratch::<usize, f64>(
                n,
                n,
                Par::Seq,
                Default::default(),
            ));
            factor::lu_in_place(
                MatMut::from_column_major_slice_mut(&mut a, n, n),
                &mut perm,
                &mut perm_inv,
                Par::Seq,
                MemStack::new(&mut mem),
                Default::default(),
            );
        }
        for i in 0..n {
            let u = a[i * n + i];
            if u.is_nan() || u.abs() < PIVOT_TOL * scale || scale == 0.0 {
                return Err(LinalgError::Singular { pivot: i });
            }
        }
        Ok(Self {
            n,
            lu: a,
            perm,
            perm_inv,
        })
    }

    /// Overwrites the column-major `n × k` block `rhs` with `M⁻¹ rhs`.
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.n;
        if n == 0 {
            return;
        }
        let lu = MatRef::from_column_major_slice(&self.lu, n, n);
        // SAFETY: perm and perm_inv come from the factorization and are
        // mutually inverse permutations of 0..n.
        let perm = unsafe { faer::perm::PermRef::new_unchecked(&self.perm, &self.perm_inv, n) };
        let mut mem = MemBuffer::new(solve::solve_in_place_scratch::<usize, f64>(
            n,
            RHS_BLOCK,
            Par::Seq,
        ));
        for block in rhs.chunks_mut(n * RHS_BLOCK) {
            let k = block.len() / n;
            solve::solve_in_place(
                lu,
                lu,
                perm,
                MatMut::from_column_major_slice_mut(block, n, k),
                Par::Seq,
                MemStack::new(&mut mem),
            );
        }
    }
}

/// Solves `X A = B` for `X` (right-solve form) with a single LU of `A`.
pub fn solve_dense(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let n = a.rows;
    if a.cols != n {
        return Err(LinalgError::Shape(format!("A is {}x{}", a.rows, a.cols)));
    }
    if b.cols != n {
        return Err(LinalgError::Shape(format!(
            "B has {} columns, A is {n}x{n}",
            b.cols
        )));
    }
    // A row-major is Aᵀ column-major, and X A = B is Aᵀ Xᵀ = Bᵀ where Xᵀ
    // column-major is X row-major.
    let lu = Lu::factor(n, a.data.clone())?;
    let mut x = b.data.clone();
    lu.solve_in_place(&mut x);
    Ok(DenseMatrix::from_vec(b.rows, n, x))
}

/// Solves `A X = B` for `X` (left-solve form).
pub fn solve_left(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let x = solve_dense(&a.transpose(), &b.transpose())?;
    Ok(x.transpose())
}

/// `(A + U C V)⁻¹` from `A⁻¹` by Woodbury's identity, staged as
/// `D = A⁻¹U`, `E = V A⁻¹`, `F = (C⁻¹ + V D)⁻¹`, result `A⁻¹ - D F E`.
pub fn woodbury_block_update(
    a_inv: &DenseMatrix,
    u: &DenseMatrix,
    c: &DenseMatrix,
    v: &DenseMatrix,
) -> Result<DenseMatrix, LinalgError> {
    let n = a_inv.rows;
    let m = c.rows;
    if a_inv.cols != n || u.rows != n || u.cols != m || c.cols != m || v.rows != m || v.cols != n {
        return Err(LinalgError::Shape("Woodbury operand shapes".into()));
    }
    if m == 0 {
        return Ok(a_inv.clone());
    }
    let inner = |e: LinalgError| match e {
        LinalgError::Singular { .. } => LinalgError::InnerSingular,
        other => other,
    };
    let d = a_inv.matmul(u);
    let e = v.matmul(a_inv);
    let c_inv = solve_dense(c, &DenseMatrix::identity(m)).map_err(inner)?;
    let core = v.matmul(&d).add(&c_inv);
    // F E = core⁻¹ E
    let fe = solve_left(&core, &e).map_err(inner)?;
    Ok(a_inv.sub(&d.matmul(&fe)))
}

/// `dst -= lhs · rhs` on raw strided views, used by the block recompute.
pub(crate) fn gemm_sub(dst: MatMut<'_, f64>, lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) {
    if dst.nrows() == 0 || dst.ncols() == 0 || lhs.ncols() == 0 {
        return;
    }
    faer::linalg::matmul::matmul(dst, Accum::Add, lhs, rhs, -1.0, Par::Seq);
}
