//! Dense real matrices and the handful of factorizations the rest of the
//! crate needs: Kronecker products, numerical rank, kernels and symmetric
//! eigenvalues.
//!
//! Singular values come from one-sided (Hestenes) Jacobi orthogonalization,
//! which is accurate for the small, possibly rank-deficient operators that
//! centralizer computations produce.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{domain, sizing, Error, Result};

/// Row-major dense real matrix.
#[derive(Clone, PartialEq)]
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

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Sizing(format!("{rows} x {cols} overflows")))?;
        if data.len() != len {
            return sizing(format!(
                "expected {len} entries for a {rows} x {cols} matrix, got {}",
                data.len()
            ));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return domain(format!("non-finite matrix entry {bad}"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; intended for
    /// literals in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return sizing(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return sizing(format!(
                "cannot apply {}x{} matrix to a vector of length {}",
                self.rows,
                self.cols,
                x.len()
            ));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ · x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return sizing(format!(
                "cannot apply transpose of {}x{} matrix to a vector of length {}",
                self.rows,
                self.cols,
                x.len()
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(blocks: &[DenseMatrix]) -> Result<Self> {
        let cols = match blocks.first() {
            Some(b) => b.cols,
            None => return sizing("cannot stack an empty list"),
        };
        if blocks.iter().any(|b| b.cols != cols) {
            return sizing("stacked blocks must have equal column counts");
        }
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for b in blocks {
            data.extend_from_slice(&b.data);
        }
        Ok(Self { rows, cols, data })
    }

    fn check_same_shape(&self, other: &Self, op: &str) {
        assert_eq!(
            self.shape(),
            other.shape(),
            "shape mismatch in matrix {op}"
        );
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;

    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.check_same_shape(rhs, "addition");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;

    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.check_same_shape(rhs, "subtraction");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;

    fn neg(self) -> DenseMatrix {
        self.scale(-1.0)
    }
}

/// Panicking product for conforming shapes; use [`DenseMatrix::matmul`] when
/// shapes come from user input.
impl Mul for &DenseMatrix {
    type Output = DenseMatrix;

    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs).expect("nonconforming matrix product")
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Thresholds that decide which singular values count as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    relative: f64,
    absolute: f64,
}

impl Tolerance {
    pub fn new(relative: f64, absolute: f64) -> Result<Self> {
        if !(relative.is_finite() && absolute.is_finite()) || relative < 0.0 || absolute < 0.0 {
            return domain(format!(
                "tolerances must be finite and nonnegative (relative {relative}, absolute {absolute})"
            ));
        }
        if relative == 0.0 && absolute == 0.0 {
            return domain("relative and absolute tolerance cannot both be zero");
        }
        Ok(Self { relative, absolute })
    }

    pub fn relative(&self) -> f64 {
        self.relative
    }

    pub fn absolute(&self) -> f64 {
        self.absolute
    }

    /// Singular values at or below this cutoff are treated as zero.
    pub fn cutoff(&self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        self.absolute
            .max(self.relative * sigma_max * rows.max(cols) as f64)
    }
}

impl Default for Tolerance {
    /// Relative 2⁻⁴⁰, no absolute floor.
    fn default() -> Self {
        Self {
            relative: (2.0f64).powi(-40),
            absolute: 0.0,
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let rows = a
        .rows
        .checked_mul(b.rows)
        .ok_or_else(|| Error::Sizing("Kronecker product row count overflows".into()))?;
    let cols = a
        .cols
        .checked_mul(b.cols)
        .ok_or_else(|| Error::Sizing("Kronecker product column count overflows".into()))?;
    rows.checked_mul(cols)
        .ok_or_else(|| Error::Sizing("Kronecker product size overflows".into()))?;
    let mut out = DenseMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for k in 0..b.rows {
                let dst = (i * b.rows + k) * cols + j * b.cols;
                for (o, &v) in out.data[dst..dst + b.cols].iter_mut().zip(b.row(k)) {
                    *o = s * v;
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of a diagonal given as a vector: `diag(a) ⊗ diag(b)`
/// returned as its diagonal.
pub fn kron_diagonal(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// Singular values and right singular vectors of a matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Sorted in descending order; one value per column of the input.
    pub singular_values: Vec<f64>,
    /// Orthogonal `cols x cols` matrix whose columns pair with
    /// `singular_values`.
    pub right_vectors: DenseMatrix,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }
}

/// One-sided Jacobi SVD. Orthogonalizes the columns of `m` by plane rotations
/// accumulated into the right factor; column norms become singular values.
pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    let (rows, cols) = m.shape();
    // Column-major working copies.
    let mut w: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();
    let eps = f64::EPSILON * (rows.max(1) as f64).sqrt();
    let mut norms: Vec<f64> = w.iter().map(|c| dot(c, c)).collect();
    // Columns below this squared norm are rounding noise; rotating them
    // against each other need not converge in relative terms.
    let negligible = (f64::EPSILON * f64::EPSILON) * norms.iter().sum::<f64>();

    let mut converged = cols < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numeric {
                what: "one-sided Jacobi SVD",
                iterations: sweeps,
            });
        }
        sweeps += 1;
        converged = true;
        for i in 0..cols - 1 {
            for j in i + 1..cols {
                let alpha = norms[i];
                let beta = norms[j];
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = dot(&w[i], &w[j]);
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wi, wj) = pair_mut(&mut w, i, j);
                rotate(wi, wj, c, s);
                let (vi, vj) = pair_mut(&mut v, i, j);
                rotate(vi, vj, c, s);
                norms[i] = dot(&w[i], &w[i]);
                norms[j] = dot(&w[j], &w[j]);
            }
        }
    }

    let mut order: Vec<usize> = (0..cols).collect();
    let sigma: Vec<f64> = norms.iter().map(|n| n.sqrt()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let singular_values = order.iter().map(|&k| sigma[k]).collect();
    let mut right_vectors = DenseMatrix::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..cols {
            right_vectors[(r, dst)] = v[src][r];
        }
    }
    Ok(Svd {
        singular_values,
        right_vectors,
    })
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    debug_assert!(i < j);
    let (head, tail) = v.split_at_mut(j);
    (&mut head[i], &mut tail[0])
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa - s * yb;
        *y = s * xa + c * yb;
    }
}

fn require_nonempty(m: &DenseMatrix) -> Result<()> {
    if m.rows == 0 || m.cols == 0 {
        return sizing("matrix must be nonempty");
    }
    Ok(())
}

/// Number of singular values above `tol.cutoff(σ_max, rows, cols)`.
pub fn numerical_rank(m: &DenseMatrix, tol: Tolerance) -> Result<usize> {
    require_nonempty(m)?;
    let s = svd(m)?;
    let cut = tol.cutoff(s.sigma_max(), m.rows, m.cols);
    Ok(s.singular_values.iter().filter(|&&x| x > cut).count())
}

/// Orthonormal basis (as columns) of the numerical kernel of `m`.
pub fn nullspace_basis(m: &DenseMatrix, tol: Tolerance) -> Result<DenseMatrix> {
    require_nonempty(m)?;
    let s = svd(m)?;
    Ok(kernel_from_svd(&s, tol.cutoff(s.sigma_max(), m.rows, m.cols)))
}

/// Like [`nullspace_basis`], but the relative threshold is measured against
/// `sigma_ref` instead of the largest singular value of `m` itself.
///
/// Restricted operators `C·B` can be pure rounding noise when `span(B)` already
/// lies in the kernel of `C`; a self-relative cutoff would then count that
/// noise as rank.
pub fn nullspace_basis_relative_to(
    m: &DenseMatrix,
    tol: Tolerance,
    sigma_ref: f64,
) -> Result<DenseMatrix> {
    require_nonempty(m)?;
    let s = svd(m)?;
    let reference = sigma_ref.max(s.sigma_max());
    Ok(kernel_from_svd(&s, tol.cutoff(reference, m.rows, m.cols)))
}

fn kernel_from_svd(s: &Svd, cut: f64) -> DenseMatrix {
    let n = s.right_vectors.rows();
    let keep: Vec<usize> = (0..n).filter(|&k| s.singular_values[k] <= cut).collect();
    let mut basis = DenseMatrix::zeros(n, keep.len());
    for (dst, &k) in keep.iter().enumerate() {
        for r in 0..n {
            basis[(r, dst)] = s.right_vectors[(r, k)];
        }
    }
    basis
}

/// Expresses `m` on the subspace spanned by the orthonormal columns of
/// `basis`, i.e. returns `m · basis`.
pub fn restrict_to_subspace(m: &DenseMatrix, basis: &DenseMatrix) -> Result<DenseMatrix> {
    if m.cols != basis.rows {
        return sizing(format!(
            "operator has {} columns but basis vectors have length {}",
            m.cols, basis.rows
        ));
    }
    m.matmul(basis)
}

/// Largest singular value.
pub fn spectral_norm(m: &DenseMatrix) -> Result<f64> {
    if m.rows == 0 || m.cols == 0 {
        return Ok(0.0);
    }
    Ok(svd(m)?.sigma_max())
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return domain("eigenvalues need a square matrix");
    }
    let n = m.rows;
    let mut a = m.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= f64::EPSILON * scale * n as f64 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numeric {
                what: "symmetric Jacobi eigenvalue iteration",
                iterations: sweeps,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig = a.diagonal();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}
