//! Small dense matrices and the control-design solvers built on them.
//!
//! Everything here works on row-major `f64` storage and targets the tiny
//! systems of this crate (state dimension six at most). The Lyapunov solver
//! linearizes with Kronecker products and does a dense `n² × n²` solve; the
//! Riccati solver is a Kleinman–Newton iteration over that Lyapunov solver.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{mismatch, Error, Result};

/// Row-major dense real matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension(format!("{rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(mismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

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

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row slices. All rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(mismatch(format!(
                    "row {i} has {} entries, expected {ncols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(nrows, ncols, data)
    }

    pub fn column_vector(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
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

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
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

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(mismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = out.row_mut(i);
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(mismatch(format!(
                "{}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ v` without materializing the transpose.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(mismatch(format!(
                "transpose of {}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    fn zip_with(&self, rhs: &Self, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return Err(mismatch(format!(
                "cannot {op} {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, "subtract", |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }

    /// Largest absolute difference between `self` and its transpose.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(self + selfᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = m;
                s[(j, i)] = m;
            }
        }
        s
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.rows * rhs.rows, self.cols * rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == 0.0 {
                    continue;
                }
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        out[(i * rhs.rows + k, j * rhs.cols + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Solves `self · X = rhs` by LU decomposition with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        if !self.is_square() {
            return Err(mismatch(format!(
                "solve needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        if rhs.rows != self.rows {
            return Err(mismatch(format!(
                "right-hand side has {} rows, expected {}",
                rhs.rows, self.rows
            )));
        }
        let n = self.rows;
        let mut lu = self.clone();
        let mut x = rhs.clone();
        let tiny = f64::EPSILON * n as f64 * self.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| lu[(a, col)].abs().total_cmp(&lu[(b, col)].abs()))
                .unwrap_or(col);
            if lu[(pivot, col)].abs() <= tiny {
                return Err(Error::SingularSystem);
            }
            if pivot != col {
                swap_rows(&mut lu, pivot, col);
                swap_rows(&mut x, pivot, col);
            }
            let p = lu[(col, col)];
            for r in col + 1..n {
                let factor = lu[(r, col)] / p;
                if factor == 0.0 {
                    continue;
                }
                lu[(r, col)] = 0.0;
                for c in col + 1..n {
                    lu[(r, c)] -= factor * lu[(col, c)];
                }
                for c in 0..x.cols {
                    x[(r, c)] -= factor * x[(col, c)];
                }
            }
        }
        for col in (0..n).rev() {
            let p = lu[(col, col)];
            for c in 0..x.cols {
                let mut acc = x[(col, c)];
                for k in col + 1..n {
                    acc -= lu[(col, k)] * x[(k, c)];
                }
                x[(col, c)] = acc / p;
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Self> {
        self.solve(&Self::identity(self.rows))
    }

    /// Cholesky test for symmetric positive definiteness.
    pub fn is_positive_definite(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) {
                return false;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        true
    }
}

fn swap_rows(m: &mut DenseMatrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    let cols = m.cols;
    for c in 0..cols {
        m.data.swap(a * cols + c, b * cols + c);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
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

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix{}x{} ", self.rows, self.cols)?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

// Operator forms panic on shape mismatch; the `try_*` / `matmul` methods are
// the checked equivalents.
impl Mul for &DenseMatrix {
    type Output = DenseMatrix;

    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;

    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;

    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;

    fn neg(self) -> DenseMatrix {
        self.scale(-1.0)
    }
}

fn require_square(m: &DenseMatrix, name: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(mismatch(format!(
            "{name} must be square, got {}x{}",
            m.rows, m.cols
        )))
    }
}

/// Solves `AᵀS + SA + Q = 0` for symmetric `S`.
///
/// The equation is vectorized as `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec(S) = -vec(Q)`, which
/// reads the same for row- and column-major stacking.
pub fn lyapunov_solve(a: &DenseMatrix, q: &DenseMatrix) -> Result<DenseMatrix> {
    require_square(a, "A")?;
    require_square(q, "Q")?;
    if a.rows != q.rows {
        return Err(mismatch(format!(
            "A is {}x{} but Q is {}x{}",
            a.rows, a.cols, q.rows, q.cols
        )));
    }
    let sym_tol = 1e-12 * (1.0 + q.max_abs());
    if q.asymmetry() > sym_tol {
        return Err(mismatch("Q is not symmetric".to_string()));
    }
    let n = a.rows;
    let at = a.transpose();
    let eye = DenseMatrix::identity(n);
    let op = &eye.kron(&at) + &at.kron(&eye);
    let rhs = DenseMatrix::column_vector(&q.data).scale(-1.0);
    let vec_s = op.solve(&rhs)?;
    let s = DenseMatrix::new(n, n, vec_s.data)?.symmetrized();
    if !s.is_finite() {
        return Err(Error::SingularSystem);
    }
    Ok(s)
}

/// Frobenius norm of `AᵀS + SA + Q`.
pub fn lyapunov_residual(a: &DenseMatrix, s: &DenseMatrix, q: &DenseMatrix) -> f64 {
    let at = a.transpose();
    (&(&(&at * s) + &(s * a)) + q).frobenius_norm()
}

/// Frobenius norm of `AᵀS + SA − SBR⁻¹BᵀS + Q`.
pub fn care_residual(
    a: &DenseMatrix,
    b: &DenseMatrix,
    q: &DenseMatrix,
    r: &DenseMatrix,
    s: &DenseMatrix,
) -> Result<f64> {
    let at = a.transpose();
    let rinv_bt_s = r.solve(&(&b.transpose() * s))?;
    let quad = &(s * b) * &rinv_bt_s;
    Ok((&(&(&(&at * s) + &(s * a)) - &quad) + q).frobenius_norm())
}

/// Returns true when every eigenvalue of `a` has negative real part.
///
/// Uses the Lyapunov characterization: `a` is Hurwitz iff `aᵀP + Pa + I = 0`
/// has a positive definite solution.
pub fn is_hurwitz(a: &DenseMatrix) -> bool {
    if !a.is_square() {
        return false;
    }
    match lyapunov_solve(a, &DenseMatrix::identity(a.rows)) {
        Ok(p) => p.is_positive_definite(),
        Err(_) => false,
    }
}

// Newton converges quadratically near the solution, but a large pole-shift
// start gain can take many roughly-halving steps to get there.
const KLEINMAN_MAX_ITER: usize = 500;
const KLEINMAN_TOL: f64 = 1e-12;
const KLEINMAN_STALL_TOL: f64 = 1e-8;

fn check_care_inputs(
    a: &DenseMatrix,
    b: &DenseMatrix,
    q: &DenseMatrix,
    r: &DenseMatrix,
) -> Result<()> {
    require_square(a, "A")?;
    require_square(q, "Q")?;
    require_square(r, "R")?;
    if b.rows != a.rows {
        return Err(mismatch(format!("B has {} rows, A has {}", b.rows, a.rows)));
    }
    if q.rows != a.rows {
        return Err(mismatch(format!("Q is {}x{}, A is {}x{}", q.rows, q.cols, a.rows, a.cols)));
    }
    if r.rows != b.cols {
        return Err(mismatch(format!("R is {}x{}, B has {} columns", r.rows, r.cols, b.cols)));
    }
    Ok(())
}

/// Stabilizing feedback for the Newton iteration's starting point.
///
/// Zero when `A` is already Hurwitz; otherwise Bass's pole-shifting gain
/// `K₀ = BᵀP⁻¹` with `(A + αI)P + P(A + αI)ᵀ = 2BBᵀ` and `α` above the
/// spectral radius of `A`.
fn initial_stabilizing_gain(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows;
    if is_hurwitz(a) {
        return Ok(DenseMatrix::zeros(b.cols, n));
    }
    let alpha = a.frobenius_norm() + 1.0;
    let shifted = &a.scale(-1.0) - &DenseMatrix::identity(n).scale(alpha);
    let bbt2 = (b * &b.transpose()).scale(2.0);
    let p = lyapunov_solve(&shifted.transpose(), &bbt2).map_err(|_| Error::NotStabilizable)?;
    let k0 = p
        .solve(b)
        .map_err(|_| Error::NotStabilizable)?
        .transpose();
    if is_hurwitz(&(a - &(b * &k0))) {
        Ok(k0)
    } else {
        Err(Error::NotStabilizable)
    }
}

/// One Kleinman step: solves the closed-loop Lyapunov equation for gain `k`
/// and returns the cost matrix `S` together with the improved gain.
pub fn kleinman_step(
    a: &DenseMatrix,
    b: &DenseMatrix,
    q: &DenseMatrix,
    r: &DenseMatrix,
    k: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let closed = a - &(b * k);
    let weight = (q + &(&(&k.transpose() * r) * k)).symmetrized();
    let s = lyapunov_solve(&closed, &weight)?;
    let next = r.solve(&(&b.transpose() * &s))?;
    Ok((s, next))
}

/// Stabilizing solution of the continuous algebraic Riccati equation
/// `AᵀS + SA − SBR⁻¹BᵀS + Q = 0`.
pub fn care_solve(
    a: &DenseMatrix,
    b: &DenseMatrix,
    q: &DenseMatrix,
    r: &DenseMatrix,
) -> Result<DenseMatrix> {
    check_care_inputs(a, b, q, r)?;
    let mut k = initial_stabilizing_gain(a, b)?;
    let mut prev_change = f64::INFINITY;
    for _ in 0..KLEINMAN_MAX_ITER {
        let (s, next) = kleinman_step(a, b, q, r, &k)?;
        let change = (&next - &k).frobenius_norm();
        k = next;
        let scale = 1.0 + k.frobenius_norm();
        // Ill-conditioned problems bottom out at a roundoff floor above the
        // strict tolerance; stop once steps are tiny and no longer shrinking.
        let stalled = change < KLEINMAN_STALL_TOL * scale && change >= prev_change;
        if change < KLEINMAN_TOL * scale || stalled {
            if !s.is_finite() {
                return Err(Error::SingularSystem);
            }
            // One more solve with the converged gain so S and K agree.
            let (s, _) = kleinman_step(a, b, q, r, &k)?;
            return Ok(s);
        }
        prev_change = change;
    }
    Err(Error::NoConvergence(KLEINMAN_MAX_ITER))
}

/// LQR state-feedback gain `K = R⁻¹BᵀS`.
pub fn lqr_gain(
    a: &DenseMatrix,
    b: &DenseMatrix,
    q: &DenseMatrix,
    r: &DenseMatrix,
) -> Result<DenseMatrix> {
    let s = care_solve(a, b, q, r)?;
    r.solve(&(&b.transpose() * &s))
}

/// `exp(A t)` by scaling and squaring around a truncated Taylor series.
pub fn matrix_exponential(a: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    require_square(a, "A")?;
    if !t.is_finite() {
        return Err(Error::NonFiniteState(format!("t = {t}")));
    }
    let n = a.rows;
    let at = a.scale(t);
    let norm = at.frobenius_norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = at.scale(0.5f64.powi(squarings));
    let mut result = DenseMatrix::identity(n);
    let mut term = DenseMatrix::identity(n);
    for k in 1..=30 {
        term = (&term * &scaled).scale(1.0 / k as f64);
        result = &result + &term;
        if term.max_abs() <= f64::EPSILON * 1e-3 * result.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}
