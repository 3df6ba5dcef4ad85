//! Dense complex linear algebra for small operator and superoperator matrices.
//!
//! Everything operates on row-major [`ComplexMatrix`] values. Vectorization
//! follows the column-stacking convention: [`vec()`] concatenates the columns of
//! a matrix, so in Liouville space left multiplication by `A` is `I ⊗ A` and
//! right multiplication by `B` is `Bᵀ ⊗ I`. All matrices here are tiny (4×4
//! operators, 16×16 superoperators), so the code favors clarity and robustness
//! over allocation tricks.

use num_complex::Complex64;
use thiserror::Error;

/// Absolute tolerance on `max |H - H†|` used by Hermiticity checks.
pub const HERMITICITY_TOL: f64 = 1e-10;

const MAX_TAYLOR_TERMS: usize = 64;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("vector length {len} does not equal {dim}^2")]
    LengthMismatch { len: usize, dim: usize },
    #[error("matrix is not Hermitian: max |H - H†| = {defect:.3e} exceeds {tol:.3e}")]
    NonHermitian { defect: f64, tol: f64 },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
}

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Build from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        }
    }

    /// Diagonal matrix from real entries.
    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(entries[i], 0.0)
            } else {
                Complex64::ZERO
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conjugate(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scaled_re(&self, s: f64) -> Self {
        self.scaled(Complex64::new(s, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square(), "trace of non-square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `max |H - H†|` over all entries; 0 for exactly Hermitian input.
    pub fn hermiticity_defect(&self) -> f64 {
        assert!(self.is_square(), "hermiticity defect of non-square matrix");
        let mut defect = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                defect = defect.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        defect
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| (a - b).norm() <= tol)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl std::ops::Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch in add"
        );
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl std::ops::Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch in sub"
        );
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl std::ops::AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch in add"
        );
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl std::ops::Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimension mismatch in mul");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl std::ops::Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scaled_re(-1.0)
    }
}

/// Kronecker product; output dimensions multiply.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let aij = a[(i, j)];
            if aij == Complex64::ZERO {
                continue;
            }
            for k in 0..b.rows() {
                for l in 0..b.cols() {
                    out[(i * b.rows() + k, j * b.cols() + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Column-stacking vectorization of a square matrix.
pub fn vec(m: &ComplexMatrix) -> Result<Vec<Complex64>, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let d = m.rows();
    let mut v = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            v.push(m[(i, j)]);
        }
    }
    Ok(v)
}

/// Inverse of [`vec()`]: reshape a length-d² vector into a d×d matrix.
pub fn unvec(v: &[Complex64], d: usize) -> Result<ComplexMatrix, LinalgError> {
    if v.len() != d * d {
        return Err(LinalgError::LengthMismatch {
            len: v.len(),
            dim: d,
        });
    }
    Ok(ComplexMatrix::from_fn(d, d, |i, j| v[j * d + i]))
}

/// Matrix exponential by scaling and squaring with a tolerance-driven
/// Taylor kernel.
///
/// The input is scaled by 2⁻ˢ until its 1-norm is at most 0.5, the series is
/// summed until the next term falls below `tol` (shrunk to absorb the error
/// growth of the s squarings), and the result is squared s times.
pub fn expm(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(LinalgError::InvalidTolerance(tol));
    }
    let n = a.rows();
    let norm = a.one_norm();
    let squarings: i32 = if norm > 0.5 {
        (norm / 0.5).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.scaled_re(0.5f64.powi(squarings));
    let series_tol = (tol * 0.5f64.powi(squarings + 2)).max(f64::MIN_POSITIVE);

    let mut sum = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    for k in 1..=MAX_TAYLOR_TERMS {
        term = (&term * &scaled).scaled_re(1.0 / k as f64);
        sum += &term;
        if term.max_abs() <= series_tol {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// What to do when a Hermiticity precondition fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HermiticityCheck {
    /// Log a warning and continue.
    Warn,
    /// Return [`LinalgError::NonHermitian`].
    Strict,
}

fn check_hermitian(h: &ComplexMatrix, check: HermiticityCheck) -> Result<(), LinalgError> {
    let defect = h.hermiticity_defect();
    if defect > HERMITICITY_TOL {
        match check {
            HermiticityCheck::Strict => {
                return Err(LinalgError::NonHermitian {
                    defect,
                    tol: HERMITICITY_TOL,
                })
            }
            HermiticityCheck::Warn => {
                log::warn!(
                    "operator fails Hermiticity check: max |H - H†| = {defect:.3e} > {HERMITICITY_TOL:.3e}"
                );
            }
        }
    }
    Ok(())
}

/// Superoperator on vectorized d×d matrices, stored as a d²×d² matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    mat: ComplexMatrix,
}

impl Superoperator {
    pub fn from_matrix(mat: ComplexMatrix, dim: usize) -> Result<Self, LinalgError> {
        if mat.rows() != dim * dim || mat.cols() != dim * dim {
            return Err(LinalgError::DimMismatch {
                expected: dim * dim,
                got: mat.rows(),
            });
        }
        Ok(Self { dim, mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            mat: ComplexMatrix::identity(dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            mat: ComplexMatrix::zeros(dim * dim, dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        let d2 = self.dim * self.dim;
        if v.len() != d2 {
            return Err(LinalgError::LengthMismatch {
                len: v.len(),
                dim: self.dim,
            });
        }
        let mut out = vec![Complex64::ZERO; d2];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, x) in v.iter().enumerate() {
                *o += self.mat[(i, j)] * x;
            }
        }
        Ok(out)
    }

    /// Apply to a matrix: `unvec(M · vec(rho))`.
    pub fn apply_matrix(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(LinalgError::DimMismatch {
                expected: self.dim,
                got: rho.rows(),
            });
        }
        unvec(&self.apply(&vec(rho)?)?, self.dim)
    }

    pub fn scaled_re(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            mat: self.mat.scaled_re(s),
        }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            mat: self.mat.scaled(s),
        }
    }

    /// `exp(M · t)` of the stored generator matrix.
    pub fn propagator(&self, t: f64, tol: f64) -> Result<Superoperator, LinalgError> {
        Ok(Self {
            dim: self.dim,
            mat: expm(&self.mat.scaled_re(t), tol)?,
        })
    }

    /// Max absolute entry of `vec(I)† · M`: zero for trace-preserving
    /// generators. Returned unnormalized; callers compare against a
    /// tolerance scaled by [`Self::max_abs`] since generator entries carry
    /// rad/s magnitudes.
    pub fn trace_row_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for col in 0..d * d {
            let mut s = Complex64::ZERO;
            for i in 0..d {
                s += self.mat[(i * d + i, col)];
            }
            worst = worst.max(s.norm());
        }
        worst
    }

    /// `Tr(M M†)` = squared Frobenius norm.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.mat.frobenius_norm_sq()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.max_abs()
    }
}

impl std::ops::Add for &Superoperator {
    type Output = Superoperator;
    fn add(self, rhs: &Superoperator) -> Superoperator {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch in add");
        Superoperator {
            dim: self.dim,
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl std::ops::Sub for &Superoperator {
    type Output = Superoperator;
    fn sub(self, rhs: &Superoperator) -> Superoperator {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch in sub");
        Superoperator {
            dim: self.dim,
            mat: &self.mat - &rhs.mat,
        }
    }
}

/// Composition as matrices: `(a * b)` applies `b` first.
impl std::ops::Mul for &Superoperator {
    type Output = Superoperator;
    fn mul(self, rhs: &Superoperator) -> Superoperator {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch in mul");
        Superoperator {
            dim: self.dim,
            mat: &self.mat * &rhs.mat,
        }
    }
}

/// Superoperator for `ρ ↦ Hρ − ρH` (the commutator without the −i factor):
/// `I ⊗ H − Hᵀ ⊗ I` in column-stacking convention.
///
/// `h` should be Hermitian within [`HERMITICITY_TOL`]; violations are
/// reported according to `check`.
pub fn commutator_super(
    h: &ComplexMatrix,
    check: HermiticityCheck,
) -> Result<Superoperator, LinalgError> {
    if !h.is_square() {
        return Err(LinalgError::NonSquare {
            rows: h.rows(),
            cols: h.cols(),
        });
    }
    check_hermitian(h, check)?;
    let d = h.rows();
    let eye = ComplexMatrix::identity(d);
    let mat = &kron(&eye, h) - &kron(&h.transpose(), &eye);
    Superoperator::from_matrix(mat, d)
}

/// Superoperator for the nested commutator `ρ ↦ [A, [B, ρ]]`.
pub fn double_commutator_super(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<Superoperator, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(LinalgError::DimMismatch {
            expected: a.rows(),
            got: b.rows(),
        });
    }
    let ca = commutator_super(a, HermiticityCheck::Warn)?;
    let cb = commutator_super(b, HermiticityCheck::Warn)?;
    Ok(&ca * &cb)
}

/// Eigenvalues of a Hermitian matrix, sorted ascending.
///
/// Uses cyclic Jacobi on the real symmetric embedding
/// `[[Re H, -Im H], [Im H, Re H]]`, whose spectrum is that of `H` with every
/// eigenvalue doubled; the returned vector therefore has length `2d`.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let d = m.rows();
    let n = 2 * d;
    // Symmetrize first so roundoff-level Hermiticity defects cannot feed the
    // real embedding an asymmetric matrix.
    let h = (m + &m.adjoint()).scaled_re(0.5);
    let mut a = vec![0.0f64; n * n];
    for i in 0..d {
        for j in 0..d {
            let z = h[(i, j)];
            a[i * n + j] = z.re;
            a[i * n + (j + d)] = -z.im;
            a[(i + d) * n + j] = z.im;
            a[(i + d) * n + (j + d)] = z.re;
        }
    }
    jacobi_eigenvalues(&mut a, n);
    let mut eigs: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("NaN eigenvalue"));
    Ok(eigs)
}

fn jacobi_eigenvalues(a: &mut [f64], n: usize) {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(1.0, f64::max);
    for _sweep in 0..60 {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += a[p * n + q] * a[p * n + q];
                }
            }
            s.sqrt()
        };
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
}
