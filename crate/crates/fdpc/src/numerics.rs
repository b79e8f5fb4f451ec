//! Dense complex linear algebra used by every other module.
//!
//! All matrices here are small (a handful of antennas per side), so storage
//! is dense double-precision complex, backed by `nalgebra` behind the
//! [`CMatrix`] wrapper. The three operations the rest of the crate leans on —
//! [`logdet`], [`inverse`], [`psd_spectral`] — fail loudly instead of
//! returning garbage: a pivot below the conditioning threshold reports
//! [`NumericsError::SingularMatrix`], and a nominally-PSD matrix with a
//! genuinely negative eigenvalue reports
//! [`NumericsError::NotPositiveSemidefinite`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Relative pivot threshold: an LU pivot below this times the largest row
/// 1-norm of the input marks the matrix as numerically singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

/// Negative eigenvalues of a nominally PSD matrix with magnitude at or below
/// this floor are clamped to zero; anything more negative is an error.
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

/// Errors from the dense linear-algebra kernel.
#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is numerically singular (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    SingularMatrix { pivot: f64, threshold: f64 },
    #[error(
        "matrix is not Hermitian: max |A - A^H| entry {deviation:.3e} exceeds {tolerance:.3e}"
    )]
    NotHermitian { deviation: f64, tolerance: f64 },
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.3e} below -{floor:.3e}")]
    NotPositiveSemidefinite { eigenvalue: f64, floor: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense complex matrix with row-major construction and checked dimensions.
///
/// Arithmetic operators (`+`, `-`, `*` on references) panic on shape
/// mismatch, like any linear-algebra library; the fallible constructors and
/// the free functions below are the checked API surface.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    inner: DMatrix<Complex64>,
}

impl std::fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CMatrix({}x{})", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, " [")?;
            for j in 0..self.cols() {
                let z = self[(i, j)];
                write!(f, " {:.4}{:+.4}i", z.re, z.im)?;
            }
            write!(f, " ]")?;
        }
        Ok(())
    }
}

impl CMatrix {
    /// Build from row-major entries; errors if the entry count does not
    /// match `rows * cols`.
    pub fn new(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self, NumericsError> {
        if entries.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self {
            inner: DMatrix::from_row_slice(rows, cols, entries),
        })
    }

    /// Build from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self, NumericsError> {
        let z: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::new(rows, cols, &z)
    }

    /// Build entry-by-entry from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self {
            inner: DMatrix::from_fn(rows, cols, f),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    /// `c * I` for real `c`.
    pub fn scaled_identity(n: usize, c: f64) -> Self {
        Self {
            inner: DMatrix::identity(n, n) * Complex64::new(c, 0.0),
        }
    }

    /// 1x1 matrix holding a single scalar.
    pub fn scalar(z: Complex64) -> Self {
        Self::from_fn(1, 1, |_, _| z)
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Entries in row-major order.
    pub fn entries_row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    /// Conjugate transpose.
    #[must_use]
    pub fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    #[must_use]
    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            inner: &self.inner * c,
        }
    }

    #[must_use]
    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        self.inner.trace()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// Largest row 1-norm (the infinity operator norm); the conditioning
    /// scale for pivot thresholds.
    pub fn max_row_sum(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.rows() {
            let s: f64 = (0..self.cols()).map(|j| self.inner[(i, j)].norm()).sum();
            best = best.max(s);
        }
        best
    }

    /// Max-modulus deviation from Hermitian symmetry, `max |A - A^H|`.
    pub fn hermitian_deviation(&self) -> f64 {
        debug_assert!(self.is_square());
        let mut dev = 0.0f64;
        for i in 0..self.rows() {
            for j in 0..=i {
                dev = dev.max((self.inner[(i, j)] - self.inner[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_finite(&self) -> bool {
        self.inner
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Row `k` as a 1xN matrix.
    #[must_use]
    pub fn row(&self, k: usize) -> Self {
        Self {
            inner: self.inner.rows(k, 1).into_owned(),
        }
    }

    /// Column `k` as an Nx1 matrix.
    #[must_use]
    pub fn col(&self, k: usize) -> Self {
        Self {
            inner: self.inner.columns(k, 1).into_owned(),
        }
    }

    /// Copy with row `k` deleted.
    #[must_use]
    pub fn without_row(&self, k: usize) -> Self {
        Self {
            inner: self.inner.clone().remove_row(k),
        }
    }

    /// Copy with column `k` deleted.
    #[must_use]
    pub fn without_col(&self, k: usize) -> Self {
        Self {
            inner: self.inner.clone().remove_column(k),
        }
    }

    /// Copy with row `k` and column `k` both deleted.
    #[must_use]
    pub fn without_row_col(&self, k: usize) -> Self {
        Self {
            inner: self.inner.clone().remove_row(k).remove_column(k),
        }
    }

    /// Sub-block `rows r0..r1`, `cols c0..c1` (half-open).
    #[must_use]
    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Self {
            inner: self.inner.view((r0, c0), (r1 - r0, c1 - c0)).into_owned(),
        }
    }

    /// Overwrite row `k` from a 1xN matrix.
    pub fn set_row(&mut self, k: usize, row: &CMatrix) {
        assert_eq!(row.rows(), 1, "set_row expects a 1xN row");
        assert_eq!(row.cols(), self.cols(), "row width mismatch");
        for j in 0..self.cols() {
            self.inner[(k, j)] = row.inner[(0, j)];
        }
    }

    /// Assemble a 2x2 block matrix `[[tl, tr], [bl, br]]`.
    pub fn from_blocks_2x2(
        tl: &CMatrix,
        tr: &CMatrix,
        bl: &CMatrix,
        br: &CMatrix,
    ) -> Result<Self, NumericsError> {
        if tl.rows() != tr.rows()
            || bl.rows() != br.rows()
            || tl.cols() != bl.cols()
            || tr.cols() != br.cols()
        {
            return Err(NumericsError::DimensionMismatch(format!(
                "block shapes do not tile: tl {}x{}, tr {}x{}, bl {}x{}, br {}x{}",
                tl.rows(),
                tl.cols(),
                tr.rows(),
                tr.cols(),
                bl.rows(),
                bl.cols(),
                br.rows(),
                br.cols()
            )));
        }
        let (p, q) = (tl.rows(), tl.cols());
        let out = Self::from_fn(p + bl.rows(), q + tr.cols(), |i, j| match (i < p, j < q) {
            (true, true) => tl.inner[(i, j)],
            (true, false) => tr.inner[(i, j - q)],
            (false, true) => bl.inner[(i - p, j)],
            (false, false) => br.inner[(i - p, j - q)],
        });
        Ok(out)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.inner[idx]
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait<&CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                CMatrix { inner: &self.inner $op &rhs.inner }
            }
        }
    };
}
binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

/// Hermitian positive-semidefinite matrix, validated at construction.
///
/// `tolerance` bounds the accepted Hermitian asymmetry. Eigenvalue checks
/// in [`psd_spectral`] use a separate floor relative to the matrix scale,
/// so a loose symmetry tolerance never legitimizes a negative spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdMatrix {
    base: CMatrix,
    tolerance: f64,
}

impl PsdMatrix {
    /// Validate squareness and Hermitian symmetry within `tolerance`.
    pub fn new(base: CMatrix, tolerance: f64) -> Result<Self, NumericsError> {
        if !base.is_square() {
            return Err(NumericsError::DimensionMismatch(format!(
                "PSD matrix must be square, got {}x{}",
                base.rows(),
                base.cols()
            )));
        }
        let dev = base.hermitian_deviation();
        let tol = tolerance.max(EIGENVALUE_FLOOR);
        if dev > tol {
            return Err(NumericsError::NotHermitian {
                deviation: dev,
                tolerance: tol,
            });
        }
        Ok(Self {
            base,
            tolerance: tol,
        })
    }

    /// Validate with the default tolerance ([`EIGENVALUE_FLOOR`]).
    pub fn from_matrix(base: CMatrix) -> Result<Self, NumericsError> {
        Self::new(base, EIGENVALUE_FLOOR)
    }

    /// `c * I`; errors for negative `c`.
    pub fn scaled_identity(n: usize, c: f64) -> Result<Self, NumericsError> {
        if c < 0.0 {
            return Err(NumericsError::NotPositiveSemidefinite {
                eigenvalue: c,
                floor: 0.0,
            });
        }
        Self::from_matrix(CMatrix::scaled_identity(n, c))
    }

    pub fn base(&self) -> &CMatrix {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.rows()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// Eigendecomposition of a PSD matrix: `a = V diag(lambda) V^H` with
/// eigenvalues sorted descending and clamped to be nonnegative.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    /// Nonnegative eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// Columns of `eigenvectors` whose eigenvalue exceeds
    /// `rel_tol * max(lambda_max, 1)`, i.e. a basis of the numerically
    /// positive eigenspace, together with those eigenvalues.
    pub fn positive_subspace(&self, rel_tol: f64) -> (CMatrix, Vec<f64>) {
        let lmax = self.eigenvalues.first().copied().unwrap_or(0.0);
        let cut = rel_tol * lmax.max(1.0);
        let p = self.eigenvalues.iter().take_while(|&&l| l > cut).count();
        let n = self.eigenvectors.rows();
        (
            self.eigenvectors.submatrix(0, n, 0, p),
            self.eigenvalues[..p].to_vec(),
        )
    }
}

fn square_dim(a: &CMatrix) -> Result<usize, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(a.rows())
}

/// `log |det a|` via pivoted LU. Errors with [`NumericsError::SingularMatrix`]
/// when any pivot falls below `SINGULARITY_THRESHOLD * max_row_sum(a)`.
pub fn logdet(a: &CMatrix) -> Result<f64, NumericsError> {
    Ok(lu_logdet_and_inverse(a, false)?.0)
}

/// Matrix inverse via pivoted LU, with the same singularity policy as
/// [`logdet`].
pub fn inverse(a: &CMatrix) -> Result<CMatrix, NumericsError> {
    Ok(lu_logdet_and_inverse(a, true)?.1.unwrap())
}

/// One LU factorization yielding both `log|det|` and (optionally) the
/// inverse; the hot loops use this to avoid factoring twice.
pub(crate) fn lu_logdet_and_inverse(
    a: &CMatrix,
    want_inverse: bool,
) -> Result<(f64, Option<CMatrix>), NumericsError> {
    let n = square_dim(a)?;
    if n == 0 {
        return Ok((0.0, want_inverse.then(|| CMatrix::identity(0))));
    }
    let scale = a.max_row_sum();
    let threshold = SINGULARITY_THRESHOLD * scale;
    if scale == 0.0 {
        return Err(NumericsError::SingularMatrix {
            pivot: 0.0,
            threshold,
        });
    }
    let lu = a.inner.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..n {
        let p = u[(i, i)].norm();
        if p < threshold {
            return Err(NumericsError::SingularMatrix {
                pivot: p,
                threshold,
            });
        }
        acc += p.ln();
    }
    let inv = if want_inverse {
        Some(CMatrix {
            inner: lu.try_inverse().ok_or(NumericsError::SingularMatrix {
                pivot: 0.0,
                threshold,
            })?,
        })
    } else {
        None
    };
    Ok((acc, inv))
}

/// Solve `a X = rhs` from one LU factorization, with the usual pivot check.
pub fn solve(a: &CMatrix, rhs: &CMatrix) -> Result<CMatrix, NumericsError> {
    let n = square_dim(a)?;
    if rhs.rows() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "solve: lhs is {}x{} but rhs has {} rows",
            n,
            n,
            rhs.rows()
        )));
    }
    let scale = a.max_row_sum();
    let threshold = SINGULARITY_THRESHOLD * scale;
    let lu = a.inner.clone().lu();
    let u = lu.u();
    for i in 0..n {
        let p = u[(i, i)].norm();
        if p < threshold || scale == 0.0 {
            return Err(NumericsError::SingularMatrix {
                pivot: p,
                threshold,
            });
        }
    }
    lu.solve(&rhs.inner)
        .map(|inner| CMatrix { inner })
        .ok_or(NumericsError::SingularMatrix {
            pivot: 0.0,
            threshold,
        })
}

/// Eigendecomposition of a PSD matrix with clamping: eigenvalues in
/// `[-floor, 0)` snap to 0, anything below `-floor` is an error, where
/// `floor` is [`EIGENVALUE_FLOOR`] scaled by the largest matrix entry.
pub fn psd_spectral(a: &PsdMatrix) -> Result<SpectralDecomposition, NumericsError> {
    let n = a.dim();
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: vec![],
            eigenvectors: CMatrix::identity(0),
        });
    }
    let se = a.base.inner.clone().symmetric_eigen();
    let floor = EIGENVALUE_FLOOR * a.base.max_abs().max(1.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[j].partial_cmp(&se.eigenvalues[i]).unwrap());
    let mut eigenvalues = Vec::with_capacity(n);
    for &i in &order {
        let l = se.eigenvalues[i];
        if l < -floor {
            return Err(NumericsError::NotPositiveSemidefinite {
                eigenvalue: l,
                floor,
            });
        }
        eigenvalues.push(l.max(0.0));
    }
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}
