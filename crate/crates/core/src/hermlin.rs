//! Dense complex Hermitian linear algebra.
//!
//! Everything here works on `nalgebra` dense matrices over `Complex<f64>`.
//! [`HermitianMatrix`] is a validated newtype; spectral functions go through
//! [`herm_eig`] and act on a clipped spectrum so that fractional powers and
//! logarithms stay well defined under round-off.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance for the Hermitian check.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Negative eigenvalues down to `-PSD_TOL * lambda_max` are treated as round-off.
pub const PSD_TOL: f64 = 1e-10;
/// Eigenvalues at or below `SUPPORT_TOL * lambda_max` are outside the support.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Residual bound for eigendecompositions.
pub const EIG_TOL: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

/// Square Hermitian matrix. The stored entries are exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, HERMITIAN_TOL)
    }

    pub fn with_tolerance(m: CMatrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let n = m.nrows();
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut worst = (0, 0, 0.0);
        for j in 0..n {
            for i in 0..=j {
                let dev = (m[(i, j)] - m[(j, i)].conj()).norm();
                if dev > worst.2 {
                    worst = (i, j, dev);
                }
            }
        }
        if worst.2.is_nan() || worst.2 > tol * scale {
            return Err(Error::NotHermitian {
                row: worst.0,
                col: worst.1,
                deviation: worst.2,
            });
        }
        Ok(Self(hermitian_part(&m)))
    }

    /// Wraps a matrix that is Hermitian by construction, symmetrizing away round-off.
    pub(crate) fn from_hermitian_unchecked(m: CMatrix) -> Self {
        debug_assert!(m.is_square());
        Self(hermitian_part(&m))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| real(x)));
        Self(CMatrix::from_diagonal(&v))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

impl AsRef<CMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// `(A + A*) / 2`. Exact on matrices that are already Hermitian.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            real(m[(i, i)].re)
        } else {
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        }
    })
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Kronecker product under the standard row-major-block convention.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Matrix unit `E_ij` (zero-based) of size `n`.
pub fn matrix_unit(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(i, j)] = real(1.0);
    m
}

pub fn hs_norm_sq(a: &CMatrix) -> f64 {
    a.norm_squared()
}

/// Ascending eigenvalues with a phase-fixed unitary of eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `V diag(g) V*` for the given replacement spectrum.
    pub fn compose(&self, values: &[f64]) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &g) in values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(g);
        }
        hermitian_part(&(scaled * v.adjoint()))
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.compose(&self.eigenvalues)
    }

    /// `‖A V − V Λ‖_F`.
    pub fn residual(&self, a: &CMatrix) -> f64 {
        let v = &self.eigenvectors;
        let mut vl = v.clone();
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            vl.column_mut(k).scale_mut(l);
        }
        (a * v - vl).norm()
    }

    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        (self.eigenvectors.adjoint() * &self.eigenvectors - CMatrix::identity(n, n)).norm()
    }
}

pub fn herm_eig(a: &HermitianMatrix) -> EigenDecomposition {
    let n = a.dim();
    if n == 0 {
        return EigenDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        };
    }
    let raw = SymmetricEigen::new(a.as_matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw.eigenvalues[i].total_cmp(&raw.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| raw.eigenvalues[i]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let col = raw.eigenvectors.column(i);
        // Largest-magnitude entry made real positive; first index wins ties.
        let mut best = 0;
        let mut best_mag = -1.0;
        for (r, z) in col.iter().enumerate() {
            let mag = z.norm();
            if mag > best_mag * (1.0 + 1e-12) {
                best = r;
                best_mag = mag;
            }
        }
        let phase = if best_mag > 0.0 {
            col[best].conj() / best_mag
        } else {
            real(1.0)
        };
        eigenvectors.set_column(k, &(col * phase));
    }
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Eigendecomposition of a raw matrix, validating it first.
pub fn herm_eig_matrix(m: &CMatrix) -> Result<EigenDecomposition> {
    Ok(herm_eig(&HermitianMatrix::new(m.clone())?))
}

/// Values removed or snapped by [`psd_project`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClipReport {
    pub clipped: Vec<f64>,
}

impl ClipReport {
    pub fn is_empty(&self) -> bool {
        self.clipped.is_empty()
    }
}

/// Clips eigenvalues in `[-tol * lambda_max, 0)` to zero; anything lower is an error.
pub fn psd_project(a: &HermitianMatrix, tol: f64) -> Result<(HermitianMatrix, ClipReport)> {
    let eig = herm_eig(a);
    let lmax = eig.max_eigenvalue().max(0.0);
    let mut report = ClipReport::default();
    let mut values = eig.eigenvalues.clone();
    for l in values.iter_mut() {
        if *l < 0.0 {
            if *l < -tol * lmax {
                return Err(Error::NotPsd { eigenvalue: *l });
            }
            report.clipped.push(*l);
            *l = 0.0;
        }
    }
    if report.is_empty() {
        return Ok((a.clone(), report));
    }
    Ok((HermitianMatrix(eig.compose(&values)), report))
}

/// Clipped spectrum of a PSD matrix: negatives within tolerance and values at
/// or below the support threshold are set to exactly zero.
pub fn clipped_eig(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    let mut eig = herm_eig(a);
    let lmax = eig.max_eigenvalue().max(0.0);
    for l in eig.eigenvalues.iter_mut() {
        if *l < -PSD_TOL * lmax {
            return Err(Error::NotPsd { eigenvalue: *l });
        }
        if *l <= SUPPORT_TOL * lmax {
            *l = 0.0;
        }
    }
    Ok(eig)
}

/// Named scalar functions applied through the spectral theorem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectralFunction {
    Sqrt,
    /// `x^s` with `0^s = 0` for `s > 0` and `x^0 = 1`.
    Power(f64),
    /// `ln x` on the support, `0` on the kernel.
    LogOnSupport,
    PseudoInverse,
    SupportProjector,
}

impl SpectralFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            SpectralFunction::Sqrt => x.sqrt(),
            SpectralFunction::Power(s) => {
                if s == 0.0 {
                    1.0
                } else if x == 0.0 {
                    0.0
                } else {
                    x.powf(s)
                }
            }
            SpectralFunction::LogOnSupport => {
                if x > 0.0 {
                    x.ln()
                } else {
                    0.0
                }
            }
            SpectralFunction::PseudoInverse => {
                if x > 0.0 {
                    1.0 / x
                } else {
                    0.0
                }
            }
            SpectralFunction::SupportProjector => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn apply_spectral_function(a: &HermitianMatrix, f: SpectralFunction) -> Result<HermitianMatrix> {
    apply_psd_function(a, |x| f.eval(x))
}

/// Applies `f` to the clipped spectrum of a PSD matrix.
pub fn apply_psd_function(a: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    let eig = clipped_eig(a)?;
    spectral_compose(&eig, f)
}

/// Applies `f` to the raw spectrum of any Hermitian matrix.
pub fn map_spectrum(a: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    spectral_compose(&herm_eig(a), f)
}

pub(crate) fn spectral_compose(eig: &EigenDecomposition, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    let mut values = Vec::with_capacity(eig.dim());
    for &l in &eig.eigenvalues {
        let g = f(l);
        if !g.is_finite() {
            return Err(Error::Domain { eigenvalue: l });
        }
        values.push(g);
    }
    Ok(HermitianMatrix(eig.compose(&values)))
}

/// Outcome of a Loewner-order comparison `A ≤ B`.
#[derive(Clone, Debug)]
pub struct LoewnerComparison {
    pub holds: bool,
    /// Smallest eigenvalue of `B − A`.
    pub min_eigenvalue: f64,
    /// Eigenvector for `min_eigenvalue`, present when the comparison fails.
    pub witness: Option<CVector>,
}

pub fn loewner_leq(a: &HermitianMatrix, b: &HermitianMatrix, tol: f64) -> Result<LoewnerComparison> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "loewner_leq",
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff = HermitianMatrix::from_hermitian_unchecked(b.as_matrix() - a.as_matrix());
    let eig = herm_eig(&diff);
    let min_eigenvalue = eig.min_eigenvalue();
    let holds = min_eigenvalue >= -tol;
    let witness = (!holds && eig.dim() > 0).then(|| eig.eigenvectors.column(0).into_owned());
    Ok(LoewnerComparison {
        holds,
        min_eigenvalue,
        witness,
    })
}
