//! Finite-dimensional matrix *-algebras, states, and the `ω^R` / `ω^L` forms.
//!
//! Superoperators act on vectorized matrices under column stacking:
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermlin::{kron, psd_project, real, CMatrix, CVector, HermitianMatrix, C64, PSD_TOL};
use crate::qforms::QuadraticForm;

/// Direct sum `⊕ M_{d_k}`, realized as block-diagonal matrices of size `Σ d_k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlgebraDescriptor {
    block_dims: Vec<usize>,
}

impl AlgebraDescriptor {
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        if block_dims.is_empty() || block_dims.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "block dimensions must be positive and non-empty, got {block_dims:?}"
            )));
        }
        Ok(Self { block_dims })
    }

    pub fn full(n: usize) -> Self {
        Self { block_dims: vec![n] }
    }

    /// Commutative diagonal algebra `C^n`.
    pub fn diagonal(n: usize) -> Self {
        Self { block_dims: vec![1; n] }
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn total_dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub fn is_full(&self) -> bool {
        self.block_dims.len() == 1
    }

    /// Dimension as a vector space, `Σ d_k²`.
    pub fn vector_dim(&self) -> usize {
        self.block_dims.iter().map(|d| d * d).sum()
    }

    pub fn block_offsets(&self) -> Vec<usize> {
        self.block_dims
            .iter()
            .scan(0, |acc, &d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect()
    }

    /// Block index of each row/column.
    fn block_of(&self) -> Vec<usize> {
        self.block_dims
            .iter()
            .enumerate()
            .flat_map(|(k, &d)| std::iter::repeat_n(k, d))
            .collect()
    }

    /// Largest entry outside the diagonal blocks, if any exceeds `tol`.
    pub fn off_block_violation(&self, x: &CMatrix, tol: f64) -> Option<(usize, usize, f64)> {
        let owner = self.block_of();
        let mut worst: Option<(usize, usize, f64)> = None;
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                if owner[i] != owner[j] {
                    let mag = x[(i, j)].norm();
                    if mag > tol && worst.is_none_or(|w| mag > w.2) {
                        worst = Some((i, j, mag));
                    }
                }
            }
        }
        worst
    }

    pub fn contains(&self, x: &CMatrix, tol: f64) -> bool {
        x.nrows() == self.total_dim() && x.ncols() == self.total_dim() && self.off_block_violation(x, tol).is_none()
    }

    /// Zeroes every entry outside the diagonal blocks.
    pub fn compress(&self, x: &CMatrix) -> CMatrix {
        let owner = self.block_of();
        CMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            if owner[i] == owner[j] {
                x[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// Matrix units `E_ij` inside the blocks, orthonormal for the Hilbert–Schmidt product.
    pub fn basis(&self) -> Vec<CMatrix> {
        let n = self.total_dim();
        let mut out = Vec::with_capacity(self.vector_dim());
        for (o, &d) in self.block_offsets().iter().zip(&self.block_dims) {
            for j in 0..d {
                for i in 0..d {
                    out.push(crate::hermlin::matrix_unit(n, o + i, o + j));
                }
            }
        }
        out
    }

    /// `N² x Σ d_k²` isometry whose columns are `vec(E_ij)` for the block matrix units.
    pub fn hs_basis_isometry(&self) -> CMatrix {
        let n = self.total_dim();
        let basis = self.basis();
        let mut b = CMatrix::zeros(n * n, basis.len());
        for (c, e) in basis.iter().enumerate() {
            b.set_column(c, &vec_matrix(e));
        }
        b
    }

    pub fn identity(&self) -> CMatrix {
        let n = self.total_dim();
        CMatrix::identity(n, n)
    }
}

/// Column-stacking vectorization.
pub fn vec_matrix(x: &CMatrix) -> CVector {
    CVector::from_column_slice(x.as_slice())
}

pub fn unvec(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            context: "unvec",
            expected: rows * cols,
            found: v.len(),
        });
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Positive linear functional `a ↦ Tr(ω̂ a)` on a block algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    algebra: AlgebraDescriptor,
    density: HermitianMatrix,
    normalized: bool,
}

/// Trace tolerance for normalized states.
pub const TRACE_TOL: f64 = 1e-12;
/// Absolute tolerance for entries outside the block structure.
pub const BLOCK_TOL: f64 = 1e-12;

pub fn make_state(algebra: &AlgebraDescriptor, density: CMatrix, normalized: bool) -> Result<State> {
    let n = algebra.total_dim();
    if density.nrows() != n || density.ncols() != n {
        if !density.is_square() {
            return Err(Error::NotSquare {
                rows: density.nrows(),
                cols: density.ncols(),
            });
        }
        return Err(Error::DimensionMismatch {
            context: "make_state",
            expected: n,
            found: density.nrows(),
        });
    }
    let h = HermitianMatrix::new(density)?;
    psd_project(&h, PSD_TOL)?;
    let scale = h.as_matrix().iter().map(|z| z.norm()).fold(1.0, f64::max);
    if let Some((row, col, magnitude)) = algebra.off_block_violation(h.as_matrix(), BLOCK_TOL * scale) {
        return Err(Error::OffBlock { row, col, magnitude });
    }
    if normalized {
        let trace = h.trace();
        if trace.is_nan() || (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace { trace });
        }
    }
    Ok(State {
        algebra: algebra.clone(),
        density: h,
        normalized,
    })
}

impl State {
    /// Normalized state on the full matrix algebra.
    pub fn full(density: CMatrix) -> Result<Self> {
        let n = density.nrows();
        make_state(&AlgebraDescriptor::full(n), density, true)
    }

    pub fn algebra(&self) -> &AlgebraDescriptor {
        &self.algebra
    }

    pub fn density(&self) -> &HermitianMatrix {
        &self.density
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.density.trace()
    }
}

fn check_element(state: &State, a: &CMatrix, context: &'static str) -> Result<()> {
    let n = state.dim();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            found: a.nrows(),
        });
    }
    Ok(())
}

/// `ω(a) = Tr(ω̂ a)`.
pub fn functional_value(state: &State, a: &CMatrix) -> Result<C64> {
    check_element(state, a, "functional_value")?;
    Ok(trace_product(state.density.as_matrix(), a))
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Hilbert–Schmidt product `Tr(a* b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            context: "hs_inner",
            expected: a.nrows() * a.ncols(),
            found: b.nrows() * b.ncols(),
        });
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Left multiplication `X ↦ A X` as an `n² x n²` matrix.
pub fn left_multiplication(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    kron(&CMatrix::identity(n, n), a)
}

/// Right multiplication `X ↦ X A` as an `n² x n²` matrix.
pub fn right_multiplication(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    kron(&a.transpose(), &CMatrix::identity(n, n))
}

/// `ω^R(a, b) = ω(b a*)`, represented by `L_ω`.
pub fn form_right(state: &State) -> QuadraticForm {
    let m = left_multiplication(state.density.as_matrix());
    QuadraticForm::from_psd_unchecked(HermitianMatrix::from_hermitian_unchecked(m))
}

/// `ν^L(a, b) = ν(a* b)`, represented by `R_ν`.
pub fn form_left(state: &State) -> QuadraticForm {
    let m = right_multiplication(state.density.as_matrix());
    QuadraticForm::from_psd_unchecked(HermitianMatrix::from_hermitian_unchecked(m))
}

/// Placement of each block of a subalgebra inside `M_n`: `placements[k]`
/// lists the diagonal offsets where copies of block `k` land.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockEmbedding {
    pub placements: Vec<Vec<usize>>,
}

impl BlockEmbedding {
    /// Blocks laid out consecutively, one copy each.
    pub fn consecutive(sub: &AlgebraDescriptor) -> Self {
        Self {
            placements: sub.block_offsets().into_iter().map(|o| vec![o]).collect(),
        }
    }
}

/// Unital *-homomorphism from a block algebra into `M_n`.
#[derive(Clone, Debug)]
pub struct SubalgebraInjection {
    sub: AlgebraDescriptor,
    parent_dim: usize,
    embedding: BlockEmbedding,
    /// One `n x N` partial isometry per placed copy; `Φ(x) = Σ E x E*`.
    copies: Vec<CMatrix>,
}

pub fn subalgebra_injection(
    sub: &AlgebraDescriptor,
    parent_dim: usize,
    embedding: &BlockEmbedding,
) -> Result<SubalgebraInjection> {
    if embedding.placements.len() != sub.block_dims().len() {
        return Err(Error::InvalidEmbedding(format!(
            "{} placement lists for {} blocks",
            embedding.placements.len(),
            sub.block_dims().len()
        )));
    }
    let big_n = sub.total_dim();
    let mut covered = vec![false; parent_dim];
    let mut copies = Vec::new();
    for (k, (offsets, (&d, &sub_off))) in embedding
        .placements
        .iter()
        .zip(sub.block_dims().iter().zip(sub.block_offsets().iter()))
        .enumerate()
    {
        if offsets.is_empty() {
            return Err(Error::InvalidEmbedding(format!("block {k} has no placement")));
        }
        for &o in offsets {
            if o + d > parent_dim {
                return Err(Error::InvalidEmbedding(format!(
                    "block {k} at offset {o} overruns dimension {parent_dim}"
                )));
            }
            let mut e = CMatrix::zeros(parent_dim, big_n);
            for i in 0..d {
                if covered[o + i] {
                    return Err(Error::InvalidEmbedding(format!("index {} covered twice", o + i)));
                }
                covered[o + i] = true;
                e[(o + i, sub_off + i)] = real(1.0);
            }
            copies.push(e);
        }
    }
    if let Some(i) = covered.iter().position(|c| !c) {
        return Err(Error::InvalidEmbedding(format!(
            "index {i} not covered, so the map would not be unital"
        )));
    }
    Ok(SubalgebraInjection {
        sub: sub.clone(),
        parent_dim,
        embedding: embedding.clone(),
        copies,
    })
}

/// Residuals of the *-homomorphism identities on the matrix units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomomorphismResiduals {
    pub unital: f64,
    pub multiplicative: f64,
    pub adjoint: f64,
}

impl SubalgebraInjection {
    pub fn sub(&self) -> &AlgebraDescriptor {
        &self.sub
    }

    pub fn parent_dim(&self) -> usize {
        self.parent_dim
    }

    pub fn embedding(&self) -> &BlockEmbedding {
        &self.embedding
    }

    pub fn partial_isometries(&self) -> &[CMatrix] {
        &self.copies
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let n = self.parent_dim;
        self.copies
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, e| acc + e * x * e.adjoint())
    }

    /// `n² x N²` matrix of the map under column stacking.
    pub fn superoperator(&self) -> CMatrix {
        let n = self.parent_dim;
        let big_n = self.sub.total_dim();
        self.copies.iter().fold(CMatrix::zeros(n * n, big_n * big_n), |acc, e| {
            acc + kron(&e.conjugate(), e)
        })
    }

    pub fn verify_homomorphism(&self) -> HomomorphismResiduals {
        let n = self.parent_dim;
        let unital = (self.apply(&self.sub.identity()) - CMatrix::identity(n, n)).norm();
        let basis = self.sub.basis();
        let mut multiplicative: f64 = 0.0;
        let mut adjoint: f64 = 0.0;
        for x in &basis {
            let fx = self.apply(x);
            adjoint = adjoint.max((self.apply(&x.adjoint()) - fx.adjoint()).norm());
            for y in &basis {
                let lhs = self.apply(&(x * y));
                multiplicative = multiplicative.max((lhs - &fx * self.apply(y)).norm());
            }
        }
        HomomorphismResiduals {
            unital,
            multiplicative,
            adjoint,
        }
    }
}
