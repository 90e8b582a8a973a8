//! Unital maps between block algebras in the Heisenberg picture, their
//! trace-preserving duals, and Schwarz / positivity checks.

use rand::Rng;

use crate::algebra::{
    left_multiplication, make_state, right_multiplication, subalgebra_injection, unvec, vec_matrix, AlgebraDescriptor,
    BlockEmbedding, State, SubalgebraInjection,
};
use crate::error::{Error, Result};
use crate::hermlin::{hermitian_part, kron, loewner_leq, matrix_unit, CMatrix, HermitianMatrix, C64};
use crate::qforms::{interpolate, QuadraticForm};
use crate::sampling::{ginibre, random_isometry, random_unitary, rng_from_seed, stream_rng, TrialRng};

/// Unitality tolerance `‖Σ K_i* K_i − I‖_F`.
pub const UNITAL_TOL: f64 = 1e-12;
/// Tolerance for `Φ(x*) = Φ(x)*` on the basis.
pub const ADJOINT_TOL: f64 = 1e-12;
/// Relative slack in the Schwarz comparison.
pub const SCHWARZ_TOL: f64 = 1e-10;
pub const DEFAULT_SCHWARZ_TRIALS: usize = 1000;

/// Linear map `Φ: Ã → M_n` from a block algebra `Ã`.
pub trait AlgebraMap: Send + Sync {
    fn source(&self) -> &AlgebraDescriptor;

    fn target_dim(&self) -> usize;

    fn source_dim(&self) -> usize {
        self.source().total_dim()
    }

    fn apply(&self, x: &CMatrix) -> Result<CMatrix>;

    /// `n² x m²` matrix acting on column-stacked vectors.
    fn superoperator(&self) -> CMatrix;

    /// Largest `‖Φ(E*) − Φ(E)*‖_F` over the source matrix units.
    fn adjoint_residual(&self) -> f64 {
        self.source()
            .basis()
            .iter()
            .map(|e| match (self.apply(&e.adjoint()), self.apply(e)) {
                (Ok(a), Ok(b)) => (a - b.adjoint()).norm(),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    fn is_adjoint_preserving(&self) -> bool {
        self.adjoint_residual() <= ADJOINT_TOL
    }

    /// Hilbert–Schmidt dual, `Tr(ρ Φ(x)) = Tr(Φ†(ρ) x)`.
    fn dual(&self, rho: &CMatrix) -> Result<CMatrix> {
        check_shape(rho, self.target_dim(), "dual")?;
        let m = self.source_dim();
        let s = self.superoperator();
        let d = unvec(&(s.adjoint() * vec_matrix(&rho.adjoint())), m, m)?;
        Ok(d.adjoint())
    }
}

fn check_shape(x: &CMatrix, n: usize, context: &'static str) -> Result<()> {
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            found: if x.nrows() != n { x.nrows() } else { x.ncols() },
        });
    }
    Ok(())
}

/// `Φ(x) = Σ K_i* x K_i` with `K_i` of shape `m x n`; unital by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    source: AlgebraDescriptor,
    target_dim: usize,
    kraus: Vec<CMatrix>,
}

impl KrausChannel {
    pub fn from_kraus(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty Kraus list".into()))?;
        let (m, n) = first.shape();
        for k in &kraus {
            if k.shape() != (m, n) {
                return Err(Error::DimensionMismatch {
                    context: "Kraus operators",
                    expected: m * n,
                    found: k.nrows() * k.ncols(),
                });
            }
        }
        let sum = kraus.iter().fold(CMatrix::zeros(n, n), |acc, k| acc + k.adjoint() * k);
        let residual = (sum - CMatrix::identity(n, n)).norm();
        if residual.is_nan() || residual > UNITAL_TOL {
            return Err(Error::NotUnital { residual });
        }
        Ok(Self {
            source: AlgebraDescriptor::full(m),
            target_dim: n,
            kraus,
        })
    }

    /// Restricts the source to a block subalgebra of `M_m`.
    pub fn with_source(mut self, source: AlgebraDescriptor) -> Result<Self> {
        if source.total_dim() != self.source.total_dim() {
            return Err(Error::DimensionMismatch {
                context: "channel source algebra",
                expected: self.source.total_dim(),
                found: source.total_dim(),
            });
        }
        self.source = source;
        Ok(self)
    }

    /// The injection `x ↦ Σ E x E*` with Kraus operators `E*`.
    pub fn from_injection(inj: &SubalgebraInjection) -> Result<Self> {
        let kraus = inj.partial_isometries().iter().map(|e| e.adjoint()).collect();
        Self::from_kraus(kraus)?.with_source(inj.sub().clone())
    }

    /// Injection followed by the automorphism `y ↦ U* y U`.
    pub fn rotated_injection(inj: &SubalgebraInjection, u: &CMatrix) -> Result<Self> {
        let kraus = inj.partial_isometries().iter().map(|e| e.adjoint() * u).collect();
        Self::from_kraus(kraus)?.with_source(inj.sub().clone())
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn unitality_residual(&self) -> f64 {
        let n = self.target_dim;
        let sum = self
            .kraus
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, k| acc + k.adjoint() * k);
        (sum - CMatrix::identity(n, n)).norm()
    }
}

impl AlgebraMap for KrausChannel {
    fn source(&self) -> &AlgebraDescriptor {
        &self.source
    }

    fn target_dim(&self) -> usize {
        self.target_dim
    }

    fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        check_shape(x, self.source_dim(), "channel apply")?;
        let n = self.target_dim;
        Ok(self
            .kraus
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, k| acc + k.adjoint() * x * k))
    }

    fn superoperator(&self) -> CMatrix {
        let m = self.source_dim();
        let n = self.target_dim;
        self.kraus.iter().fold(CMatrix::zeros(n * n, m * m), |acc, k| {
            acc + kron(&k.transpose(), &k.adjoint())
        })
    }

    fn adjoint_residual(&self) -> f64 {
        0.0
    }

    fn dual(&self, rho: &CMatrix) -> Result<CMatrix> {
        check_shape(rho, self.target_dim, "dual")?;
        let m = self.source_dim();
        Ok(self
            .kraus
            .iter()
            .fold(CMatrix::zeros(m, m), |acc, k| acc + k * rho * k.adjoint()))
    }
}

/// Random unital CP map `M_m → M_n` from an isometry `ℂⁿ → ℂ^{m r}` cut into `r` blocks.
pub fn random_unital_cp(m: usize, n: usize, kraus_count: usize, seed: u64) -> Result<KrausChannel> {
    random_unital_cp_with(m, n, kraus_count, &mut rng_from_seed(seed))
}

pub fn random_unital_cp_with<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    kraus_count: usize,
    rng: &mut R,
) -> Result<KrausChannel> {
    if m == 0 || n == 0 || kraus_count == 0 {
        return Err(Error::InvalidParameter(
            "dimensions and Kraus count must be positive".into(),
        ));
    }
    if m * kraus_count < n {
        return Err(Error::InvalidParameter(format!(
            "no isometry from dimension {n} into {m} x {kraus_count}"
        )));
    }
    let v = random_isometry(m * kraus_count, n, rng);
    let kraus = (0..kraus_count).map(|i| v.rows(i * m, m).into_owned()).collect();
    KrausChannel::from_kraus(kraus)
}

/// `x ↦ Σ P_i x P_i` for orthogonal projectors summing to the identity.
pub fn pinching(projectors: Vec<CMatrix>) -> Result<KrausChannel> {
    KrausChannel::from_kraus(projectors)
}

pub fn diagonal_pinching(n: usize) -> KrausChannel {
    pinching((0..n).map(|i| matrix_unit(n, i, i)).collect()).expect("matrix units resolve the identity")
}

/// `x ↦ x ⊗ I_k` from `M_m` into `M_{mk}`; the dual is the partial trace over the second factor.
pub fn embed_tensor_identity(m: usize, k: usize) -> Result<KrausChannel> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidParameter("tensor embedding needs m, k >= 1".into()));
    }
    let id = CMatrix::identity(m, m);
    let kraus = (0..k)
        .map(|i| {
            kron(
                &id,
                &CMatrix::from_fn(1, k, |_, j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)),
            )
        })
        .collect();
    KrausChannel::from_kraus(kraus)
}

/// Partial trace of an `(m k) x (m k)` matrix over the second factor.
pub fn partial_trace_second(rho: &CMatrix, m: usize, k: usize) -> Result<CMatrix> {
    check_shape(rho, m * k, "partial trace")?;
    Ok(CMatrix::from_fn(m, m, |a, b| {
        (0..k).map(|i| rho[(a * k + i, b * k + i)]).sum()
    }))
}

/// Map given only through its superoperator.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMapOnAlgebra {
    source: AlgebraDescriptor,
    target_dim: usize,
    superop: CMatrix,
    adjoint_preserving: bool,
}

impl LinearMapOnAlgebra {
    pub fn new(source_dim: usize, target_dim: usize, superop: CMatrix) -> Result<Self> {
        if superop.shape() != (target_dim * target_dim, source_dim * source_dim) {
            return Err(Error::DimensionMismatch {
                context: "superoperator shape",
                expected: target_dim * target_dim * source_dim * source_dim,
                found: superop.nrows() * superop.ncols(),
            });
        }
        let mut map = Self {
            source: AlgebraDescriptor::full(source_dim),
            target_dim,
            superop,
            adjoint_preserving: false,
        };
        map.adjoint_preserving = AlgebraMap::adjoint_residual(&map) <= ADJOINT_TOL;
        Ok(map)
    }

    /// Superoperator whose column `i + j m` is `vec(f(E_ij))`.
    pub fn from_fn(source_dim: usize, target_dim: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        let m = source_dim;
        let n = target_dim;
        let mut s = CMatrix::zeros(n * n, m * m);
        for j in 0..m {
            for i in 0..m {
                let img = f(&matrix_unit(m, i, j));
                check_shape(&img, n, "map image")?;
                s.set_column(i + j * m, &vec_matrix(&img));
            }
        }
        Self::new(m, n, s)
    }

    pub fn superop(&self) -> &CMatrix {
        &self.superop
    }
}

impl AlgebraMap for LinearMapOnAlgebra {
    fn source(&self) -> &AlgebraDescriptor {
        &self.source
    }

    fn target_dim(&self) -> usize {
        self.target_dim
    }

    fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        check_shape(x, self.source_dim(), "map apply")?;
        unvec(&(&self.superop * vec_matrix(x)), self.target_dim, self.target_dim)
    }

    fn superoperator(&self) -> CMatrix {
        self.superop.clone()
    }

    fn is_adjoint_preserving(&self) -> bool {
        self.adjoint_preserving
    }
}

/// `x ↦ xᵀ` on `M_n`: the index swap `i + j n ↔ j + i n`.
pub fn transpose_map(n: usize) -> LinearMapOnAlgebra {
    let mut s = CMatrix::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            s[(j + i * n, i + j * n)] = C64::new(1.0, 0.0);
        }
    }
    LinearMapOnAlgebra::new(n, n, s).expect("square permutation")
}

/// `ω_Φ = ω ∘ Φ`, with density `Φ†(ω̂)`.
pub fn pullback_state(omega: &State, map: &dyn AlgebraMap) -> Result<State> {
    if omega.dim() != map.target_dim() {
        return Err(Error::DimensionMismatch {
            context: "pullback_state",
            expected: map.target_dim(),
            found: omega.dim(),
        });
    }
    let rho = hermitian_part(&map.dual(omega.density().as_matrix())?);
    make_state(map.source(), rho, omega.is_normalized())
}

/// Probe elements: matrix units of each block in row-major order, then Ginibre samples.
fn probes<'a>(
    source: &'a AlgebraDescriptor,
    trials: usize,
    rng: &'a mut TrialRng,
) -> impl Iterator<Item = CMatrix> + 'a {
    let n = source.total_dim();
    let units: Vec<CMatrix> = source
        .block_offsets()
        .into_iter()
        .zip(source.block_dims().to_vec())
        .flat_map(|(o, d)| (0..d).flat_map(move |i| (0..d).map(move |j| matrix_unit(n, o + i, o + j))))
        .collect();
    let scale = 1.0 / (n as f64).sqrt();
    units.into_iter().chain((0..trials).map(move |_| {
        let g = ginibre(n, n, rng).map(|z| z * scale);
        source.compress(&g)
    }))
}

/// First element violating `Φ(x)*Φ(x) ≤ Φ(x*x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchwarzWitness {
    pub element: CMatrix,
    pub lhs: CMatrix,
    pub rhs: CMatrix,
    pub eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchwarzReport {
    pub samples: usize,
    /// Smallest eigenvalue of `Φ(x*x) − Φ(x)*Φ(x)` seen, relative to `max(1, ‖Φ(x*x)‖)`.
    pub min_margin: f64,
    /// Largest `‖Φ(x*x) − Φ(x)*Φ(x)‖_F`.
    pub max_difference: f64,
    pub witness: Option<SchwarzWitness>,
}

impl SchwarzReport {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

pub fn check_schwarz(map: &dyn AlgebraMap, trials: usize, seed: u64) -> Result<SchwarzReport> {
    check_schwarz_with_tol(map, trials, seed, SCHWARZ_TOL)
}

/// [`check_schwarz`] with an explicit relative slack.
pub fn check_schwarz_with_tol(map: &dyn AlgebraMap, trials: usize, seed: u64, tol: f64) -> Result<SchwarzReport> {
    if !map.is_adjoint_preserving() {
        return Err(Error::NotAdjointPreserving {
            residual: map.adjoint_residual(),
        });
    }
    let mut rng = stream_rng(seed, 0x5c4a, 0);
    let mut report = SchwarzReport {
        samples: 0,
        min_margin: f64::INFINITY,
        max_difference: 0.0,
        witness: None,
    };
    for x in probes(map.source(), trials, &mut rng) {
        let fx = map.apply(&x)?;
        let lhs = fx.adjoint() * &fx;
        let rhs = map.apply(&(x.adjoint() * &x))?;
        let scale = rhs.norm().max(1.0);
        let cmp = loewner_leq(
            &HermitianMatrix::from_hermitian_unchecked(hermitian_part(&lhs)),
            &HermitianMatrix::from_hermitian_unchecked(hermitian_part(&rhs)),
            tol * scale,
        )?;
        report.samples += 1;
        report.min_margin = report.min_margin.min(cmp.min_eigenvalue / scale);
        report.max_difference = report.max_difference.max((&rhs - &lhs).norm());
        if !cmp.holds {
            report.witness = Some(SchwarzWitness {
                element: x,
                lhs,
                rhs,
                eigenvalue: cmp.min_eigenvalue,
            });
            break;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PositiveUnitalReport {
    pub unital_residual: f64,
    pub unital: bool,
    pub positive: bool,
    pub min_eigenvalue: f64,
    /// PSD input whose image has a negative eigenvalue.
    pub witness: Option<CMatrix>,
}

pub fn check_positive_unital(map: &dyn AlgebraMap, trials: usize, seed: u64) -> Result<PositiveUnitalReport> {
    let source = map.source();
    let n = map.target_dim();
    let unital_residual = (map.apply(&source.identity())? - CMatrix::identity(n, n)).norm();
    let mut rng = stream_rng(seed, 0x9051, 0);
    let mut min_eigenvalue = f64::INFINITY;
    let mut witness = None;
    let mut inputs = vec![source.identity()];
    inputs.extend(probes(source, trials, &mut rng).map(|x| x.adjoint() * x));
    for x in inputs {
        let img = HermitianMatrix::from_hermitian_unchecked(hermitian_part(&map.apply(&x)?));
        let zero = HermitianMatrix::zeros(n);
        let scale = img.frobenius_norm().max(1.0);
        let cmp = loewner_leq(&zero, &img, SCHWARZ_TOL * scale)?;
        min_eigenvalue = min_eigenvalue.min(cmp.min_eigenvalue);
        if !cmp.holds {
            witness = Some(x);
            break;
        }
    }
    Ok(PositiveUnitalReport {
        unital_residual,
        unital: unital_residual <= UNITAL_TOL,
        positive: witness.is_none(),
        min_eigenvalue,
        witness,
    })
}

/// Comparison of `Φ†ω^R` with `(ω_Φ)^R` on the source algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct FormGapReport {
    /// `‖Φ†ω^R − ω_Φ^R‖_F`.
    pub gap: f64,
    /// `Φ†ω^R ≤ ω_Φ^R` in the Loewner order.
    pub loewner_holds: bool,
    pub min_eigenvalue: f64,
}

/// Loewner slack for the form comparison.
pub const FORM_GAP_TOL: f64 = 1e-10;

pub fn pullback_form_vs_state_form_gap(map: &dyn AlgebraMap, omega: &State) -> Result<FormGapReport> {
    form_gap(map, omega, left_multiplication)
}

/// Same comparison for `ν^L`, represented by right multiplication.
pub fn pullback_left_form_gap(map: &dyn AlgebraMap, nu: &State) -> Result<FormGapReport> {
    form_gap(map, nu, right_multiplication)
}

fn compare(lhs: CMatrix, rhs: CMatrix) -> Result<FormGapReport> {
    let gap = (&rhs - &lhs).norm();
    let cmp = loewner_leq(
        &HermitianMatrix::from_hermitian_unchecked(hermitian_part(&lhs)),
        &HermitianMatrix::from_hermitian_unchecked(hermitian_part(&rhs)),
        FORM_GAP_TOL,
    )?;
    Ok(FormGapReport {
        gap,
        loewner_holds: cmp.holds,
        min_eigenvalue: cmp.min_eigenvalue,
    })
}

fn form_gap(map: &dyn AlgebraMap, state: &State, rep: fn(&CMatrix) -> CMatrix) -> Result<FormGapReport> {
    let pulled = pullback_state(state, map)?;
    let b = map.source().hs_basis_isometry();
    let sb = map.superoperator() * &b;
    let lhs = sb.adjoint() * rep(state.density().as_matrix()) * &sb;
    let rhs = b.adjoint() * rep(pulled.density().as_matrix()) * &b;
    compare(lhs, rhs)
}

/// `Φ†γᵗ_{[ω^R,ν^L]}` against `γᵗ_{[ω_Φ^R, ν_Φ^L]}` on the source algebra.
pub fn pullback_interpolation_gap(map: &dyn AlgebraMap, omega: &State, nu: &State, t: f64) -> Result<FormGapReport> {
    let form = |m: CMatrix, iso: &CMatrix| -> Result<QuadraticForm> {
        QuadraticForm::from_matrix(hermitian_part(&(iso.adjoint() * m * iso)))
    };
    let b = map.source().hs_basis_isometry();
    let sb = map.superoperator() * &b;
    let n2 = map.target_dim() * map.target_dim();
    let id = CMatrix::identity(n2, n2);
    let big = interpolate(
        &form(left_multiplication(omega.density().as_matrix()), &id)?,
        &form(right_multiplication(nu.density().as_matrix()), &id)?,
        t,
    )?;
    let wp = pullback_state(omega, map)?;
    let vp = pullback_state(nu, map)?;
    let small = interpolate(
        &form(left_multiplication(wp.density().as_matrix()), &b)?,
        &form(right_multiplication(vp.density().as_matrix()), &b)?,
        t,
    )?;
    compare(
        sb.adjoint() * big.matrix().as_matrix() * &sb,
        small.into_matrix().into_inner(),
    )
}

/// Injection of `sub` into `M_n` by consecutive block placement.
pub fn consecutive_injection(sub: &AlgebraDescriptor) -> Result<KrausChannel> {
    let inj = subalgebra_injection(sub, sub.total_dim(), &BlockEmbedding::consecutive(sub))?;
    KrausChannel::from_injection(&inj)
}

/// Injection composed with a Haar-random automorphism of the target.
pub fn random_rotated_injection<R: Rng + ?Sized>(
    sub: &AlgebraDescriptor,
    parent_dim: usize,
    embedding: &BlockEmbedding,
    rng: &mut R,
) -> Result<KrausChannel> {
    let inj = subalgebra_injection(sub, parent_dim, embedding)?;
    let u = random_unitary(parent_dim, rng);
    KrausChannel::rotated_injection(&inj, &u)
}
