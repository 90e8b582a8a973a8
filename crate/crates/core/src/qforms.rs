//! Positive Hermitian quadratic forms on `C^n` and their functional calculus.
//!
//! A form is stored as its matrix `M`, with value `p(a, b) = a* M b`
//! (anti-linear in the first slot). Two PSD forms `p, q` are represented on
//! the quotient by the null space of `p + q`: in the orthonormal eigenbasis of
//! the support of `S = M_p + M_q`, whitened by `S^{1/2}`, the forms become the
//! commuting operators `P_op`, `Q_op` with `P_op + Q_op = I`. A homogeneous
//! function `f` then acts through the joint spectrum `(p_i, 1 − p_i)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hermlin::{
    clipped_eig, commutator, herm_eig, hermitian_part, psd_project, real, CMatrix, CVector, EigenDecomposition,
    HermitianMatrix, PSD_TOL, SUPPORT_TOL,
};
use crate::sampling::{ginibre, rng_from_seed};

/// Relative threshold on the singular values of `M_p + M_q` defining the null space.
pub const KERNEL_TOL: f64 = SUPPORT_TOL;
/// Joint-spectrum points within this distance of 0 or 1 are snapped to the endpoint.
pub const JOINT_SPECTRUM_SNAP: f64 = 1e-10;

/// Anything that has a form matrix.
pub trait Form {
    fn form_matrix(&self) -> &CMatrix;

    fn dim(&self) -> usize {
        self.form_matrix().nrows()
    }

    /// `a* M b`.
    fn evaluate(&self, a: &CVector, b: &CVector) -> Result<nalgebra::Complex<f64>> {
        evaluate_form(self, a, b)
    }
}

pub fn evaluate_form<F: Form + ?Sized>(form: &F, a: &CVector, b: &CVector) -> Result<nalgebra::Complex<f64>> {
    let n = form.dim();
    for v in [a, b] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                context: "evaluate_form",
                expected: n,
                found: v.len(),
            });
        }
    }
    Ok(a.dotc(&(form.form_matrix() * b)))
}

/// Positive Hermitian quadratic form.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    matrix: HermitianMatrix,
}

impl QuadraticForm {
    pub fn new(matrix: HermitianMatrix) -> Result<Self> {
        psd_project(&matrix, PSD_TOL)?;
        Ok(Self { matrix })
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianMatrix::new(m)?)
    }

    /// For matrices that are PSD by construction.
    pub(crate) fn from_psd_unchecked(matrix: HermitianMatrix) -> Self {
        Self { matrix }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            matrix: HermitianMatrix::zeros(n),
        }
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> HermitianMatrix {
        self.matrix
    }

    /// `p(a, a)` as a real number.
    pub fn value(&self, a: &CVector) -> Result<f64> {
        Ok(self.evaluate(a, a)?.re)
    }
}

impl Form for QuadraticForm {
    fn form_matrix(&self) -> &CMatrix {
        self.matrix.as_matrix()
    }
}

/// Sesquilinear form with an arbitrary square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SesquilinearForm {
    matrix: CMatrix,
}

impl SesquilinearForm {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.matrix - self.matrix.adjoint()).norm() <= tol * self.matrix.norm().max(1.0)
    }
}

impl Form for SesquilinearForm {
    fn form_matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

impl From<QuadraticForm> for SesquilinearForm {
    fn from(q: QuadraticForm) -> Self {
        Self {
            matrix: q.matrix.into_inner(),
        }
    }
}

/// Homogeneous scalar function on `R_+^2`.
#[derive(Clone)]
pub struct HomogeneousFunction {
    evaluator: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    degree: f64,
    label: String,
}

impl fmt::Debug for HomogeneousFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HomogeneousFunction")
            .field("label", &self.label)
            .field("degree", &self.degree)
            .finish()
    }
}

const HOMOGENEITY_POINTS: [(f64, f64); 5] = [(0.3, 0.7), (1.0, 1.0), (2.0, 0.5), (0.1, 3.0), (0.9, 0.05)];
const HOMOGENEITY_SCALES: [f64; 3] = [0.5, 2.0, 10.0];

impl HomogeneousFunction {
    /// Wraps `f`, checking `f(λx, λy) = λ^degree f(x, y)` on a fixed sample.
    pub fn new(
        label: impl Into<String>,
        degree: f64,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        for &(x, y) in &HOMOGENEITY_POINTS {
            let base = f(x, y);
            for &lambda in &HOMOGENEITY_SCALES {
                let expected = lambda.powf(degree) * base;
                let got = f(lambda * x, lambda * y);
                let deviation = (got - expected).abs();
                if deviation.is_nan() || deviation > 1e-9 * expected.abs().max(1.0) {
                    return Err(Error::NotHomogeneous {
                        degree,
                        deviation,
                        x,
                        y,
                    });
                }
            }
        }
        Ok(Self {
            evaluator: Arc::new(f),
            degree,
            label: label.into(),
        })
    }

    fn preset(label: String, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            evaluator: Arc::new(f),
            degree: 1.0,
            label,
        }
    }

    /// `f^t(x, y) = x^{1−t} y^t`, zero whenever `x` or `y` vanishes for `t ∈ (0, 1)`.
    pub fn interpolation(t: f64) -> Self {
        Self::preset(format!("interpolation({t})"), move |x, y| interpolation_kernel(x, y, t))
    }

    pub fn geometric() -> Self {
        Self::interpolation(0.5)
    }

    pub fn first() -> Self {
        Self::preset("first".into(), |x, _| x)
    }

    pub fn second() -> Self {
        Self::preset("second".into(), |_, y| y)
    }

    pub fn sum() -> Self {
        Self::preset("sum".into(), |x, y| x + y)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.evaluator)(x, y)
    }

    pub fn degree(&self) -> f64 {
        self.degree
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

fn interpolation_kernel(x: f64, y: f64, t: f64) -> f64 {
    if t == 0.0 {
        x
    } else if t == 1.0 {
        y
    } else if x == 0.0 || y == 0.0 {
        0.0
    } else {
        x.powf(1.0 - t) * y.powf(t)
    }
}

/// Whitened compatible representation of a pair of PSD forms.
#[derive(Clone, Debug)]
pub struct CompatibleRepresentation {
    ambient_dim: usize,
    iso_to_support: CMatrix,
    /// Square roots of the support eigenvalues of `M_p + M_q`.
    whitening_diag: Vec<f64>,
    p_op: HermitianMatrix,
    /// `I − P_op`.
    q_op: HermitianMatrix,
    /// `‖W U* M_q U W − Q_op‖_F`, of order `ε κ(M_p + M_q)`.
    q_reproduction: f64,
    p_eig: EigenDecomposition,
}

/// Residuals of the compatible-representation invariants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepresentationResiduals {
    /// `‖P_op + Q_op − I‖_F`.
    pub sum_identity: f64,
    /// `‖[P_op, Q_op]‖_F`.
    pub commutator: f64,
    /// Smallest eigenvalue of `P_op` and of `I − P_op`.
    pub min_spectrum: f64,
    /// Distance between `Q_op` and the independently whitened `M_q`.
    pub q_reproduction: f64,
}

impl RepresentationResiduals {
    pub fn max(&self) -> f64 {
        self.sum_identity
            .max(self.commutator)
            .max((-self.min_spectrum).max(0.0))
    }
}

fn check_same_dim(p: &QuadraticForm, q: &QuadraticForm, context: &'static str) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            context,
            expected: p.dim(),
            found: q.dim(),
        });
    }
    Ok(())
}

pub fn build_compatible_representation(p: &QuadraticForm, q: &QuadraticForm) -> Result<CompatibleRepresentation> {
    check_same_dim(p, q, "build_compatible_representation")?;
    let n = p.dim();
    let s = HermitianMatrix::from_hermitian_unchecked(p.form_matrix() + q.form_matrix());
    let eig = herm_eig(&s);
    let smax = eig.max_eigenvalue().max(0.0);
    let support: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > KERNEL_TOL * smax).collect();
    let m = support.len();

    let mut iso = CMatrix::zeros(n, m);
    let mut whitening_diag = Vec::with_capacity(m);
    for (c, &k) in support.iter().enumerate() {
        iso.set_column(c, &eig.eigenvectors.column(k));
        whitening_diag.push(eig.eigenvalues[k].sqrt());
    }

    let whiten = |mat: &CMatrix| -> HermitianMatrix {
        let mut inner = iso.adjoint() * mat * &iso;
        for i in 0..m {
            for j in 0..m {
                inner[(i, j)] /= whitening_diag[i] * whitening_diag[j];
            }
        }
        HermitianMatrix::from_hermitian_unchecked(inner)
    };
    let p_op = whiten(p.form_matrix());
    let q_op = HermitianMatrix::from_hermitian_unchecked(CMatrix::identity(m, m) - p_op.as_matrix());
    let q_reproduction = (whiten(q.form_matrix()).as_matrix() - q_op.as_matrix()).norm();
    let mut p_eig = herm_eig(&p_op);
    for l in p_eig.eigenvalues.iter_mut() {
        *l = snap_unit_interval(*l);
    }

    Ok(CompatibleRepresentation {
        ambient_dim: n,
        iso_to_support: iso,
        whitening_diag,
        p_op,
        q_op,
        q_reproduction,
        p_eig,
    })
}

fn snap_unit_interval(x: f64) -> f64 {
    if x <= JOINT_SPECTRUM_SNAP {
        0.0
    } else if x >= 1.0 - JOINT_SPECTRUM_SNAP {
        1.0
    } else {
        x
    }
}

impl CompatibleRepresentation {
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn support_dim(&self) -> usize {
        self.whitening_diag.len()
    }

    /// `n x m` matrix with orthonormal columns spanning the range of `M_p + M_q`.
    pub fn iso_to_support(&self) -> &CMatrix {
        &self.iso_to_support
    }

    /// Restriction of `(M_p + M_q)^{1/2}` to the support, in the support basis.
    pub fn whitening_root(&self) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&self.whitening_diag)
    }

    pub fn p_op(&self) -> &HermitianMatrix {
        &self.p_op
    }

    pub fn q_op(&self) -> &HermitianMatrix {
        &self.q_op
    }

    /// Joint spectrum points `p_i` of `P_op` (snapped into `[0, 1]`).
    pub fn joint_spectrum(&self) -> &[f64] {
        &self.p_eig.eigenvalues
    }

    /// Class `[a]` in whitened coordinates: `W U* a`.
    pub fn whiten(&self, a: &CVector) -> Result<CVector> {
        if a.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                context: "whiten",
                expected: self.ambient_dim,
                found: a.len(),
            });
        }
        let mut w = self.iso_to_support.adjoint() * a;
        for (z, &s) in w.iter_mut().zip(&self.whitening_diag) {
            *z *= s;
        }
        Ok(w)
    }

    /// `⟨[a], P_op [b]⟩`, which reproduces `p(a, b)`.
    pub fn evaluate_p(&self, a: &CVector, b: &CVector) -> Result<nalgebra::Complex<f64>> {
        let (wa, wb) = (self.whiten(a)?, self.whiten(b)?);
        Ok(wa.dotc(&(self.p_op.as_matrix() * wb)))
    }

    pub fn evaluate_q(&self, a: &CVector, b: &CVector) -> Result<nalgebra::Complex<f64>> {
        let (wa, wb) = (self.whiten(a)?, self.whiten(b)?);
        Ok(wa.dotc(&(self.q_op.as_matrix() * wb)))
    }

    pub fn residuals(&self) -> RepresentationResiduals {
        let m = self.support_dim();
        let p = self.p_op.as_matrix();
        let q = self.q_op.as_matrix();
        let sum_identity = (p + q - CMatrix::identity(m, m)).norm();
        let commutator = commutator(p, q).norm();
        let lo = self.p_eig.eigenvalues.first().copied().unwrap_or(0.0);
        let hi = self.p_eig.eigenvalues.last().copied().unwrap_or(0.0);
        RepresentationResiduals {
            sum_identity,
            commutator,
            min_spectrum: lo.min(1.0 - hi),
            q_reproduction: self.q_reproduction,
        }
    }

    /// Matrix of the form `⟨[a], f(P, Q) [b]⟩` on the ambient space.
    pub fn functional_calculus_matrix(&self, f: &HomogeneousFunction) -> Result<HermitianMatrix> {
        let n = self.ambient_dim;
        let m = self.support_dim();
        if m == 0 {
            return Ok(HermitianMatrix::zeros(n));
        }
        let mut values = Vec::with_capacity(m);
        for &x in &self.p_eig.eigenvalues {
            let g = f.eval(x, 1.0 - x);
            if !g.is_finite() {
                return Err(Error::Domain { eigenvalue: x });
            }
            values.push(g);
        }
        // B = U W V, result = B diag(g) B*.
        let mut wv = self.p_eig.eigenvectors.clone();
        for i in 0..m {
            let s = self.whitening_diag[i];
            wv.row_mut(i).scale_mut(s);
        }
        let b = &self.iso_to_support * wv;
        let mut bg = b.clone();
        for (k, &g) in values.iter().enumerate() {
            bg.column_mut(k).scale_mut(g);
        }
        Ok(HermitianMatrix::from_hermitian_unchecked(hermitian_part(
            &(bg * b.adjoint()),
        )))
    }
}

/// `f_{[p,q]}`; errors with `NotPsd` when `f` is negative on the joint spectrum.
pub fn functional_calculus_form(rep: &CompatibleRepresentation, f: &HomogeneousFunction) -> Result<QuadraticForm> {
    let m = rep.functional_calculus_matrix(f)?;
    if rep.joint_spectrum().iter().all(|&x| f.eval(x, 1.0 - x) >= 0.0) {
        Ok(QuadraticForm::from_psd_unchecked(m))
    } else {
        QuadraticForm::new(m)
    }
}

/// The un-whitened operators `(M_p + M_q)^{-1} M_p` and `(M_p + M_q)^{-1} M_q`,
/// defined when `M_p + M_q` is invertible.
pub fn quotient_operators(p: &QuadraticForm, q: &QuadraticForm) -> Result<(CMatrix, CMatrix)> {
    check_same_dim(p, q, "quotient_operators")?;
    let s = p.form_matrix() + q.form_matrix();
    let inv = s
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("M_p + M_q is singular".into()))?;
    Ok((&inv * p.form_matrix(), &inv * q.form_matrix()))
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "interpolation parameter {t} outside [0, 1]"
        )));
    }
    Ok(())
}

/// The interpolation family `t ↦ γ^t_{[p,q]}` with the representation built once.
#[derive(Clone, Debug)]
pub struct Interpolation {
    p: QuadraticForm,
    q: QuadraticForm,
    rep: CompatibleRepresentation,
}

impl Interpolation {
    pub fn new(p: &QuadraticForm, q: &QuadraticForm) -> Result<Self> {
        let rep = build_compatible_representation(p, q)?;
        Ok(Self {
            p: p.clone(),
            q: q.clone(),
            rep,
        })
    }

    pub fn representation(&self) -> &CompatibleRepresentation {
        &self.rep
    }

    pub fn at(&self, t: f64) -> Result<QuadraticForm> {
        check_t(t)?;
        if t == 0.0 {
            return Ok(self.p.clone());
        }
        if t == 1.0 {
            return Ok(self.q.clone());
        }
        functional_calculus_form(&self.rep, &HomogeneousFunction::interpolation(t))
    }
}

pub fn interpolate(p: &QuadraticForm, q: &QuadraticForm, t: f64) -> Result<QuadraticForm> {
    check_t(t)?;
    check_same_dim(p, q, "interpolate")?;
    if t == 0.0 {
        return Ok(p.clone());
    }
    if t == 1.0 {
        return Ok(q.clone());
    }
    Interpolation::new(p, q)?.at(t)
}

pub fn geometric_mean(p: &QuadraticForm, q: &QuadraticForm) -> Result<QuadraticForm> {
    interpolate(p, q, 0.5)
}

fn pullback_matrix(m: &CMatrix, phi: &CMatrix) -> Result<CMatrix> {
    if phi.nrows() != m.nrows() {
        return Err(Error::DimensionMismatch {
            context: "pullback",
            expected: m.nrows(),
            found: phi.nrows(),
        });
    }
    Ok(phi.adjoint() * m * phi)
}

/// `Φ† p` with matrix `Φ* M Φ`, for a linear map `Φ: C^{n'} → C^n` given as an `n x n'` matrix.
pub fn pullback_form(form: &QuadraticForm, phi: &CMatrix) -> Result<QuadraticForm> {
    let m = pullback_matrix(form.form_matrix(), phi)?;
    Ok(QuadraticForm::from_psd_unchecked(
        HermitianMatrix::from_hermitian_unchecked(m),
    ))
}

pub fn pullback_sesquilinear(form: &SesquilinearForm, phi: &CMatrix) -> Result<SesquilinearForm> {
    SesquilinearForm::new(pullback_matrix(form.matrix(), phi)?)
}

/// Result of the exact domination test.
#[derive(Clone, Debug, PartialEq)]
pub struct DominationCertificate {
    pub dominated: bool,
    /// Operator norm of `M_p^{+1/2} M_r M_q^{+1/2}`.
    pub norm: f64,
    /// `‖(I − Π_p) M_r‖_F`, zero iff `range(M_r) ⊆ range(M_p)`.
    pub range_residual_p: f64,
    /// `‖M_r (I − Π_q)‖_F`, zero iff `range(M_r*) ⊆ range(M_q)`.
    pub range_residual_q: f64,
}

struct RootData {
    projector: CMatrix,
    pinv_sqrt: CMatrix,
}

fn root_data(m: &HermitianMatrix) -> Result<RootData> {
    let eig = clipped_eig(m)?;
    let proj: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l > 0.0 { 1.0 } else { 0.0 })
        .collect();
    let pinv: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l > 0.0 { 1.0 / l.sqrt() } else { 0.0 })
        .collect();
    Ok(RootData {
        projector: eig.compose(&proj),
        pinv_sqrt: eig.compose(&pinv),
    })
}

fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = HermitianMatrix::from_hermitian_unchecked(m.adjoint() * m);
    herm_eig(&gram).max_eigenvalue().max(0.0).sqrt()
}

/// Whether `|r(a,b)|² ≤ p(a,a) q(b,b)` for all `a, b`, decided by the
/// factorization `M_r = M_p^{1/2} K M_q^{1/2}` with `‖K‖ ≤ 1`.
pub fn is_dominated<F: Form + ?Sized>(
    r: &F,
    p: &QuadraticForm,
    q: &QuadraticForm,
    tol: f64,
) -> Result<DominationCertificate> {
    check_same_dim(p, q, "is_dominated")?;
    if r.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            context: "is_dominated",
            expected: p.dim(),
            found: r.dim(),
        });
    }
    let n = p.dim();
    let mr = r.form_matrix();
    let pd = root_data(p.matrix())?;
    let qd = root_data(q.matrix())?;
    let id = CMatrix::identity(n, n);
    let range_residual_p = ((&id - &pd.projector) * mr).norm();
    let range_residual_q = (mr * (&id - &qd.projector)).norm();
    let norm = operator_norm(&(&pd.pinv_sqrt * mr * &qd.pinv_sqrt));
    let scale = mr.norm();
    let dominated = range_residual_p <= tol * scale && range_residual_q <= tol * scale && norm <= 1.0 + tol;
    Ok(DominationCertificate {
        dominated,
        norm,
        range_residual_p,
        range_residual_q,
    })
}

/// Tolerance used when certifying generated dominated forms.
pub const DOMINATION_TOL: f64 = 1e-9;

/// Random `r` with `M_r = M_p^{1/2} K M_q^{1/2}` and `‖K‖ = contraction_scale`.
///
/// With `hermitian` set, the Hermitian part compressed to `range(M_p) ∩ range(M_q)`
/// is returned once it passes [`is_dominated`]; after a bounded number of
/// rejected samples the last candidate is rescaled onto the boundary instead.
pub fn random_dominated_form(
    p: &QuadraticForm,
    q: &QuadraticForm,
    contraction_scale: f64,
    seed: u64,
    hermitian: bool,
) -> Result<SesquilinearForm> {
    random_dominated_form_with(p, q, contraction_scale, &mut rng_from_seed(seed), hermitian)
}

pub fn random_dominated_form_with<R: Rng + ?Sized>(
    p: &QuadraticForm,
    q: &QuadraticForm,
    contraction_scale: f64,
    rng: &mut R,
    hermitian: bool,
) -> Result<SesquilinearForm> {
    if !(0.0..=1.0).contains(&contraction_scale) {
        return Err(Error::InvalidParameter(format!(
            "contraction scale {contraction_scale} outside [0, 1]"
        )));
    }
    check_same_dim(p, q, "random_dominated_form")?;
    let n = p.dim();
    let p_half = crate::hermlin::apply_spectral_function(p.matrix(), crate::hermlin::SpectralFunction::Sqrt)?;
    let q_half = crate::hermlin::apply_spectral_function(q.matrix(), crate::hermlin::SpectralFunction::Sqrt)?;
    let intersection = if hermitian {
        Some(range_intersection_projector(p, q)?)
    } else {
        None
    };

    const ATTEMPTS: usize = 32;
    let mut last = CMatrix::zeros(n, n);
    for _ in 0..ATTEMPTS {
        let k = ginibre(n, n, rng);
        let kn = operator_norm(&k);
        let k = if kn > 0.0 { k * real(contraction_scale / kn) } else { k };
        let mut mr = p_half.as_matrix() * k * q_half.as_matrix();
        if let Some(pi) = &intersection {
            mr = pi * hermitian_part(&mr) * pi;
            mr = hermitian_part(&mr);
        }
        let cert = is_dominated(&SesquilinearForm::new(mr.clone())?, p, q, DOMINATION_TOL)?;
        if cert.dominated {
            return SesquilinearForm::new(mr);
        }
        last = mr * real(1.0 / cert.norm.max(1.0));
    }
    SesquilinearForm::new(last)
}

/// Orthogonal projector onto `range(M_p) ∩ range(M_q)`.
fn range_intersection_projector(p: &QuadraticForm, q: &QuadraticForm) -> Result<CMatrix> {
    let n = p.dim();
    let id = CMatrix::identity(n, n);
    let pp = root_data(p.matrix())?.projector;
    let qp = root_data(q.matrix())?.projector;
    let complement = HermitianMatrix::from_hermitian_unchecked((&id - pp) + (&id - qp));
    let eig = herm_eig(&complement);
    let kernel: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l < 1e-8 { 1.0 } else { 0.0 })
        .collect();
    Ok(eig.compose(&kernel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermlin::c64;
    use crate::sampling::{ginibre_vector, random_psd};
    use approx::assert_abs_diff_eq;

    fn paper_pair() -> (QuadraticForm, QuadraticForm) {
        let p = CMatrix::from_row_slice(2, 2, &[real(2.0), real(1.0), real(1.0), real(2.0)]);
        let q = CMatrix::from_row_slice(2, 2, &[real(2.0), c64(0.0, 1.0), c64(0.0, -1.0), real(2.0)]);
        (
            QuadraticForm::from_matrix(p).unwrap(),
            QuadraticForm::from_matrix(q).unwrap(),
        )
    }

    fn scalar(x: f64) -> QuadraticForm {
        QuadraticForm::from_matrix(CMatrix::from_element(1, 1, real(x))).unwrap()
    }

    /// Oracle for the √(xy) form: diagonalize P_op, apply the scalar kernel, un-whiten.
    fn sqrt_oracle(rep: &CompatibleRepresentation) -> CMatrix {
        let eig = herm_eig(rep.p_op());
        let g: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&x| (x.max(0.0) * (1.0 - x).max(0.0)).sqrt())
            .collect();
        let inner = eig.compose(&g);
        let w = rep.whitening_root();
        let u = rep.iso_to_support();
        u * w.as_matrix() * inner * w.as_matrix() * u.adjoint()
    }

    #[test]
    fn ill_conditioned_sum_reproduces_inputs() {
        let mut rng = crate::sampling::rng_from_seed(299);
        let g = crate::sampling::ginibre(4, 2, &mut rng);
        let mut h = crate::sampling::ginibre(4, 2, &mut rng);
        let tilt = h.column(0) * real(1e-3);
        h.set_column(0, &(g.column(0) + tilt));
        let p = QuadraticForm::from_matrix(&g * g.adjoint()).unwrap();
        let q = QuadraticForm::from_matrix(&h * h.adjoint()).unwrap();
        let s = herm_eig(&HermitianMatrix::new(p.form_matrix() + q.form_matrix()).unwrap());
        assert!(s.min_eigenvalue() < 1e-4 * s.max_eigenvalue());
        let rep = build_compatible_representation(&p, &q).unwrap();
        assert_eq!(rep.support_dim(), 4);
        let res = rep.residuals();
        assert!(res.sum_identity < 1e-12 && res.commutator < 1e-12, "{res:?}");
        assert!(res.q_reproduction < 1e-9, "{res:?}");
        let scale = (p.form_matrix() + q.form_matrix()).norm();
        let first = functional_calculus_form(&rep, &HomogeneousFunction::first()).unwrap();
        let second = functional_calculus_form(&rep, &HomogeneousFunction::second()).unwrap();
        assert!((first.form_matrix() - p.form_matrix()).norm() < 1e-10 * scale);
        assert!((second.form_matrix() - q.form_matrix()).norm() < 1e-10 * scale);
    }

    #[test]
    fn paper_pair_representation() {
        let (p, q) = paper_pair();
        let rep = build_compatible_representation(&p, &q).unwrap();
        assert_eq!(rep.support_dim(), 2);
        let res = rep.residuals();
        assert!(res.sum_identity < 1e-12 && res.commutator < 1e-12, "{res:?}");

        let (pq, qq) = quotient_operators(&p, &q).unwrap();
        assert!((&pq + &qq - CMatrix::identity(2, 2)).norm() < 1e-12);
        assert!(commutator(&pq, &qq).norm() < 1e-12);
    }

    #[test]
    fn representation_reproduces_form() {
        let (p, q) = paper_pair();
        let rep = build_compatible_representation(&p, &q).unwrap();
        let a = CVector::from_vec(vec![c64(0.3, -1.0), c64(2.0, 0.5)]);
        let b = CVector::from_vec(vec![c64(-1.0, 0.2), c64(0.1, 0.7)]);
        let direct = p.evaluate(&a, &b).unwrap();
        let via = rep.evaluate_p(&a, &b).unwrap();
        assert!((direct - via).norm() < 1e-10);
        let direct = q.evaluate(&a, &b).unwrap();
        assert!((direct - rep.evaluate_q(&a, &b).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn scalar_equal_forms_split_in_half() {
        let rep = build_compatible_representation(&scalar(1.0), &scalar(1.0)).unwrap();
        assert_abs_diff_eq!(rep.p_op().as_matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.q_op().as_matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_forms_have_no_support() {
        let z = QuadraticForm::zero(2);
        let rep = build_compatible_representation(&z, &z).unwrap();
        assert_eq!(rep.support_dim(), 0);
        let g = functional_calculus_form(&rep, &HomogeneousFunction::geometric()).unwrap();
        assert_eq!(g.form_matrix().norm(), 0.0);
        assert_eq!(interpolate(&z, &z, 0.3).unwrap().form_matrix().norm(), 0.0);
    }

    #[test]
    fn calculus_endpoints_and_sum() {
        let (p, q) = paper_pair();
        let rep = build_compatible_representation(&p, &q).unwrap();
        let first = functional_calculus_form(&rep, &HomogeneousFunction::first()).unwrap();
        assert!((first.form_matrix() - p.form_matrix()).norm() < 1e-12);
        let sum = functional_calculus_form(&rep, &HomogeneousFunction::sum()).unwrap();
        assert!((sum.form_matrix() - (p.form_matrix() + q.form_matrix())).norm() < 1e-12);
    }

    #[test]
    fn geometric_kernel_matches_joint_diagonalization_oracle() {
        let (p, q) = paper_pair();
        let rep = build_compatible_representation(&p, &q).unwrap();
        let f = HomogeneousFunction::new("sqrt(xy)", 1.0, |x, y| (x * y).sqrt()).unwrap();
        let g = functional_calculus_form(&rep, &f).unwrap();
        let oracle = sqrt_oracle(&rep);
        assert!((g.form_matrix() - oracle).norm() < 1e-12);
        assert!(psd_project(g.matrix(), PSD_TOL).is_ok());
    }

    #[test]
    fn non_homogeneous_function_rejected() {
        let err = HomogeneousFunction::new("x^2 + y", 1.0, |x, y| x * x + y).unwrap_err();
        assert!(matches!(err, Error::NotHomogeneous { .. }));
        assert!(HomogeneousFunction::new("x^2/y", 1.0, |x, y| x * x / y).is_ok());
    }

    #[test]
    fn scalar_interpolation() {
        let g = interpolate(&scalar(4.0), &scalar(9.0), 0.5).unwrap();
        assert_abs_diff_eq!(g.form_matrix()[(0, 0)].re, 6.0, epsilon = 1e-13);
    }

    #[test]
    fn endpoints_are_exact() {
        let (p, q) = paper_pair();
        assert_eq!(interpolate(&p, &q, 0.0).unwrap(), p);
        assert_eq!(interpolate(&p, &q, 1.0).unwrap(), q);
        assert!(interpolate(&p, &q, 1.5).is_err());
        assert!(interpolate(&p, &q, -0.1).is_err());
        assert!(interpolate(&p, &q, f64::NAN).is_err());
    }

    #[test]
    fn geometric_mean_diagonal() {
        let p = QuadraticForm::new(HermitianMatrix::from_real_diagonal(&[4.0, 1.0])).unwrap();
        let q = QuadraticForm::new(HermitianMatrix::from_real_diagonal(&[1.0, 9.0])).unwrap();
        let g = geometric_mean(&p, &q).unwrap();
        let expected = HermitianMatrix::from_real_diagonal(&[2.0, 3.0]);
        assert!((g.form_matrix() - expected.as_matrix()).norm() < 1e-13);
        let self_mean = geometric_mean(&p, &p).unwrap();
        assert!((self_mean.form_matrix() - p.form_matrix()).norm() < 1e-13);
    }

    #[test]
    fn geometric_mean_commuting_pair() {
        // A = U diag(a) U*, B = U diag(b) U* commute; oracle A^{1/2} B^{1/2} = U diag(√(ab)) U*.
        let mut rng = rng_from_seed(42);
        let u = crate::sampling::random_unitary(4, &mut rng);
        let a = [0.3, 1.2, 2.0, 0.7];
        let b = [1.5, 0.2, 0.9, 3.1];
        let build = |d: &[f64]| {
            let m = &u * HermitianMatrix::from_real_diagonal(d).as_matrix() * u.adjoint();
            QuadraticForm::from_matrix(hermitian_part(&m)).unwrap()
        };
        let (pa, pb) = (build(&a), build(&b));
        let ha = crate::hermlin::apply_spectral_function(pa.matrix(), crate::hermlin::SpectralFunction::Sqrt).unwrap();
        let hb = crate::hermlin::apply_spectral_function(pb.matrix(), crate::hermlin::SpectralFunction::Sqrt).unwrap();
        let oracle = ha.as_matrix() * hb.as_matrix();
        let g = geometric_mean(&pa, &pb).unwrap();
        assert!((g.form_matrix() - oracle).norm() < 1e-10);
    }

    #[test]
    fn evaluate_examples() {
        let (p, _) = paper_pair();
        let e1 = CVector::from_vec(vec![real(1.0), real(0.0)]);
        assert_eq!(p.evaluate(&e1, &e1).unwrap(), real(2.0));
        let zero = CVector::zeros(2);
        assert_eq!(p.evaluate(&zero, &e1).unwrap(), real(0.0));
        let a = CVector::from_vec(vec![c64(1.0, 2.0), c64(-0.5, 0.1)]);
        let b = CVector::from_vec(vec![c64(0.0, 1.0), c64(3.0, -1.0)]);
        let ab = p.evaluate(&a, &b).unwrap();
        let ba = p.evaluate(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-14);
        assert!(p.evaluate(&CVector::zeros(3), &e1).is_err());
    }

    #[test]
    fn pullback_examples() {
        let (p, _) = paper_pair();
        let id = pullback_form(&p, &CMatrix::identity(2, 2)).unwrap();
        assert_eq!(id.form_matrix(), p.form_matrix());
        let zero = pullback_form(&p, &CMatrix::zeros(2, 3)).unwrap();
        assert_eq!(zero.dim(), 3);
        assert_eq!(zero.form_matrix().norm(), 0.0);
        assert!(pullback_form(&p, &CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn domination_examples() {
        let (p, q) = paper_pair();
        let g = geometric_mean(&p, &q).unwrap();
        let cert = is_dominated(&g, &p, &q, 1e-9).unwrap();
        assert!(cert.dominated && cert.norm <= 1.0 + 1e-9, "{cert:?}");

        let r = SesquilinearForm::new(CMatrix::from_element(1, 1, real(12.0))).unwrap();
        let cert = is_dominated(&r, &scalar(4.0), &scalar(9.0), 1e-9).unwrap();
        assert!(!cert.dominated);
        assert_abs_diff_eq!(cert.norm, 2.0, epsilon = 1e-14);

        let zero = SesquilinearForm::new(CMatrix::zeros(2, 2)).unwrap();
        assert!(is_dominated(&zero, &p, &q, 1e-9).unwrap().dominated);
    }

    #[test]
    fn domination_detects_range_violation() {
        let p = QuadraticForm::new(HermitianMatrix::from_real_diagonal(&[1.0, 0.0])).unwrap();
        let q = QuadraticForm::new(HermitianMatrix::from_real_diagonal(&[1.0, 1.0])).unwrap();
        let r = SesquilinearForm::new(CMatrix::from_row_slice(
            2,
            2,
            &[real(0.0), real(0.0), real(1e-3), real(0.0)],
        ))
        .unwrap();
        let cert = is_dominated(&r, &p, &q, 1e-9).unwrap();
        assert!(!cert.dominated);
        assert!(cert.range_residual_p > 0.0);
    }

    #[test]
    fn random_dominated_examples() {
        let (p, q) = paper_pair();
        let r = random_dominated_form(&p, &q, 0.0, 1, false).unwrap();
        assert_eq!(r.matrix().norm(), 0.0);

        let r = random_dominated_form(&scalar(4.0), &scalar(9.0), 1.0, 3, false).unwrap();
        assert_abs_diff_eq!(r.matrix()[(0, 0)].norm(), 6.0, epsilon = 1e-12);

        for seed in 0..20 {
            for hermitian in [false, true] {
                let r = random_dominated_form(&p, &q, 0.9, seed, hermitian).unwrap();
                assert!(is_dominated(&r, &p, &q, 1e-9).unwrap().dominated);
                if hermitian {
                    assert!(r.is_hermitian(1e-12));
                }
            }
        }
        assert!(random_dominated_form(&p, &q, 1.5, 0, false).is_err());
    }

    #[test]
    fn degenerate_support_forms_vanish_on_kernel() {
        let mut rng = rng_from_seed(9);
        // Both forms supported on the first two coordinates of C^3.
        let mut p = CMatrix::zeros(3, 3);
        let mut q = CMatrix::zeros(3, 3);
        let a = random_psd(2, 2, &mut rng);
        let b = random_psd(2, 1, &mut rng);
        p.view_mut((0, 0), (2, 2)).copy_from(a.as_matrix());
        q.view_mut((0, 0), (2, 2)).copy_from(b.as_matrix());
        let p = QuadraticForm::from_matrix(p).unwrap();
        let q = QuadraticForm::from_matrix(q).unwrap();
        let fam = Interpolation::new(&p, &q).unwrap();
        assert_eq!(fam.representation().support_dim(), 2);
        let n = CVector::from_vec(vec![real(0.0), real(0.0), real(1.0)]);
        for t in [0.2, 0.5, 0.8] {
            let g = fam.at(t).unwrap();
            assert!(g.evaluate(&n, &n).unwrap().norm() < 1e-14);
        }
        let v = ginibre_vector(3, &mut rng);
        assert!(fam.at(0.5).unwrap().value(&v).unwrap() >= -1e-12);
    }
}
