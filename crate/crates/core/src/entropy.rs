//! Interpolation of state forms, the relative-entropy functional, and the
//! scalar relative entropy in closed form and as a difference-quotient limit.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::{trace_product, State};
use crate::error::{Error, Result};
use crate::hermlin::{clipped_eig, CMatrix, EigenDecomposition, C64, SUPPORT_TOL};

/// A real number or `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Infinite => None,
        }
    }

    /// `f64::INFINITY` for the infinite case.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(x) => s.serialize_f64(*x),
            ExtendedReal::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(ExtendedReal::Finite(x)),
            Raw::Str(s) if s == "inf" => Ok(ExtendedReal::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extrapolation {
    None,
    #[default]
    Richardson,
}

/// Successive extrapolated values closer than this count as converged.
pub const CAUCHY_TOL: f64 = 1e-6;
/// Number of trailing schedule points used by the tail guard and the growth check.
pub const TAIL_LEN: usize = 5;
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e3;

/// Points `t_k` at which the difference quotient is sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSchedule {
    pub t_values: Vec<f64>,
    pub extrapolation: Extrapolation,
    #[serde(default = "default_threshold")]
    pub divergence_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_DIVERGENCE_THRESHOLD
}

impl Default for LimitSchedule {
    fn default() -> Self {
        Self::geometric(20)
    }
}

impl LimitSchedule {
    /// `t_k = 2^{-k}` for `k = 1..=levels`, Richardson extrapolation.
    pub fn geometric(levels: u32) -> Self {
        Self {
            t_values: (1..=levels).map(|k| 0.5f64.powi(k as i32)).collect(),
            extrapolation: Extrapolation::Richardson,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_values.is_empty() {
            return Err(Error::InvalidSchedule("no t values".into()));
        }
        if self.extrapolation == Extrapolation::Richardson && self.t_values.len() < 2 {
            return Err(Error::InvalidSchedule(
                "Richardson extrapolation needs at least two points".into(),
            ));
        }
        if let Some(t) = self.t_values.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::InvalidSchedule(format!("t = {t} is outside (0, 1)")));
        }
        if let Some(w) = self.t_values.windows(2).find(|w| w[1] >= w[0]) {
            return Err(Error::InvalidSchedule(format!(
                "t values must strictly decrease ({} then {})",
                w[0], w[1]
            )));
        }
        if !(self.divergence_threshold.is_finite() && self.divergence_threshold > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "divergence threshold {} must be positive and finite",
                self.divergence_threshold
            )));
        }
        Ok(())
    }
}

fn check_pair(omega: &State, nu: &State) -> Result<()> {
    if omega.algebra() != nu.algebra() {
        return Err(Error::DimensionMismatch {
            context: "states on different algebras",
            expected: omega.dim(),
            found: nu.dim(),
        });
    }
    Ok(())
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t = {t} is outside [0, 1]")));
    }
    Ok(())
}

/// Spectral data for `γᵗ_{[ω^R, ν^L]}`, reused across `t`.
#[derive(Clone, Debug)]
pub struct StatePair {
    omega: CMatrix,
    nu: CMatrix,
    omega_eig: EigenDecomposition,
    nu_eig: EigenDecomposition,
    identical: bool,
}

impl StatePair {
    pub fn new(omega: &State, nu: &State) -> Result<Self> {
        check_pair(omega, nu)?;
        Ok(Self {
            omega: omega.density().as_matrix().clone(),
            nu: nu.density().as_matrix().clone(),
            omega_eig: clipped_eig(omega.density())?,
            nu_eig: clipped_eig(nu.density())?,
            identical: omega.density() == nu.density(),
        })
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    fn check_elements(&self, a: &CMatrix, b: &CMatrix) -> Result<()> {
        let n = self.dim();
        for m in [a, b] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    context: "gamma_states",
                    expected: n,
                    found: m.nrows(),
                });
            }
        }
        Ok(())
    }

    /// `ω^R(a, b) = Tr(a* ω̂ b)`.
    pub fn omega_right(&self, a: &CMatrix, b: &CMatrix) -> Result<C64> {
        self.check_elements(a, b)?;
        Ok(trace_product(&(a.adjoint() * &self.omega), b))
    }

    /// Products `X_ji Y_ij` with `X = V* a* U`, `Y = U* b V` in the two eigenbases.
    fn weights(&self, a: &CMatrix, b: &CMatrix) -> CMatrix {
        let u = &self.omega_eig.eigenvectors;
        let v = &self.nu_eig.eigenvectors;
        let x = v.adjoint() * a.adjoint() * u;
        let y = u.adjoint() * b * v;
        CMatrix::from_fn(self.dim(), self.dim(), |i, j| x[(j, i)] * y[(i, j)])
    }

    /// `Tr(a* ω̂^{1−t} b ν̂^t)`; the endpoints use `ω̂` and `ν̂` directly.
    pub fn gamma(&self, t: f64, a: &CMatrix, b: &CMatrix) -> Result<C64> {
        check_t(t)?;
        self.check_elements(a, b)?;
        if t == 0.0 || self.identical {
            return Ok(trace_product(&(a.adjoint() * &self.omega), b));
        }
        if t == 1.0 {
            return Ok(trace_product(&(a.adjoint() * b), &self.nu));
        }
        let w = self.weights(a, b);
        let mut acc = C64::new(0.0, 0.0);
        for (i, &l) in self.omega_eig.eigenvalues.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            let li = l.powf(1.0 - t);
            for (j, &m) in self.nu_eig.eigenvalues.iter().enumerate() {
                if m > 0.0 {
                    acc += w[(i, j)] * (li * m.powf(t));
                }
            }
        }
        Ok(acc)
    }

    /// `−(γᵗ(a,b) − ω^R(a,b)) / t`, summed term by term in the eigenbases so
    /// that small `t` does not cancel catastrophically.
    fn quotient(&self, w: &CMatrix, t: f64) -> C64 {
        if self.identical {
            return C64::new(0.0, 0.0);
        }
        let mut acc = C64::new(0.0, 0.0);
        for (i, &l) in self.omega_eig.eigenvalues.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            for (j, &m) in self.nu_eig.eigenvalues.iter().enumerate() {
                let c = if m > 0.0 { l * (t * (m / l).ln()).exp_m1() } else { -l };
                acc += w[(i, j)] * c;
            }
        }
        -acc / t
    }
}

/// `γᵗ_{[ω^R, ν^L]}(a, b) = Tr(a* ω̂^{1−t} b ν̂^t)`.
pub fn gamma_states(omega: &State, nu: &State, t: f64, a: &CMatrix, b: &CMatrix) -> Result<C64> {
    StatePair::new(omega, nu)?.gamma(t, a, b)
}

/// Relative entropy in closed form, `Tr ω̂ (ln ω̂ − ln ν̂)` on the supports.
pub fn relative_entropy(omega: &State, nu: &State) -> Result<ExtendedReal> {
    check_pair(omega, nu)?;
    if omega.density() == nu.density() {
        return Ok(ExtendedReal::Finite(0.0));
    }
    let w = omega.density().as_matrix();
    let diag_weight = |eig: &EigenDecomposition, k: usize| {
        let v = eig.eigenvectors.column(k);
        v.dotc(&(w * v)).re
    };
    let we = clipped_eig(omega.density())?;
    let ne = clipped_eig(nu.density())?;
    let mut s = 0.0;
    for (k, &l) in we.eigenvalues.iter().enumerate() {
        if l > 0.0 {
            s += diag_weight(&we, k) * l.ln();
        }
    }
    let mut leak = 0.0;
    for (k, &m) in ne.eigenvalues.iter().enumerate() {
        let wk = diag_weight(&ne, k);
        if m > 0.0 {
            s -= wk * m.ln();
        } else {
            leak += wk;
        }
    }
    if leak > SUPPORT_TOL * omega.trace().max(f64::MIN_POSITIVE) {
        return Ok(ExtendedReal::Infinite);
    }
    Ok(ExtendedReal::Finite(s))
}

/// Full record of a difference-quotient evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitDiagnostics {
    pub t_values: Vec<f64>,
    /// `D(t_k)` in schedule order.
    pub quotients: Vec<C64Pair>,
    /// Extrapolated sequence; equal to `quotients` without extrapolation.
    pub extrapolated: Vec<C64Pair>,
    pub converged: bool,
    pub diverged: bool,
    /// `limsup` side of the tail: largest real part over the last extrapolated values.
    pub tail_guard: f64,
    /// `|tail_guard − Re limit|` exceeds the Cauchy tolerance.
    pub tail_discrepancy: bool,
}

/// Complex number as `[re, im]`.
pub type C64Pair = [f64; 2];

fn pair(z: C64) -> C64Pair {
    [z.re, z.im]
}

/// Estimate produced by the quotient machinery.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitEstimate {
    /// `None` when the quotients diverge.
    pub value: Option<C64>,
    pub diagnostics: LimitDiagnostics,
}

fn estimate(pair_data: &StatePair, a: &CMatrix, b: &CMatrix, schedule: &LimitSchedule) -> Result<LimitEstimate> {
    schedule.validate()?;
    pair_data.check_elements(a, b)?;
    let w = pair_data.weights(a, b);
    let ts = &schedule.t_values;
    let d: Vec<C64> = ts.iter().map(|&t| pair_data.quotient(&w, t)).collect();
    let ext: Vec<C64> = match schedule.extrapolation {
        Extrapolation::None => d.clone(),
        Extrapolation::Richardson => (1..d.len())
            .map(|k| {
                let rho = ts[k] / ts[k - 1];
                (d[k] - d[k - 1] * rho) / (1.0 - rho)
            })
            .collect(),
    };
    let last = *ext.last().expect("validated schedule is non-empty");
    let converged = ext.len() >= 2 && (ext[ext.len() - 1] - ext[ext.len() - 2]).norm() < CAUCHY_TOL;

    let tail = &d[d.len().saturating_sub(TAIL_LEN)..];
    let growing = tail.windows(2).all(|w| w[1].norm() > w[0].norm());
    let diverged = d.last().expect("non-empty").norm() > schedule.divergence_threshold && growing;

    let ext_tail = &ext[ext.len().saturating_sub(TAIL_LEN)..];
    let tail_guard = ext_tail.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let tail_discrepancy = !diverged && (tail_guard - last.re).abs() > CAUCHY_TOL;

    Ok(LimitEstimate {
        value: (!diverged).then_some(last),
        diagnostics: LimitDiagnostics {
            t_values: ts.clone(),
            quotients: d.into_iter().map(pair).collect(),
            extrapolated: ext.into_iter().map(pair).collect(),
            converged,
            diverged,
            tail_guard,
            tail_discrepancy,
        },
    })
}

/// Scalar relative entropy from the quotient limit at `a = b = e`.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitEntropy {
    pub value: ExtendedReal,
    pub diagnostics: LimitDiagnostics,
}

pub fn relative_entropy_limit(omega: &State, nu: &State, schedule: &LimitSchedule) -> Result<LimitEntropy> {
    let pair_data = StatePair::new(omega, nu)?;
    let e = CMatrix::identity(pair_data.dim(), pair_data.dim());
    let est = estimate(&pair_data, &e, &e, schedule)?;
    let value = match est.value {
        Some(z) => ExtendedReal::Finite(z.re),
        None => ExtendedReal::Infinite,
    };
    Ok(LimitEntropy {
        value,
        diagnostics: est.diagnostics,
    })
}

/// `S_{[ω,ν]}(a, b)` via the same quotient machinery.
pub fn relative_entropy_functional(
    omega: &State,
    nu: &State,
    a: &CMatrix,
    b: &CMatrix,
    schedule: &LimitSchedule,
) -> Result<LimitEstimate> {
    estimate(&StatePair::new(omega, nu)?, a, b, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{make_state, AlgebraDescriptor};
    use crate::hermlin::{matrix_unit, real, HermitianMatrix};
    use approx::assert_abs_diff_eq;

    fn diag(d: &[f64]) -> State {
        State::full(HermitianMatrix::from_real_diagonal(d).into_inner()).unwrap()
    }

    fn kl(p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .filter(|(pi, _)| **pi > 0.0)
            .map(|(pi, qi)| pi * (pi.ln() - qi.ln()))
            .sum()
    }

    #[test]
    fn gamma_trivial_and_scalar_examples() {
        let w = diag(&[0.5, 0.5]);
        let v = diag(&[0.75, 0.25]);
        let e = CMatrix::identity(2, 2);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(gamma_states(&w, &w, t, &e, &e).unwrap(), real(1.0));
        }
        let g = gamma_states(&w, &v, 0.5, &e, &e).unwrap();
        assert_abs_diff_eq!(g.re, (3.0f64 / 8.0).sqrt() + (1.0f64 / 8.0).sqrt(), epsilon = 1e-15);
        assert_eq!(gamma_states(&w, &v, 0.0, &e, &e).unwrap().re, w.trace());
        assert!(gamma_states(&w, &v, 1.5, &e, &e).is_err());
        assert!(gamma_states(&w, &v, 0.5, &CMatrix::identity(3, 3), &e).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let w = diag(&[0.5, 0.5]);
        let v = diag(&[0.75, 0.25]);
        assert_eq!(relative_entropy(&w, &w).unwrap(), ExtendedReal::Finite(0.0));
        let s = relative_entropy(&w, &v).unwrap().to_f64();
        assert_abs_diff_eq!(s, 0.5 * (4.0f64 / 3.0).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.1438410362, epsilon = 1e-10);
        assert_eq!(
            relative_entropy(&w, &diag(&[1.0, 0.0])).unwrap(),
            ExtendedReal::Infinite
        );
        // Support inclusion keeps the value finite.
        let s = relative_entropy(&diag(&[1.0, 0.0]), &w).unwrap().to_f64();
        assert_abs_diff_eq!(s, 2.0f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn closed_form_matches_kl_on_diagonals() {
        let p = [0.1, 0.6, 0.3];
        let q = [0.3, 0.3, 0.4];
        let s = relative_entropy(&diag(&p), &diag(&q)).unwrap().to_f64();
        assert_abs_diff_eq!(s, kl(&p, &q), epsilon = 1e-14);
    }

    #[test]
    fn limit_matches_closed_form() {
        let w = diag(&[0.5, 0.5]);
        let v = diag(&[0.75, 0.25]);
        let res = relative_entropy_limit(&w, &v, &LimitSchedule::default()).unwrap();
        assert!(res.diagnostics.converged);
        assert!(!res.diagnostics.tail_discrepancy);
        assert_abs_diff_eq!(res.value.to_f64(), 0.1438410362, epsilon = 1e-5);
        assert_eq!(res.diagnostics.quotients.len(), 20);
    }

    #[test]
    fn limit_is_zero_for_equal_states() {
        let w = diag(&[0.2, 0.8]);
        let res = relative_entropy_limit(&w, &w, &LimitSchedule::default()).unwrap();
        assert_eq!(res.value, ExtendedReal::Finite(0.0));
        assert!(res.diagnostics.quotients.iter().all(|q| *q == [0.0, 0.0]));
    }

    #[test]
    fn limit_flags_divergence() {
        let w = diag(&[0.5, 0.5]);
        let v = diag(&[1.0, 0.0]);
        let res = relative_entropy_limit(&w, &v, &LimitSchedule::default()).unwrap();
        assert_eq!(res.value, ExtendedReal::Infinite);
        assert!(res.diagnostics.diverged);
    }

    #[test]
    fn functional_examples() {
        let w = diag(&[0.5, 0.5]);
        let v = diag(&[0.75, 0.25]);
        let sched = LimitSchedule::default();
        let e = CMatrix::identity(2, 2);
        let at_e = relative_entropy_functional(&w, &v, &e, &e, &sched)
            .unwrap()
            .value
            .unwrap();
        assert_abs_diff_eq!(at_e.re, relative_entropy(&w, &v).unwrap().to_f64(), epsilon = 1e-8);
        let e11 = matrix_unit(2, 0, 0);
        let s11 = relative_entropy_functional(&w, &v, &e11, &e11, &sched)
            .unwrap()
            .value
            .unwrap();
        assert_abs_diff_eq!(s11.re, 0.5 * (0.5f64.ln() - 0.75f64.ln()), epsilon = 1e-8);
        assert_abs_diff_eq!(s11.re, -0.202733, epsilon = 1e-6);
        let lam = C64::new(0.6, -1.1);
        let e11l = e11.map(|z| z * lam);
        let scaled = relative_entropy_functional(&w, &v, &e11l, &e11l, &sched)
            .unwrap()
            .value
            .unwrap();
        assert_abs_diff_eq!(scaled.re, s11.re * lam.norm_sqr(), epsilon = 1e-8);
    }

    #[test]
    fn schedule_validation() {
        assert!(LimitSchedule::default().validate().is_ok());
        let mut s = LimitSchedule {
            t_values: vec![0.5, 0.5],
            ..LimitSchedule::default()
        };
        assert!(s.validate().is_err());
        s.t_values = vec![1.0, 0.5];
        assert!(s.validate().is_err());
        s.t_values = vec![0.5];
        assert!(s.validate().is_err());
        s.extrapolation = Extrapolation::None;
        assert!(s.validate().is_ok());
        s.t_values.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn mismatched_algebras() {
        let w = diag(&[0.5, 0.5]);
        let v = make_state(
            &AlgebraDescriptor::diagonal(2),
            HermitianMatrix::from_real_diagonal(&[0.5, 0.5]).into_inner(),
            true,
        )
        .unwrap();
        assert!(relative_entropy(&w, &v).is_err());
    }

    #[test]
    fn extended_real_json() {
        assert_eq!(serde_json::to_string(&ExtendedReal::Infinite).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&ExtendedReal::Finite(0.5)).unwrap(), "0.5");
        let back: ExtendedReal = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(back, ExtendedReal::Infinite);
        assert!(serde_json::from_str::<ExtendedReal>("\"nan\"").is_err());
    }
}
