use proptest::prelude::*;

use qrelent::algebra::{
    form_left, form_right, left_multiplication, make_state, right_multiplication, AlgebraDescriptor, State,
};
use qrelent::channels::{
    check_positive_unital, check_schwarz, embed_tensor_identity, pullback_state, random_unital_cp, AlgebraMap,
};
use qrelent::entropy::{relative_entropy, ExtendedReal};
use qrelent::hermlin::{
    apply_spectral_function, herm_eig, loewner_leq, real, CMatrix, HermitianMatrix, SpectralFunction, PSD_TOL,
};
use qrelent::qforms::{interpolate, Form, Interpolation, QuadraticForm};
use qrelent::sampling::{ginibre, random_density, random_hermitian, random_psd, rng_from_seed};

fn psd(d: usize, rank: usize, seed: u64) -> HermitianMatrix {
    random_psd(d, rank, &mut rng_from_seed(seed))
}

fn form(d: usize, rank: usize, seed: u64) -> QuadraticForm {
    QuadraticForm::new(psd(d, rank, seed)).unwrap()
}

fn full_state(d: usize, seed: u64) -> State {
    State::full(random_density(d, d, seed).unwrap().into_inner()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn power_of_power(d in 1usize..7, rank in 1usize..7, seed: u64, s in 0.05f64..3.0, t in 0.05f64..3.0) {
        let a = psd(d, rank.min(d), seed);
        let once = apply_spectral_function(&a, SpectralFunction::Power(s)).unwrap();
        let twice = apply_spectral_function(&once, SpectralFunction::Power(t)).unwrap();
        let direct = apply_spectral_function(&a, SpectralFunction::Power(s * t)).unwrap();
        let err = (twice.as_matrix() - direct.as_matrix()).norm() / direct.frobenius_norm().max(f64::MIN_POSITIVE);
        prop_assert!(err <= 1e-10, "relative error {err:e}");
    }

    #[test]
    fn eig_residual(d in 1usize..=64, seed: u64) {
        let a = random_hermitian(d, &mut rng_from_seed(seed));
        let eig = herm_eig(&a);
        prop_assert!(eig.residual(a.as_matrix()) <= 1e-12 * a.frobenius_norm());
        prop_assert!(eig.unitarity_defect() <= 1e-12);
        prop_assert!(eig.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn loewner_chain(d in 1usize..6, seed: u64) {
        let a = psd(d, d, seed);
        let b = HermitianMatrix::new(a.as_matrix() + psd(d, 1, seed ^ 1).as_matrix()).unwrap();
        let c = HermitianMatrix::new(b.as_matrix() + psd(d, d, seed ^ 2).as_matrix()).unwrap();
        prop_assert!(loewner_leq(&a, &b, PSD_TOL).unwrap().holds);
        prop_assert!(loewner_leq(&b, &c, PSD_TOL).unwrap().holds);
        prop_assert!(loewner_leq(&a, &c, 3.0 * PSD_TOL).unwrap().holds);
    }

    #[test]
    fn interpolation_composes(d in 1usize..6, seed: u64, t in 0.0f64..=1.0, t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
        let (p, q) = (form(d, d, seed), form(d, d, seed ^ 7));
        let base = Interpolation::new(&p, &q).unwrap();
        let lhs = interpolate(&base.at(t1).unwrap(), &base.at(t2).unwrap(), t).unwrap();
        let rhs = base.at(t1 * (1.0 - t) + t2 * t).unwrap();
        prop_assert!((lhs.form_matrix() - rhs.form_matrix()).norm() <= 1e-9);
    }

    #[test]
    fn interpolation_vanishes_on_common_kernel(d in 2usize..6, seed: u64, t in 0.0f64..=1.0) {
        // Both forms live on the same proper subspace, so its complement is the common kernel.
        let mut rng = rng_from_seed(seed);
        let g = ginibre(d, d - 1, &mut rng);
        let p = QuadraticForm::from_matrix(&g * g.adjoint()).unwrap();
        let h = &g * ginibre(d - 1, d - 1, &mut rng);
        let q = QuadraticForm::from_matrix(&h * h.adjoint()).unwrap();
        let kernel = herm_eig(&HermitianMatrix::new(&g * g.adjoint()).unwrap()).eigenvectors.column(0).into_owned();
        let value = interpolate(&p, &q, t).unwrap().value(&kernel).unwrap();
        prop_assert!(value.abs() <= 1e-10 * (g.norm() * g.norm()).max(1.0));
    }

    #[test]
    fn entropy_nonnegative_and_self_zero(d in 1usize..6, rank in 1usize..6, seed: u64) {
        let w = State::full(random_density(d, rank.min(d), seed).unwrap().into_inner()).unwrap();
        let v = full_state(d, seed ^ 3);
        let s = relative_entropy(&w, &v).unwrap();
        prop_assert!(s.to_f64() >= -1e-10);
        prop_assert_eq!(relative_entropy(&w, &w).unwrap(), ExtendedReal::Finite(0.0));
    }

    #[test]
    fn state_forms_commute(d in 1usize..5, seed: u64) {
        let (w, v) = (full_state(d, seed), full_state(d, seed ^ 5));
        let l = left_multiplication(w.density().as_matrix());
        let r = right_multiplication(v.density().as_matrix());
        prop_assert!((&l * &r - &r * &l).norm() <= 1e-12);
        prop_assert!(herm_eig(form_right(&w).matrix()).min_eigenvalue() >= -1e-12);
        prop_assert!(herm_eig(form_left(&v).matrix()).min_eigenvalue() >= -1e-12);
    }

    #[test]
    fn commutative_forms_coincide(d in 1usize..6, seed: u64) {
        let p = qrelent::sampling::random_probability(d, &mut rng_from_seed(seed));
        let alg = AlgebraDescriptor::diagonal(d);
        let w = make_state(&alg, HermitianMatrix::from_real_diagonal(&p).into_inner(), true).unwrap();
        let b = alg.hs_basis_isometry();
        let r = b.adjoint() * form_right(&w).form_matrix() * &b;
        let l = b.adjoint() * form_left(&w).form_matrix() * &b;
        prop_assert!((r - l).norm() <= 1e-15);
    }

    #[test]
    fn unital_channel_preserves_trace(m in 1usize..5, n in 1usize..5, r in 1usize..7, seed: u64, scale in 0.1f64..4.0) {
        prop_assume!(m * r >= n);
        let ch = random_unital_cp(m, n, r, seed).unwrap();
        let w = make_state(&AlgebraDescriptor::full(n), random_density(n, n, seed ^ 9).unwrap().into_inner() * real(scale), false).unwrap();
        let pulled = pullback_state(&w, &ch).unwrap();
        prop_assert!((pulled.trace() - w.trace()).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn schwarz_implies_positive(m in 1usize..4, n in 1usize..4, r in 1usize..5, seed: u64) {
        prop_assume!(m * r >= n);
        let ch = random_unital_cp(m, n, r, seed).unwrap();
        let schwarz = check_schwarz(&ch, 50, seed).unwrap();
        prop_assert!(schwarz.passed());
        let pu = check_positive_unital(&ch, 50, seed).unwrap();
        prop_assert!(pu.positive && pu.unital);
    }

    #[test]
    fn partial_trace_monotonicity(m in 1usize..4, k in 2usize..4, seed: u64) {
        let ch = embed_tensor_identity(m, k).unwrap();
        let n = ch.target_dim();
        let (w, v) = (full_state(n, seed), full_state(n, seed ^ 11));
        let before = relative_entropy(&w, &v).unwrap().to_f64();
        let after = relative_entropy(&pullback_state(&w, &ch).unwrap(), &pullback_state(&v, &ch).unwrap()).unwrap().to_f64();
        prop_assert!(after <= before + 1e-7);
    }
}

#[test]
fn hermitian_input_is_checked() {
    let m = CMatrix::from_row_slice(2, 2, &[real(1.0), real(2.0), real(0.0), real(1.0)]);
    assert!(HermitianMatrix::new(m).is_err());
}
