use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shortcut_forge::digitized::{
    digitization_error, propagator_error, slice_unitaries, trotter_cd_evolve, trotter_propagator,
    SampleRule, SliceOrdering, TrotterPlan,
};
use shortcut_forge::dynamics::evolve;
use shortcut_forge::models::{random_hermitian, LandauZener};
use shortcut_forge::operator::{pauli_matrix, propagator};
use shortcut_forge::schedule::{FnHamiltonian, Sum};
use shortcut_forge::spectral::CounterdiabaticTerm;
use shortcut_forge::{
    CMatrix, CVector, HermitianOperator, Ket, ParamSchedule, ParametricFamily, Protocol, C64,
};

const SWEEP: [usize; 6] = [8, 16, 32, 64, 128, 256];

fn lz(duration: f64) -> Protocol<LandauZener> {
    let schedule = ParamSchedule::linear(duration, vec![-5.0], vec![5.0]).unwrap();
    Protocol::new(LandauZener::new(1.0), schedule).unwrap()
}

fn ground(h: &HermitianOperator) -> CVector {
    h.eigh().vector(0)
}

fn constant(m: CMatrix) -> FnHamiltonian {
    FnHamiltonian::constant(HermitianOperator::new(m).unwrap())
}

fn pauli(c: char, scale: f64) -> CMatrix {
    pauli_matrix(c).unwrap() * C64::from(scale)
}

#[test]
fn commuting_constant_pair_is_exact_for_any_slicing() {
    let h = constant(pauli('Z', 1.3));
    let cd = constant(pauli('Z', -0.4));
    let psi0 = Ket::normalized(CVector::from_vec(vec![
        C64::new(0.6, 0.1),
        C64::new(0.3, -0.7),
    ]))
    .unwrap();
    let exact = propagator(&pauli('Z', 0.9), 2.5, 1.0) * psi0.vector();
    for m in [1, 3, 17, 64] {
        let plan = TrotterPlan::new(m, 2.5).unwrap();
        let psi = trotter_cd_evolve(&h, &cd, &plan, &psi0, 1.0).unwrap();
        assert!((psi.vector() - &exact).norm() < 1e-13, "M = {m}");
    }
}

#[test]
fn single_slice_is_the_product_of_two_exponentials() {
    let h = constant(pauli('Z', 0.8) + pauli('X', 0.3));
    let cd = constant(pauli('Y', 0.5));
    let psi0 = Ket::basis(2, 0).unwrap();
    let t = 1.7;
    let expected = propagator(&(pauli('Z', 0.8) + pauli('X', 0.3)), t, 1.0)
        * propagator(&pauli('Y', 0.5), t, 1.0)
        * psi0.vector();
    let plan = TrotterPlan::new(1, t).unwrap();
    let psi = trotter_cd_evolve(&h, &cd, &plan, &psi0, 1.0).unwrap();
    assert!((psi.vector() - expected).norm() < 1e-14);
}

#[test]
fn commuting_scenario_skips_the_fit() {
    let h = constant(pauli('Z', 1.0));
    let cd = constant(pauli('Z', 0.5));
    let psi0 = Ket::normalized(CVector::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(1.0, 0.0),
    ]))
    .unwrap();
    let target = propagator(&pauli('Z', 1.5), 3.0, 1.0) * psi0.vector();
    let plan = TrotterPlan::new(1, 3.0).unwrap();
    let report = digitization_error(&h, &cd, &plan, &SWEEP, &psi0, &target, 1.0).unwrap();
    assert!(report.fit_skipped());
    assert!(report.points.iter().all(|p| !p.included && p.error < 1e-12));
}

#[test]
fn landau_zener_infidelity_scales_as_inverse_square() {
    let protocol = lz(10.0);
    let cd = CounterdiabaticTerm::new(&protocol, 1.0);
    let psi0 = Ket::new(ground(&protocol.family.hamiltonian(&[-5.0]).unwrap())).unwrap();
    let target = ground(&protocol.family.hamiltonian(&[5.0]).unwrap());
    let plan = TrotterPlan::new(1, 10.0).unwrap();
    let report = digitization_error(&protocol, &cd, &plan, &SWEEP, &psi0, &target, 1.0).unwrap();
    for w in report.points.windows(2) {
        assert!(
            w[1].error < w[0].error,
            "M = {}: {:e} -> {:e}",
            w[1].slices,
            w[0].error,
            w[1].error
        );
    }
    let fit = report.fit.unwrap();
    assert_eq!(fit.n_points, SWEEP.len());
    assert!((-2.3..=-1.7).contains(&fit.slope), "slope {}", fit.slope);
    assert!(fit.slope_band.0 <= fit.slope && fit.slope <= fit.slope_band.1);
}

#[test]
fn ordering_reversal_keeps_the_exponent() {
    let protocol = lz(10.0);
    let cd = CounterdiabaticTerm::new(&protocol, 1.0);
    let psi0 = Ket::new(ground(&protocol.family.hamiltonian(&[-5.0]).unwrap())).unwrap();
    let target = ground(&protocol.family.hamiltonian(&[5.0]).unwrap());
    let slope = |ordering| {
        let plan = TrotterPlan::new(1, 10.0).unwrap().with_ordering(ordering);
        digitization_error(&protocol, &cd, &plan, &SWEEP, &psi0, &target, 1.0)
            .unwrap()
            .fit
            .unwrap()
            .slope
    };
    let a = slope(SliceOrdering::CdFirst);
    let b = slope(SliceOrdering::HFirst);
    assert!((a - b).abs() < 0.3, "{a} vs {b}");
}

#[test]
fn midpoint_sampling_also_converges() {
    let protocol = lz(10.0);
    let cd = CounterdiabaticTerm::new(&protocol, 1.0);
    let psi0 = Ket::new(ground(&protocol.family.hamiltonian(&[-5.0]).unwrap())).unwrap();
    let target = ground(&protocol.family.hamiltonian(&[5.0]).unwrap());
    let plan = TrotterPlan::new(1, 10.0)
        .unwrap()
        .with_sampling(SampleRule::Midpoint);
    let report = digitization_error(&protocol, &cd, &plan, &SWEEP, &psi0, &target, 1.0).unwrap();
    assert!(report.points.last().unwrap().error < report.points[0].error);
}

#[test]
fn fine_slicing_converges_to_continuous_driving() {
    let protocol = lz(2.0);
    let cd = CounterdiabaticTerm::new(&protocol, 1.0);
    let psi0 = Ket::new(ground(&protocol.family.hamiltonian(&[-5.0]).unwrap())).unwrap();
    let total = Sum(&protocol, &cd);
    let reference = evolve(&total, &psi0, &[0.0, 2.0], 4000, 1.0).unwrap();
    let mut previous = f64::INFINITY;
    for m in [64, 256, 1024, 4096] {
        let plan = TrotterPlan::new(m, 2.0).unwrap();
        let psi = trotter_cd_evolve(&protocol, &cd, &plan, &psi0, 1.0).unwrap();
        let d = 1.0 - reference.last().dotc(psi.vector()).norm_sqr();
        assert!(d < previous, "M = {m}");
        previous = d;
    }
    assert!(previous < 1e-6, "infidelity {previous:e}");
}

#[test]
fn constant_pair_propagator_error_is_first_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_hermitian(4, &mut rng);
    let b = random_hermitian(4, &mut rng);
    let t = 1.0;
    let exact = propagator(&(&a + &b), t, 1.0);
    let h = constant(a.clone());
    let cd = constant(b.clone());
    let plan = TrotterPlan::new(1, t).unwrap();
    let report = propagator_error(&h, &cd, &plan, &SWEEP, &exact, 1.0).unwrap();
    let fit = report.fit.unwrap();
    assert!((-1.3..=-0.7).contains(&fit.slope), "slope {}", fit.slope);
}

#[test]
fn sweep_preconditions_are_enforced() {
    let h = constant(pauli('Z', 1.0));
    let cd = constant(pauli('X', 1.0));
    let psi0 = Ket::basis(2, 0).unwrap();
    let target = psi0.vector().clone();
    let plan = TrotterPlan::new(1, 1.0).unwrap();
    assert!(digitization_error(&h, &cd, &plan, &[8, 16, 32], &psi0, &target, 1.0).is_err());
    assert!(digitization_error(&h, &cd, &plan, &[8, 9, 10, 11], &psi0, &target, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn slices_are_unitary_and_norm_is_conserved(seed in any::<u64>(), m in 1usize..40, t in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = constant(random_hermitian(3, &mut rng));
        let cd = constant(random_hermitian(3, &mut rng));
        let plan = TrotterPlan::new(m, t).unwrap();
        for u in slice_unitaries(&h, &cd, &plan, 1.0).unwrap() {
            let dev = (u.adjoint() * &u - CMatrix::identity(3, 3)).norm();
            prop_assert!(dev < 1e-13);
        }
        let u = trotter_propagator(&h, &cd, &plan, 1.0).unwrap();
        let psi0 = Ket::basis(3, 1).unwrap();
        let psi = u * psi0.vector();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
    }
}
