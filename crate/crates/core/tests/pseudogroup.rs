use kundt_core::pseudogroup::{self, closure_defect, generic, random_jet_function, Generator};
use kundt_core::{EqKind, EquationSystem};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn prolongation_is_a_homomorphism(seed in any::<u64>(), k in 1u32..=2) {
        let e = EquationSystem::new(EqKind::E, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = Generator::random(&e.setting, 2, &mut rng);
        let eta = Generator::random(&e.setting, 2, &mut rng);
        let f = random_jet_function(&e, k - 1, 5, &mut rng);
        prop_assert!(closure_defect(&xi, &eta, &f, &e, k).unwrap().is_zero());
    }

    #[test]
    fn w_vv_cocycle_on_random_pairs(seed in any::<u64>()) {
        let e = EquationSystem::new(EqKind::E, 3).unwrap();
        let mu = pseudogroup::relative_multiplier(&e.parse("W_vv").unwrap(), &e).unwrap().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = Generator::random(&e.setting, 2, &mut rng);
        let eta = Generator::random(&e.setting, 2, &mut rng);
        prop_assert!(pseudogroup::cocycle_defect(&mu, &xi, &eta, &e).unwrap().is_zero());
    }
}

#[test]
fn orbit_dimensions_agree_on_e_and_ed() {
    for n in [3, 4] {
        for k in [2, 3] {
            let a = pseudogroup::orbit_dimension(&EquationSystem::new(EqKind::E, n).unwrap(), k, 1).unwrap();
            let b = pseudogroup::orbit_dimension(&EquationSystem::new(EqKind::ED, n).unwrap(), k, 1).unwrap();
            assert_eq!(a.rank, b.rank, "n={n} k={k}");
            assert!(a.warning.is_none());
        }
    }
}

#[test]
fn prolonged_field_is_tangent_to_the_equations() {
    for kind in [EqKind::E, EqKind::ED, EqKind::EW] {
        let e = EquationSystem::new(kind, 3).unwrap();
        assert!(generic(&e, 3).field.tangency_residuals().is_empty(), "{kind}");
    }
}

#[test]
fn h_vvv_is_not_relative_on_all_of_e() {
    let e = EquationSystem::new(EqKind::E, 3).unwrap();
    assert!(pseudogroup::relative_multiplier(&e.parse("H_vvv").unwrap(), &e).unwrap().is_none());
}
