use proptest::prelude::*;
use wrof_core::flows::{iterate_regularization, multiscale, FlowOptions, ScaleSchedule};
use wrof_core::{check_energy_identity, solve_wrof, split_masses, w1, DiscreteMeasure};

fn measure(max_atoms: usize, dim: usize) -> impl Strategy<Value = DiscreteMeasure> {
    (1..=max_atoms).prop_flat_map(move |n| {
        (
            prop::collection::vec(0.0..1.0f64, n * dim),
            prop::collection::vec(0.05..1.0f64, n),
        )
            .prop_map(move |(c, w)| DiscreteMeasure::from_flat(dim, c, w).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_sum_to_one_exactly(m in measure(30, 3)) {
        prop_assert_eq!(m.weights().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn energy_identity_and_rate(mu in measure(10, 2), nu in measure(10, 2), lambda0 in 0.05..1.5f64) {
        let ms = multiscale(&mu, &nu, lambda0, 6, &FlowOptions::default()).unwrap();
        let ledger = &ms.ledger;
        prop_assert!(check_energy_identity(ledger) <= 1e-8 * (1.0 + ledger.total_left));
        for s in &ledger.stages {
            prop_assert!(s.telescoping_error() <= 1e-8 * (1.0 + 0.5 * s.w2sq_before));
            prop_assert!(s.w2sq_after <= s.rate_bound, "stage {}: {} > {}", s.n, s.w2sq_after, s.rate_bound);
        }
    }

    #[test]
    fn regularization_is_monotone(mu in measure(10, 2), nu in measure(10, 2), lambda in 0.05..0.5f64) {
        let schedule = ScaleSchedule::constant(lambda, 12).unwrap();
        let reg = iterate_regularization(&mu, &nu, &schedule, &FlowOptions::default()).unwrap();
        prop_assert!(reg.trace.max_increase() <= 1e-9);
        prop_assert!(reg.trace.max_diameter_violation() <= 1e-9);
    }

    #[test]
    fn one_dimensional_w1_drops_by_far_mass(mu in measure(12, 1), nu in measure(12, 1), lambda in 0.02..0.5f64) {
        let sol = solve_wrof(&mu, &nu, lambda).unwrap();
        let split = split_masses(&sol.huber_plan, &mu, &nu, lambda).unwrap();
        let before = w1(&mu, &nu).unwrap();
        prop_assert!(before - sol.w1_rho_nu >= lambda * split.mass_large - 1e-8);
    }
}

#[test]
fn random_two_dimensional_ledger_closes() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut draw = |n: usize| {
        let coords: Vec<f64> = (0..2 * n).map(|_| rng.gen::<f64>()).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        DiscreteMeasure::from_flat(2, coords, weights).unwrap()
    };
    let (mu, nu) = (draw(10), draw(10));
    let ms = multiscale(&mu, &nu, 0.5, 6, &FlowOptions::default()).unwrap();
    assert!(check_energy_identity(&ms.ledger) <= 1e-8);
}
