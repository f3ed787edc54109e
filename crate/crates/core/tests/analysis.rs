//! Constants, optimum and convergence checked on random validated instances.

use hfo::analysis::{check_bound, constants, dist_to_A, fixed_point_z, solve_optimal, Theorem};
use hfo::hybrid::{simulate, Horizon};
use hfo::linalg;
use hfo::model::{FoSystem, InitMode};
use hfo::scenarios::{random_scenario, s1};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn validated_instances_contract(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sc = random_scenario(&mut rng, InitMode::Strict);
        let c = constants(&sc.params).unwrap();
        prop_assert!(c.q > 0.0 && c.q < 1.0, "q = {}", c.q);
        prop_assert!(c.rho > 0.0 && c.m_hat >= 1.0 && c.r >= 0.0);
    }

    #[test]
    fn optimum_is_a_fixed_point(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sc = random_scenario(&mut rng, InitMode::Strict);
        let opt = solve_optimal(&sc.params).unwrap();
        let z = fixed_point_z(&opt.y_tilde, &sc.params).unwrap();
        prop_assert!(linalg::dist2(&z, &opt.u_tilde) < 1e-7, "{:?} vs {:?}", z, opt.u_tilde);
        prop_assert!(opt.residual < 1e-8);
        prop_assert!(sc.params.input_set.contains(&opt.u_tilde, 1e-9));
    }
}

#[test]
fn trajectories_enter_the_target_ball() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for k in 0..10 {
        let mode = if k % 2 == 0 { InitMode::Strict } else { InitMode::Global };
        let sc = random_scenario(&mut rng, mode);
        let c = constants(&sc.params).unwrap();
        let sys = FoSystem::new(sc.params.clone()).unwrap();
        let h = Horizon { t_end: 40.0 / c.rho, max_jumps: 1_000_000 };
        let arc = simulate(&sys, &sc.initial, sc.policy, h, 0.1).unwrap();
        let d = dist_to_A(arc.final_state(), &c);
        assert!(d <= 1e-6, "scenario {k}: final distance {d}");
    }
}

#[test]
fn s1_satisfies_the_steady_bound() {
    let sc = s1();
    let c = constants(&sc.params).unwrap();
    let sys = FoSystem::new(sc.params.clone()).unwrap();
    let arc = simulate(&sys, &sc.initial, sc.policy, Horizon { t_end: 20.0, max_jumps: 1000 }, 0.01).unwrap();
    for which in [Theorem::Thm1, Theorem::Thm2] {
        let report = check_bound(&arc, &c, &sc.params.timers, which);
        assert!(report.passed(), "{which:?}: {:?}", report.first_violation);
    }
}
