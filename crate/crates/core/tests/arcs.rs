//! Structural properties of simulated arcs over random validated scenarios.

use hfo::hybrid::{arc_lookup, check_non_zeno, jump_stats, simulate, HybridArc, HybridTime, Horizon, JumpKind, JumpMap};
use hfo::model::{FoSystem, InitMode, ModelParams, State};
use hfo::robustness::{closeness, closeness_horizon, perturbed_model, Perturbation};
use hfo::scenarios::{random_scenario, s1, Scenario};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario(seed: u64, global: bool) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_scenario(&mut rng, if global { InitMode::Global } else { InitMode::Strict })
}

fn run(sc: &Scenario, t_end: f64) -> HybridArc {
    run_sampled(sc, t_end, 0.02)
}

fn run_sampled(sc: &Scenario, t_end: f64, sample_dt: f64) -> HybridArc {
    let sys = FoSystem::new(sc.params.clone()).unwrap();
    simulate(&sys, &sc.initial, sc.policy, Horizon { t_end, max_jumps: 100_000 }, sample_dt).unwrap()
}

fn in_c_or_d(params: &ModelParams, s: &State) -> bool {
    let t = params.timers;
    (0.0..=t.tau_c_max).contains(&s.tau_c) && (0.0..=t.tau_g_comp).contains(&s.tau_g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn arcs_are_well_formed(seed in any::<u64>(), global in any::<bool>()) {
        let sc = scenario(seed, global);
        let arc = run(&sc, 4.0);

        // Segments tile [0, t_end]; j increases by one per jump record.
        prop_assert_eq!(arc.segments[0].t_start, 0.0);
        prop_assert_eq!(arc.segments.len(), arc.jumps.len() + 1);
        for (k, w) in arc.segments.windows(2).enumerate() {
            prop_assert_eq!(w[0].t_end, w[1].t_start);
            prop_assert_eq!(w[1].j, w[0].j + 1);
            prop_assert_eq!(arc.jumps[k].time.j, k);
        }

        let rates = arc.timer_rates;
        for seg in &arc.segments {
            let start = seg.start();
            if seg.duration() > 0.0 {
                prop_assert!(!start.in_jump_set());
            }
            for s in &seg.samples {
                let dt = s.t - seg.t_start;
                prop_assert!((s.state.tau_c - (start.tau_c + rates.0 * dt)).abs() < 1e-9);
                prop_assert!((s.state.tau_g - (start.tau_g + rates.1 * dt)).abs() < 1e-9);
                prop_assert_eq!(&s.state.u, &start.u);
                prop_assert_eq!(&s.state.z, &start.z);
            }
        }

        for rec in &arc.jumps {
            prop_assert!(rec.state_before.in_jump_set());
            prop_assert!(in_c_or_d(&sc.params, &rec.state_after));
        }

        let report = check_non_zeno(&arc);
        prop_assert!(report.passed, "{:?}", report.violations);
        prop_assert!(report.max_jumps_at_one_time <= 2);
    }

    #[test]
    fn inputs_are_earlier_iterates(seed in any::<u64>()) {
        let sc = scenario(seed, false);
        let arc = run(&sc, 4.0);
        let mut iterates = vec![sc.initial.z.clone()];
        let mut u = sc.initial.u.clone();
        for rec in &arc.jumps {
            prop_assert_eq!(&rec.state_before.u, &u);
            match rec.kind.map() {
                JumpMap::Gradient => iterates.push(rec.state_after.z.clone()),
                JumpMap::Input => {
                    u = rec.state_after.u.clone();
                    prop_assert!(iterates.contains(&u));
                    prop_assert_eq!(&u, &rec.state_before.z);
                }
            }
        }
    }

    #[test]
    fn strict_initialization_gives_ell_steps(seed in any::<u64>()) {
        let sc = scenario(seed, false);
        let stats = jump_stats(&run(&sc, 5.0)).unwrap();
        let ell = sc.params.timers.ell as usize;
        prop_assert!(stats.alpha.iter().all(|&a| a >= ell), "{:?} < {}", stats.alpha, ell);
        for (p, w) in stats.alpha_bar.windows(2).enumerate() {
            prop_assert_eq!(w[1] - w[0], stats.alpha[p]);
        }
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>()) {
        let sc = scenario(seed, true);
        prop_assert_eq!(run(&sc, 3.0), run(&sc, 3.0));
    }

    #[test]
    fn lookup_between_samples(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let sc = scenario(seed, false);
        // Linear interpolation error scales with the square of the sample spacing.
        let arc = run_sampled(&sc, 3.0, 0.002);
        let seg = arc.segments.iter().find(|s| s.samples.len() > 2).unwrap();
        let t = seg.t_start + frac * seg.duration();
        let got = arc_lookup(&arc, HybridTime::new(t, seg.j)).unwrap();
        let sys = FoSystem::new(sc.params.clone()).unwrap();
        let exact = sys.lti_step(t - seg.t_start).unwrap().apply(&seg.start().x, &seg.start().u).unwrap();
        let err = got.x.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-3, "interpolation error {}", err);
    }

    #[test]
    fn closeness_is_symmetric(seed in any::<u64>(), delta in 0.0f64..0.2) {
        let sc = scenario(seed, false);
        let (n, m, p) = (sc.params.plant.n(), sc.params.plant.m(), sc.params.plant.p());
        let mut pert = Perturbation::zero(n, m, p);
        pert.a_hat = hfo::linalg::Matrix::identity(n).scale(-0.1);
        pert.theta_g_comp = 0.01;
        let h = closeness_horizon(5.0);
        let nominal = simulate(&FoSystem::new(sc.params.clone()).unwrap(), &sc.initial, sc.policy, h, 0.02).unwrap();
        let sys = perturbed_model(&sc.params, &pert, delta).unwrap();
        let other = simulate(&sys, &sc.initial, sc.policy, h, 0.02).unwrap();
        let ab = closeness(&nominal, &other, 5.0);
        let ba = closeness(&other, &nominal, 5.0);
        prop_assert!((ab.epsilon - ba.epsilon).abs() <= 1e-6 || ab.epsilon == ba.epsilon);
        if delta == 0.0 {
            prop_assert_eq!(ab.epsilon, 0.0);
        }
    }
}

#[test]
fn s1_case3_order_matters() {
    let mut sc = s1();
    sc.policy.case3_order = hfo::model::Case3Order::G2First;
    let arc = run(&sc, 2.0);
    let kinds: Vec<JumpKind> = arc.jumps.iter().map(|r| r.kind).collect();
    assert_eq!(kinds[3], JumpKind::G3First(JumpMap::Input));
    // With the input applied first the period's fourth gradient step lands in the next period.
    assert_eq!(jump_stats(&arc).unwrap().alpha, vec![3, 4]);
}

#[test]
fn gradient_timer_perturbation_grows_with_horizon() {
    let sc = s1();
    let mut pert = Perturbation::zero(1, 1, 1);
    pert.kappa_g = 0.5;
    let eps = |tau: f64| {
        let h = closeness_horizon(tau);
        let nominal = simulate(&FoSystem::new(sc.params.clone()).unwrap(), &sc.initial, sc.policy, h, 0.01).unwrap();
        let sys = perturbed_model(&sc.params, &pert, 0.1).unwrap();
        let other = simulate(&sys, &sc.initial, sc.policy, h, 0.01).unwrap();
        closeness(&nominal, &other, tau).epsilon
    };
    let (short, long) = (eps(5.0), eps(10.0));
    assert!(short <= long, "{short} > {long}");
}
