//! Config serialization round trip over random validated scenarios.

use hfo::model::{InitMode, JumpPolicy};
use hfo::robustness::Perturbation;
use hfo::scenarios::random_scenario;
use hfo_cli::config::{HorizonConfig, InitConfig, ScenarioConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(seed in any::<u64>(), global in any::<bool>(), with_pert in any::<bool>()) {
        let mode = if global { InitMode::Global } else { InitMode::Strict };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sc = random_scenario(&mut rng, mode);
        let init = InitConfig { mode, zeta0: (&sc.initial).into() };
        let horizon = HorizonConfig { t_end: 3.0, max_jumps: 500 };
        let mut cfg = ScenarioConfig::with_params(&sc.params, init, sc.policy, horizon);
        if with_pert {
            let (n, m, p) = (sc.params.plant.n(), sc.params.plant.m(), sc.params.plant.p());
            cfg.perturbation = Some(Perturbation::zero(n, m, p));
        }

        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ScenarioConfig::from_json(&text, "roundtrip").unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.params(), sc.params.clone());

        let loaded = back.resolve(None).unwrap();
        prop_assert_eq!(&loaded.params, &sc.params);
        prop_assert_eq!(&loaded.initial, &sc.initial);
        if !global {
            prop_assert!(loaded.strict_init_ok());
        }
    }

    #[test]
    fn strict_fill_matches_the_model(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sc = random_scenario(&mut rng, InitMode::Strict);
        let mut zeta0: hfo_cli::config::PartialState = (&sc.initial).into();
        zeta0.y_s = None;
        zeta0.z = None;
        zeta0.tau_g = None;
        let init = InitConfig { mode: InitMode::Strict, zeta0 };
        let cfg = ScenarioConfig::with_params(&sc.params, init, JumpPolicy::default(), HorizonConfig { t_end: 1.0, max_jumps: 10 });
        let loaded = cfg.resolve(Some(5)).unwrap();
        prop_assert_eq!(&loaded.initial, &sc.initial);
        prop_assert!(loaded.strict_init_ok());
        prop_assert_eq!(loaded.config.policy.seed, 5);
    }
}
