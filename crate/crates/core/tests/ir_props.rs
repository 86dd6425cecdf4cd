mod common;

use common::{app_driver, random_app_source, strings_upto, APP_ALPHABET};
use consicore::ir::{eval_concrete, parse_app, print_app, InputMap};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn inputs(e1: &str, e2: &str, n: i64) -> InputMap {
    [("e1", e1.to_string()), ("e2", e2.to_string()), ("e3", n.to_string())]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(strings_upto(&APP_ALPHABET, 3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printing_then_parsing_is_the_identity(seed in any::<u64>(), sites in 0usize..8) {
        let src = random_app_source(&mut ChaCha8Rng::seed_from_u64(seed), sites);
        let app = parse_app(&src).unwrap();
        let again = parse_app(&print_app(&app)).unwrap();
        prop_assert_eq!(&again, &app);
        prop_assert_eq!(print_app(&again), print_app(&app));
    }

    #[test]
    fn concrete_runs_are_deterministic_and_well_formed(
        seed in any::<u64>(),
        e1 in word(),
        e2 in word(),
        n in -5i64..=5,
    ) {
        let app = parse_app(&random_app_source(&mut ChaCha8Rng::seed_from_u64(seed), 6)).unwrap();
        let a = eval_concrete(&app, &app_driver(), &inputs(&e1, &e2, n)).unwrap();
        let b = eval_concrete(&app, &app_driver(), &inputs(&e1, &e2, n)).unwrap();
        prop_assert_eq!(&a, &b);
        for id in &a.executed {
            prop_assert!(app.stmt(*id).is_some(), "unknown statement {id}");
        }
        for (site, _) in &a.branches {
            prop_assert!(a.executed.contains(site));
        }
        for call in &a.sink_calls {
            prop_assert!(a.executed.contains(&call.stmt));
        }
    }
}
