mod common;

use std::collections::BTreeSet;

use common::{app_driver, brute_force_paths, random_app_source, APP_ALPHABET, APP_INT_BOUND, APP_STR_LEN};
use consicore::analysis::analyze_static;
use consicore::engine::{explore, witness_of, ExplorationResult, SearchConfig, Strategy};
use consicore::ir::{eval_concrete, parse_app, MiniApp};
use consicore::symbolic::{satisfies, SolverConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gen_app(seed: u64, sites: usize) -> MiniApp {
    let src = random_app_source(&mut ChaCha8Rng::seed_from_u64(seed), sites);
    parse_app(&src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

fn small_domain(strategy: Strategy, app: &MiniApp) -> SearchConfig {
    let stacks = if strategy == Strategy::Guided {
        analyze_static(app).stacks
    } else {
        Vec::new()
    };
    SearchConfig {
        strategy: if stacks.is_empty() { Strategy::Dfs } else { strategy },
        stacks,
        solver: SolverConfig {
            int_bound: APP_INT_BOUND,
            str_max_len: APP_STR_LEN,
            alphabet: APP_ALPHABET.to_vec(),
            ..SolverConfig::default()
        },
        ..SearchConfig::default()
    }
}

fn run(app: &MiniApp, cfg: &SearchConfig) -> ExplorationResult {
    explore(app, &app_driver(), cfg).expect("exploration succeeds")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_path_satisfies_its_condition_and_replays(seed in any::<u64>(), guided in any::<bool>()) {
        let app = gen_app(seed, 5);
        let strategy = if guided { Strategy::Guided } else { Strategy::Dfs };
        let r = run(&app, &small_domain(strategy, &app));
        let mut seen = BTreeSet::new();
        for p in &r.paths {
            prop_assert!(satisfies(&p.pc.constraints(), &p.model).unwrap());
            prop_assert!(seen.insert(p.branches.clone()), "duplicate path {:?}", p.branches);
            let t = eval_concrete(&app, &app_driver(), &witness_of(&p.model)).unwrap();
            prop_assert_eq!(&t.branches, &p.branches);
            prop_assert_eq!(&t.executed, &p.executed);
        }
        prop_assert!((0.0..=1.0).contains(&r.coverage));
    }

    #[test]
    fn coverage_grows_with_the_path_budget(seed in any::<u64>(), budget in 1usize..6) {
        let app = gen_app(seed, 5);
        let base = small_domain(Strategy::Dfs, &app);
        let low = run(&app, &base.clone().with_max_paths(budget));
        let high = run(&app, &base.with_max_paths(budget + 1));
        prop_assert!(low.coverage <= high.coverage);
        prop_assert!(low.paths.len() <= budget);
    }

    #[test]
    fn exploration_is_deterministic(seed in any::<u64>()) {
        let app = gen_app(seed, 4);
        let cfg = small_domain(Strategy::Guided, &app);
        let (a, b) = (run(&app, &cfg), run(&app, &cfg));
        prop_assert_eq!(a.path_set(), b.path_set());
        prop_assert_eq!(
            a.paths.iter().map(|p| p.branches.clone()).collect::<Vec<_>>(),
            b.paths.iter().map(|p| p.branches.clone()).collect::<Vec<_>>()
        );
        prop_assert_eq!(a.reports, b.reports);
    }

    #[test]
    fn explored_tree_equals_brute_force(seed in any::<u64>()) {
        let app = gen_app(seed, 3);
        let want = brute_force_paths(&app, &app_driver());
        prop_assert_eq!(run(&app, &small_domain(Strategy::Dfs, &app)).path_set(), want.clone());
        prop_assert_eq!(run(&app, &small_domain(Strategy::Guided, &app)).path_set(), want);
    }
}
