use super::*;
use crate::analysis::{analyze_static, BranchEntry};
use crate::ir::parse_app;
use crate::symbolic::{satisfies, Value};

const TESTME: &str = r#"app "testme" {
    activity Main {
        widget edit ex
        widget edit ey
        widget text out
        oncreate {
            x = int(input(ex))
            y = int(input(ey))
            call testMe(x, y)
        }
    }
    fn testMe(x: int, y: int) {
        if (y > 5) {
            if (x * x * x > 10) {
                setText(out, "reached")
            }
        }
    }
}"#;

const NESTED: &str = r##"app "nested" {
    activity Main {
        widget edit e1
        widget button b1
        widget text t1
        oncreate { s = input(e1) }
        onclick(b1) {
            if (s == "admin") {
            } else {
                if (contains(s, "#")) {
                    r = rawQuery("SELECT * FROM t WHERE a='" + s + "'")
                    setText(t1, r)
                }
            }
        }
    }
}"##;

fn first_driver(app: &MiniApp) -> Driver {
    analyze_static(app).drivers.into_iter().next().expect("a driver")
}

#[test]
fn straight_line_is_one_full_path() {
    let app = parse_app(
        r#"app "s" { activity Main { widget edit e1 oncreate { a = input(e1) b = a + "x" } } }"#,
    )
    .unwrap();
    let r = explore(&app, &Driver::lifecycle("Main"), &SearchConfig::dfs()).unwrap();
    assert_eq!(r.paths.len(), 1);
    assert_eq!(r.coverage, 1.0);
    assert_eq!(r.stop, StopReason::Exhausted);
}

#[test]
fn string_equality_gives_two_paths() {
    let app = parse_app(
        r#"app "k" { activity Main { widget edit e1 oncreate {
            s = input(e1)
            if (s == "k") { a = 1 } else { a = 2 }
        } } }"#,
    )
    .unwrap();
    let r = explore(&app, &Driver::lifecycle("Main"), &SearchConfig::dfs()).unwrap();
    assert_eq!(r.paths.len(), 2);
    let texts: Vec<Value> = r.paths.iter().map(|p| p.model.by_name("S0").unwrap().clone()).collect();
    assert_eq!(texts[0], Value::Str("k".into()));
    assert_ne!(texts[1], Value::Str("k".into()));
    assert_eq!(r.coverage, 1.0);
    for p in &r.paths {
        assert!(satisfies(&p.pc.constraints(), &p.model).unwrap());
    }
}

#[test]
fn testme_runs_follow_the_narrative() {
    let app = parse_app(TESTME).unwrap();
    let r = explore(&app, &Driver::lifecycle("Main"), &SearchConfig::dfs()).unwrap();
    let run1 = &r.runs[0];
    assert_eq!(run1.origin, RunOrigin::Initial);
    assert_eq!(run1.pc.entries.len(), 1);
    assert_eq!(run1.pc.entries[0].constraint.to_string(), "Y0 <= 5");
    let run2 = &r.runs[1];
    assert_eq!(run2.origin, RunOrigin::Solved);
    assert_eq!(run2.model.by_name("Y0"), Some(&Value::Int(6)));
    assert!(r.runs.iter().flat_map(|x| &x.events).any(|e| e.outcome == "unknown"));
    let run3 = &r.runs[2];
    let RunOrigin::Fallback { tries } = run3.origin else {
        panic!("third run should come from random fallback, got {:?}", run3.origin)
    };
    assert!(tries <= 100);
    assert!(run3.completed);
    let flagged = app.statements().into_iter().find(|s| matches!(s.kind, crate::ir::StmtKind::Leak { .. })).unwrap().id;
    assert!(r.paths[0].executed.contains(&flagged));
    assert_eq!(r.paths.len(), 3);
}

#[test]
fn nested_guided_beats_dfs() {
    let app = parse_app(NESTED).unwrap();
    let st = analyze_static(&app);
    assert_eq!(st.stacks[0].pairs(), vec![(2, Side::Else), (3, Side::Then)]);
    let driver = first_driver(&app);
    let guided = explore(&app, &driver, &SearchConfig::guided(st.stacks.clone())).unwrap();
    let dfs = explore(&app, &driver, &SearchConfig::dfs()).unwrap();
    assert_eq!(guided.paths_until_first_detection, Some(1));
    assert_eq!(dfs.paths_until_first_detection, Some(2));
    assert_eq!(guided.path_set(), dfs.path_set());
    assert_eq!(guided.reports.len(), 1);
}

#[test]
fn empty_stack_matches_dfs_order() {
    let app = parse_app(NESTED).unwrap();
    let driver = first_driver(&app);
    let empty = vec![BranchStack {
        sink: 4,
        entries: Vec::new(),
    }];
    let g = explore(&app, &driver, &SearchConfig::guided(empty)).unwrap();
    let d = explore(&app, &driver, &SearchConfig::dfs()).unwrap();
    let order = |r: &ExplorationResult| r.paths.iter().map(|p| p.branches.clone()).collect::<Vec<_>>();
    assert_eq!(order(&g), order(&d));
    assert_eq!(
        order(&d),
        vec![vec![(2, Side::Then)], vec![(2, Side::Else), (3, Side::Then)], vec![(2, Side::Else), (3, Side::Else)]]
    );
}

#[test]
fn partial_stack_only_steers_its_site() {
    let app = parse_app(NESTED).unwrap();
    let driver = first_driver(&app);
    let only3 = vec![BranchStack {
        sink: 4,
        entries: vec![BranchEntry {
            site: 3,
            side: Side::Else,
        }],
    }];
    let g = explore(&app, &driver, &SearchConfig::guided(only3)).unwrap();
    let order: Vec<Vec<(StmtId, Side)>> = g.paths.iter().map(|p| p.branches.clone()).collect();
    assert_eq!(
        order,
        vec![
            vec![(2, Side::Then)],
            vec![(2, Side::Else), (3, Side::Else)],
            vec![(2, Side::Else), (3, Side::Then)],
        ]
    );
}

#[test]
fn guided_without_stacks_is_rejected() {
    let app = parse_app(NESTED).unwrap();
    let cfg = SearchConfig {
        strategy: Strategy::Guided,
        ..SearchConfig::default()
    };
    assert!(matches!(explore(&app, &first_driver(&app), &cfg), Err(EngineError::Config(_))));
}

#[test]
fn unknown_driver_target_is_an_error() {
    let app = parse_app(NESTED).unwrap();
    let err = explore(&app, &Driver::lifecycle("Nope"), &SearchConfig::dfs()).unwrap_err();
    assert_eq!(err, EngineError::Eval(EvalError::UnknownComponent("Nope".into())));
}

#[test]
fn first_hit_stops_early() {
    let app = parse_app(NESTED).unwrap();
    let driver = first_driver(&app);
    let cfg = SearchConfig {
        first_hit: true,
        ..SearchConfig::dfs()
    };
    let r = explore(&app, &driver, &cfg).unwrap();
    assert_eq!(r.stop, StopReason::FirstHit);
    assert_eq!(r.paths.len(), 2);
}

#[test]
fn exploration_is_deterministic() {
    let app = parse_app(TESTME).unwrap();
    let run = || {
        let mut v = serde_json::to_value(explore(&app, &Driver::lifecycle("Main"), &SearchConfig::dfs()).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_ms");
        v
    };
    assert_eq!(run(), run());
}

#[test]
fn sink_results_are_symbolic_and_steerable() {
    let app = parse_app(
        r#"app "r" { activity Main { widget text t1 oncreate {
            r = rawQuery("SELECT * FROM t")
            if (r == "x") { setText(t1, "hit") }
        } } }"#,
    )
    .unwrap();
    let r = explore(&app, &Driver::lifecycle("Main"), &SearchConfig::dfs()).unwrap();
    assert_eq!(r.paths.len(), 2);
    assert_eq!(r.paths[0].model.by_name("R0"), Some(&Value::Str("x".into())));
    assert!(r.reports.is_empty());
}
