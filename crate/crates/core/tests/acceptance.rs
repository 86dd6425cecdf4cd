//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{app_driver, brute_force_paths, brute_force_witness, model_satisfies, random_app_source, random_instance};
use common::{APP_ALPHABET, APP_INT_BOUND, APP_STR_LEN};
use consicore::analysis::{analyze_static, Driver};
use consicore::engine::{explore, RunOrigin, SearchConfig, Strategy};
use consicore::ir::{eval_concrete, parse_app, InputMap, MiniApp, Side, StmtId, StmtKind};
use consicore::pipeline::{analyze_app, AppAnalysis};
use consicore::replay::{replay, MiniDb, ReplayOptions, ReplayStatus};
use consicore::symbolic::{solve, Nonlinear, SolveResult, SolverConfig, Value};
use consicore::taint::{render_text, VulnReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn read(name: &str) -> Result<String, String> {
    std::fs::read_to_string(corpus(name)).map_err(|e| format!("{name}: {e}"))
}

fn load(name: &str) -> Result<MiniApp, String> {
    parse_app(&read(name)?).map_err(|e| format!("{name}: {e}"))
}

fn fixture() -> Result<MiniDb, String> {
    MiniDb::from_json(&read("fixtures/school.json")?).map_err(|e| e.to_string())
}

fn analyze(app: &MiniApp, strategy: Strategy) -> Result<AppAnalysis, String> {
    let cfg = SearchConfig {
        strategy,
        ..SearchConfig::default()
    };
    analyze_app(app, &cfg).map_err(|e| e.to_string())
}

fn sole_report(a: &AppAnalysis) -> Result<VulnReport, String> {
    let reports: Vec<&VulnReport> = a.reports().collect();
    ensure!(reports.len() == 1, "{}: expected 1 report, got {}", a.app, reports.len());
    Ok(reports[0].clone())
}

// ---------------------------------------------------------------- 1

fn concolic_worked_example() -> Outcome {
    let start = Instant::now();
    let app = load("testme.mapp")?;
    let cfg = SearchConfig {
        seed: 0,
        solver: SolverConfig {
            nonlinear: Nonlinear::Reject,
            ..SolverConfig::default()
        },
        ..SearchConfig::dfs()
    };
    let r = explore(&app, &Driver::lifecycle("Main"), &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(r.runs.len() >= 3, "only {} runs", r.runs.len());
    let pc1: Vec<String> = r.runs[0].pc.entries.iter().map(|e| e.constraint.to_string()).collect();
    ensure!(pc1 == ["Y0 <= 5"], "run 1 path condition {pc1:?}");
    let run2 = &r.runs[1];
    ensure!(run2.origin == RunOrigin::Solved, "run 2 origin {:?}", run2.origin);
    ensure!(run2.model.by_name("Y0") == Some(&Value::Int(6)), "run 2 model {}", run2.model);
    ensure!(
        r.runs.iter().flat_map(|x| &x.events).any(|e| e.outcome == "unknown"),
        "no solver Unknown recorded"
    );
    let flagged = app
        .statements()
        .into_iter()
        .find(|s| matches!(s.kind, StmtKind::Leak { .. }))
        .map(|s| s.id)
        .ok_or("no flagged statement")?;
    let via_fallback = r.paths.iter().find_map(|p| match r.runs[p.run].origin {
        RunOrigin::Fallback { tries } if p.executed.contains(&flagged) => Some(tries),
        _ => None,
    });
    let tries = via_fallback.ok_or("flagged statement not reached by a fallback run")?;
    ensure!(tries <= 100, "fallback needed {tries} tries");
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("Y0 <= 5, Y0 = 6, fallback after {tries} tries, {elapsed:?}"))
}

// ---------------------------------------------------------------- 2

fn driver_synthesis() -> Outcome {
    let st = analyze_static(&load("student.mapp")?);
    ensure!(st.drivers.len() == 1, "{} drivers", st.drivers.len());
    let got = st.drivers[0].to_string();
    let want = "[Construct(Main), Main.onCreate(), Main.onStart(), Main.onResume(), FindWidget(b1), TriggerEvent(b1, click)]";
    ensure!(got == want, "driver {got}");
    Ok(got)
}

// ---------------------------------------------------------------- 3 and 10

/// Then-before-else DFS visits the leaves of the path tree in lexicographic
/// order, with the then side first wherever two paths diverge.
fn then_first_order(tree: &BTreeSet<Vec<(StmtId, Side)>>) -> Vec<Vec<(StmtId, Side)>> {
    let key = |p: &Vec<(StmtId, Side)>| p.iter().map(|(site, side)| (*site, *side == Side::Else)).collect::<Vec<_>>();
    let mut order: Vec<_> = tree.iter().cloned().collect();
    order.sort_by_key(key);
    order
}

fn inputs(pairs: &[(&str, &str)]) -> InputMap {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// 1-based rank of the first path through `sink` in DFS order over the paths
/// taken by `candidates`.
fn dfs_first_detection(app: &MiniApp, driver: &Driver, candidates: &[InputMap], sink: StmtId) -> Result<usize, String> {
    let mut tree = BTreeSet::new();
    let mut through = BTreeSet::new();
    for c in candidates {
        let t = eval_concrete(app, driver, c).map_err(|e| e.to_string())?;
        if t.executed.contains(&sink) {
            through.insert(t.branches.clone());
        }
        tree.insert(t.branches);
    }
    then_first_order(&tree)
        .iter()
        .position(|p| through.contains(p))
        .map(|i| i + 1)
        .ok_or_else(|| "no path reaches the sink".into())
}

fn sink_of(app: &MiniApp) -> Result<StmtId, String> {
    app.statements()
        .into_iter()
        .find(|s| matches!(s.kind, StmtKind::Sink { .. }))
        .map(|s| s.id)
        .ok_or_else(|| "no sink".into())
}

/// Paths-until-first-detection of DFS on the nested app, derived by
/// enumerating its three feasible paths.
const NESTED_DFS_FIRST_DETECTION: usize = 2;

fn guided_search() -> Outcome {
    let app = load("nested.mapp")?;
    let st = analyze_static(&app);
    ensure!(st.stacks.len() == 1, "{} stacks", st.stacks.len());
    let stack = st.stacks[0].pairs();
    ensure!(stack == [(2, Side::Else), (3, Side::Then)], "stack {stack:?}");
    let candidates: Vec<InputMap> =
        ["", "admin", "#", "x"].iter().map(|s| inputs(&[("e1", s)])).collect();
    let derived = dfs_first_detection(&app, &st.drivers[0], &candidates, sink_of(&app)?)?;
    ensure!(derived == NESTED_DFS_FIRST_DETECTION, "derived dfs {derived}");
    let guided = analyze(&app, Strategy::Guided)?.first_detection();
    let dfs = analyze(&app, Strategy::Dfs)?.first_detection();
    ensure!(guided == Some(1), "guided {guided:?}");
    ensure!(dfs == Some(NESTED_DFS_FIRST_DETECTION), "dfs {dfs:?}");
    Ok(format!("stack {stack:?}, guided 1 < dfs {NESTED_DFS_FIRST_DETECTION}"))
}

/// `n` nested sites on one input; only the path taking every else side
/// reaches the sink.
fn chain_app(n: usize) -> String {
    let mut body = String::from(
        "r = rawQuery(\"SELECT * FROM student WHERE stdno='\" + s + \"'\")\nsetText(t1, r)\n",
    );
    for i in (1..=n).rev() {
        body = format!("if (s == \"k{i}\") {{\n}} else {{\n{body}}}\n");
    }
    format!(
        "app \"chain{n}\" {{\ntable student(stdno, name)\nactivity Main {{\nwidget edit e1\nwidget button b1\nwidget text t1\n\
         oncreate {{\ns = input(e1)\n}}\nonclick(b1) {{\n{body}}}\n}}\n}}\n"
    )
}

fn scaling_sanity() -> Outcome {
    let mut dfs_seen = Vec::new();
    for n in 1..=32 {
        let app = parse_app(&chain_app(n)).map_err(|e| format!("chain {n}: {e}"))?;
        let st = analyze_static(&app);
        ensure!(st.drivers.len() == 1, "chain {n}: {} drivers", st.drivers.len());
        let mut candidates = vec![InputMap::new(), inputs(&[("e1", "zz")])];
        candidates.extend((1..=n).map(|i| inputs(&[("e1", &format!("k{i}"))])));
        let derived = dfs_first_detection(&app, &st.drivers[0], &candidates, sink_of(&app)?)?;
        let guided = analyze(&app, Strategy::Guided)?.first_detection();
        let dfs = analyze(&app, Strategy::Dfs)?.first_detection();
        ensure!(guided.is_some_and(|g| g <= 2), "chain {n}: guided {guided:?}");
        ensure!(dfs == Some(derived), "chain {n}: dfs {dfs:?}, derived {derived}");
        ensure!(dfs_seen.last().is_none_or(|&prev| derived > prev), "chain {n}: dfs did not grow");
        dfs_seen.push(derived);
    }
    Ok(format!("guided <= 2 for n = 1..32, dfs {} .. {}", dfs_seen[0], dfs_seen[31]))
}

// ---------------------------------------------------------------- 4

fn detection_policy() -> Outcome {
    let mut got = Vec::new();
    for name in ["student.mapp", "parametric.mapp", "noleak.mapp"] {
        let a = analyze(&load(name)?, Strategy::Guided)?;
        let protected: usize = a.explorations.iter().map(|e| e.protected.len()).sum();
        got.push((a.detections(), protected));
    }
    ensure!(got == [(1, 0), (0, 1), (0, 0)], "(reports, protected) per app: {got:?}");
    Ok("1 report; 0 reports + 1 protected; 0 reports".into())
}

// ---------------------------------------------------------------- 5

fn report_format() -> Outcome {
    let report = sole_report(&analyze(&load("student.mapp")?, Strategy::Guided)?)?;
    let text = render_text(&report);
    let golden = read("golden/student.report.txt")?;
    ensure!(text == golden, "report differs from golden file:\n{text}");
    for heading in [
        "//STACK TRACE:",
        "//APP'S INPUTS THAT CAUSE INJECTION VULNERABILITY:",
        "//OBJECT THAT CAUSE LEAKAGE:",
        "//INPUTS OF VULNERABLE FUNCTION",
    ] {
        ensure!(text.lines().any(|l| l == heading), "missing heading {heading}");
    }
    ensure!(text.contains("R.id.e1//developer sanitizer for this input is OFF"), "input line");
    ensure!(text.contains("setText()"), "leak line");
    ensure!(report.query_template.matches('{').count() == 1, "template {}", report.query_template);
    Ok("matches golden file".into())
}

// ---------------------------------------------------------------- 6

fn exploit_replay() -> Outcome {
    let db = fixture()?;
    let all_rows = db.table("student").ok_or("fixture lacks student")?.rows.clone();
    let report = sole_report(&analyze(&load("student.mapp")?, Strategy::Guided)?)?;
    let opts = ReplayOptions::default();
    ensure!(opts.payload == "a' or '1'='1", "default payload {}", opts.payload);
    let out = replay(&load("student.mapp")?, &report, &db, &opts).map_err(|e| e.to_string())?;
    ensure!(out.exploited && out.status == ReplayStatus::Exploited, "not exploited: {:?}", out.note);
    let attack = out.attack.as_ref().ok_or("no attack run")?;
    let honest = out.honest.as_ref().ok_or("no honest run")?;
    ensure!(attack.rows == all_rows, "attack rows {:?}", attack.rows);
    ensure!(honest.rows.is_empty(), "honest rows {:?}", honest.rows);
    let twin = replay(&load("parametric.mapp")?, &report, &db, &opts).map_err(|e| e.to_string())?;
    ensure!(!twin.exploited, "parametric twin exploited");
    Ok(format!("attack {} rows, honest 0; twin not exploited", attack.rows.len()))
}

// ---------------------------------------------------------------- 7

fn ipc_path() -> Outcome {
    let app = load("provider.mapp")?;
    let report = sole_report(&analyze(&app, Strategy::Guided)?)?;
    ensure!(report.ipc, "report not flagged IPC-mediated");
    let out = replay(&app, &report, &fixture()?, &ReplayOptions::default()).map_err(|e| e.to_string())?;
    ensure!(out.exploited, "replay did not confirm: {:?}", out.note);
    Ok("1 IPC report, confirmed".into())
}

// ---------------------------------------------------------------- 8

fn solver_soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut sat, mut unsat, mut unknown) = (0, 0, 0);
    for i in 0..1000 {
        let inst = random_instance(&mut rng, true);
        let cfg = SolverConfig {
            int_bound: inst.int_bound,
            str_max_len: inst.str_max_len,
            alphabet: inst.alphabet.clone(),
            nonlinear: Nonlinear::Enumerate,
            ..SolverConfig::default()
        };
        match solve(&inst.constraints, &cfg).map_err(|e| format!("instance {i}: {e}"))? {
            SolveResult::Sat { model } => {
                ensure!(model_satisfies(&inst, &model), "instance {i}: bad model {model} for {inst:?}");
                sat += 1;
            }
            SolveResult::Unsat { .. } => {
                ensure!(brute_force_witness(&inst).is_none(), "instance {i}: Unsat but satisfiable: {inst:?}");
                unsat += 1;
            }
            SolveResult::Unknown { .. } => unknown += 1,
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("{sat} sat, {unsat} unsat, {unknown} unknown, 0 violations, {elapsed:?}"))
}

// ---------------------------------------------------------------- 9

fn tree_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let solver = SolverConfig {
        int_bound: APP_INT_BOUND,
        str_max_len: APP_STR_LEN,
        alphabet: APP_ALPHABET.to_vec(),
        ..SolverConfig::default()
    };
    let mut sizes = BTreeMap::new();
    for i in 0..50 {
        let src = random_app_source(&mut rng, 6);
        let app = parse_app(&src).map_err(|e| format!("app {i}: {e}"))?;
        let want = brute_force_paths(&app, &app_driver());
        let stacks = analyze_static(&app).stacks;
        let mut configs = vec![SearchConfig {
            solver: solver.clone(),
            ..SearchConfig::dfs()
        }];
        if !stacks.is_empty() {
            configs.push(SearchConfig {
                solver: solver.clone(),
                ..SearchConfig::guided(stacks)
            });
        }
        for cfg in &configs {
            let got = explore(&app, &app_driver(), cfg).map_err(|e| format!("app {i}: {e}"))?.path_set();
            ensure!(got == want, "app {i} ({}): {} paths explored, {} feasible\n{src}", cfg.strategy, got.len(), want.len());
        }
        *sizes.entry(want.len()).or_insert(0) += 1;
    }
    Ok(format!("50 apps, 0 mismatches, path counts {sizes:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("concolic worked example", concolic_worked_example),
        ("driver synthesis", driver_synthesis),
        ("guided search", guided_search),
        ("detection policy", detection_policy),
        ("report format", report_format),
        ("exploit replay", exploit_replay),
        ("IPC path", ipc_path),
        ("solver soundness", solver_soundness),
        ("tree equivalence", tree_equivalence),
        ("scaling sanity", scaling_sanity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
