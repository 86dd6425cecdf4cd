//! Generators and brute-force oracles shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeSet;

use consicore::analysis::Driver;
use consicore::ir::{eval_concrete, CmpOp, InputMap, MiniApp, Side, StmtId};
use consicore::symbolic::{Constraint, Model, Origin, Pred, Sort, SymExpr, SymVar, Value};
use rand::seq::SliceRandom;
use rand::Rng;

// ---------------------------------------------------------------- apps

/// Input domain shared by generated apps, the engine and the brute-force oracle.
pub const APP_ALPHABET: [char; 2] = ['a', 'b'];
pub const APP_STR_LEN: usize = 3;
pub const APP_INT_BOUND: i64 = 5;

fn short_const(rng: &mut impl Rng) -> String {
    let len = rng.gen_range(0..=2);
    (0..len).map(|_| *APP_ALPHABET.choose(rng).unwrap()).collect()
}

fn op(rng: &mut impl Rng) -> &'static str {
    ["<", "<=", ">", ">=", "==", "!="].choose(rng).unwrap()
}

fn cond(rng: &mut impl Rng, depth: usize) -> String {
    let k = rng.gen_range(-3..=3);
    let m = rng.gen_range(-6..=6);
    match rng.gen_range(0..11) {
        0 => format!("s == \"{}\"", short_const(rng)),
        1 => format!("u == \"{}\"", short_const(rng)),
        2 => "s == u".into(),
        3 => format!("contains(s, \"{}\")", short_const(rng)),
        4 => "contains(u, s)".into(),
        5 => format!("s + \"{}\" == \"{}\"", APP_ALPHABET.choose(rng).unwrap(), short_const(rng)),
        6 => format!("n {} {m}", op(rng)),
        7 => format!("n + {k} {} {m}", op(rng)),
        8 => format!("n * {k} {} {m}", op(rng)),
        9 => format!("a < {}", rng.gen_range(0..3)),
        _ if depth == 0 => format!("!({})", cond(rng, 1)),
        _ => format!("n > {m}"),
    }
}

fn simple(rng: &mut impl Rng) -> String {
    match rng.gen_range(0..6) {
        0 => "a = a + 1".into(),
        1 => format!("s = s + \"{}\"", APP_ALPHABET.choose(rng).unwrap()),
        2 => format!("n = n + {}", rng.gen_range(-2..=2)),
        3 => "setText(t1, s)".into(),
        4 => "r = rawQuery(\"SELECT * FROM t WHERE a='\" + s + \"'\")".into(),
        _ => "setText(t1, r)".into(),
    }
}

fn block(rng: &mut impl Rng, sites: &mut usize, indent: usize) -> String {
    let pad = " ".repeat(indent);
    let mut out = String::new();
    for _ in 0..rng.gen_range(1..=3) {
        if *sites > 0 && rng.gen_bool(0.6) {
            *sites -= 1;
            let c = cond(rng, 0);
            let then = block(rng, sites, indent + 4);
            let els = if rng.gen_bool(0.5) {
                block(rng, sites, indent + 4)
            } else {
                String::new()
            };
            out.push_str(&format!("{pad}if ({c}) {{\n{then}{pad}}} else {{\n{els}{pad}}}\n"));
        } else {
            out.push_str(&format!("{pad}{}\n", simple(rng)));
        }
    }
    out
}

/// Source of a one-activity app with at most `max_sites` branch sites over
/// two text inputs (`s`, `u`) and one numeric input (`n`).
pub fn random_app_source(rng: &mut impl Rng, max_sites: usize) -> String {
    let mut sites = max_sites;
    let body = block(rng, &mut sites, 12);
    format!(
        r#"app "gen" {{
    activity Main {{
        widget edit e1
        widget edit e2
        widget edit e3
        widget button b1
        widget text t1
        oncreate {{
            s = input(e1)
            u = input(e2)
            n = int(input(e3))
            a = 0
            r = ""
        }}
        onclick(b1) {{
{body}        }}
    }}
}}
"#
    )
}

pub fn app_driver() -> Driver {
    Driver::click("Main", "b1")
}

pub fn strings_upto(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &layer {
            for c in alphabet {
                let mut t = s.clone();
                t.push(*c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Branch sequences of every concrete run over the whole input domain.
pub fn brute_force_paths(app: &MiniApp, driver: &Driver) -> BTreeSet<Vec<(StmtId, Side)>> {
    let strs = strings_upto(&APP_ALPHABET, APP_STR_LEN);
    let mut out = BTreeSet::new();
    for e1 in &strs {
        for e2 in &strs {
            for n in -APP_INT_BOUND..=APP_INT_BOUND {
                let inputs: InputMap = [("e1", e1.clone()), ("e2", e2.clone()), ("e3", n.to_string())]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect();
                let t = eval_concrete(app, driver, &inputs).expect("generated apps run");
                out.insert(t.branches);
            }
        }
    }
    out
}

// ---------------------------------------------------------------- constraints

pub fn test_var(id: u32, sort: Sort) -> SymVar {
    SymVar {
        id,
        sort,
        origin: Origin::SourceWidget {
            widget: format!("w{id}"),
        },
        name: format!("V{id}"),
    }
}

/// A randomized instance with its search domain.
#[derive(Debug, Clone)]
pub struct Instance {
    pub vars: Vec<SymVar>,
    pub constraints: Vec<Constraint>,
    pub int_bound: i64,
    pub str_max_len: usize,
    pub alphabet: Vec<char>,
}

const POOL: [char; 4] = ['a', 'b', '1', '\''];

fn const_over(rng: &mut impl Rng, alphabet: &[char], max: usize) -> String {
    let len = rng.gen_range(0..=max);
    (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

fn int_term(rng: &mut impl Rng, ints: &[&SymVar], nonlinear: bool) -> SymExpr {
    let v = SymExpr::var(ints.choose(rng).unwrap());
    let mut e = SymExpr::mul(SymExpr::Int(rng.gen_range(-3..=3)), v);
    if ints.len() > 1 && rng.gen_bool(0.5) {
        let w = SymExpr::var(ints.choose(rng).unwrap());
        let t = if nonlinear && rng.gen_bool(0.3) {
            SymExpr::mul(SymExpr::var(ints.choose(rng).unwrap()), w)
        } else {
            SymExpr::mul(SymExpr::Int(rng.gen_range(-3..=3)), w)
        };
        e = SymExpr::add(e, t);
    }
    SymExpr::add(e, SymExpr::Int(rng.gen_range(-5..=5)))
}

fn str_term(rng: &mut impl Rng, strs: &[&SymVar], alphabet: &[char]) -> SymExpr {
    let v = SymExpr::var(strs.choose(rng).unwrap());
    match rng.gen_range(0..3) {
        0 => v,
        1 => SymExpr::concat(v, SymExpr::str(const_over(rng, alphabet, 2))),
        _ => SymExpr::concat(SymExpr::str(const_over(rng, alphabet, 1)), v),
    }
}

/// Up to three variables of mixed sorts and one to four constraints, with
/// bounds small enough for exhaustive enumeration.
pub fn random_instance(rng: &mut impl Rng, nonlinear: bool) -> Instance {
    let nvars = rng.gen_range(1..=3);
    let vars: Vec<SymVar> = (0..nvars)
        .map(|i| test_var(i, if rng.gen_bool(0.5) { Sort::Int } else { Sort::Str }))
        .collect();
    let alphabet: Vec<char> = POOL[..rng.gen_range(2..=4)].to_vec();
    let int_bound = rng.gen_range(3..=20);
    let mut str_max_len = rng.gen_range(1..=4);
    let nstr = vars.iter().filter(|v| v.sort == Sort::Str).count() as u32;
    let nint = nvars - nstr;
    let size = |l: usize| {
        let s: u64 = (0..=l as u32).map(|k| (alphabet.len() as u64).pow(k)).sum();
        s.pow(nstr) * ((2 * int_bound + 1) as u64).pow(nint)
    };
    while str_max_len > 1 && size(str_max_len) > 200_000 {
        str_max_len -= 1;
    }
    let ints: Vec<&SymVar> = vars.iter().filter(|v| v.sort == Sort::Int).collect();
    let strs: Vec<&SymVar> = vars.iter().filter(|v| v.sort == Sort::Str).collect();
    let ops = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne];
    let mut constraints = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        let use_int = !ints.is_empty() && (strs.is_empty() || rng.gen_bool(0.5));
        let pred = if use_int {
            Pred::IntCmp(*ops.choose(rng).unwrap(), int_term(rng, &ints, nonlinear), SymExpr::Int(rng.gen_range(-10..=10)))
        } else {
            match rng.gen_range(0..5) {
                0 | 1 => Pred::StrEq(str_term(rng, &strs, &alphabet), SymExpr::str(const_over(rng, &alphabet, 3))),
                2 => Pred::StrEq(str_term(rng, &strs, &alphabet), str_term(rng, &strs, &alphabet)),
                3 => Pred::StrContains(str_term(rng, &strs, &alphabet), SymExpr::str(const_over(rng, &alphabet, 2))),
                _ => Pred::IntCmp(
                    *ops.choose(rng).unwrap(),
                    SymExpr::coerce_int(SymExpr::var(strs.choose(rng).unwrap())),
                    SymExpr::Int(rng.gen_range(-2..=12)),
                ),
            }
        };
        constraints.push(Constraint::new(pred, rng.gen_bool(0.7)));
    }
    Instance {
        vars,
        constraints,
        int_bound,
        str_max_len,
        alphabet,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum V {
    I(i64),
    S(String),
}

/// Reference semantics written independently of the library evaluator.
fn eval(e: &SymExpr, env: &[(u32, V)]) -> V {
    match e {
        SymExpr::Var(v) => env.iter().find(|(id, _)| *id == v.id).map(|(_, x)| x.clone()).expect("bound"),
        SymExpr::Int(i) => V::I(*i),
        SymExpr::Str(s) => V::S(s.clone()),
        SymExpr::Concat(a, b) => match (eval(a, env), eval(b, env)) {
            (V::S(x), V::S(y)) => V::S(x + &y),
            _ => panic!("ill-sorted concat"),
        },
        SymExpr::Add(a, b) => match (eval(a, env), eval(b, env)) {
            (V::I(x), V::I(y)) => V::I(x.wrapping_add(y)),
            _ => panic!("ill-sorted add"),
        },
        SymExpr::Mul(a, b) => match (eval(a, env), eval(b, env)) {
            (V::I(x), V::I(y)) => V::I(x.wrapping_mul(y)),
            _ => panic!("ill-sorted mul"),
        },
        SymExpr::CoerceInt(a) => match eval(a, env) {
            V::S(s) => V::I(s.parse().unwrap_or(0)),
            _ => panic!("ill-sorted coercion"),
        },
    }
}

fn holds(c: &Constraint, env: &[(u32, V)]) -> bool {
    let raw = match &c.pred {
        Pred::IntCmp(op, a, b) => match (eval(a, env), eval(b, env)) {
            (V::I(x), V::I(y)) => match op {
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::Ge => x >= y,
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
            },
            _ => panic!("ill-sorted comparison"),
        },
        Pred::StrEq(a, b) => eval(a, env) == eval(b, env),
        Pred::StrContains(a, b) => match (eval(a, env), eval(b, env)) {
            (V::S(x), V::S(y)) => x.contains(&y),
            _ => panic!("ill-sorted contains"),
        },
    };
    raw == c.positive
}

/// Checks `model` against the reference semantics.
pub fn model_satisfies(inst: &Instance, model: &Model) -> bool {
    let env: Vec<(u32, V)> = inst
        .vars
        .iter()
        .filter_map(|v| {
            model.get(v).map(|x| {
                (
                    v.id,
                    match x {
                        Value::Int(i) => V::I(*i),
                        Value::Str(s) => V::S(s.clone()),
                    },
                )
            })
        })
        .collect();
    let used: BTreeSet<u32> = inst.constraints.iter().flat_map(|c| c.vars()).map(|v| v.id).collect();
    used.iter().all(|id| env.iter().any(|(i, _)| i == id)) && inst.constraints.iter().all(|c| holds(c, &env))
}

/// Exhaustive search of the instance's domain for a satisfying assignment.
pub fn brute_force_witness(inst: &Instance) -> Option<Vec<(u32, String)>> {
    let strs = strings_upto(&inst.alphabet, inst.str_max_len);
    let domains: Vec<Vec<V>> = inst
        .vars
        .iter()
        .map(|v| match v.sort {
            Sort::Int => (-inst.int_bound..=inst.int_bound).map(V::I).collect(),
            Sort::Str => strs.iter().cloned().map(V::S).collect(),
        })
        .collect();
    let mut idx = vec![0usize; domains.len()];
    loop {
        let env: Vec<(u32, V)> = inst.vars.iter().zip(&idx).map(|(v, &i)| (v.id, domains[v.id as usize][i].clone())).collect();
        if inst.constraints.iter().all(|c| holds(c, &env)) {
            return Some(env.into_iter().map(|(id, v)| (id, format!("{v:?}"))).collect());
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return None;
            }
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
