use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    eval_constraint, satisfies, Constraint, Model, PathCondition, Pred, Sort, SymError, SymExpr,
    SymVar, Value,
};
use crate::ir::CmpOp;

/// Lowercase letters, digits, quote, space, `=` and `-`.
pub const DEFAULT_ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz0123456789' =-";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinear {
    /// Products of two symbolic operands make the instance Unknown.
    Reject,
    /// Products are handled by bounded enumeration like everything else.
    Enumerate,
}

impl std::str::FromStr for Nonlinear {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reject" => Ok(Nonlinear::Reject),
            "enumerate" => Ok(Nonlinear::Enumerate),
            other => Err(format!("unknown nonlinear mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Integers range over `[-int_bound, int_bound]`.
    pub int_bound: i64,
    pub str_max_len: usize,
    pub alphabet: Vec<char>,
    pub nonlinear: Nonlinear,
    /// Candidate evaluations allowed per variable group before giving up.
    pub search_cap: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            int_bound: 1000,
            str_max_len: 16,
            alphabet: DEFAULT_ALPHABET.chars().collect(),
            nonlinear: Nonlinear::Reject,
            search_cap: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum SolveResult {
    Sat { model: Model },
    /// No solution. `bounded` means none within the configured bounds.
    Unsat { bounded: bool },
    /// Outside the solver's fragment or budget.
    Unknown { reason: String },
}

impl SolveResult {
    pub fn model(&self) -> Option<&Model> {
        match self {
            SolveResult::Sat { model } => Some(model),
            _ => None,
        }
    }

    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat { .. })
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, SolveResult::Unknown { .. })
    }

    fn unknown(reason: impl Into<String>) -> Self {
        SolveResult::Unknown {
            reason: reason.into(),
        }
    }
}

/// Constraints `0..k` as recorded plus constraint `k` negated.
pub fn negate_last(pc: &PathCondition, k: usize) -> Result<Vec<Constraint>, SymError> {
    if k >= pc.len() {
        return Err(SymError::IndexOutOfRange { k, len: pc.len() });
    }
    let mut out: Vec<Constraint> = pc.entries[..k].iter().map(|e| e.constraint.clone()).collect();
    out.push(pc.entries[k].constraint.negated());
    Ok(out)
}

/// Decides a conjunction of constraints. Every returned model has been
/// checked against all of them.
pub fn solve(cs: &[Constraint], cfg: &SolverConfig) -> Result<SolveResult, SymError> {
    for c in cs {
        c.check_sorts()?;
    }
    let mut open = Vec::new();
    for c in cs {
        if c.is_symbolic() {
            if let Some(reason) = unsupported(c, cfg) {
                return Ok(SolveResult::unknown(reason));
            }
            open.push(c.clone());
        } else if !eval_constraint(c, &Model::new())? {
            return Ok(SolveResult::Unsat { bounded: false });
        }
    }

    let mut model = Model::new();
    let mut outcome: Option<SolveResult> = None;
    for group in components(&open) {
        let vars: BTreeSet<SymVar> = group.iter().flat_map(|c| c.vars()).collect();
        let sorts: BTreeSet<Sort> = vars.iter().map(|v| v.sort).collect();
        let res = match sorts.iter().next() {
            Some(Sort::Int) if sorts.len() == 1 => IntSolver::new(&group, &vars, cfg).solve(),
            Some(Sort::Str) if sorts.len() == 1 => solve_strings(&group, &vars, cfg)?,
            _ => solve_mixed(&group, &vars, cfg)?,
        };
        match res {
            SolveResult::Sat { model: m } => model = model.merged(&m),
            SolveResult::Unsat { bounded: false } => return Ok(SolveResult::Unsat { bounded: false }),
            SolveResult::Unsat { bounded: true } => outcome = Some(SolveResult::Unsat { bounded: true }),
            unknown @ SolveResult::Unknown { .. } => {
                if outcome.is_none() {
                    outcome = Some(unknown);
                }
            }
        }
    }
    if let Some(o) = outcome {
        return Ok(o);
    }
    if !satisfies(cs, &model)? {
        return Ok(SolveResult::unknown("candidate model failed verification"));
    }
    Ok(SolveResult::Sat { model })
}

fn unsupported(c: &Constraint, cfg: &SolverConfig) -> Option<String> {
    fn walk(e: &SymExpr, cfg: &SolverConfig) -> Option<String> {
        match e {
            SymExpr::Mul(a, b)
                if a.is_symbolic() && b.is_symbolic() && cfg.nonlinear == Nonlinear::Reject =>
            {
                Some(format!("nonlinear product `{e}`"))
            }
            SymExpr::Concat(a, b) | SymExpr::Add(a, b) | SymExpr::Mul(a, b) => {
                walk(a, cfg).or_else(|| walk(b, cfg))
            }
            SymExpr::CoerceInt(a) => walk(a, cfg),
            _ => None,
        }
    }
    let (a, b) = match &c.pred {
        Pred::IntCmp(_, a, b) | Pred::StrEq(a, b) | Pred::StrContains(a, b) => (a, b),
    };
    walk(a, cfg).or_else(|| walk(b, cfg))
}

/// Groups constraints that share variables, ordered by their smallest variable.
fn components(cs: &[Constraint]) -> Vec<Vec<Constraint>> {
    let var_sets: Vec<BTreeSet<SymVar>> = cs.iter().map(|c| c.vars()).collect();
    let mut group_of: Vec<usize> = (0..cs.len()).collect();
    fn find(g: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while g[r] != r {
            r = g[r];
        }
        let mut i = i;
        while g[i] != r {
            let next = g[i];
            g[i] = r;
            i = next;
        }
        r
    }
    for i in 0..cs.len() {
        for j in (i + 1)..cs.len() {
            if !var_sets[i].is_disjoint(&var_sets[j]) {
                let (a, b) = (find(&mut group_of, i), find(&mut group_of, j));
                if a != b {
                    group_of[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<SymVar, Vec<Constraint>> = BTreeMap::new();
    let mut roots: BTreeMap<usize, SymVar> = BTreeMap::new();
    for (i, vars) in var_sets.iter().enumerate() {
        let r = find(&mut group_of, i);
        let min = vars.iter().next().expect("symbolic constraint").clone();
        let e = roots.entry(r).or_insert(min.clone());
        if min < *e {
            *e = min;
        }
    }
    for (i, c) in cs.iter().enumerate() {
        let r = find(&mut group_of, i);
        groups.entry(roots[&r].clone()).or_default().push(c.clone());
    }
    groups.into_values().collect()
}

/// `Σ coeffs·v + constant`, in wide arithmetic.
#[derive(Debug, Clone, Default)]
struct Lin {
    coeffs: BTreeMap<usize, i128>,
    constant: i128,
}

impl Lin {
    fn small(&self) -> bool {
        const LIMIT: i128 = 1 << 40;
        self.constant.abs() < LIMIT && self.coeffs.values().all(|c| c.abs() < LIMIT)
    }

    fn scale(mut self, k: i128) -> Option<Lin> {
        for c in self.coeffs.values_mut() {
            *c = c.checked_mul(k)?;
        }
        self.constant = self.constant.checked_mul(k)?;
        Some(self)
    }

    fn plus(mut self, other: Lin, sign: i128) -> Option<Lin> {
        for (v, c) in other.coeffs {
            let e = self.coeffs.entry(v).or_insert(0);
            *e = e.checked_add(c.checked_mul(sign)?)?;
        }
        self.constant = self.constant.checked_add(other.constant.checked_mul(sign)?)?;
        self.coeffs.retain(|_, c| *c != 0);
        Some(self)
    }
}

/// A linear constraint `lin op 0`.
struct LinCon {
    lin: Lin,
    op: CmpOp,
}

struct IntSolver<'a> {
    cs: &'a [Constraint],
    vars: Vec<SymVar>,
    cfg: &'a SolverConfig,
    lins: Vec<LinCon>,
    all_linear: bool,
}

impl<'a> IntSolver<'a> {
    fn new(cs: &'a [Constraint], vars: &BTreeSet<SymVar>, cfg: &'a SolverConfig) -> Self {
        let vars: Vec<SymVar> = vars.iter().cloned().collect();
        let mut lins = Vec::new();
        let mut all_linear = true;
        for c in cs {
            let Pred::IntCmp(op, a, b) = &c.pred else {
                unreachable!("integer group holds only comparisons")
            };
            let op = if c.positive { *op } else { op.negate() };
            match (linear(a, &vars), linear(b, &vars)) {
                (Some(la), Some(lb)) => match la.plus(lb, -1) {
                    // Exact arithmetic agrees with wrapping arithmetic only
                    // for moderate magnitudes.
                    Some(lin) if lin.small() => lins.push(LinCon { lin, op }),
                    _ => all_linear = false,
                },
                _ => all_linear = false,
            }
        }
        IntSolver {
            cs,
            vars,
            cfg,
            lins,
            all_linear,
        }
    }

    fn solve(&self) -> SolveResult {
        let b = self.cfg.int_bound.max(0);
        let mut lo = vec![-b; self.vars.len()];
        let mut hi = vec![b; self.vars.len()];
        if !self.propagate(&mut lo, &mut hi) {
            return SolveResult::Unsat { bounded: true };
        }
        let mut enumerator = Enumerator {
            lo: &lo,
            hi: &hi,
            budget: self.cfg.search_cap,
            spent: 0,
        };
        let min_mag: Vec<i64> = (0..lo.len()).map(|i| min_magnitude(lo[i], hi[i])).collect();
        let max_mag: Vec<i64> = (0..lo.len()).map(|i| lo[i].abs().max(hi[i].abs())).collect();
        let (smin, smax): (i64, i64) = (min_mag.iter().sum(), max_mag.iter().sum());
        for level in smin..=smax {
            let Some(mut cands) = enumerator.level(level, &min_mag, &max_mag) else {
                return SolveResult::unknown("integer search budget exhausted");
            };
            cands.sort_by_key(|vals| tie_key(vals));
            for vals in cands {
                if self.check(&vals) {
                    let mut m = Model::new();
                    for (v, x) in self.vars.iter().zip(vals) {
                        m.insert(v.clone(), Value::Int(x));
                    }
                    return SolveResult::Sat { model: m };
                }
            }
        }
        SolveResult::Unsat { bounded: true }
    }

    fn check(&self, vals: &[i64]) -> bool {
        if self.all_linear {
            self.lins.iter().all(|c| {
                let mut sum = c.lin.constant;
                for (&i, &k) in &c.lin.coeffs {
                    sum += k * vals[i] as i128;
                }
                match i64::try_from(sum) {
                    Ok(s) => c.op.holds(s, 0),
                    Err(_) => c.op.holds(sum.signum() as i64, 0),
                }
            })
        } else {
            let mut m = Model::new();
            for (v, x) in self.vars.iter().zip(vals) {
                m.insert(v.clone(), Value::Int(*x));
            }
            self.cs.iter().all(|c| eval_constraint(c, &m).unwrap_or(false))
        }
    }

    /// Interval propagation over the linear constraints. False when a domain
    /// empties.
    fn propagate(&self, lo: &mut [i64], hi: &mut [i64]) -> bool {
        for _ in 0..32 {
            let mut changed = false;
            for c in &self.lins {
                for (&v, &a) in &c.lin.coeffs {
                    let (mut rmin, mut rmax) = (c.lin.constant, c.lin.constant);
                    for (&w, &k) in &c.lin.coeffs {
                        if w == v {
                            continue;
                        }
                        let (x, y) = (k * lo[w] as i128, k * hi[w] as i128);
                        rmin += x.min(y);
                        rmax += x.max(y);
                    }
                    // a·v + r op 0 for some r in [rmin, rmax]
                    let (av_lo, av_hi) = match c.op {
                        CmpOp::Eq => (Some(-rmax), Some(-rmin)),
                        CmpOp::Lt => (None, Some(-rmin - 1)),
                        CmpOp::Le => (None, Some(-rmin)),
                        CmpOp::Gt => (Some(-rmax + 1), None),
                        CmpOp::Ge => (Some(-rmax), None),
                        CmpOp::Ne => (None, None),
                    };
                    let (mut nlo, mut nhi) = (lo[v] as i128, hi[v] as i128);
                    let (vlo, vhi) = if a > 0 {
                        (av_lo.map(|x| div_ceil(x, a)), av_hi.map(|x| div_floor(x, a)))
                    } else {
                        (av_hi.map(|x| div_ceil(x, a)), av_lo.map(|x| div_floor(x, a)))
                    };
                    if let Some(x) = vlo {
                        nlo = nlo.max(x);
                    }
                    if let Some(x) = vhi {
                        nhi = nhi.min(x);
                    }
                    if nlo > nhi {
                        return false;
                    }
                    if nlo as i64 != lo[v] || nhi as i64 != hi[v] {
                        lo[v] = nlo as i64;
                        hi[v] = nhi as i64;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        true
    }
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}

fn min_magnitude(lo: i64, hi: i64) -> i64 {
    if lo <= 0 && 0 <= hi {
        0
    } else {
        lo.abs().min(hi.abs())
    }
}

/// Order within one magnitude level: fewer negatives first, then per variable
/// in id order non-negative before negative and smaller before larger.
fn tie_key(vals: &[i64]) -> (usize, Vec<(bool, i64)>) {
    let negs = vals.iter().filter(|v| **v < 0).count();
    (negs, vals.iter().map(|v| (*v < 0, v.abs())).collect())
}

struct Enumerator<'a> {
    lo: &'a [i64],
    hi: &'a [i64],
    budget: u64,
    spent: u64,
}

impl Enumerator<'_> {
    /// All vectors in the box whose magnitudes sum to `level`; `None` once the
    /// budget is spent.
    fn level(&mut self, level: i64, min_mag: &[i64], max_mag: &[i64]) -> Option<Vec<Vec<i64>>> {
        let n = self.lo.len();
        let mut rest_min = vec![0i64; n + 1];
        let mut rest_max = vec![0i64; n + 1];
        for i in (0..n).rev() {
            rest_min[i] = rest_min[i + 1] + min_mag[i];
            rest_max[i] = rest_max[i + 1] + max_mag[i];
        }
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(n);
        if !self.fill(0, level, &rest_min, &rest_max, min_mag, max_mag, &mut cur, &mut out) {
            return None;
        }
        Some(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn fill(
        &mut self,
        i: usize,
        remaining: i64,
        rest_min: &[i64],
        rest_max: &[i64],
        min_mag: &[i64],
        max_mag: &[i64],
        cur: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) -> bool {
        if i == self.lo.len() {
            if remaining == 0 {
                self.spent += 1;
                if self.spent > self.budget {
                    return false;
                }
                out.push(cur.clone());
            }
            return true;
        }
        let lo_m = min_mag[i].max(remaining - rest_max[i + 1]);
        let hi_m = max_mag[i].min(remaining - rest_min[i + 1]);
        let mut m = lo_m;
        while m <= hi_m {
            let choices: &[i64] = if m == 0 { &[0] } else { &[m, -m] };
            for &x in choices {
                if x >= self.lo[i] && x <= self.hi[i] {
                    cur.push(x);
                    let ok = self.fill(i + 1, remaining - m, rest_min, rest_max, min_mag, max_mag, cur, out);
                    cur.pop();
                    if !ok {
                        return false;
                    }
                }
            }
            m += 1;
        }
        true
    }
}

fn linear(e: &SymExpr, vars: &[SymVar]) -> Option<Lin> {
    Some(match e {
        SymExpr::Int(v) => Lin {
            coeffs: BTreeMap::new(),
            constant: *v as i128,
        },
        SymExpr::Var(v) => {
            let i = vars.iter().position(|x| x == v)?;
            Lin {
                coeffs: BTreeMap::from([(i, 1)]),
                constant: 0,
            }
        }
        SymExpr::Add(a, b) => linear(a, vars)?.plus(linear(b, vars)?, 1)?,
        SymExpr::Mul(a, b) => {
            let (la, lb) = (linear(a, vars)?, linear(b, vars)?);
            if la.coeffs.is_empty() {
                lb.scale(la.constant)?
            } else if lb.coeffs.is_empty() {
                la.scale(lb.constant)?
            } else {
                return None;
            }
        }
        _ => return None,
    })
}

/// Flattened string expression: literal runs and variables.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Part {
    Lit(String),
    Var(SymVar),
}

fn flatten(e: &SymExpr, out: &mut Vec<Part>) {
    match e {
        SymExpr::Str(s) => {
            if s.is_empty() {
                return;
            }
            if let Some(Part::Lit(last)) = out.last_mut() {
                last.push_str(s);
            } else {
                out.push(Part::Lit(s.clone()));
            }
        }
        SymExpr::Var(v) => out.push(Part::Var(v.clone())),
        SymExpr::Concat(a, b) => {
            flatten(a, out);
            flatten(b, out);
        }
        other => unreachable!("non-string node `{other}` in a string group"),
    }
}

fn rebuild(parts: &[Part]) -> SymExpr {
    parts.iter().fold(SymExpr::str(""), |acc, p| {
        SymExpr::concat(
            acc,
            match p {
                Part::Lit(s) => SymExpr::str(s.clone()),
                Part::Var(v) => SymExpr::var(v),
            },
        )
    })
}

enum Strip {
    Contradiction,
    Parts(Vec<Part>, Vec<Part>),
}

/// Cancels equal leading and trailing pieces of both sides of an equation.
fn strip(mut l: Vec<Part>, mut r: Vec<Part>) -> Strip {
    loop {
        match (l.first().cloned(), r.first().cloned()) {
            (Some(Part::Var(a)), Some(Part::Var(b))) if a == b => {
                l.remove(0);
                r.remove(0);
            }
            (Some(Part::Lit(a)), Some(Part::Lit(b))) => {
                let n = a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count();
                let (na, nb) = (a.chars().count(), b.chars().count());
                if n < na.min(nb) {
                    return Strip::Contradiction;
                }
                let rest_a: String = a.chars().skip(n).collect();
                let rest_b: String = b.chars().skip(n).collect();
                l[0] = Part::Lit(rest_a);
                r[0] = Part::Lit(rest_b);
                if let Some(Part::Lit(s)) = l.first() {
                    if s.is_empty() {
                        l.remove(0);
                    }
                }
                if let Some(Part::Lit(s)) = r.first() {
                    if s.is_empty() {
                        r.remove(0);
                    }
                }
            }
            _ => break,
        }
    }
    loop {
        match (l.last().cloned(), r.last().cloned()) {
            (Some(Part::Var(a)), Some(Part::Var(b))) if a == b => {
                l.pop();
                r.pop();
            }
            (Some(Part::Lit(a)), Some(Part::Lit(b))) => {
                let n = a
                    .chars()
                    .rev()
                    .zip(b.chars().rev())
                    .take_while(|(x, y)| x == y)
                    .count();
                let (na, nb) = (a.chars().count(), b.chars().count());
                if n < na.min(nb) {
                    return Strip::Contradiction;
                }
                let rest_a: String = a.chars().take(na - n).collect();
                let rest_b: String = b.chars().take(nb - n).collect();
                l.pop();
                r.pop();
                if !rest_a.is_empty() {
                    l.push(Part::Lit(rest_a));
                }
                if !rest_b.is_empty() {
                    r.push(Part::Lit(rest_b));
                }
            }
            _ => break,
        }
    }
    Strip::Parts(l, r)
}

enum Step {
    Unsat,
    Bind(SymVar, SymExpr),
    Drop,
    Keep,
}

fn simplify_eq(a: &SymExpr, b: &SymExpr) -> Step {
    let (mut l, mut r) = (Vec::new(), Vec::new());
    flatten(a, &mut l);
    flatten(b, &mut r);
    let (l, r) = match strip(l, r) {
        Strip::Contradiction => return Step::Unsat,
        Strip::Parts(l, r) => (l, r),
    };
    match (l.as_slice(), r.as_slice()) {
        ([], []) => Step::Drop,
        ([], other) | (other, []) => {
            if other.iter().any(|p| matches!(p, Part::Lit(_))) {
                Step::Unsat
            } else if let Some(Part::Var(v)) = other.first() {
                Step::Bind(v.clone(), SymExpr::str(""))
            } else {
                Step::Keep
            }
        }
        ([Part::Var(v)], other) | (other, [Part::Var(v)])
            if !other.iter().any(|p| p == &Part::Var(v.clone())) =>
        {
            Step::Bind(v.clone(), rebuild(other))
        }
        _ => Step::Keep,
    }
}

fn solve_strings(
    group: &[Constraint],
    vars: &BTreeSet<SymVar>,
    cfg: &SolverConfig,
) -> Result<SolveResult, SymError> {
    let mut cs: Vec<Constraint> = group.to_vec();
    let mut bindings: Vec<(SymVar, SymExpr)> = Vec::new();
    'outer: loop {
        for i in 0..cs.len() {
            let c = &cs[i];
            if !c.is_symbolic() {
                if !eval_constraint(c, &Model::new())? {
                    return Ok(SolveResult::Unsat { bounded: false });
                }
                cs.remove(i);
                continue 'outer;
            }
            let Pred::StrEq(a, b) = &c.pred else { continue };
            if !c.positive {
                continue;
            }
            match simplify_eq(a, b) {
                Step::Unsat => return Ok(SolveResult::Unsat { bounded: false }),
                Step::Drop => {
                    cs.remove(i);
                    continue 'outer;
                }
                Step::Bind(v, e) => {
                    cs.remove(i);
                    for c in cs.iter_mut() {
                        *c = c.substitute(&v, &e);
                    }
                    for (_, be) in bindings.iter_mut() {
                        *be = be.substitute(&v, &e);
                    }
                    bindings.push((v, e));
                    continue 'outer;
                }
                Step::Keep => {}
            }
        }
        break;
    }

    let bound: BTreeSet<&SymVar> = bindings.iter().map(|(v, _)| v).collect();
    let free: Vec<SymVar> = vars.iter().filter(|v| !bound.contains(v)).cloned().collect();
    let complete = |assign: &Model| -> Result<Model, SymError> {
        let mut m = assign.clone();
        for (v, e) in &bindings {
            m.insert(v.clone(), super::eval_expr(e, assign)?);
        }
        Ok(m)
    };
    let live: Vec<SymVar> = {
        let s: BTreeSet<SymVar> = cs.iter().flat_map(|c| c.vars()).collect();
        free.iter().filter(|v| s.contains(v)).cloned().collect()
    };
    let mut base = Model::new();
    for v in free.iter().filter(|v| !live.contains(v)) {
        base.insert(v.clone(), Value::Str(String::new()));
    }

    let per_var = space_size(cfg.alphabet.len(), cfg.str_max_len);
    let total = per_var.and_then(|n| n.checked_pow(live.len() as u32));
    let exhaustive = matches!(total, Some(t) if t <= cfg.search_cap as u128);
    let domains: Vec<Vec<String>> = if live.is_empty() {
        Vec::new()
    } else if exhaustive {
        let all = all_strings(&cfg.alphabet, cfg.str_max_len);
        vec![all; live.len()]
    } else {
        let cands = candidates(&cs, cfg);
        vec![cands; live.len()]
    };
    let mut tried: u64 = 0;
    let mut idx = vec![0usize; live.len()];
    if domains.iter().all(|d| !d.is_empty()) {
        loop {
            let mut assign = base.clone();
            for (k, v) in live.iter().enumerate() {
                assign.insert(v.clone(), Value::Str(domains[k][idx[k]].clone()));
            }
            tried += 1;
            if satisfies(&cs, &assign)? {
                return Ok(SolveResult::Sat {
                    model: complete(&assign)?,
                });
            }
            if tried >= cfg.search_cap {
                return Ok(SolveResult::unknown("string search budget exhausted"));
            }
            let mut k = live.len();
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < domains[k].len() {
                    break;
                }
                idx[k] = 0;
                if k == 0 {
                    k = usize::MAX;
                    break;
                }
            }
            if k == usize::MAX || live.is_empty() {
                break;
            }
        }
    }
    Ok(if exhaustive {
        SolveResult::Unsat { bounded: true }
    } else {
        SolveResult::unknown("no candidate string satisfies the constraints")
    })
}

/// Plain bounded enumeration for groups linking integer and string
/// variables through coercions. Integers are tried by increasing magnitude.
fn solve_mixed(group: &[Constraint], vars: &BTreeSet<SymVar>, cfg: &SolverConfig) -> Result<SolveResult, SymError> {
    let vars: Vec<&SymVar> = vars.iter().collect();
    let ints = (2 * cfg.int_bound as u128).saturating_add(1);
    let strs = space_size(cfg.alphabet.len(), cfg.str_max_len);
    let mut total: Option<u128> = Some(1);
    for v in &vars {
        let n = match v.sort {
            Sort::Int => Some(ints),
            Sort::Str => strs,
        };
        total = total.zip(n).and_then(|(t, n)| t.checked_mul(n));
    }
    if !matches!(total, Some(t) if t <= cfg.search_cap as u128) {
        return Ok(SolveResult::unknown("mixed integer and string search space exceeds the budget"));
    }
    let int_dom: Vec<Value> = (0..=cfg.int_bound)
        .flat_map(|m| if m == 0 { vec![0] } else { vec![m, -m] })
        .map(Value::Int)
        .collect();
    let str_dom: Vec<Value> = all_strings(&cfg.alphabet, cfg.str_max_len).into_iter().map(Value::Str).collect();
    let doms: Vec<&Vec<Value>> = vars
        .iter()
        .map(|v| if v.sort == Sort::Int { &int_dom } else { &str_dom })
        .collect();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let mut m = Model::new();
        for (k, v) in vars.iter().enumerate() {
            m.insert((*v).clone(), doms[k][idx[k]].clone());
        }
        if satisfies(group, &m)? {
            return Ok(SolveResult::Sat { model: m });
        }
        let mut k = vars.len();
        loop {
            if k == 0 {
                return Ok(SolveResult::Unsat { bounded: true });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < doms[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn space_size(alphabet: usize, max_len: usize) -> Option<u128> {
    let mut total: u128 = 0;
    let mut layer: u128 = 1;
    for _ in 0..=max_len {
        total = total.checked_add(layer)?;
        layer = layer.checked_mul(alphabet as u128)?;
    }
    Some(total)
}

/// Every string up to `max_len` over `alphabet`, shortest first, then in
/// alphabet order.
fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
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

/// Heuristic values for large search spaces: the empty string, constants of
/// the constraints, their substrings and pairwise concatenations, and single
/// alphabet characters.
fn candidates(cs: &[Constraint], cfg: &SolverConfig) -> Vec<String> {
    fn consts(e: &SymExpr, out: &mut BTreeSet<String>) {
        match e {
            SymExpr::Str(s) => {
                out.insert(s.clone());
            }
            SymExpr::Concat(a, b) => {
                consts(a, out);
                consts(b, out);
            }
            _ => {}
        }
    }
    let mut lits = BTreeSet::new();
    for c in cs {
        let (a, b) = match &c.pred {
            Pred::IntCmp(_, a, b) | Pred::StrEq(a, b) | Pred::StrContains(a, b) => (a, b),
        };
        consts(a, &mut lits);
        consts(b, &mut lits);
    }
    let mut set: BTreeSet<String> = BTreeSet::new();
    set.insert(String::new());
    for l in &lits {
        let chars: Vec<char> = l.chars().collect();
        if chars.len() <= 24 {
            for i in 0..chars.len() {
                for j in (i + 1)..=chars.len() {
                    set.insert(chars[i..j].iter().collect());
                }
            }
        } else {
            set.insert(l.clone());
        }
    }
    for a in &lits {
        for b in &lits {
            set.insert(format!("{a}{b}"));
        }
    }
    for c in &cfg.alphabet {
        set.insert(c.to_string());
    }
    let mut v: Vec<String> = set.into_iter().collect();
    v.sort_by(|a, b| a.chars().count().cmp(&b.chars().count()).then_with(|| a.cmp(b)));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Side;
    use crate::symbolic::{Origin, Sort};

    fn var(id: u32, sort: Sort) -> SymVar {
        let prefix = if sort == Sort::Str { 'S' } else { 'I' };
        SymVar {
            id,
            sort,
            origin: Origin::SourceWidget {
                widget: format!("w{id}"),
            },
            name: format!("{prefix}{id}"),
        }
    }

    fn cmp(op: CmpOp, a: SymExpr, b: SymExpr) -> Constraint {
        Constraint::new(Pred::IntCmp(op, a, b), true)
    }

    fn sat(cs: &[Constraint], cfg: &SolverConfig) -> Model {
        match solve(cs, cfg).unwrap() {
            SolveResult::Sat { model } => model,
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn negated_le_gives_minimal_six() {
        let y0 = var(0, Sort::Int);
        let c = cmp(CmpOp::Le, SymExpr::var(&y0), SymExpr::Int(5)).negated();
        let m = sat(&[c], &SolverConfig::default());
        assert_eq!(m.get(&y0), Some(&Value::Int(6)));
    }

    #[test]
    fn contradictory_equalities() {
        let s0 = var(0, Sort::Str);
        let eq = |s: &str| Constraint::new(Pred::StrEq(SymExpr::var(&s0), SymExpr::str(s)), true);
        assert_eq!(
            solve(&[eq("abc"), eq("abd")], &SolverConfig::default()).unwrap(),
            SolveResult::Unsat { bounded: false }
        );
    }

    #[test]
    fn cubic_is_unknown_under_reject() {
        let x0 = var(0, Sort::Int);
        let x = || SymExpr::var(&x0);
        let cube = SymExpr::mul(SymExpr::mul(x(), x()), x());
        let c = cmp(CmpOp::Gt, cube, SymExpr::Int(10));
        assert!(solve(std::slice::from_ref(&c), &SolverConfig::default()).unwrap().is_unknown());
        let cfg = SolverConfig {
            nonlinear: Nonlinear::Enumerate,
            ..SolverConfig::default()
        };
        assert_eq!(sat(&[c], &cfg).get(&x0), Some(&Value::Int(3)));
    }

    #[test]
    fn contains_through_concat() {
        let s0 = var(0, Sort::Str);
        let hay = SymExpr::concat(SymExpr::str("SELECT '"), SymExpr::var(&s0));
        let c = Constraint::new(Pred::StrContains(hay.clone(), SymExpr::str("' or ")), true);
        let m = sat(std::slice::from_ref(&c), &SolverConfig::default());
        assert!(eval_constraint(&c, &m).unwrap());
    }

    #[test]
    fn prefix_stripping_binds_the_variable() {
        let s0 = var(0, Sort::Str);
        let lhs = SymExpr::concat(SymExpr::str("id='"), SymExpr::concat(SymExpr::var(&s0), SymExpr::str("'")));
        let c = Constraint::new(Pred::StrEq(lhs, SymExpr::str("id='zz'")), true);
        assert_eq!(sat(&[c], &SolverConfig::default()).get(&s0), Some(&Value::Str("zz".into())));
    }

    #[test]
    fn linear_system_and_tie_break() {
        let (x, y) = (var(0, Sort::Int), var(1, Sort::Int));
        let sum = SymExpr::add(SymExpr::var(&x), SymExpr::var(&y));
        let m = sat(
            &[
                cmp(CmpOp::Eq, sum, SymExpr::Int(3)),
                cmp(CmpOp::Ne, SymExpr::var(&x), SymExpr::Int(3)),
            ],
            &SolverConfig::default(),
        );
        assert_eq!((m.get(&x), m.get(&y)), (Some(&Value::Int(0)), Some(&Value::Int(3))));
    }

    #[test]
    fn bounded_unsat() {
        let x = var(0, Sort::Int);
        let cfg = SolverConfig {
            int_bound: 20,
            ..SolverConfig::default()
        };
        let c = cmp(CmpOp::Gt, SymExpr::var(&x), SymExpr::Int(25));
        assert_eq!(solve(&[c], &cfg).unwrap(), SolveResult::Unsat { bounded: true });
    }

    #[test]
    fn sort_mismatch_is_an_error() {
        let s0 = var(0, Sort::Str);
        let c = cmp(CmpOp::Gt, SymExpr::var(&s0), SymExpr::Int(1));
        assert!(matches!(solve(&[c], &SolverConfig::default()), Err(SymError::SortMismatch(_))));
    }

    #[test]
    fn coercion_of_symbolic_text() {
        let s0 = var(0, Sort::Str);
        let c = cmp(CmpOp::Gt, SymExpr::coerce_int(SymExpr::var(&s0)), SymExpr::Int(1));
        assert_eq!(sat(std::slice::from_ref(&c), &SolverConfig::default()).get(&s0), Some(&Value::Str("2".into())));
        let i1 = var(1, Sort::Int);
        let link = cmp(CmpOp::Eq, SymExpr::coerce_int(SymExpr::var(&s0)), SymExpr::var(&i1));
        let small = SolverConfig {
            int_bound: 5,
            str_max_len: 2,
            alphabet: vec!['1', '3'],
            ..SolverConfig::default()
        };
        let m = sat(&[c, link], &small);
        assert_eq!((m.get(&s0), m.get(&i1)), (Some(&Value::Str("3".into())), Some(&Value::Int(3))));
    }

    #[test]
    fn negate_last_examples() {
        let y0 = var(0, Sort::Int);
        let c = |k: i64| cmp(CmpOp::Le, SymExpr::var(&y0), SymExpr::Int(k));
        let mut pc = PathCondition::new();
        assert!(negate_last(&pc, 0).is_err());
        pc.push(1, Side::Else, c(5));
        assert_eq!(negate_last(&pc, 0).unwrap(), vec![c(5).negated()]);
        assert_eq!(negate_last(&pc, 0).unwrap()[0].to_string(), "I0 > 5");
        pc.push(2, Side::Then, c(6));
        pc.push(3, Side::Then, c(7));
        assert_eq!(negate_last(&pc, 1).unwrap(), vec![c(5), c(6).negated()]);
        assert!(matches!(negate_last(&pc, 3), Err(SymError::IndexOutOfRange { k: 3, len: 3 })));
    }

    #[test]
    fn independent_groups_are_combined() {
        let (s, x) = (var(0, Sort::Str), var(1, Sort::Int));
        let m = sat(
            &[
                Constraint::new(Pred::StrEq(SymExpr::var(&s), SymExpr::str("k")), false),
                cmp(CmpOp::Lt, SymExpr::var(&x), SymExpr::Int(-2)),
            ],
            &SolverConfig::default(),
        );
        assert_eq!(m.get(&s), Some(&Value::Str(String::new())));
        assert_eq!(m.get(&x), Some(&Value::Int(-3)));
    }
}
