//! Symbolic values, path conditions and the bounded constraint solver.

mod solver;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::ir::{coerce_int, CmpOp, Side, StmtId};

pub use solver::{negate_last, solve, Nonlinear, SolveResult, SolverConfig, DEFAULT_ALPHABET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    Int,
    Str,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::Int => "int",
            Sort::Str => "str",
        })
    }
}

/// Where a symbolic value entered the program.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "origin", rename_all = "snake_case")]
pub enum Origin {
    /// Text of an edit box, or its numeric view under `int(input(w))`.
    SourceWidget { widget: String },
    /// Result of the `occurrence`-th execution of a sink statement in one run.
    SinkResult { stmt: StmtId, occurrence: u32 },
    /// Argument of an external IPC call into a provider.
    ProviderArg { provider: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SymVar {
    pub id: u32,
    pub sort: Sort,
    #[serde(flatten)]
    pub origin: Origin,
    pub name: String,
}

impl SymVar {
    pub fn name(&self) -> String {
        self.name.clone()
    }

    /// True for taint sources: widget inputs and IPC arguments.
    pub fn is_source(&self) -> bool {
        matches!(
            self.origin,
            Origin::SourceWidget { .. } | Origin::ProviderArg { .. }
        )
    }
}

impl fmt::Display for SymVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Hands out symbolic variables, one per origin and sort, with ids in
/// first-seen order. Names are a stem plus a per-stem index. An input read
/// straight into a program variable takes that variable's upper-cased name
/// (`y = int(input(ey))` gives `Y0`), other inputs the widget id (`E1_0`).
/// Sink results use `R` and provider arguments `P`.
#[derive(Debug, Clone, Default)]
pub struct VarRegistry {
    vars: HashMap<(Origin, Sort), SymVar>,
    stems: HashMap<String, u32>,
    next: u32,
}

fn stem(origin: &Origin) -> String {
    match origin {
        Origin::SourceWidget { widget } => widget.to_uppercase(),
        Origin::SinkResult { .. } => "R".into(),
        Origin::ProviderArg { .. } => "P".into(),
    }
}

impl VarRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, origin: Origin, sort: Sort) -> SymVar {
        self.intern_as(origin, sort, None)
    }

    /// Like [`VarRegistry::intern`], naming a new input variable after `hint`.
    pub fn intern_as(&mut self, origin: Origin, sort: Sort, hint: Option<&str>) -> SymVar {
        if let Some(v) = self.vars.get(&(origin.clone(), sort)) {
            return v.clone();
        }
        let stem = match (hint, &origin) {
            (Some(h), Origin::SourceWidget { .. }) => h.to_uppercase(),
            _ => stem(&origin),
        };
        let k = self.stems.entry(stem.clone()).or_insert(0);
        let sep = if stem.ends_with(|c: char| c.is_ascii_digit()) { "_" } else { "" };
        let v = SymVar {
            id: self.next,
            sort,
            name: format!("{stem}{sep}{k}"),
            origin: origin.clone(),
        };
        *k += 1;
        self.next += 1;
        self.vars.insert((origin, sort), v.clone());
        v
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SymExpr {
    Var(SymVar),
    Int(i64),
    Str(String),
    Concat(Box<SymExpr>, Box<SymExpr>),
    Add(Box<SymExpr>, Box<SymExpr>),
    Mul(Box<SymExpr>, Box<SymExpr>),
    CoerceInt(Box<SymExpr>),
}

impl SymExpr {
    pub fn var(v: &SymVar) -> SymExpr {
        SymExpr::Var(v.clone())
    }

    pub fn str(s: impl Into<String>) -> SymExpr {
        SymExpr::Str(s.into())
    }

    pub fn concat(a: SymExpr, b: SymExpr) -> SymExpr {
        match (a, b) {
            (SymExpr::Str(x), SymExpr::Str(y)) => SymExpr::Str(x + &y),
            (SymExpr::Str(x), b) if x.is_empty() => b,
            (a, SymExpr::Str(y)) if y.is_empty() => a,
            (a, b) => SymExpr::Concat(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: SymExpr, b: SymExpr) -> SymExpr {
        match (a, b) {
            (SymExpr::Int(x), SymExpr::Int(y)) => SymExpr::Int(x.wrapping_add(y)),
            (a, b) => SymExpr::Add(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: SymExpr, b: SymExpr) -> SymExpr {
        match (a, b) {
            (SymExpr::Int(x), SymExpr::Int(y)) => SymExpr::Int(x.wrapping_mul(y)),
            (a, b) => SymExpr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn coerce_int(a: SymExpr) -> SymExpr {
        match a {
            SymExpr::Str(s) => SymExpr::Int(coerce_int(&s)),
            a => SymExpr::CoerceInt(Box::new(a)),
        }
    }

    /// Sort of a well-sorted expression.
    pub fn sort(&self) -> Sort {
        match self {
            SymExpr::Var(v) => v.sort,
            SymExpr::Str(_) | SymExpr::Concat(..) => Sort::Str,
            SymExpr::Int(_) | SymExpr::Add(..) | SymExpr::Mul(..) | SymExpr::CoerceInt(_) => {
                Sort::Int
            }
        }
    }

    pub fn check_sorts(&self) -> Result<Sort, SymError> {
        let want = |e: &SymExpr, s: Sort| -> Result<(), SymError> {
            let got = e.check_sorts()?;
            if got != s {
                return Err(SymError::SortMismatch(format!(
                    "`{e}` is {got}, expected {s}"
                )));
            }
            Ok(())
        };
        match self {
            SymExpr::Concat(a, b) => {
                want(a, Sort::Str)?;
                want(b, Sort::Str)?;
            }
            SymExpr::Add(a, b) | SymExpr::Mul(a, b) => {
                want(a, Sort::Int)?;
                want(b, Sort::Int)?;
            }
            SymExpr::CoerceInt(a) => want(a, Sort::Str)?,
            _ => {}
        }
        Ok(self.sort())
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<SymVar>) {
        match self {
            SymExpr::Var(v) => {
                out.insert(v.clone());
            }
            SymExpr::Int(_) | SymExpr::Str(_) => {}
            SymExpr::Concat(a, b) | SymExpr::Add(a, b) | SymExpr::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            SymExpr::CoerceInt(a) => a.collect_vars(out),
        }
    }

    pub fn vars(&self) -> BTreeSet<SymVar> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// An expression is symbolic, hence tainted, when it mentions a variable.
    pub fn is_symbolic(&self) -> bool {
        match self {
            SymExpr::Var(_) => true,
            SymExpr::Int(_) | SymExpr::Str(_) => false,
            SymExpr::Concat(a, b) | SymExpr::Add(a, b) | SymExpr::Mul(a, b) => {
                a.is_symbolic() || b.is_symbolic()
            }
            SymExpr::CoerceInt(a) => a.is_symbolic(),
        }
    }

    pub fn mentions(&self, v: &SymVar) -> bool {
        match self {
            SymExpr::Var(x) => x == v,
            SymExpr::Int(_) | SymExpr::Str(_) => false,
            SymExpr::Concat(a, b) | SymExpr::Add(a, b) | SymExpr::Mul(a, b) => {
                a.mentions(v) || b.mentions(v)
            }
            SymExpr::CoerceInt(a) => a.mentions(v),
        }
    }

    /// Replaces every occurrence of `v` by `by`, refolding constants.
    pub fn substitute(&self, v: &SymVar, by: &SymExpr) -> SymExpr {
        match self {
            SymExpr::Var(x) if x == v => by.clone(),
            SymExpr::Var(_) | SymExpr::Int(_) | SymExpr::Str(_) => self.clone(),
            SymExpr::Concat(a, b) => SymExpr::concat(a.substitute(v, by), b.substitute(v, by)),
            SymExpr::Add(a, b) => SymExpr::add(a.substitute(v, by), b.substitute(v, by)),
            SymExpr::Mul(a, b) => SymExpr::mul(a.substitute(v, by), b.substitute(v, by)),
            SymExpr::CoerceInt(a) => SymExpr::coerce_int(a.substitute(v, by)),
        }
    }

    /// Text form with constant pieces verbatim and symbolic pieces as holes,
    /// e.g. `SELECT * FROM t WHERE a='{S0}'`.
    pub fn template(&self) -> String {
        let mut out = String::new();
        self.template_into(&mut out);
        out
    }

    fn template_into(&self, out: &mut String) {
        match self {
            SymExpr::Str(s) => out.push_str(s),
            SymExpr::Concat(a, b) => {
                a.template_into(out);
                b.template_into(out);
            }
            SymExpr::Var(v) => {
                out.push('{');
                out.push_str(&v.name());
                out.push('}');
            }
            SymExpr::Int(v) => out.push_str(&v.to_string()),
            other => {
                out.push('{');
                out.push_str(&other.to_string());
                out.push('}');
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            SymExpr::Concat(..) | SymExpr::Add(..) => 1,
            SymExpr::Mul(..) => 2,
            _ => 3,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.prec() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            SymExpr::Var(v) => write!(f, "{v}")?,
            SymExpr::Int(v) => write!(f, "{v}")?,
            SymExpr::Str(s) => write!(f, "{s:?}")?,
            SymExpr::Concat(a, b) | SymExpr::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                f.write_str(" + ")?;
                b.fmt_prec(f, 2)?;
            }
            SymExpr::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                f.write_str(" * ")?;
                b.fmt_prec(f, 3)?;
            }
            SymExpr::CoerceInt(a) => write!(f, "int({a})")?,
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pred {
    IntCmp(CmpOp, SymExpr, SymExpr),
    StrEq(SymExpr, SymExpr),
    /// Haystack contains needle.
    StrContains(SymExpr, SymExpr),
}

impl Pred {
    fn operands(&self) -> (&SymExpr, &SymExpr) {
        match self {
            Pred::IntCmp(_, a, b) | Pred::StrEq(a, b) | Pred::StrContains(a, b) => (a, b),
        }
    }
}

/// A branch predicate with its polarity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub pred: Pred,
    pub positive: bool,
}

impl Constraint {
    pub fn new(pred: Pred, positive: bool) -> Self {
        Constraint { pred, positive }
    }

    pub fn negated(&self) -> Constraint {
        Constraint {
            pred: self.pred.clone(),
            positive: !self.positive,
        }
    }

    pub fn vars(&self) -> BTreeSet<SymVar> {
        let (a, b) = self.pred.operands();
        let mut out = a.vars();
        b.collect_vars(&mut out);
        out
    }

    pub fn is_symbolic(&self) -> bool {
        let (a, b) = self.pred.operands();
        a.is_symbolic() || b.is_symbolic()
    }

    pub fn check_sorts(&self) -> Result<(), SymError> {
        let (a, b) = self.pred.operands();
        let want = match self.pred {
            Pred::IntCmp(..) => Sort::Int,
            _ => Sort::Str,
        };
        for e in [a, b] {
            let got = e.check_sorts()?;
            if got != want {
                return Err(SymError::SortMismatch(format!(
                    "`{e}` is {got} in `{self}`, expected {want}"
                )));
            }
        }
        Ok(())
    }

    pub fn substitute(&self, v: &SymVar, by: &SymExpr) -> Constraint {
        let pred = match &self.pred {
            Pred::IntCmp(op, a, b) => Pred::IntCmp(*op, a.substitute(v, by), b.substitute(v, by)),
            Pred::StrEq(a, b) => Pred::StrEq(a.substitute(v, by), b.substitute(v, by)),
            Pred::StrContains(a, b) => Pred::StrContains(a.substitute(v, by), b.substitute(v, by)),
        };
        Constraint {
            pred,
            positive: self.positive,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.pred, self.positive) {
            (Pred::IntCmp(op, a, b), true) => write!(f, "{a} {} {b}", op.symbol()),
            (Pred::IntCmp(op, a, b), false) => write!(f, "{a} {} {b}", op.negate().symbol()),
            (Pred::StrEq(a, b), true) => write!(f, "{a} == {b}"),
            (Pred::StrEq(a, b), false) => write!(f, "{a} != {b}"),
            (Pred::StrContains(a, b), true) => write!(f, "contains({a}, {b})"),
            (Pred::StrContains(a, b), false) => write!(f, "!contains({a}, {b})"),
        }
    }
}

impl Serialize for Constraint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// One branch decision on a symbolic condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PcEntry {
    pub site: StmtId,
    pub side: Side,
    pub constraint: Constraint,
}

/// Branch constraints in execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct PathCondition {
    pub entries: Vec<PcEntry>,
}

impl PathCondition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, site: StmtId, side: Side, constraint: Constraint) {
        self.entries.push(PcEntry {
            site,
            side,
            constraint,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn constraints(&self) -> Vec<Constraint> {
        self.entries.iter().map(|e| e.constraint.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Int(_) => Sort::Int,
            Value::Str(_) => Sort::Str,
        }
    }

    pub fn default_of(sort: Sort) -> Value {
        match sort {
            Sort::Int => Value::Int(0),
            Sort::Str => Value::Str(String::new()),
        }
    }

    /// Text an edit box must hold to produce this value.
    pub fn to_text(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Str(s) => s.clone(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

/// Assignment of concrete values to symbolic variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    values: BTreeMap<SymVar, Value>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &SymVar) -> Option<&Value> {
        self.values.get(v)
    }

    pub fn insert(&mut self, v: SymVar, value: Value) {
        self.values.insert(v, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SymVar, &Value)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `other` wins on shared variables.
    pub fn merged(&self, other: &Model) -> Model {
        let mut m = self.clone();
        for (k, v) in other.iter() {
            m.insert(k.clone(), v.clone());
        }
        m
    }

    /// Value by display name, e.g. `S0`.
    pub fn by_name(&self, name: &str) -> Option<&Value> {
        self.values.iter().find(|(k, _)| k.name() == name).map(|(_, v)| v)
    }
}

impl Serialize for Model {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.values.len()))?;
        for (k, v) in &self.values {
            map.serialize_entry(&k.name(), v)?;
        }
        map.end()
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|(k, v)| format!("{k}: {v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymError {
    #[error("model does not cover `{0}`")]
    Uncovered(String),
    #[error("sort mismatch: {0}")]
    SortMismatch(String),
    #[error("branch index {k} out of range for a path condition of length {len}")]
    IndexOutOfRange { k: usize, len: usize },
}

pub fn eval_expr(e: &SymExpr, m: &Model) -> Result<Value, SymError> {
    Ok(match e {
        SymExpr::Var(v) => m
            .get(v)
            .cloned()
            .ok_or_else(|| SymError::Uncovered(v.name()))?,
        SymExpr::Int(v) => Value::Int(*v),
        SymExpr::Str(s) => Value::Str(s.clone()),
        SymExpr::Concat(a, b) => match (eval_expr(a, m)?, eval_expr(b, m)?) {
            (Value::Str(x), Value::Str(y)) => Value::Str(x + &y),
            _ => return Err(SymError::SortMismatch(format!("`{e}`"))),
        },
        SymExpr::Add(a, b) => Value::Int(eval_int(a, m)?.wrapping_add(eval_int(b, m)?)),
        SymExpr::Mul(a, b) => Value::Int(eval_int(a, m)?.wrapping_mul(eval_int(b, m)?)),
        SymExpr::CoerceInt(a) => match eval_expr(a, m)? {
            Value::Str(s) => Value::Int(coerce_int(&s)),
            Value::Int(_) => return Err(SymError::SortMismatch(format!("`{e}`"))),
        },
    })
}

fn eval_int(e: &SymExpr, m: &Model) -> Result<i64, SymError> {
    match eval_expr(e, m)? {
        Value::Int(v) => Ok(v),
        Value::Str(_) => Err(SymError::SortMismatch(format!("`{e}` is not an int"))),
    }
}

fn eval_str(e: &SymExpr, m: &Model) -> Result<String, SymError> {
    match eval_expr(e, m)? {
        Value::Str(s) => Ok(s),
        Value::Int(_) => Err(SymError::SortMismatch(format!("`{e}` is not a string"))),
    }
}

pub fn eval_constraint(c: &Constraint, m: &Model) -> Result<bool, SymError> {
    let holds = match &c.pred {
        Pred::IntCmp(op, a, b) => op.holds(eval_int(a, m)?, eval_int(b, m)?),
        Pred::StrEq(a, b) => eval_str(a, m)? == eval_str(b, m)?,
        Pred::StrContains(a, b) => eval_str(a, m)?.contains(&eval_str(b, m)?),
    };
    Ok(holds == c.positive)
}

/// True when every constraint holds under `m`.
pub fn satisfies(cs: &[Constraint], m: &Model) -> Result<bool, SymError> {
    for c in cs {
        if !eval_constraint(c, m)? {
            return Ok(false);
        }
    }
    Ok(true)
}
