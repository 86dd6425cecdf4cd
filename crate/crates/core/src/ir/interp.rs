use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::*;
use crate::analysis::{Action, Driver};

/// Maximum nesting of helper-function and provider calls.
pub const MAX_CALL_DEPTH: usize = 32;

/// Concrete widget inputs. Provider arguments use the key `provider:NAME`.
pub type InputMap = BTreeMap<String, String>;

/// The world outside the app as seen by the interpreter.
pub trait Environment {
    /// Text currently held by an edit box.
    fn input(&mut self, widget: &str) -> String;

    /// Argument passed by an external IPC caller to a provider.
    fn provider_arg(&mut self, provider: &str) -> String;

    /// Result returned by a database call. The default mock returns no rows.
    fn sink(&mut self, _stmt: StmtId, _sink: &str, _query: &str, _params: &[String]) -> String {
        String::new()
    }

    /// Chooses the side taken at a branch; `natural` is the evaluated condition.
    fn branch(&mut self, _site: StmtId, natural: bool) -> bool {
        natural
    }
}

impl Environment for InputMap {
    fn input(&mut self, widget: &str) -> String {
        self.get(widget).cloned().unwrap_or_default()
    }

    fn provider_arg(&mut self, provider: &str) -> String {
        self.get(&provider_key(provider)).cloned().unwrap_or_default()
    }
}

/// Input-map key carrying the IPC argument of `provider`.
pub fn provider_key(provider: &str) -> String {
    format!("provider:{provider}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkRecord {
    pub stmt: StmtId,
    pub sink: String,
    pub query: String,
    pub params: Vec<String>,
    pub result: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum LeakTarget {
    Widget(String),
    /// Value returned to the external caller of a provider.
    Provider(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakRecord {
    pub stmt: StmtId,
    pub target: LeakTarget,
    pub payload: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecTrace {
    pub executed: Vec<StmtId>,
    pub branches: Vec<(StmtId, Side)>,
    pub sink_calls: Vec<SinkRecord>,
    pub leaks: Vec<LeakRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("driver references unknown component `{0}`")]
    UnknownComponent(String),
    #[error("driver references unknown widget `{0}`")]
    UnknownWidget(String),
    #[error("component `{0}` used before construction")]
    NotConstructed(String),
    #[error("`{0}` is not a provider")]
    NotProvider(String),
    #[error("call depth limit {MAX_CALL_DEPTH} exceeded in `{0}`")]
    CallDepth(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Value {
    Int(i64),
    Str(String),
}

impl Value {
    pub(crate) fn default_of(ty: Type) -> Value {
        match ty {
            Type::Int => Value::Int(0),
            Type::Str => Value::Str(String::new()),
        }
    }

    fn int(&self) -> i64 {
        match self {
            Value::Int(v) => *v,
            Value::Str(_) => 0,
        }
    }

    fn into_str(self) -> String {
        match self {
            Value::Str(s) => s,
            Value::Int(v) => v.to_string(),
        }
    }

    fn as_str(&self) -> &str {
        match self {
            Value::Str(s) => s,
            Value::Int(_) => "",
        }
    }
}

/// Text-to-int coercion shared by every evaluator: the parsed value, or 0.
pub fn coerce_int(text: &str) -> i64 {
    text.parse().unwrap_or(0)
}

/// Runs `driver` against fixed widget inputs.
pub fn eval_concrete(app: &MiniApp, driver: &Driver, inputs: &InputMap) -> Result<ExecTrace, EvalError> {
    let mut env = inputs.clone();
    eval_with_env(app, driver, &mut env)
}

/// Runs `driver` with a caller-supplied environment.
pub fn eval_with_env(
    app: &MiniApp,
    driver: &Driver,
    env: &mut dyn Environment,
) -> Result<ExecTrace, EvalError> {
    let mut m = Machine {
        app,
        types: var_types(app),
        env,
        stores: HashMap::new(),
        trace: ExecTrace::default(),
        depth: 0,
    };
    m.run(driver)?;
    Ok(m.trace)
}

enum Flow {
    Normal,
    Return(StmtId, Value),
}

struct Frame<'t> {
    vars: HashMap<String, Value>,
    types: &'t HashMap<String, Type>,
}

impl Frame<'_> {
    fn read(&self, var: &str) -> Value {
        match self.vars.get(var) {
            Some(v) => v.clone(),
            None => Value::default_of(self.types.get(var).copied().unwrap_or(Type::Str)),
        }
    }
}

struct Machine<'a, 'e> {
    app: &'a MiniApp,
    types: VarTypes,
    env: &'e mut dyn Environment,
    stores: HashMap<String, HashMap<String, Value>>,
    trace: ExecTrace,
    depth: usize,
}

impl<'a> Machine<'a, '_> {
    fn component_index(&self, name: &str) -> Result<usize, EvalError> {
        self.app
            .components
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| EvalError::UnknownComponent(name.to_string()))
    }

    fn run(&mut self, driver: &Driver) -> Result<(), EvalError> {
        for action in &driver.actions {
            match action {
                Action::Construct { component } => {
                    self.component_index(component)?;
                    self.stores.insert(component.clone(), HashMap::new());
                }
                Action::Lifecycle { component, slot } => {
                    let ci = self.component_index(component)?;
                    if let Some(h) = self.app.components[ci].handler(&Trigger::Lifecycle(*slot)) {
                        self.run_handler(ci, &h.body)?;
                    } else if !self.stores.contains_key(component) {
                        return Err(EvalError::NotConstructed(component.clone()));
                    }
                }
                Action::FindWidget { widget } => {
                    let (c, _) = self
                        .app
                        .widget(widget)
                        .ok_or_else(|| EvalError::UnknownWidget(widget.clone()))?;
                    if !self.stores.contains_key(&c.name) {
                        return Err(EvalError::NotConstructed(c.name.clone()));
                    }
                }
                Action::TriggerEvent { widget } => {
                    let (c, w) = self
                        .app
                        .widget(widget)
                        .ok_or_else(|| EvalError::UnknownWidget(widget.clone()))?;
                    if w.kind != WidgetKind::Button {
                        return Err(EvalError::UnknownWidget(widget.clone()));
                    }
                    let ci = self.component_index(&c.name)?;
                    if let Some(h) = c.handler(&Trigger::Click(widget.clone())) {
                        self.run_handler(ci, &h.body)?;
                    } else if !self.stores.contains_key(&c.name) {
                        return Err(EvalError::NotConstructed(c.name.clone()));
                    }
                }
                Action::ProviderInvoke { provider } => {
                    let arg = self.env.provider_arg(provider);
                    if let Some((stmt, value)) = self.provider(provider, arg)? {
                        self.trace.leaks.push(LeakRecord {
                            stmt,
                            target: LeakTarget::Provider(provider.clone()),
                            payload: value.into_str(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn run_handler(&mut self, ci: usize, body: &'a [Stmt]) -> Result<(), EvalError> {
        let name = &self.app.components[ci].name;
        let vars = self
            .stores
            .remove(name)
            .ok_or_else(|| EvalError::NotConstructed(name.clone()))?;
        let types = &self.types.components[ci].clone();
        let mut frame = Frame { vars, types };
        let res = self.block(body, &mut frame);
        self.stores.insert(name.clone(), frame.vars);
        res.map(|_| ())
    }

    /// Runs a provider's query handler in a fresh store; returns the id of the
    /// `return` statement reached with its value.
    fn provider(&mut self, provider: &str, arg: String) -> Result<Option<(StmtId, Value)>, EvalError> {
        let ci = self.component_index(provider)?;
        let comp = &self.app.components[ci];
        let Some(Handler {
            trigger: Trigger::Query { param },
            body,
        }) = comp.handlers.first()
        else {
            return Err(EvalError::NotProvider(provider.to_string()));
        };
        self.enter(provider)?;
        let types = self.types.components[ci].clone();
        let mut frame = Frame {
            vars: HashMap::from([(param.clone(), Value::Str(arg))]),
            types: &types,
        };
        let flow = self.block(body, &mut frame);
        self.depth -= 1;
        Ok(match flow? {
            Flow::Return(stmt, v) => Some((stmt, v)),
            Flow::Normal => None,
        })
    }

    fn enter(&mut self, name: &str) -> Result<(), EvalError> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(EvalError::CallDepth(name.to_string()));
        }
        self.depth += 1;
        Ok(())
    }

    fn block(&mut self, body: &'a [Stmt], frame: &mut Frame<'_>) -> Result<Flow, EvalError> {
        for s in body {
            if let flow @ Flow::Return(..) = self.stmt(s, frame)? {
                return Ok(flow);
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &'a Stmt, frame: &mut Frame<'_>) -> Result<Flow, EvalError> {
        self.trace.executed.push(s.id);
        match &s.kind {
            StmtKind::Assign { var, expr } => {
                let v = self.expr(expr, frame);
                frame.vars.insert(var.clone(), v);
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let natural = self.cond(cond, frame);
                let taken = self.env.branch(s.id, natural);
                self.trace.branches.push((s.id, Side::from_bool(taken)));
                let body = if taken { then_body } else { else_body };
                return self.block(body, frame);
            }
            StmtKind::Sink {
                result,
                sink,
                query,
                params,
            } => {
                let q = self.expr(query, frame).into_str();
                let ps: Vec<String> = params.iter().map(|p| self.expr(p, frame).into_str()).collect();
                let out = self.env.sink(s.id, sink, &q, &ps);
                self.trace.sink_calls.push(SinkRecord {
                    stmt: s.id,
                    sink: sink.clone(),
                    query: q,
                    params: ps,
                    result: out.clone(),
                });
                if let Some(r) = result {
                    frame.vars.insert(r.clone(), Value::Str(out));
                }
            }
            StmtKind::Leak { widget, value } => {
                let payload = self.expr(value, frame).into_str();
                self.trace.leaks.push(LeakRecord {
                    stmt: s.id,
                    target: LeakTarget::Widget(widget.clone()),
                    payload,
                });
            }
            StmtKind::ProviderQuery {
                result,
                provider,
                arg,
            } => {
                let a = self.expr(arg, frame).into_str();
                let v = self
                    .provider(provider, a)?
                    .map(|(_, v)| v.into_str())
                    .unwrap_or_default();
                frame.vars.insert(result.clone(), Value::Str(v));
            }
            StmtKind::Call {
                result,
                function,
                args,
            } => {
                let fi = self
                    .app
                    .functions
                    .iter()
                    .position(|f| &f.name == function)
                    .expect("validated call target");
                let f = &self.app.functions[fi];
                let mut vars = HashMap::new();
                for (p, a) in f.params.iter().zip(args) {
                    vars.insert(p.name.clone(), self.expr(a, frame));
                }
                self.enter(function)?;
                let types = self.types.functions[fi].clone();
                let mut callee = Frame {
                    vars,
                    types: &types,
                };
                let flow = self.block(&f.body, &mut callee);
                self.depth -= 1;
                let ret = match flow? {
                    Flow::Return(_, v) => Some(v),
                    Flow::Normal => f.ret.map(Value::default_of),
                };
                if let (Some(r), Some(v)) = (result, ret) {
                    frame.vars.insert(r.clone(), v);
                }
            }
            StmtKind::Return(e) => {
                return Ok(Flow::Return(s.id, self.expr(e, frame)));
            }
        }
        Ok(Flow::Normal)
    }

    fn expr(&mut self, e: &Expr, frame: &Frame<'_>) -> Value {
        match e {
            Expr::Int(v) => Value::Int(*v),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Var(v) => frame.read(v),
            Expr::Input(w) => Value::Str(self.env.input(w)),
            Expr::ToInt(inner) => Value::Int(coerce_int(self.expr(inner, frame).as_str())),
            Expr::Concat(a, b) => {
                let mut s = self.expr(a, frame).into_str();
                s.push_str(self.expr(b, frame).as_str());
                Value::Str(s)
            }
            Expr::Add(a, b) => Value::Int(self.expr(a, frame).int().wrapping_add(self.expr(b, frame).int())),
            Expr::Mul(a, b) => Value::Int(self.expr(a, frame).int().wrapping_mul(self.expr(b, frame).int())),
        }
    }

    fn cond(&mut self, c: &Cond, frame: &Frame<'_>) -> bool {
        match c {
            Cond::Cmp(op, a, b) => {
                let (x, y) = (self.expr(a, frame).int(), self.expr(b, frame).int());
                op.holds(x, y)
            }
            Cond::StrEq(a, b) => self.expr(a, frame) == self.expr(b, frame),
            Cond::Contains(a, b) => {
                let hay = self.expr(a, frame).into_str();
                hay.contains(self.expr(b, frame).as_str())
            }
            Cond::Not(inner) => !self.cond(inner, frame),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_app;

    const STUDENT: &str = r#"app "student" {
    activity Main {
        widget edit e1
        widget button b1
        widget text t1
        oncreate { s = input(e1) }
        onclick(b1) {
            r = rawQuery("SELECT * FROM student WHERE stdno='" + s + "'")
            setText(t1, r)
        }
    }
}"#;

    fn inputs(pairs: &[(&str, &str)]) -> InputMap {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn student_query_text() {
        let app = parse_app(STUDENT).unwrap();
        let t = eval_concrete(&app, &Driver::click("Main", "b1"), &inputs(&[("e1", "7")])).unwrap();
        assert_eq!(t.sink_calls.len(), 1);
        assert_eq!(t.sink_calls[0].query, "SELECT * FROM student WHERE stdno='7'");
        assert_eq!(t.executed, vec![1, 2, 3]);
        assert_eq!(t.leaks[0].target, LeakTarget::Widget("t1".into()));
    }

    #[test]
    fn empty_click_handler_runs_lifecycle_only() {
        let app = parse_app(
            r#"app "e" { activity Main { widget edit e1 widget button b1 oncreate { s = input(e1) } onclick(b1) { } } }"#,
        )
        .unwrap();
        let t = eval_concrete(&app, &Driver::click("Main", "b1"), &InputMap::new()).unwrap();
        assert_eq!(t.executed, vec![1]);
        assert!(t.sink_calls.is_empty());
    }

    #[test]
    fn then_branch_taken_for_y_six() {
        let app = parse_app(
            r#"app "y" { activity Main { widget edit ey widget text out oncreate {
                y = int(input(ey))
                if (y > 5) { setText(out, "big") }
            } } }"#,
        )
        .unwrap();
        let t = eval_concrete(&app, &Driver::lifecycle("Main"), &inputs(&[("ey", "6")])).unwrap();
        assert_eq!(t.executed, vec![1, 2, 3]);
        assert_eq!(t.branches, vec![(2, Side::Then)]);
        let t = eval_concrete(&app, &Driver::lifecycle("Main"), &inputs(&[("ey", "oops")])).unwrap();
        assert_eq!(t.branches, vec![(2, Side::Else)]);
    }

    #[test]
    fn unknown_targets_are_errors() {
        let app = parse_app(STUDENT).unwrap();
        assert_eq!(
            eval_concrete(&app, &Driver::click("Main", "zz"), &InputMap::new()),
            Err(EvalError::UnknownWidget("zz".into()))
        );
        assert_eq!(
            eval_concrete(&app, &Driver::lifecycle("Other"), &InputMap::new()),
            Err(EvalError::UnknownComponent("Other".into()))
        );
    }

    #[test]
    fn runaway_recursion_is_cut() {
        let app = parse_app(
            r#"app "r" { activity Main { oncreate { call f(1) } } fn f(n: int) { call f(n + 1) } }"#,
        )
        .unwrap();
        assert!(matches!(
            eval_concrete(&app, &Driver::lifecycle("Main"), &InputMap::new()),
            Err(EvalError::CallDepth(_))
        ));
    }

    #[test]
    fn coercion() {
        assert_eq!(coerce_int("42"), 42);
        assert_eq!(coerce_int("-3"), -3);
        assert_eq!(coerce_int("4x"), 0);
        assert_eq!(coerce_int(""), 0);
    }
}
