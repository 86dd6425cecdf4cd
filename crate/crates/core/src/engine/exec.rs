use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Decision, FrontierItem, ItemModel, RunOrigin, SearchConfig, SolverEvent, StackState};
use crate::analysis::{handler_name, Action, Driver};
use crate::ir::{
    coerce_int, provider_key, Cond, EvalError, Expr, ExecTrace, Handler, InputMap, LeakRecord,
    LeakTarget, MiniApp, Side, SinkRecord, Stmt, StmtId, StmtKind, Trigger, Type, VarTypes,
    WidgetKind, MAX_CALL_DEPTH,
};
use crate::symbolic::{
    eval_constraint, satisfies, solve, Constraint, Model, Origin, PathCondition, Pred, SolveResult,
    Sort, SymExpr, SymVar, Value, VarRegistry,
};
use crate::taint::{
    on_leak_call, on_sink_call, LeakEvent, ProtectedSink, ReportContext, SinkEvent, SinkVerdict,
    VulnCandidate, VulnReport,
};

/// Shared state of one exploration that runs read and extend.
pub(crate) struct Session<'a> {
    pub app: &'a MiniApp,
    pub types: VarTypes,
    pub driver: &'a Driver,
    pub cfg: &'a SearchConfig,
    pub registry: VarRegistry,
    pub rng: ChaCha8Rng,
}

pub(crate) enum Stop {
    /// The run steered off its natural course; siblings have been queued.
    Abort,
    Eval(EvalError),
}

impl From<EvalError> for Stop {
    fn from(e: EvalError) -> Self {
        Stop::Eval(e)
    }
}

/// Everything one concrete run produced.
pub(crate) struct RunOutput {
    pub completed: bool,
    pub error: Option<EvalError>,
    pub decisions: Vec<Decision>,
    pub pc: PathCondition,
    pub model: Model,
    pub trace: ExecTrace,
    pub reports: Vec<VulnReport>,
    pub protected: Vec<ProtectedSink>,
    pub events: Vec<SolverEvent>,
    pub spawned: Vec<FrontierItem>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone)]
struct CVal {
    conc: Value,
    sym: Option<SymExpr>,
}

impl CVal {
    fn concrete(conc: Value) -> Self {
        CVal { conc, sym: None }
    }

    fn int(&self) -> i64 {
        match self.conc {
            Value::Int(v) => v,
            Value::Str(_) => 0,
        }
    }

    fn text(&self) -> String {
        self.conc.to_text()
    }

    /// Symbolic view; constants lift to literals.
    fn lift(&self) -> SymExpr {
        self.sym.clone().unwrap_or_else(|| match &self.conc {
            Value::Int(v) => SymExpr::Int(*v),
            Value::Str(s) => SymExpr::Str(s.clone()),
        })
    }
}

enum Flow {
    Normal,
    Return(StmtId, CVal),
}

struct Frame<'t> {
    vars: HashMap<String, CVal>,
    types: &'t HashMap<String, Type>,
}

impl Frame<'_> {
    fn read(&self, var: &str) -> CVal {
        match self.vars.get(var) {
            Some(v) => v.clone(),
            None => CVal::concrete(match self.types.get(var).copied().unwrap_or(Type::Str) {
                Type::Int => Value::Int(0),
                Type::Str => Value::Str(String::new()),
            }),
        }
    }
}

struct Procedure {
    name: String,
    provider: bool,
}

pub(crate) struct Run<'s, 'a> {
    s: &'s mut Session<'a>,
    prefix: &'s [(StmtId, Side)],
    on_prefix: bool,
    model: Model,
    stacks: StackState<'s>,
    decisions: Vec<Decision>,
    ranks: Vec<u8>,
    pc: PathCondition,
    trace: ExecTrace,
    stores: HashMap<String, HashMap<String, CVal>>,
    procs: Vec<Procedure>,
    occurrences: HashMap<StmtId, u32>,
    candidates: Vec<VulnCandidate>,
    reports: Vec<VulnReport>,
    protected: Vec<ProtectedSink>,
    events: Vec<SolverEvent>,
    spawned: Vec<FrontierItem>,
    diagnostics: Vec<String>,
    /// Program variable receiving the input being read, for naming.
    hint: Option<String>,
}

impl<'s, 'a> Run<'s, 'a> {
    pub(crate) fn new(
        s: &'s mut Session<'a>,
        prefix: &'s [(StmtId, Side)],
        model: Model,
        stacks: StackState<'s>,
    ) -> Self {
        Run {
            s,
            prefix,
            on_prefix: true,
            model,
            stacks,
            decisions: Vec::new(),
            ranks: Vec::new(),
            pc: PathCondition::new(),
            trace: ExecTrace::default(),
            stores: HashMap::new(),
            procs: Vec::new(),
            occurrences: HashMap::new(),
            candidates: Vec::new(),
            reports: Vec::new(),
            protected: Vec::new(),
            events: Vec::new(),
            spawned: Vec::new(),
            diagnostics: Vec::new(),
            hint: None,
        }
    }

    pub(crate) fn execute(mut self) -> RunOutput {
        let driver = self.s.driver;
        let res = self.drive(driver);
        let (completed, error) = match res {
            Ok(()) => (true, None),
            Err(Stop::Abort) => (false, None),
            Err(Stop::Eval(e)) => (false, Some(e)),
        };
        RunOutput {
            completed,
            error,
            decisions: self.decisions,
            pc: self.pc,
            model: self.model,
            trace: self.trace,
            reports: self.reports,
            protected: self.protected,
            events: self.events,
            spawned: self.spawned,
            diagnostics: self.diagnostics,
        }
    }

    fn component_index(&self, name: &str) -> Result<usize, EvalError> {
        self.s
            .app
            .components
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| EvalError::UnknownComponent(name.to_string()))
    }

    fn drive(&mut self, driver: &Driver) -> Result<(), Stop> {
        let app = self.s.app;
        for action in &driver.actions {
            match action {
                Action::Construct { component } => {
                    self.component_index(component)?;
                    self.stores.insert(component.clone(), HashMap::new());
                }
                Action::Lifecycle { component, slot } => {
                    let ci = self.component_index(component)?;
                    let trigger = Trigger::Lifecycle(*slot);
                    if let Some(h) = app.components[ci].handler(&trigger) {
                        self.run_handler(ci, &trigger, &h.body)?;
                    } else if !self.stores.contains_key(component) {
                        return Err(EvalError::NotConstructed(component.clone()).into());
                    }
                }
                Action::FindWidget { widget } => {
                    let (c, _) = app
                        .widget(widget)
                        .ok_or_else(|| EvalError::UnknownWidget(widget.clone()))?;
                    if !self.stores.contains_key(&c.name) {
                        return Err(EvalError::NotConstructed(c.name.clone()).into());
                    }
                }
                Action::TriggerEvent { widget } => {
                    let (c, w) = app
                        .widget(widget)
                        .ok_or_else(|| EvalError::UnknownWidget(widget.clone()))?;
                    if w.kind != WidgetKind::Button {
                        return Err(EvalError::UnknownWidget(widget.clone()).into());
                    }
                    let ci = self.component_index(&c.name)?;
                    let trigger = Trigger::Click(widget.clone());
                    if let Some(h) = c.handler(&trigger) {
                        self.run_handler(ci, &trigger, &h.body)?;
                    } else if !self.stores.contains_key(&c.name) {
                        return Err(EvalError::NotConstructed(c.name.clone()).into());
                    }
                }
                Action::ProviderInvoke { provider } => {
                    let var = self
                        .s
                        .registry
                        .intern(Origin::ProviderArg { provider: provider.clone() }, Sort::Str);
                    let conc = self.value_of(&var);
                    let arg = CVal {
                        conc,
                        sym: Some(SymExpr::var(&var)),
                    };
                    if let Some((stmt, value)) = self.provider(provider, arg)? {
                        let target = LeakTarget::Provider(provider.clone());
                        self.leak(stmt, target, value);
                    }
                }
            }
        }
        Ok(())
    }

    /// Concrete value of an input variable, drawn or defaulted on first use.
    fn value_of(&mut self, var: &SymVar) -> Value {
        if let Some(v) = self.model.get(var) {
            return v.clone();
        }
        let v = if self.s.cfg.random_init && var.is_source() {
            random_value(&mut self.s.rng, var.sort, self.s.cfg)
        } else {
            Value::default_of(var.sort)
        };
        self.model.insert(var.clone(), v.clone());
        v
    }

    fn run_handler(&mut self, ci: usize, trigger: &Trigger, body: &'a [Stmt]) -> Result<(), Stop> {
        let app = self.s.app;
        let name = &app.components[ci].name;
        let vars = self
            .stores
            .remove(name)
            .ok_or_else(|| EvalError::NotConstructed(name.clone()))?;
        let types = self.s.types.components[ci].clone();
        let mut frame = Frame {
            vars,
            types: &types,
        };
        self.procs.push(Procedure {
            name: handler_name(name, trigger),
            provider: false,
        });
        let res = self.block(body, &mut frame);
        self.procs.pop();
        self.stores.insert(name.clone(), frame.vars);
        res.map(|_| ())
    }

    fn enter(&mut self, name: String, provider: bool) -> Result<(), Stop> {
        if self.procs.len() > MAX_CALL_DEPTH {
            return Err(EvalError::CallDepth(name).into());
        }
        self.procs.push(Procedure { name, provider });
        Ok(())
    }

    fn provider(&mut self, provider: &str, arg: CVal) -> Result<Option<(StmtId, CVal)>, Stop> {
        let app = self.s.app;
        let ci = self.component_index(provider)?;
        let comp = &app.components[ci];
        let Some(Handler {
            trigger: trigger @ Trigger::Query { param },
            body,
        }) = comp.handlers.first()
        else {
            return Err(EvalError::NotProvider(provider.to_string()).into());
        };
        self.enter(handler_name(provider, trigger), true)?;
        let types = self.s.types.components[ci].clone();
        let mut frame = Frame {
            vars: HashMap::from([(param.clone(), arg)]),
            types: &types,
        };
        let flow = self.block(body, &mut frame);
        self.procs.pop();
        Ok(match flow? {
            Flow::Return(stmt, v) => Some((stmt, v)),
            Flow::Normal => None,
        })
    }

    fn block(&mut self, body: &'a [Stmt], frame: &mut Frame<'_>) -> Result<Flow, Stop> {
        for s in body {
            if let flow @ Flow::Return(..) = self.stmt(s, frame)? {
                return Ok(flow);
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &'a Stmt, frame: &mut Frame<'_>) -> Result<Flow, Stop> {
        self.trace.executed.push(s.id);
        match &s.kind {
            StmtKind::Assign { var, expr } => {
                let direct = match expr {
                    Expr::Input(_) => true,
                    Expr::ToInt(inner) => matches!(inner.as_ref(), Expr::Input(_)),
                    _ => false,
                };
                self.hint = direct.then(|| var.clone());
                let v = self.expr(expr, frame);
                self.hint = None;
                frame.vars.insert(var.clone(), v);
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let (natural, constraint) = self.cond(cond, frame);
                let taken = self.branch(s.id, natural, constraint)?;
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
                let q = self.expr(query, frame);
                let ps: Vec<CVal> = params.iter().map(|p| self.expr(p, frame)).collect();
                let n = self.occurrences.entry(s.id).or_insert(0);
                let occurrence = *n;
                *n += 1;
                let var = self
                    .s
                    .registry
                    .intern(Origin::SinkResult { stmt: s.id, occurrence }, Sort::Str);
                let out = self.value_of(&var);
                let frames: Vec<String> = self.procs.iter().rev().map(|p| p.name.clone()).collect();
                let query_sym = q.lift();
                let param_syms: Vec<SymExpr> = ps.iter().map(CVal::lift).collect();
                let query_text = q.text();
                let ev = SinkEvent {
                    stmt: s.id,
                    sink,
                    frames: &frames,
                    query: &query_sym,
                    query_text: &query_text,
                    params: &param_syms,
                    result: &var,
                    ipc: self.procs.iter().any(|p| p.provider),
                };
                match on_sink_call(&ev) {
                    SinkVerdict::Candidate(c) => self.candidates.push(c),
                    SinkVerdict::Protected(p) => self.protected.push(p),
                    SinkVerdict::Clean => {}
                }
                self.trace.sink_calls.push(SinkRecord {
                    stmt: s.id,
                    sink: sink.clone(),
                    query: query_text,
                    params: ps.iter().map(CVal::text).collect(),
                    result: out.to_text(),
                });
                if let Some(r) = result {
                    frame.vars.insert(
                        r.clone(),
                        CVal {
                            conc: out,
                            sym: Some(SymExpr::var(&var)),
                        },
                    );
                }
            }
            StmtKind::Leak { widget, value } => {
                let v = self.expr(value, frame);
                self.leak(s.id, LeakTarget::Widget(widget.clone()), v);
            }
            StmtKind::ProviderQuery {
                result,
                provider,
                arg,
            } => {
                let a = self.expr(arg, frame);
                let v = self
                    .provider(provider, a)?
                    .map(|(_, v)| v)
                    .unwrap_or_else(|| CVal::concrete(Value::Str(String::new())));
                frame.vars.insert(result.clone(), v);
            }
            StmtKind::Call {
                result,
                function,
                args,
            } => {
                let app = self.s.app;
                let fi = app
                    .functions
                    .iter()
                    .position(|f| &f.name == function)
                    .expect("validated call target");
                let f = &app.functions[fi];
                let mut vars = HashMap::new();
                for (p, a) in f.params.iter().zip(args) {
                    vars.insert(p.name.clone(), self.expr(a, frame));
                }
                self.enter(function.clone(), false)?;
                let types = self.s.types.functions[fi].clone();
                let mut callee = Frame {
                    vars,
                    types: &types,
                };
                let flow = self.block(&f.body, &mut callee);
                self.procs.pop();
                let ret = match flow? {
                    Flow::Return(_, v) => Some(v),
                    Flow::Normal => f.ret.map(|t| {
                        CVal::concrete(match t {
                            Type::Int => Value::Int(0),
                            Type::Str => Value::Str(String::new()),
                        })
                    }),
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

    fn leak(&mut self, stmt: StmtId, target: LeakTarget, value: CVal) {
        let sym = value.lift();
        if !self.candidates.is_empty() {
            let witness = witness_of(&self.model);
            let ctx = ReportContext {
                app: self.s.app,
                driver: self.s.driver,
                witness: &witness,
            };
            let ev = LeakEvent {
                stmt,
                target: &target,
                value: &sym,
            };
            let found = on_leak_call(&ev, &self.candidates, &ctx);
            self.reports.extend(found);
        }
        self.trace.leaks.push(LeakRecord {
            stmt,
            target,
            payload: value.text(),
        });
    }

    fn widget_var(&mut self, widget: &str, sort: Sort) -> (SymVar, Value) {
        let var = self.s.registry.intern_as(
            Origin::SourceWidget {
                widget: widget.to_string(),
            },
            sort,
            self.hint.as_deref(),
        );
        let v = self.value_of(&var);
        (var, v)
    }

    fn expr(&mut self, e: &Expr, frame: &Frame<'_>) -> CVal {
        match e {
            Expr::Int(v) => CVal::concrete(Value::Int(*v)),
            Expr::Str(s) => CVal::concrete(Value::Str(s.clone())),
            Expr::Var(v) => frame.read(v),
            Expr::Input(w) => {
                let (var, v) = self.widget_var(w, Sort::Str);
                CVal {
                    conc: v,
                    sym: Some(SymExpr::var(&var)),
                }
            }
            Expr::ToInt(inner) => {
                if let Expr::Input(w) = inner.as_ref() {
                    let (var, v) = self.widget_var(w, Sort::Int);
                    return CVal {
                        conc: v,
                        sym: Some(SymExpr::var(&var)),
                    };
                }
                let a = self.expr(inner, frame);
                let conc = Value::Int(match &a.conc {
                    Value::Str(s) => coerce_int(s),
                    Value::Int(_) => 0,
                });
                CVal {
                    conc,
                    sym: a.sym.map(SymExpr::coerce_int),
                }
            }
            Expr::Concat(a, b) => {
                let (a, b) = (self.expr(a, frame), self.expr(b, frame));
                let conc = Value::Str(a.text() + &b.text());
                let sym = (a.sym.is_some() || b.sym.is_some()).then(|| SymExpr::concat(a.lift(), b.lift()));
                CVal { conc, sym }
            }
            Expr::Add(a, b) => {
                let (a, b) = (self.expr(a, frame), self.expr(b, frame));
                let conc = Value::Int(a.int().wrapping_add(b.int()));
                let sym = (a.sym.is_some() || b.sym.is_some()).then(|| SymExpr::add(a.lift(), b.lift()));
                CVal { conc, sym }
            }
            Expr::Mul(a, b) => {
                let (a, b) = (self.expr(a, frame), self.expr(b, frame));
                let conc = Value::Int(a.int().wrapping_mul(b.int()));
                let sym = (a.sym.is_some() || b.sym.is_some()).then(|| SymExpr::mul(a.lift(), b.lift()));
                CVal { conc, sym }
            }
        }
    }

    /// The condition's value and, when symbolic, the constraint asserting it.
    fn cond(&mut self, c: &Cond, frame: &Frame<'_>) -> (bool, Option<Constraint>) {
        match c {
            Cond::Cmp(op, a, b) => {
                let (a, b) = (self.expr(a, frame), self.expr(b, frame));
                let holds = op.holds(a.int(), b.int());
                let c = (a.sym.is_some() || b.sym.is_some())
                    .then(|| Constraint::new(Pred::IntCmp(*op, a.lift(), b.lift()), true));
                (holds, c)
            }
            Cond::StrEq(a, b) => {
                let (a, b) = (self.expr(a, frame), self.expr(b, frame));
                let holds = a.conc == b.conc;
                let c = (a.sym.is_some() || b.sym.is_some())
                    .then(|| Constraint::new(Pred::StrEq(a.lift(), b.lift()), true));
                (holds, c)
            }
            Cond::Contains(a, b) => {
                let (a, b) = (self.expr(a, frame), self.expr(b, frame));
                let holds = a.text().contains(&b.text());
                let c = (a.sym.is_some() || b.sym.is_some())
                    .then(|| Constraint::new(Pred::StrContains(a.lift(), b.lift()), true));
                (holds, c)
            }
            Cond::Not(inner) => {
                let (holds, c) = self.cond(inner, frame);
                (!holds, c.map(|c| c.negated()))
            }
        }
    }

    fn preferred(&self, site: StmtId) -> Side {
        self.stacks.preferred(site)
    }

    /// Records a branch decision and steers the search at symbolic branches
    /// beyond the replayed prefix.
    fn branch(&mut self, site: StmtId, natural: bool, constraint: Option<Constraint>) -> Result<bool, Stop> {
        let side = Side::from_bool(natural);
        let idx = self.decisions.len();
        if self.on_prefix && idx < self.prefix.len() && self.prefix[idx] != (site, side) {
            self.diagnostics.push(format!(
                "divergence at branch {site}: expected {}, took {side}",
                self.prefix[idx].1
            ));
            self.on_prefix = false;
        }
        let replaying = self.on_prefix && idx < self.prefix.len();
        let taken = constraint.map(|c| if natural { c } else { c.negated() });
        if let Some(c) = &taken {
            debug_assert_eq!(
                eval_constraint(c, &self.model),
                Ok(true),
                "concolic pairing broken at branch {site}"
            );
        }
        let pref = self.preferred(site);
        let steered = match (&taken, replaying) {
            (Some(c), false) => self.steer(site, side, pref, c),
            _ => Ok(()),
        };
        self.ranks.push(u8::from(side != pref));
        self.decisions.push(Decision {
            site,
            side,
            symbolic: taken.is_some(),
        });
        if let Some(c) = taken {
            self.pc.push(site, side, c);
        }
        self.stacks.observe(site, side);
        steered.map(|_| natural)
    }

    fn steer(&mut self, site: StmtId, side: Side, pref: Side, taken: &Constraint) -> Result<(), Stop> {
        let mut target = self.pc.constraints();
        target.push(taken.negated());
        if side == pref {
            self.spawn(site, side.flip(), pref, ItemModel::Unrealized {
                target,
                base: self.model.clone(),
            });
            return Ok(());
        }
        let outcome = solve_or_fallback(self.s, &target, &self.model);
        let model = match outcome {
            Steered::Model(m, origin, event) => {
                self.events.push(SolverEvent { site, ..event });
                Some((m, origin))
            }
            Steered::Pruned(event) | Steered::GaveUp(event) => {
                self.events.push(SolverEvent { site, ..event });
                None
            }
        };
        let Some((m, origin)) = model else {
            return Ok(());
        };
        self.spawn(site, side, pref, ItemModel::Realized {
            model: self.model.clone(),
            origin: RunOrigin::Sibling,
        });
        self.spawn(site, pref, pref, ItemModel::Realized { model: m, origin });
        Err(Stop::Abort)
    }

    fn spawn(&mut self, site: StmtId, side: Side, pref: Side, model: ItemModel) {
        let mut decisions: Vec<(StmtId, Side)> = self.decisions.iter().map(|d| (d.site, d.side)).collect();
        decisions.push((site, side));
        let mut ranks = self.ranks.clone();
        ranks.push(u8::from(side != pref));
        self.spawned.push(FrontierItem {
            decisions,
            ranks,
            model,
            seq: 0,
        });
    }
}

pub(crate) enum Steered {
    Model(Model, RunOrigin, SolverEvent),
    Pruned(SolverEvent),
    GaveUp(SolverEvent),
}

/// Solves `target`; on Unknown, tries random values for the variables only
/// the last constraint mentions, keeping the rest of `base`.
pub(crate) fn solve_or_fallback(s: &mut Session<'_>, target: &[Constraint], base: &Model) -> Steered {
    let event = |outcome: &str, detail: String| SolverEvent {
        site: 0,
        outcome: outcome.to_string(),
        detail,
    };
    let reason = match solve(target, &s.cfg.solver) {
        Ok(SolveResult::Sat { model }) => {
            let m = complete(base.merged(&model), target);
            return Steered::Model(m, RunOrigin::Solved, event("sat", String::new()));
        }
        Ok(SolveResult::Unsat { bounded }) => {
            let detail = if bounded { "within bounds" } else { "exact" };
            return Steered::Pruned(event("unsat", detail.to_string()));
        }
        Ok(SolveResult::Unknown { reason }) => reason,
        Err(e) => e.to_string(),
    };
    let Some((last, prefix)) = target.split_last() else {
        return Steered::GaveUp(event("unknown", reason));
    };
    let fixed: std::collections::BTreeSet<SymVar> = prefix.iter().flat_map(|c| c.vars()).collect();
    let free: Vec<SymVar> = last.vars().into_iter().filter(|v| !fixed.contains(v)).collect();
    if free.is_empty() {
        return Steered::GaveUp(event("unknown", format!("{reason}; nothing to randomize")));
    }
    let base = complete(base.clone(), target);
    for tries in 1..=s.cfg.max_fallback {
        let mut m = base.clone();
        for v in &free {
            m.insert(v.clone(), random_value(&mut s.rng, v.sort, s.cfg));
        }
        if satisfies(target, &m) == Ok(true) {
            return Steered::Model(
                m,
                RunOrigin::Fallback { tries },
                event("unknown", format!("{reason}; random fallback succeeded after {tries} tries")),
            );
        }
    }
    Steered::GaveUp(event(
        "unknown",
        format!("{reason}; random fallback failed after {} tries", s.cfg.max_fallback),
    ))
}

/// Gives every variable of `cs` a value, defaulting missing ones.
fn complete(mut m: Model, cs: &[Constraint]) -> Model {
    for c in cs {
        for v in c.vars() {
            if m.get(&v).is_none() {
                m.insert(v.clone(), Value::default_of(v.sort));
            }
        }
    }
    m
}

pub(crate) fn random_value(rng: &mut ChaCha8Rng, sort: Sort, cfg: &SearchConfig) -> Value {
    match sort {
        Sort::Int => {
            let b = cfg.solver.int_bound.max(0);
            Value::Int(rng.gen_range(-b..=b))
        }
        Sort::Str => {
            let len = rng.gen_range(0..=cfg.solver.str_max_len);
            let alphabet = &cfg.solver.alphabet;
            let s: String = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
            Value::Str(s)
        }
    }
}

/// Widget inputs realizing a model.
pub fn witness_of(model: &Model) -> InputMap {
    let mut out = InputMap::new();
    for (v, value) in model.iter() {
        match &v.origin {
            Origin::SourceWidget { widget } => {
                out.insert(widget.clone(), value.to_text());
            }
            Origin::ProviderArg { provider } => {
                out.insert(provider_key(provider), value.to_text());
            }
            Origin::SinkResult { .. } => {}
        }
    }
    out
}
