use std::collections::{BTreeMap, HashMap, HashSet};

use super::*;
use crate::error::{IrError, Pos};

/// Source positions recorded by the parser, used to locate validation errors.
#[derive(Debug, Default)]
pub(crate) struct Spans {
    pub stmts: HashMap<StmtId, Pos>,
    pub widgets: Vec<(String, Pos)>,
    pub components: Vec<Pos>,
    pub handlers: Vec<Pos>,
    pub functions: Vec<Pos>,
    pub tables: Vec<Pos>,
}

/// Checks every structural and typing invariant of an app.
///
/// `+` must already be resolved to [`Expr::Concat`] or [`Expr::Add`] and string
/// comparisons to [`Cond::StrEq`]; the parser does this automatically.
pub fn validate(app: &MiniApp) -> Result<(), IrError> {
    Checker::new(app, &Spans::default(), false)
        .run(&mut app.clone())
}

/// Static types of every variable, per component and per function.
#[derive(Debug, Clone, Default)]
pub struct VarTypes {
    pub components: Vec<HashMap<String, Type>>,
    pub functions: Vec<HashMap<String, Type>>,
}

/// Variable types of a validated app. Variables of an invalid app that fail to
/// type are simply missing.
pub fn var_types(app: &MiniApp) -> VarTypes {
    let spans = Spans::default();
    let mut checker = Checker::new(app, &spans, false);
    let _ = checker.types(&mut app.clone());
    VarTypes {
        components: checker.component_envs,
        functions: checker.function_envs,
    }
}

/// Resolves overloaded `+` and `==`/`!=` by operand type, then validates.
pub(crate) fn resolve(app: &mut MiniApp, spans: &Spans) -> Result<(), IrError> {
    let snapshot = app.clone();
    Checker::new(&snapshot, spans, true).run(app)?;
    let resolved = app.clone();
    Checker::new(&resolved, spans, false)
        .run(&mut resolved.clone())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ReadMode {
    Text,
    Numeric,
}

struct Checker<'a> {
    app: &'a MiniApp,
    spans: &'a Spans,
    rewrite: bool,
    widget_modes: BTreeMap<String, ReadMode>,
    component_envs: Vec<HashMap<String, Type>>,
    function_envs: Vec<HashMap<String, Type>>,
}

/// Where a body lives, which decides the widgets it may touch and whether
/// `return` is allowed.
#[derive(Clone, Copy)]
enum Scope<'a> {
    Activity(&'a Component),
    Provider,
    Function(&'a Function),
}

impl<'a> Checker<'a> {
    fn new(app: &'a MiniApp, spans: &'a Spans, rewrite: bool) -> Self {
        Checker {
            app,
            spans,
            rewrite,
            widget_modes: BTreeMap::new(),
            component_envs: Vec::new(),
            function_envs: Vec::new(),
        }
    }

    fn stmt_pos(&self, id: StmtId) -> Pos {
        self.spans.stmts.get(&id).copied().unwrap_or_default()
    }

    fn run(mut self, out: &mut MiniApp) -> Result<(), IrError> {
        self.structure()?;
        let mut seen_ids = HashSet::new();
        for s in self.app.statements() {
            if !seen_ids.insert(s.id) {
                return Err(IrError::Invalid {
                    pos: self.stmt_pos(s.id),
                    msg: format!("statement id {} used twice", s.id),
                });
            }
        }
        self.types(out)
    }

    fn types(&mut self, out: &mut MiniApp) -> Result<(), IrError> {
        for (ci, comp) in self.app.components.iter().enumerate() {
            let mut env: HashMap<String, Type> = HashMap::new();
            let scope = match comp.kind {
                ComponentKind::Activity => Scope::Activity(comp),
                ComponentKind::Provider => Scope::Provider,
            };
            for (hi, h) in comp.handlers.iter().enumerate() {
                if let Trigger::Query { param } = &h.trigger {
                    env.insert(param.clone(), Type::Str);
                }
                let body = &mut out.components[ci].handlers[hi].body;
                self.body(body, &mut env, scope)?;
            }
            self.component_envs.push(env);
        }
        for (fi, f) in self.app.functions.iter().enumerate() {
            let mut env: HashMap<String, Type> =
                f.params.iter().map(|p| (p.name.clone(), p.ty)).collect();
            let body = &mut out.functions[fi].body;
            self.body(body, &mut env, Scope::Function(f))?;
            self.function_envs.push(env);
        }
        Ok(())
    }

    fn structure(&self) -> Result<(), IrError> {
        let app = self.app;
        let cpos = |i: usize| self.spans.components.get(i).copied().unwrap_or_default();
        let mut names = HashSet::new();
        for (i, c) in app.components.iter().enumerate() {
            if !names.insert(c.name.as_str()) {
                return Err(IrError::Invalid {
                    pos: cpos(i),
                    msg: format!("duplicate component name `{}`", c.name),
                });
            }
        }
        let mut tables = HashSet::new();
        for (i, t) in app.tables.iter().enumerate() {
            if !tables.insert(t.name.as_str()) {
                return Err(IrError::Invalid {
                    pos: self.spans.tables.get(i).copied().unwrap_or_default(),
                    msg: format!("duplicate table `{}`", t.name),
                });
            }
        }
        let mut fns = HashSet::new();
        for (i, f) in app.functions.iter().enumerate() {
            if !fns.insert(f.name.as_str()) {
                return Err(IrError::Invalid {
                    pos: self.spans.functions.get(i).copied().unwrap_or_default(),
                    msg: format!("duplicate function `{}`", f.name),
                });
            }
        }
        let mut widgets = HashSet::new();
        let mut widx = 0;
        for c in &app.components {
            for w in &c.widgets {
                let pos = self
                    .spans
                    .widgets
                    .get(widx)
                    .map(|(_, p)| *p)
                    .unwrap_or_default();
                widx += 1;
                if !widgets.insert(w.id.as_str()) {
                    return Err(IrError::DuplicateWidget {
                        pos,
                        id: w.id.clone(),
                    });
                }
            }
        }
        let mut hidx = 0;
        for (ci, c) in app.components.iter().enumerate() {
            let mut slots = HashSet::new();
            let mut clicks = HashSet::new();
            if c.kind == ComponentKind::Provider {
                if !c.widgets.is_empty() {
                    return Err(IrError::Invalid {
                        pos: cpos(ci),
                        msg: format!("provider `{}` cannot declare widgets", c.name),
                    });
                }
                let queries = c
                    .handlers
                    .iter()
                    .filter(|h| matches!(h.trigger, Trigger::Query { .. }))
                    .count();
                if queries != 1 || c.handlers.len() != 1 {
                    return Err(IrError::Invalid {
                        pos: cpos(ci),
                        msg: format!(
                            "provider `{}` must have exactly one query handler",
                            c.name
                        ),
                    });
                }
            }
            for h in &c.handlers {
                let pos = self.spans.handlers.get(hidx).copied().unwrap_or_default();
                hidx += 1;
                match &h.trigger {
                    Trigger::Lifecycle(slot) => {
                        if c.kind != ComponentKind::Activity {
                            return Err(IrError::Invalid {
                                pos,
                                msg: "lifecycle handlers belong to activities".into(),
                            });
                        }
                        if !slots.insert(*slot) {
                            return Err(IrError::Invalid {
                                pos,
                                msg: format!(
                                    "activity `{}` declares `{}` twice",
                                    c.name,
                                    slot.keyword()
                                ),
                            });
                        }
                    }
                    Trigger::Click(w) => {
                        match c.widget(w) {
                            Some(wd) if wd.kind == WidgetKind::Button => {}
                            Some(_) => {
                                return Err(IrError::Invalid {
                                    pos,
                                    msg: format!("onclick target `{w}` is not a button"),
                                })
                            }
                            None => {
                                return Err(IrError::Invalid {
                                    pos,
                                    msg: format!(
                                        "onclick target `{w}` is not declared in `{}`",
                                        c.name
                                    ),
                                })
                            }
                        }
                        if !clicks.insert(w.as_str()) {
                            return Err(IrError::Invalid {
                                pos,
                                msg: format!("button `{w}` has two onclick handlers"),
                            });
                        }
                    }
                    Trigger::Query { .. } => {
                        if c.kind != ComponentKind::Provider {
                            return Err(IrError::Invalid {
                                pos,
                                msg: "query handlers belong to providers".into(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn body(
        &mut self,
        body: &mut [Stmt],
        env: &mut HashMap<String, Type>,
        scope: Scope<'_>,
    ) -> Result<(), IrError> {
        for s in body.iter_mut() {
            self.stmt(s, env, scope)?;
        }
        Ok(())
    }

    fn assign(
        &self,
        env: &mut HashMap<String, Type>,
        var: &str,
        ty: Type,
        pos: Pos,
    ) -> Result<(), IrError> {
        match env.get(var) {
            Some(t) if *t != ty => Err(IrError::Type {
                pos,
                msg: format!(
                    "variable `{var}` holds {} but is assigned {}",
                    t.keyword(),
                    ty.keyword()
                ),
            }),
            _ => {
                env.insert(var.to_string(), ty);
                Ok(())
            }
        }
    }

    fn stmt(
        &mut self,
        s: &mut Stmt,
        env: &mut HashMap<String, Type>,
        scope: Scope<'_>,
    ) -> Result<(), IrError> {
        let pos = self.stmt_pos(s.id);
        match &mut s.kind {
            StmtKind::Assign { var, expr } => {
                let ty = self.expr(expr, env, scope, pos)?;
                self.assign(env, var, ty, pos)?;
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.cond(cond, env, scope, pos)?;
                self.body(then_body, env, scope)?;
                self.body(else_body, env, scope)?;
            }
            StmtKind::Sink {
                result,
                sink,
                query,
                params,
            } => {
                if !is_vulnerable_function(sink) {
                    return Err(IrError::UnknownSink {
                        pos,
                        name: sink.clone(),
                    });
                }
                self.expect(query, Type::Str, env, scope, pos, "query argument")?;
                for p in params.iter_mut() {
                    self.expr(p, env, scope, pos)?;
                }
                if let Some(r) = result {
                    self.assign(env, r, Type::Str, pos)?;
                }
            }
            StmtKind::Leak { widget, value } => {
                self.widget_ref(widget, WidgetKind::TextBox, scope, pos, "setText")?;
                self.expect(value, Type::Str, env, scope, pos, "setText value")?;
            }
            StmtKind::ProviderQuery {
                result,
                provider,
                arg,
            } => {
                match self.app.component(provider) {
                    Some(c) if c.kind == ComponentKind::Provider => {}
                    _ => {
                        return Err(IrError::Invalid {
                            pos,
                            msg: format!("unknown provider `{provider}`"),
                        })
                    }
                }
                self.expect(arg, Type::Str, env, scope, pos, "provider argument")?;
                self.assign(env, result, Type::Str, pos)?;
            }
            StmtKind::Call {
                result,
                function,
                args,
            } => {
                let Some(f) = self.app.function(function) else {
                    return Err(IrError::Invalid {
                        pos,
                        msg: format!("unknown function `{function}`"),
                    });
                };
                if f.params.len() != args.len() {
                    return Err(IrError::Type {
                        pos,
                        msg: format!(
                            "`{function}` takes {} argument(s), {} given",
                            f.params.len(),
                            args.len()
                        ),
                    });
                }
                for (a, p) in args.iter_mut().zip(&f.params) {
                    self.expect(a, p.ty, env, scope, pos, "argument")?;
                }
                if let Some(r) = result {
                    let Some(ret) = f.ret else {
                        return Err(IrError::Type {
                            pos,
                            msg: format!("`{function}` returns no value"),
                        });
                    };
                    self.assign(env, r, ret, pos)?;
                }
            }
            StmtKind::Return(e) => match scope {
                Scope::Function(f) => {
                    let Some(ret) = f.ret else {
                        return Err(IrError::Type {
                            pos,
                            msg: format!("`{}` returns no value", f.name),
                        });
                    };
                    self.expect(e, ret, env, scope, pos, "return value")?;
                }
                Scope::Provider => {
                    self.expect(e, Type::Str, env, scope, pos, "provider result")?;
                }
                Scope::Activity(_) => {
                    return Err(IrError::Invalid {
                        pos,
                        msg: "`return` is only allowed in functions and provider handlers".into(),
                    })
                }
            },
        }
        Ok(())
    }

    fn expect(
        &mut self,
        e: &mut Expr,
        ty: Type,
        env: &HashMap<String, Type>,
        scope: Scope<'_>,
        pos: Pos,
        what: &str,
    ) -> Result<(), IrError> {
        let got = self.expr(e, env, scope, pos)?;
        if got != ty {
            return Err(IrError::Type {
                pos,
                msg: format!("{what} must be {}, found {}", ty.keyword(), got.keyword()),
            });
        }
        Ok(())
    }

    fn widget_ref(
        &self,
        id: &str,
        kind: WidgetKind,
        scope: Scope<'_>,
        pos: Pos,
        what: &str,
    ) -> Result<(), IrError> {
        let found = match scope {
            Scope::Activity(c) => c.widget(id),
            Scope::Provider => None,
            Scope::Function(_) => self.app.widget(id).map(|(_, w)| w),
        };
        match found {
            Some(w) if w.kind == kind => Ok(()),
            Some(_) => Err(IrError::Invalid {
                pos,
                msg: format!("{what} target `{id}` has the wrong widget kind"),
            }),
            None => Err(IrError::Invalid {
                pos,
                msg: format!("widget `{id}` is not declared in this component"),
            }),
        }
    }

    fn read_mode(&mut self, id: &str, mode: ReadMode, pos: Pos) -> Result<(), IrError> {
        match self.widget_modes.get(id) {
            Some(m) if *m != mode => Err(IrError::Type {
                pos,
                msg: format!("edit box `{id}` is read both as text and as a number"),
            }),
            _ => {
                self.widget_modes.insert(id.to_string(), mode);
                Ok(())
            }
        }
    }

    fn expr(
        &mut self,
        e: &mut Expr,
        env: &HashMap<String, Type>,
        scope: Scope<'_>,
        pos: Pos,
    ) -> Result<Type, IrError> {
        Ok(match e {
            Expr::Int(_) => Type::Int,
            Expr::Str(_) => Type::Str,
            Expr::Var(v) => *env.get(v.as_str()).ok_or_else(|| IrError::Type {
                pos,
                msg: format!("variable `{v}` used before assignment"),
            })?,
            Expr::Input(w) => {
                self.widget_ref(w, WidgetKind::EditBox, scope, pos, "input")?;
                self.read_mode(w, ReadMode::Text, pos)?;
                Type::Str
            }
            Expr::ToInt(inner) => {
                if let Expr::Input(w) = inner.as_mut() {
                    self.widget_ref(w, WidgetKind::EditBox, scope, pos, "input")?;
                    self.read_mode(w, ReadMode::Numeric, pos)?;
                } else {
                    let t = self.expr(inner, env, scope, pos)?;
                    if t != Type::Str {
                        return Err(IrError::Type {
                            pos,
                            msg: "int(..) expects text".into(),
                        });
                    }
                }
                Type::Int
            }
            Expr::Concat(a, b) => {
                let (ta, tb) = (
                    self.expr(a, env, scope, pos)?,
                    self.expr(b, env, scope, pos)?,
                );
                if ta != Type::Str || tb != Type::Str {
                    return Err(IrError::Type {
                        pos,
                        msg: "concatenation needs two strings".into(),
                    });
                }
                Type::Str
            }
            Expr::Add(..) | Expr::Mul(..) => {
                let is_add = matches!(e, Expr::Add(..));
                let (Expr::Add(a, b) | Expr::Mul(a, b)) = e else {
                    unreachable!()
                };
                let ta = self.expr(a, env, scope, pos)?;
                let tb = self.expr(b, env, scope, pos)?;
                match (ta, tb) {
                    (Type::Int, Type::Int) => Type::Int,
                    (Type::Str, Type::Str) if is_add && self.rewrite => {
                        let lhs = std::mem::replace(a.as_mut(), Expr::Int(0));
                        let rhs = std::mem::replace(b.as_mut(), Expr::Int(0));
                        *e = Expr::Concat(Box::new(lhs), Box::new(rhs));
                        Type::Str
                    }
                    _ => {
                        return Err(IrError::Type {
                            pos,
                            msg: format!(
                                "cannot apply `{}` to {} and {}",
                                if is_add { "+" } else { "*" },
                                ta.keyword(),
                                tb.keyword()
                            ),
                        })
                    }
                }
            }
        })
    }

    fn cond(
        &mut self,
        c: &mut Cond,
        env: &HashMap<String, Type>,
        scope: Scope<'_>,
        pos: Pos,
    ) -> Result<(), IrError> {
        match c {
            Cond::Not(inner) => self.cond(inner, env, scope, pos),
            Cond::StrEq(a, b) | Cond::Contains(a, b) => {
                self.expect(a, Type::Str, env, scope, pos, "string operand")?;
                self.expect(b, Type::Str, env, scope, pos, "string operand")
            }
            Cond::Cmp(op, a, b) => {
                let op = *op;
                let ta = self.expr(a, env, scope, pos)?;
                let tb = self.expr(b, env, scope, pos)?;
                match (ta, tb) {
                    (Type::Int, Type::Int) => Ok(()),
                    (Type::Str, Type::Str)
                        if self.rewrite && matches!(op, CmpOp::Eq | CmpOp::Ne) =>
                    {
                        let lhs = std::mem::replace(a, Expr::Int(0));
                        let rhs = std::mem::replace(b, Expr::Int(0));
                        let eq = Cond::StrEq(lhs, rhs);
                        *c = if op == CmpOp::Eq {
                            eq
                        } else {
                            Cond::Not(Box::new(eq))
                        };
                        Ok(())
                    }
                    _ => Err(IrError::Type {
                        pos,
                        msg: format!(
                            "cannot compare {} with {} using `{}`",
                            ta.keyword(),
                            tb.keyword(),
                            op.symbol()
                        ),
                    }),
                }
            }
        }
    }
}
