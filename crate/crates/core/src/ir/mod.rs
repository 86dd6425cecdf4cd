//! The mini-app intermediate representation.
//!
//! A mini-app is a small model of an event-driven mobile app: activities with
//! widgets and callbacks, content providers answering IPC queries, developer
//! helper functions and the database tables they talk to. Source text uses the
//! `.mapp` grammar handled by [`parse_app`]; [`print_app`] renders it back.

mod interp;
mod parse;
mod print;
mod validate;

use serde::{Deserialize, Serialize};

pub use interp::{
    coerce_int, eval_concrete, eval_with_env, provider_key, EvalError, Environment, ExecTrace,
    InputMap, LeakRecord, LeakTarget, SinkRecord, MAX_CALL_DEPTH,
};
pub use parse::parse_app;
pub use print::print_app;
pub use validate::{validate, var_types, VarTypes};

/// Statement identifier, unique across the whole app. Statements are numbered
/// from 1, depth first through component handlers and then functions; an `if`
/// statement's id doubles as its branch-site id.
pub type StmtId = u32;

/// Names of the database functions through which injection is possible.
pub const VULNERABLE_FUNCTIONS: [&str; 8] = [
    "query",
    "queryWithFactory",
    "rawQuery",
    "rawQueryWithFactory",
    "update",
    "updateWithOnConflict",
    "delete",
    "execSQL",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiniApp {
    pub name: String,
    pub tables: Vec<TableSchema>,
    pub components: Vec<Component>,
    pub functions: Vec<Function>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Activity,
    Provider,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub kind: ComponentKind,
    pub widgets: Vec<Widget>,
    pub handlers: Vec<Handler>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidgetKind {
    /// Text input; a taint source.
    EditBox,
    /// Click target; an event source.
    Button,
    /// Text output; a leak channel.
    TextBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widget {
    pub id: String,
    pub kind: WidgetKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LifecycleSlot {
    #[serde(rename = "onCreate")]
    OnCreate,
    #[serde(rename = "onStart")]
    OnStart,
    #[serde(rename = "onResume")]
    OnResume,
}

impl LifecycleSlot {
    /// Slots in the order a driver invokes them.
    pub const ORDER: [LifecycleSlot; 3] = [Self::OnCreate, Self::OnStart, Self::OnResume];

    pub fn method_name(self) -> &'static str {
        match self {
            Self::OnCreate => "onCreate",
            Self::OnStart => "onStart",
            Self::OnResume => "onResume",
        }
    }

    pub(crate) fn keyword(self) -> &'static str {
        match self {
            Self::OnCreate => "oncreate",
            Self::OnStart => "onstart",
            Self::OnResume => "onresume",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Lifecycle(LifecycleSlot),
    /// Click on the named button.
    Click(String),
    /// A provider's IPC `query` entry point; `param` names the argument.
    Query { param: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handler {
    pub trigger: Trigger,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Type {
    Int,
    Str,
}

impl Type {
    pub fn keyword(self) -> &'static str {
        match self {
            Type::Int => "int",
            Type::Str => "str",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

/// A developer helper function, inlined at each `call`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Option<Type>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stmt {
    pub id: StmtId,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StmtKind {
    Assign {
        var: String,
        expr: Expr,
    },
    If {
        cond: Cond,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
    /// Call to one of [`VULNERABLE_FUNCTIONS`]. A non-empty `params` list is
    /// the parametric form: values bound to `?` holes after parsing.
    Sink {
        result: Option<String>,
        sink: String,
        query: Expr,
        params: Vec<Expr>,
    },
    /// `setText` on a text widget.
    Leak {
        widget: String,
        value: Expr,
    },
    /// Query another component's content provider (IPC).
    ProviderQuery {
        result: String,
        provider: String,
        arg: Expr,
    },
    Call {
        result: Option<String>,
        function: String,
        args: Vec<Expr>,
    },
    /// Leaves a function or a provider handler. A provider's returned value
    /// reaches the IPC caller.
    Return(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Int(i64),
    Str(String),
    Var(String),
    /// Text currently held by an edit box.
    Input(String),
    /// Text-to-int coercion; non-numeric text yields 0.
    ToInt(Box<Expr>),
    Concat(Box<Expr>, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cond {
    Cmp(CmpOp, Expr, Expr),
    StrEq(Expr, Expr),
    Contains(Expr, Expr),
    Not(Box<Cond>),
}

/// Which way a branch went.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Then,
    Else,
}

impl Side {
    pub fn from_bool(taken: bool) -> Side {
        if taken {
            Side::Then
        } else {
            Side::Else
        }
    }

    pub fn flip(self) -> Side {
        match self {
            Side::Then => Side::Else,
            Side::Else => Side::Then,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Then => "then",
            Side::Else => "else",
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl MiniApp {
    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// The component declaring `widget`, with the widget itself.
    pub fn widget(&self, id: &str) -> Option<(&Component, &Widget)> {
        self.components
            .iter()
            .find_map(|c| c.widgets.iter().find(|w| w.id == id).map(|w| (c, w)))
    }

    /// Position of an edit box in declaration order, used to order report inputs.
    pub fn widget_index(&self, id: &str) -> Option<usize> {
        self.components
            .iter()
            .flat_map(|c| c.widgets.iter())
            .position(|w| w.id == id)
    }

    /// Every statement in the app, depth first in id order.
    pub fn statements(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        for c in &self.components {
            for h in &c.handlers {
                collect_stmts(&h.body, &mut out);
            }
        }
        for f in &self.functions {
            collect_stmts(&f.body, &mut out);
        }
        out.sort_by_key(|s| s.id);
        out
    }

    pub fn statement_count(&self) -> usize {
        self.statements().len()
    }

    pub fn stmt(&self, id: StmtId) -> Option<&Stmt> {
        self.statements().into_iter().find(|s| s.id == id)
    }
}

fn collect_stmts<'a>(body: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
    for s in body {
        out.push(s);
        if let StmtKind::If {
            then_body,
            else_body,
            ..
        } = &s.kind
        {
            collect_stmts(then_body, out);
            collect_stmts(else_body, out);
        }
    }
}

impl Component {
    pub fn handler(&self, trigger: &Trigger) -> Option<&Handler> {
        self.handlers.iter().find(|h| &h.trigger == trigger)
    }

    pub fn widget(&self, id: &str) -> Option<&Widget> {
        self.widgets.iter().find(|w| w.id == id)
    }
}

pub fn is_vulnerable_function(name: &str) -> bool {
    VULNERABLE_FUNCTIONS.contains(&name)
}
