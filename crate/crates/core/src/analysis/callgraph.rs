use serde::{Deserialize, Serialize};

use crate::ir::{ComponentKind, MiniApp, Stmt, StmtKind, Trigger};

/// Qualified name of the synthetic entry point.
pub const DRIVER_MAIN: &str = "DriverMain.main";

const SQLITE_CLASS: &str = "android.database.sqlite.SQLiteDatabase";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FnKind {
    /// Developer code called directly by other app code.
    Normal,
    /// Event callback attached to a widget.
    Listener,
    /// Invoked by the framework: lifecycle, IPC entry points and SDK calls.
    Framework,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum NodeRole {
    Root,
    Handler {
        component: String,
        trigger: Trigger,
    },
    Function {
        name: String,
    },
    Sink {
        sink: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnNode {
    pub id: usize,
    pub name: String,
    pub kind: FnKind,
    /// Declaring component of handler nodes.
    pub parent: Option<String>,
    #[serde(flatten)]
    pub role: NodeRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CgEdge {
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraph {
    pub nodes: Vec<FnNode>,
    pub edges: Vec<CgEdge>,
    pub root: usize,
}

impl CallGraph {
    pub fn node(&self, id: usize) -> &FnNode {
        &self.nodes[id]
    }

    pub fn callers(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.to == id).map(|e| e.from)
    }

    pub fn callees(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.from == id).map(|e| e.to)
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn sink_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .filter(|n| matches!(n.role, NodeRole::Sink { .. }))
            .map(|n| n.id)
    }
}

/// Qualified name of a handler as it appears in stack traces.
pub fn handler_name(component: &str, trigger: &Trigger) -> String {
    match trigger {
        Trigger::Lifecycle(slot) => format!("{component}.{}", slot.method_name()),
        Trigger::Click(w) => format!("{component}${w}.onClick"),
        Trigger::Query { .. } => format!("{component}.query"),
    }
}

/// Qualified SDK name of a database sink.
pub fn sink_name(sink: &str) -> String {
    format!("{SQLITE_CLASS}.{sink}")
}

pub fn build_call_graph(app: &MiniApp) -> CallGraph {
    let mut nodes = vec![FnNode {
        id: 0,
        name: DRIVER_MAIN.to_string(),
        kind: FnKind::Framework,
        parent: None,
        role: NodeRole::Root,
    }];
    let mut bodies: Vec<(usize, &[Stmt])> = Vec::new();
    for c in &app.components {
        for h in &c.handlers {
            let kind = match h.trigger {
                Trigger::Click(_) => FnKind::Listener,
                _ => FnKind::Framework,
            };
            let id = nodes.len();
            nodes.push(FnNode {
                id,
                name: handler_name(&c.name, &h.trigger),
                kind,
                parent: Some(c.name.clone()),
                role: NodeRole::Handler {
                    component: c.name.clone(),
                    trigger: h.trigger.clone(),
                },
            });
            bodies.push((id, &h.body));
        }
    }
    let first_fn = nodes.len();
    for f in &app.functions {
        let id = nodes.len();
        nodes.push(FnNode {
            id,
            name: f.name.clone(),
            kind: FnKind::Normal,
            parent: None,
            role: NodeRole::Function {
                name: f.name.clone(),
            },
        });
        bodies.push((id, &f.body));
    }

    let provider_node = |name: &str| -> Option<usize> {
        let ci = app
            .components
            .iter()
            .position(|c| c.name == name && c.kind == ComponentKind::Provider)?;
        let before: usize = app.components[..ci].iter().map(|c| c.handlers.len()).sum();
        Some(1 + before)
    };

    let mut edges = Vec::new();
    for (id, _) in &bodies {
        if *id < first_fn {
            edges.push(CgEdge { from: 0, to: *id });
        }
    }
    for (from, body) in bodies {
        let mut calls = Vec::new();
        collect_calls(body, &mut calls);
        for call in calls {
            let to = match call {
                Callee::Function(name) => app
                    .functions
                    .iter()
                    .position(|f| f.name == name)
                    .map(|i| first_fn + i),
                Callee::Provider(name) => provider_node(name),
                Callee::Sink(sink) => {
                    let name = sink_name(sink);
                    Some(match nodes.iter().position(|n| n.name == name) {
                        Some(i) => i,
                        None => {
                            let id = nodes.len();
                            nodes.push(FnNode {
                                id,
                                name,
                                kind: FnKind::Framework,
                                parent: None,
                                role: NodeRole::Sink {
                                    sink: sink.to_string(),
                                },
                            });
                            id
                        }
                    })
                }
            };
            if let Some(to) = to {
                edges.push(CgEdge { from, to });
            }
        }
    }
    edges.sort();
    edges.dedup();
    CallGraph {
        nodes,
        edges,
        root: 0,
    }
}

enum Callee<'a> {
    Function(&'a str),
    Provider(&'a str),
    Sink(&'a str),
}

fn collect_calls<'a>(body: &'a [Stmt], out: &mut Vec<Callee<'a>>) {
    for s in body {
        match &s.kind {
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => {
                collect_calls(then_body, out);
                collect_calls(else_body, out);
            }
            StmtKind::Call { function, .. } => out.push(Callee::Function(function)),
            StmtKind::ProviderQuery { provider, .. } => out.push(Callee::Provider(provider)),
            StmtKind::Sink { sink, .. } => out.push(Callee::Sink(sink)),
            _ => {}
        }
    }
}
