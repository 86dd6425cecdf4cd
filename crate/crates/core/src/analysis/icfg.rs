use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::callgraph::{handler_name, DRIVER_MAIN};
use crate::ir::{ComponentKind, LifecycleSlot, MiniApp, Side, Stmt, StmtId, StmtKind, Trigger, MAX_CALL_DEPTH};

/// Upper bound on backward ICFG paths enumerated per sink.
pub const MAX_PATHS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum IcfgNodeKind {
    Root,
    Entry { procedure: String },
    Exit { procedure: String },
    Stmt { stmt: StmtId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IcfgNode {
    pub id: usize,
    #[serde(flatten)]
    pub kind: IcfgNodeKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub branch_site: Option<StmtId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sink: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "site", rename_all = "snake_case")]
pub enum EdgeKind {
    Then,
    Else,
    Flow,
    /// Framework dispatch between handlers.
    Dispatch,
    /// Call site to callee entry.
    Call(StmtId),
    /// Callee exit to the statement after the call site.
    Return(StmtId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IcfgEdge {
    pub from: usize,
    pub to: usize,
    #[serde(flatten)]
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Icfg {
    pub nodes: Vec<IcfgNode>,
    pub edges: Vec<IcfgEdge>,
    pub root: usize,
    #[serde(skip)]
    stmt_nodes: BTreeMap<StmtId, usize>,
    #[serde(skip)]
    preds: Vec<Vec<usize>>,
}

impl Icfg {
    pub fn stmt_node(&self, stmt: StmtId) -> Option<usize> {
        self.stmt_nodes.get(&stmt).copied()
    }

    /// Incoming edges of `node`, then-edges before else-edges.
    pub fn incoming(&self, node: usize) -> impl Iterator<Item = &IcfgEdge> + '_ {
        self.preds[node].iter().map(|&e| &self.edges[e])
    }

    pub fn outgoing(&self, node: usize) -> impl Iterator<Item = &IcfgEdge> + '_ {
        self.edges.iter().filter(move |e| e.from == node)
    }

    pub fn sink_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter(|n| n.sink.is_some()).map(|n| n.id)
    }
}

/// Preferred side at one branch site of a vulnerable path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchEntry {
    pub site: StmtId,
    pub side: Side,
}

/// Branch sides along one static path to a sink. `entries[0]` is the top of
/// the stack: the first conditional met in forward execution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchStack {
    pub sink: StmtId,
    pub entries: Vec<BranchEntry>,
}

impl BranchStack {
    pub fn pairs(&self) -> Vec<(StmtId, Side)> {
        self.entries.iter().map(|e| (e.site, e.side)).collect()
    }
}

struct Builder<'a> {
    app: &'a MiniApp,
    nodes: Vec<IcfgNode>,
    edges: Vec<IcfgEdge>,
    stmt_nodes: BTreeMap<StmtId, usize>,
    handler_procs: HashMap<(usize, usize), (usize, usize)>,
    fn_procs: Vec<(usize, usize)>,
}

impl Builder<'_> {
    fn node(&mut self, kind: IcfgNodeKind) -> usize {
        let id = self.nodes.len();
        self.nodes.push(IcfgNode {
            id,
            kind,
            branch_site: None,
            sink: None,
        });
        id
    }

    fn edge(&mut self, from: usize, to: usize, kind: EdgeKind) {
        self.edges.push(IcfgEdge { from, to, kind });
    }

    fn provider_proc(&self, name: &str) -> Option<(usize, usize)> {
        let ci = self.app.components.iter().position(|c| c.name == name)?;
        self.handler_procs.get(&(ci, 0)).copied()
    }

    /// Wires `body` so that it falls through to `next`; returns its first node.
    fn block(&mut self, body: &[Stmt], next: usize, exit: usize) -> usize {
        let mut cur = next;
        for s in body.iter().rev() {
            let n = self.stmt_nodes[&s.id];
            match &s.kind {
                StmtKind::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    let t = self.block(then_body, cur, exit);
                    let e = self.block(else_body, cur, exit);
                    self.edge(n, t, EdgeKind::Then);
                    self.edge(n, e, EdgeKind::Else);
                }
                StmtKind::Return(_) => self.edge(n, exit, EdgeKind::Flow),
                StmtKind::Call { function, .. } => {
                    let fi = self.app.functions.iter().position(|f| &f.name == function);
                    match fi.map(|i| self.fn_procs[i]) {
                        Some((entry, fexit)) => {
                            self.edge(n, entry, EdgeKind::Call(s.id));
                            self.edge(fexit, cur, EdgeKind::Return(s.id));
                        }
                        None => self.edge(n, cur, EdgeKind::Flow),
                    }
                }
                StmtKind::ProviderQuery { provider, .. } => match self.provider_proc(provider) {
                    Some((entry, pexit)) => {
                        self.edge(n, entry, EdgeKind::Call(s.id));
                        self.edge(pexit, cur, EdgeKind::Return(s.id));
                    }
                    None => self.edge(n, cur, EdgeKind::Flow),
                },
                _ => self.edge(n, cur, EdgeKind::Flow),
            }
            cur = n;
        }
        cur
    }
}

pub fn build_icfg(app: &MiniApp) -> Icfg {
    let mut b = Builder {
        app,
        nodes: Vec::new(),
        edges: Vec::new(),
        stmt_nodes: BTreeMap::new(),
        handler_procs: HashMap::new(),
        fn_procs: Vec::new(),
    };
    let root = b.node(IcfgNodeKind::Root);
    for (ci, c) in app.components.iter().enumerate() {
        for (hi, h) in c.handlers.iter().enumerate() {
            let procedure = handler_name(&c.name, &h.trigger);
            let entry = b.node(IcfgNodeKind::Entry {
                procedure: procedure.clone(),
            });
            let exit = b.node(IcfgNodeKind::Exit { procedure });
            b.handler_procs.insert((ci, hi), (entry, exit));
        }
    }
    for f in &app.functions {
        let entry = b.node(IcfgNodeKind::Entry {
            procedure: f.name.clone(),
        });
        let exit = b.node(IcfgNodeKind::Exit {
            procedure: f.name.clone(),
        });
        b.fn_procs.push((entry, exit));
    }
    for s in app.statements() {
        let n = b.node(IcfgNodeKind::Stmt { stmt: s.id });
        match &s.kind {
            StmtKind::If { .. } => b.nodes[n].branch_site = Some(s.id),
            StmtKind::Sink { sink, .. } => b.nodes[n].sink = Some(sink.clone()),
            _ => {}
        }
        b.stmt_nodes.insert(s.id, n);
    }
    for (ci, c) in app.components.iter().enumerate() {
        for (hi, h) in c.handlers.iter().enumerate() {
            let (entry, exit) = b.handler_procs[&(ci, hi)];
            let first = b.block(&h.body, exit, exit);
            b.edge(entry, first, EdgeKind::Flow);
        }
    }
    for (fi, f) in app.functions.iter().enumerate() {
        let (entry, exit) = b.fn_procs[fi];
        let first = b.block(&f.body, exit, exit);
        b.edge(entry, first, EdgeKind::Flow);
    }
    for (ci, c) in app.components.iter().enumerate() {
        let proc_of = |trigger: &Trigger| {
            c.handlers
                .iter()
                .position(|h| &h.trigger == trigger)
                .map(|hi| b.handler_procs[&(ci, hi)])
        };
        let mut dispatch = Vec::new();
        match c.kind {
            ComponentKind::Activity => {
                let mut prev = root;
                for slot in LifecycleSlot::ORDER {
                    if let Some((entry, exit)) = proc_of(&Trigger::Lifecycle(slot)) {
                        dispatch.push((prev, entry));
                        prev = exit;
                    }
                }
                for h in &c.handlers {
                    if let Trigger::Click(_) = h.trigger {
                        let (entry, _) = proc_of(&h.trigger).expect("handler exists");
                        dispatch.push((prev, entry));
                    }
                }
            }
            ComponentKind::Provider => {
                if let Some(&(entry, _)) = b.handler_procs.get(&(ci, 0)) {
                    dispatch.push((root, entry));
                }
            }
        }
        for (from, to) in dispatch {
            b.edge(from, to, EdgeKind::Dispatch);
        }
    }
    b.edges.sort();
    b.edges.dedup();
    let mut preds = vec![Vec::new(); b.nodes.len()];
    for (i, e) in b.edges.iter().enumerate() {
        preds[e.to].push(i);
    }
    for p in &mut preds {
        p.sort_by_key(|&i| (b.edges[i].kind, b.edges[i].from));
    }
    Icfg {
        nodes: b.nodes,
        edges: b.edges,
        root,
        stmt_nodes: b.stmt_nodes,
        preds,
    }
}

/// Branch stacks of every acyclic, call/return-matched path from the root
/// to each sink statement, deduplicated per sink.
pub fn extract_vulnerable_paths(_app: &MiniApp, icfg: &Icfg) -> Vec<BranchStack> {
    let mut out = Vec::new();
    for sink in icfg.sink_nodes() {
        let IcfgNodeKind::Stmt { stmt } = icfg.nodes[sink].kind else {
            continue;
        };
        let mut walk = Walk {
            icfg,
            on_path: Vec::new(),
            sides: Vec::new(),
            calls: Vec::new(),
            found: Vec::new(),
        };
        walk.visit(sink);
        for mut sides in walk.found {
            sides.reverse();
            let stack = BranchStack {
                sink: stmt,
                entries: sides
                    .into_iter()
                    .map(|(site, side)| BranchEntry { site, side })
                    .collect(),
            };
            if !out.contains(&stack) {
                out.push(stack);
            }
        }
    }
    out
}

struct Walk<'a> {
    icfg: &'a Icfg,
    on_path: Vec<(usize, Vec<StmtId>)>,
    sides: Vec<(StmtId, Side)>,
    calls: Vec<StmtId>,
    found: Vec<Vec<(StmtId, Side)>>,
}

impl Walk<'_> {
    fn visit(&mut self, node: usize) {
        if self.found.len() >= MAX_PATHS {
            return;
        }
        if node == self.icfg.root {
            if self.calls.is_empty() {
                self.found.push(self.sides.clone());
            }
            return;
        }
        let key = (node, self.calls.clone());
        if self.on_path.contains(&key) {
            return;
        }
        self.on_path.push(key);
        let edges: Vec<IcfgEdge> = self.icfg.incoming(node).copied().collect();
        for e in edges {
            match e.kind {
                EdgeKind::Then | EdgeKind::Else => {
                    let site = self.icfg.nodes[e.from].branch_site.expect("branch node");
                    let side = if e.kind == EdgeKind::Then {
                        Side::Then
                    } else {
                        Side::Else
                    };
                    self.sides.push((site, side));
                    self.visit(e.from);
                    self.sides.pop();
                }
                EdgeKind::Flow => self.visit(e.from),
                EdgeKind::Dispatch => {
                    if self.calls.is_empty() {
                        self.visit(e.from);
                    }
                }
                EdgeKind::Return(site) => {
                    if self.calls.len() < MAX_CALL_DEPTH {
                        self.calls.push(site);
                        self.visit(e.from);
                        self.calls.pop();
                    }
                }
                EdgeKind::Call(site) => match self.calls.last() {
                    None => self.visit(e.from),
                    Some(&top) if top == site => {
                        self.calls.pop();
                        self.visit(e.from);
                        self.calls.push(site);
                    }
                    Some(_) => {}
                },
            }
        }
        self.on_path.pop();
    }
}

impl Icfg {
    /// Display name of a node for diagnostics.
    pub fn label(&self, node: usize) -> String {
        match &self.nodes[node].kind {
            IcfgNodeKind::Root => DRIVER_MAIN.to_string(),
            IcfgNodeKind::Entry { procedure } => format!("entry {procedure}"),
            IcfgNodeKind::Exit { procedure } => format!("exit {procedure}"),
            IcfgNodeKind::Stmt { stmt } => format!("s{stmt}"),
        }
    }
}
