//! Detection policy: taint by symbolic provenance, sink interception, the
//! parametric check and leak chaining.

mod report;

use serde::{Deserialize, Serialize};

use crate::analysis::{sink_name, Driver, DRIVER_MAIN};
use crate::ir::{provider_key, InputMap, LeakTarget, MiniApp, StmtId, VULNERABLE_FUNCTIONS};
use crate::symbolic::{Origin, SymExpr, SymVar};

pub use report::{render_json, render_text, LEAK_PROVIDER, LEAK_SET_TEXT};

/// The fixed security policy, serialized into report headers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintPolicy {
    pub sources: Vec<String>,
    pub sinks: Vec<String>,
    pub leaks: Vec<String>,
}

impl Default for TaintPolicy {
    fn default() -> Self {
        TaintPolicy {
            sources: vec!["edit_box_read".into(), "provider_arg".into()],
            sinks: VULNERABLE_FUNCTIONS.iter().map(|s| s.to_string()).collect(),
            leaks: vec!["text_box_set_text".into(), "provider_return".into()],
        }
    }
}

/// A database call as seen by the engine.
#[derive(Debug, Clone)]
pub struct SinkEvent<'a> {
    pub stmt: StmtId,
    pub sink: &'a str,
    /// Enclosing procedures, innermost first, excluding the driver.
    pub frames: &'a [String],
    pub query: &'a SymExpr,
    pub query_text: &'a str,
    pub params: &'a [SymExpr],
    /// Fresh variable standing for the call's result.
    pub result: &'a SymVar,
    /// True when a provider frame is on the call stack.
    pub ipc: bool,
}

/// A write to a leak channel as seen by the engine.
#[derive(Debug, Clone)]
pub struct LeakEvent<'a> {
    pub stmt: StmtId,
    pub target: &'a LeakTarget,
    pub value: &'a SymExpr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VulnCandidate {
    pub sink_stmt: StmtId,
    pub sink: String,
    /// Qualified names, innermost first: the sink, enclosing procedures, the driver.
    pub stack: Vec<String>,
    #[serde(skip)]
    pub query: SymExpr,
    pub query_template: String,
    pub query_concrete: String,
    /// Source variables occurring in the query, in id order.
    pub sources: Vec<SymVar>,
    pub result: SymVar,
    pub ipc: bool,
    /// Always false: parametric sinks are recorded as [`ProtectedSink`]s.
    pub parametric: bool,
}

/// A sink reached by tainted data only through bound parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProtectedSink {
    pub sink_stmt: StmtId,
    pub sink: String,
    pub stack: Vec<String>,
    pub query_template: String,
    /// Inputs reaching the bound parameters.
    pub bound_inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SinkVerdict {
    Candidate(VulnCandidate),
    Protected(ProtectedSink),
    Clean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportInput {
    /// Widget id, or `provider:NAME` for an IPC argument.
    pub widget: String,
    pub parametric: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakKind {
    Widget,
    Provider,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakSite {
    pub stmt: StmtId,
    pub kind: LeakKind,
    /// Text widget id or provider name.
    pub target: String,
    /// Framework object the value leaks through.
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnReport {
    pub app: String,
    pub sink_stmt: StmtId,
    pub sink: String,
    pub stack: Vec<String>,
    pub inputs: Vec<ReportInput>,
    pub leak: LeakSite,
    pub query_template: String,
    pub query_concrete: String,
    pub ipc: bool,
    pub confirmed: bool,
    pub driver: Driver,
    /// Inputs that drove the detecting path.
    pub witness: InputMap,
}

/// What a report needs beyond the candidate and the leak.
#[derive(Debug, Clone, Copy)]
pub struct ReportContext<'a> {
    pub app: &'a MiniApp,
    pub driver: &'a Driver,
    pub witness: &'a InputMap,
}

fn input_label(v: &SymVar) -> Option<String> {
    match &v.origin {
        Origin::SourceWidget { widget } => Some(widget.clone()),
        Origin::ProviderArg { provider } => Some(provider_key(provider)),
        Origin::SinkResult { .. } => None,
    }
}

fn source_vars(e: &SymExpr) -> Vec<SymVar> {
    e.vars().into_iter().filter(|v| v.is_source()).collect()
}

fn full_stack(sink: &str, frames: &[String]) -> Vec<String> {
    let mut stack = vec![sink_name(sink)];
    stack.extend(frames.iter().cloned());
    stack.push(DRIVER_MAIN.to_string());
    stack
}

/// Classifies a sink call. A query carrying source data is a candidate even
/// when parameters are also bound; parameters alone make it protected.
pub fn on_sink_call(ev: &SinkEvent<'_>) -> SinkVerdict {
    let sources = source_vars(ev.query);
    if !sources.is_empty() {
        return SinkVerdict::Candidate(VulnCandidate {
            sink_stmt: ev.stmt,
            sink: ev.sink.to_string(),
            stack: full_stack(ev.sink, ev.frames),
            query: ev.query.clone(),
            query_template: ev.query.template(),
            query_concrete: ev.query_text.to_string(),
            sources,
            result: ev.result.clone(),
            ipc: ev.ipc,
            parametric: false,
        });
    }
    let mut bound: Vec<String> = Vec::new();
    for p in ev.params {
        for v in source_vars(p) {
            if let Some(l) = input_label(&v) {
                if !bound.contains(&l) {
                    bound.push(l);
                }
            }
        }
    }
    if bound.is_empty() {
        return SinkVerdict::Clean;
    }
    SinkVerdict::Protected(ProtectedSink {
        sink_stmt: ev.stmt,
        sink: ev.sink.to_string(),
        stack: full_stack(ev.sink, ev.frames),
        query_template: ev.query.template(),
        bound_inputs: bound,
    })
}

/// Completes the chain for every candidate of the current path whose result
/// flows into the leaked value.
pub fn on_leak_call(
    leak: &LeakEvent<'_>,
    candidates: &[VulnCandidate],
    ctx: &ReportContext<'_>,
) -> Vec<VulnReport> {
    candidates
        .iter()
        .filter(|c| leak.value.mentions(&c.result))
        .map(|c| build_report(c, leak, ctx))
        .collect()
}

fn build_report(c: &VulnCandidate, leak: &LeakEvent<'_>, ctx: &ReportContext<'_>) -> VulnReport {
    let mut labels: Vec<(usize, String)> = c
        .sources
        .iter()
        .filter_map(input_label)
        .map(|l| {
            let rank = ctx.app.widget_index(&l).unwrap_or(usize::MAX);
            (rank, l)
        })
        .collect();
    labels.sort();
    labels.dedup();
    let (kind, target, object) = match leak.target {
        LeakTarget::Widget(w) => (LeakKind::Widget, w.clone(), LEAK_SET_TEXT.to_string()),
        LeakTarget::Provider(p) => (LeakKind::Provider, p.clone(), LEAK_PROVIDER.to_string()),
    };
    VulnReport {
        app: ctx.app.name.clone(),
        sink_stmt: c.sink_stmt,
        sink: c.sink.clone(),
        stack: c.stack.clone(),
        inputs: labels
            .into_iter()
            .map(|(_, widget)| ReportInput {
                widget,
                parametric: false,
            })
            .collect(),
        leak: LeakSite {
            stmt: leak.stmt,
            kind,
            target,
            object,
        },
        query_template: c.query_template.clone(),
        query_concrete: c.query_concrete.clone(),
        ipc: c.ipc || kind == LeakKind::Provider,
        confirmed: false,
        driver: ctx.driver.clone(),
        witness: ctx.witness.clone(),
    }
}
