//! Attack replay: re-runs a reported path against an in-memory database,
//! once with an honest input and once with an injection payload, and decides
//! whether injected rows reach the leak channel.

mod sql;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{eval_with_env, provider_key, ComponentKind, Environment, EvalError, InputMap, MiniApp, StmtId, StmtKind};
use crate::taint::VulnReport;

pub use sql::{parse_query, rows_text, DbError, MiniDb, Operand, QueryAst, SqlError, Table, Verb, WhereExpr};

/// Classic tautology payload.
pub const DEFAULT_PAYLOAD: &str = "a' or '1'='1";
/// Honest value that matches no fixture row.
pub const HONEST_SENTINEL: &str = "zzz-no-match";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayOptions {
    pub payload: String,
    /// Inject every reported input rather than only the first.
    pub payload_all: bool,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            payload: DEFAULT_PAYLOAD.into(),
            payload_all: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayStatus {
    Exploited,
    NotExploited,
    Inconclusive,
}

/// One execution of the reported sink.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkObservation {
    /// Values given to the injected inputs.
    pub injected: Vec<String>,
    pub query: String,
    pub params: Vec<String>,
    pub ast: Option<QueryAst>,
    pub rows: Vec<Vec<String>>,
    pub parse_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub status: ReplayStatus,
    pub payload: String,
    pub injected_inputs: Vec<String>,
    pub honest: Option<SinkObservation>,
    pub attack: Option<SinkObservation>,
    /// Text written to the reported leak channel during the attack run.
    pub leaked: Vec<String>,
    /// Rows returned to the attack but not to the honest run.
    pub extra_rows: Vec<Vec<String>>,
    pub ast_changed: bool,
    pub exploited: bool,
    pub note: Option<String>,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("report does not fit the app: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("database error at the reported sink: {0}")]
    Db(SqlError),
}

struct ReplayEnv<'a> {
    inputs: InputMap,
    db: &'a MiniDb,
    target: StmtId,
    seen: Option<SinkObservation>,
    fatal: Option<SqlError>,
}

impl Environment for ReplayEnv<'_> {
    fn input(&mut self, widget: &str) -> String {
        self.inputs.get(widget).cloned().unwrap_or_default()
    }

    fn provider_arg(&mut self, provider: &str) -> String {
        self.inputs.get(&provider_key(provider)).cloned().unwrap_or_default()
    }

    fn sink(&mut self, stmt: StmtId, _sink: &str, query: &str, params: &[String]) -> String {
        let (ast, rows, err) = match parse_query(query) {
            Ok(ast) => match self.db.execute(&ast, params) {
                Ok(rows) => (Some(ast), rows, None),
                Err(e) => {
                    if stmt == self.target && self.fatal.is_none() {
                        self.fatal = Some(e);
                    }
                    (Some(ast), Vec::new(), None)
                }
            },
            Err(e) => (None, Vec::new(), Some(e.to_string())),
        };
        let text = match &ast {
            Some(a) if a.verb == Verb::Select => rows_text(&rows),
            _ => String::new(),
        };
        if stmt == self.target && self.seen.is_none() {
            self.seen = Some(SinkObservation {
                injected: Vec::new(),
                query: query.to_string(),
                params: params.to_vec(),
                ast,
                rows,
                parse_error: err,
            });
        }
        text
    }
}

fn check_pair(app: &MiniApp, report: &VulnReport) -> Result<(), ReplayError> {
    match app.stmt(report.sink_stmt).map(|s| &s.kind) {
        Some(StmtKind::Sink { sink, .. }) if *sink == report.sink => {}
        _ => {
            return Err(ReplayError::Mismatch(format!(
                "statement {} is not a `{}` call",
                report.sink_stmt, report.sink
            )))
        }
    }
    match app.stmt(report.leak.stmt).map(|s| &s.kind) {
        Some(StmtKind::Leak { .. } | StmtKind::Return(_)) => {}
        _ => {
            return Err(ReplayError::Mismatch(format!(
                "statement {} is not a leak",
                report.leak.stmt
            )))
        }
    }
    if report.inputs.is_empty() {
        return Err(ReplayError::Mismatch("report names no inputs".into()));
    }
    for input in &report.inputs {
        let known = match input.widget.strip_prefix("provider:") {
            Some(p) => app.component(p).is_some_and(|c| c.kind == ComponentKind::Provider),
            None => app.widget(&input.widget).is_some(),
        };
        if !known {
            return Err(ReplayError::Mismatch(format!("unknown input `{}`", input.widget)));
        }
    }
    Ok(())
}

struct RunResult {
    obs: Option<SinkObservation>,
    leaked: Vec<String>,
}

fn run_once(
    app: &MiniApp,
    report: &VulnReport,
    db: &MiniDb,
    targets: &[String],
    value: &str,
) -> Result<RunResult, ReplayError> {
    // The bare value first, then the value appended to the witness so that
    // branch guards satisfied by the witness still hold.
    let mut last = None;
    for prefixed in [false, true] {
        let mut inputs = report.witness.clone();
        let mut injected = Vec::new();
        for t in targets {
            let v = if prefixed {
                format!("{}{value}", report.witness.get(t).map(String::as_str).unwrap_or(""))
            } else {
                value.to_string()
            };
            inputs.insert(t.clone(), v.clone());
            injected.push(v);
        }
        let mut env = ReplayEnv {
            inputs,
            db,
            target: report.sink_stmt,
            seen: None,
            fatal: None,
        };
        let trace = eval_with_env(app, &report.driver, &mut env)?;
        if let Some(e) = env.fatal {
            return Err(ReplayError::Db(e));
        }
        let leaked = trace
            .leaks
            .iter()
            .filter(|l| l.stmt == report.leak.stmt)
            .map(|l| l.payload.clone())
            .collect();
        let obs = env.seen.map(|mut o| {
            o.injected = injected;
            o
        });
        let done = obs.is_some();
        last = Some(RunResult { obs, leaked });
        if done {
            break;
        }
    }
    Ok(last.expect("at least one attempt"))
}

/// Replays `report` on `app` against `db`.
pub fn replay(app: &MiniApp, report: &VulnReport, db: &MiniDb, opts: &ReplayOptions) -> Result<ReplayOutcome, ReplayError> {
    check_pair(app, report)?;
    let count = if opts.payload_all { report.inputs.len() } else { 1 };
    let targets: Vec<String> = report.inputs.iter().take(count).map(|i| i.widget.clone()).collect();
    let honest = run_once(app, report, db, &targets, HONEST_SENTINEL)?;
    let attack = run_once(app, report, db, &targets, &opts.payload)?;
    let mut out = ReplayOutcome {
        status: ReplayStatus::Inconclusive,
        payload: opts.payload.clone(),
        injected_inputs: targets,
        honest: honest.obs.clone(),
        attack: attack.obs.clone(),
        leaked: attack.leaked.clone(),
        extra_rows: Vec::new(),
        ast_changed: false,
        exploited: false,
        note: None,
    };
    let (Some(h), Some(a)) = (honest.obs, attack.obs) else {
        out.note = Some("reported sink not reached".into());
        return Ok(out);
    };
    let (Some(h_ast), Some(a_ast)) = (&h.ast, &a.ast) else {
        let err = a.parse_error.or(h.parse_error).unwrap_or_default();
        out.note = Some(format!("query did not parse: {err}"));
        return Ok(out);
    };
    out.ast_changed = h_ast.shape() != a_ast.shape();
    out.extra_rows = a.rows.iter().filter(|r| !h.rows.contains(r)).cloned().collect();
    // Rows reached by a plain data value do not count.
    out.exploited = out.ast_changed
        && out.extra_rows.iter().any(|r| {
            let line = r.join("|");
            attack.leaked.iter().any(|l| l.contains(&line))
        });
    out.status = if out.exploited {
        ReplayStatus::Exploited
    } else {
        ReplayStatus::NotExploited
    };
    if app.name != report.app {
        out.note = Some(format!("report was produced for app `{}`", report.app));
    }
    Ok(out)
}
