//! Concolic exploration of one driver: a paired concrete and symbolic run per
//! input model, steered by branch preferences and a bounded solver.

mod exec;

use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{BranchStack, Driver};
use crate::ir::{var_types, EvalError, LeakTarget, MiniApp, Side, StmtId};
use crate::symbolic::{Constraint, Model, PathCondition, SolverConfig, VarRegistry};
use crate::taint::{ProtectedSink, VulnReport};

pub use exec::witness_of;

use exec::{solve_or_fallback, Run, Session, Steered};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Then before else everywhere.
    Dfs,
    /// Sides listed in vulnerable-path stacks first, then before else elsewhere.
    Guided,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Dfs => "dfs",
            Strategy::Guided => "guided",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dfs" => Ok(Strategy::Dfs),
            "guided" => Ok(Strategy::Guided),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub stacks: Vec<BranchStack>,
    /// Completed paths after which exploration stops.
    pub max_paths: usize,
    /// Concrete runs, completed or steered off, after which exploration stops.
    pub max_runs: usize,
    pub max_fallback: u32,
    pub seed: u64,
    pub first_hit: bool,
    /// Draw unseen inputs at random instead of empty text and zero.
    pub random_init: bool,
    pub solver: SolverConfig,
}

pub const DEFAULT_MAX_PATHS: usize = 256;
pub const DEFAULT_MAX_FALLBACK: u32 = 100;

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: Strategy::Dfs,
            stacks: Vec::new(),
            max_paths: DEFAULT_MAX_PATHS,
            max_runs: default_max_runs(DEFAULT_MAX_PATHS),
            max_fallback: DEFAULT_MAX_FALLBACK,
            seed: 0,
            first_hit: false,
            random_init: false,
            solver: SolverConfig::default(),
        }
    }
}

/// Run budget that leaves room for steering runs around `max_paths` paths.
pub fn default_max_runs(max_paths: usize) -> usize {
    max_paths.saturating_mul(8).saturating_add(64)
}

impl SearchConfig {
    pub fn dfs() -> Self {
        Self::default()
    }

    pub fn guided(stacks: Vec<BranchStack>) -> Self {
        SearchConfig {
            strategy: Strategy::Guided,
            stacks,
            ..Self::default()
        }
    }

    pub fn with_max_paths(mut self, n: usize) -> Self {
        self.max_paths = n;
        self.max_runs = default_max_runs(n);
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if self.max_paths == 0 || self.max_runs == 0 || self.max_fallback == 0 {
            return bad("budgets must be positive");
        }
        if self.strategy == Strategy::Guided && self.stacks.is_empty() {
            return bad("guided search needs at least one branch stack");
        }
        if self.solver.int_bound < 0 {
            return bad("integer bound must be non-negative");
        }
        if self.solver.alphabet.is_empty() {
            return bad("alphabet must not be empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Per-run view of the branch stacks: which are still being followed and how
/// far.
#[derive(Debug, Clone)]
pub struct StackState<'a> {
    stacks: &'a [BranchStack],
    pos: Vec<usize>,
    active: Vec<bool>,
}

impl<'a> StackState<'a> {
    pub fn new(cfg: &'a SearchConfig) -> Self {
        let stacks: &[BranchStack] = match cfg.strategy {
            Strategy::Dfs => &[],
            Strategy::Guided => &cfg.stacks,
        };
        StackState {
            stacks,
            pos: vec![0; stacks.len()],
            active: vec![true; stacks.len()],
        }
    }

    /// Side of the first live stack whose top is `site`; then otherwise.
    pub fn preferred(&self, site: StmtId) -> Side {
        self.tops()
            .find(|(_, e)| e.site == site)
            .map(|(_, e)| e.side)
            .unwrap_or(Side::Then)
    }

    fn tops(&self) -> impl Iterator<Item = (usize, &'a crate::analysis::BranchEntry)> + '_ {
        (0..self.stacks.len())
            .filter(|&i| self.active[i])
            .filter_map(|i| self.stacks[i].entries.get(self.pos[i]).map(|e| (i, e)))
    }

    /// Pops stacks whose top agrees with the decision and drops those that
    /// disagree.
    pub fn observe(&mut self, site: StmtId, side: Side) {
        let hits: Vec<(usize, bool)> = self
            .tops()
            .filter(|(_, e)| e.site == site)
            .map(|(i, e)| (i, e.side == side))
            .collect();
        for (i, agrees) in hits {
            if agrees {
                self.pos[i] += 1;
            } else {
                self.active[i] = false;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub site: StmtId,
    pub side: Side,
    /// False for branches whose condition carried no symbolic data.
    pub symbolic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunOrigin {
    /// Default inputs.
    Initial,
    /// A solver model.
    Solved,
    /// Random values after the solver answered Unknown.
    Fallback { tries: u32 },
    /// The inputs of a steered-off run, replayed to continue its natural side.
    Sibling,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverEvent {
    pub site: StmtId,
    pub outcome: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ItemModel {
    Realized { model: Model, origin: RunOrigin },
    /// A sibling whose constraints are solved only when picked.
    Unrealized { target: Vec<Constraint>, base: Model },
}

/// An unexplored subtree: the branch decisions leading to it.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierItem {
    pub decisions: Vec<(StmtId, Side)>,
    /// Per decision, 0 when it follows the preferred side and 1 otherwise.
    pub ranks: Vec<u8>,
    pub(crate) model: ItemModel,
    pub(crate) seq: u64,
}

/// Index of the frontier item to explore next: the least preference-rank
/// sequence, oldest first among equals.
pub fn pick_next_branch(frontier: &[FrontierItem]) -> Option<usize> {
    (0..frontier.len()).min_by(|&a, &b| {
        frontier[a]
            .ranks
            .cmp(&frontier[b].ranks)
            .then(frontier[a].seq.cmp(&frontier[b].seq))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub index: usize,
    pub origin: RunOrigin,
    pub decisions: Vec<Decision>,
    pub pc: PathCondition,
    pub model: Model,
    pub events: Vec<SolverEvent>,
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    /// 1-based.
    pub index: usize,
    pub run: usize,
    pub branches: Vec<(StmtId, Side)>,
    pub pc: PathCondition,
    pub model: Model,
    pub executed: Vec<StmtId>,
    pub leaks: Vec<(StmtId, LeakTarget)>,
    pub detections: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Exhausted,
    PathBudget,
    RunBudget,
    FirstHit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplorationResult {
    pub app: String,
    pub driver: Driver,
    pub strategy: Strategy,
    pub runs: Vec<RunRecord>,
    pub paths: Vec<PathRecord>,
    pub reports: Vec<VulnReport>,
    pub protected: Vec<ProtectedSink>,
    pub coverage: f64,
    pub covered: Vec<StmtId>,
    pub statements: usize,
    /// 1-based index of the path on which the first report was made.
    pub paths_until_first_detection: Option<usize>,
    /// Subtrees dropped because their constraints were unsatisfiable.
    pub pruned: usize,
    pub diagnostics: Vec<String>,
    pub stop: StopReason,
    pub wall_time_ms: f64,
}

impl ExplorationResult {
    /// Branch sequences of all completed paths.
    pub fn path_set(&self) -> BTreeSet<Vec<(StmtId, Side)>> {
        self.paths.iter().map(|p| p.branches.clone()).collect()
    }
}

/// Explores `driver` concolically.
pub fn explore(app: &MiniApp, driver: &Driver, cfg: &SearchConfig) -> Result<ExplorationResult, EngineError> {
    cfg.validate()?;
    check_driver(app, driver)?;
    let start = Instant::now();
    let mut session = Session {
        app,
        types: var_types(app),
        driver,
        cfg,
        registry: VarRegistry::new(),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let mut frontier = vec![FrontierItem {
        decisions: Vec::new(),
        ranks: Vec::new(),
        model: ItemModel::Realized {
            model: Model::new(),
            origin: RunOrigin::Initial,
        },
        seq: 0,
    }];
    let mut seq = 1u64;
    let mut runs: Vec<RunRecord> = Vec::new();
    let mut paths: Vec<PathRecord> = Vec::new();
    let mut reports: Vec<VulnReport> = Vec::new();
    let mut protected: Vec<ProtectedSink> = Vec::new();
    let mut seen_paths: HashSet<Vec<(StmtId, Side)>> = HashSet::new();
    let mut covered: BTreeSet<StmtId> = BTreeSet::new();
    let mut diagnostics: Vec<String> = Vec::new();
    let mut first_detection = None;
    let mut pruned = 0usize;
    let mut stop = StopReason::Exhausted;

    while let Some(i) = pick_next_branch(&frontier) {
        if paths.len() >= cfg.max_paths {
            stop = StopReason::PathBudget;
            break;
        }
        if runs.len() >= cfg.max_runs {
            stop = StopReason::RunBudget;
            break;
        }
        let item = frontier.swap_remove(i);
        let (model, origin, pre_events) = match item.model {
            ItemModel::Realized { model, origin } => (model, origin, Vec::new()),
            ItemModel::Unrealized { target, base } => {
                let site = item.decisions.last().map(|d| d.0).unwrap_or(0);
                match solve_or_fallback(&mut session, &target, &base) {
                    Steered::Model(m, origin, ev) => (m, origin, vec![SolverEvent { site, ..ev }]),
                    Steered::Pruned(_) => {
                        pruned += 1;
                        continue;
                    }
                    Steered::GaveUp(ev) => {
                        diagnostics.push(format!("branch {site} left unexplored: {}", ev.detail));
                        continue;
                    }
                }
            }
        };
        let stacks = StackState::new(cfg);
        let out = Run::new(&mut session, &item.decisions, model, stacks).execute();
        let index = runs.len();
        let mut events = pre_events;
        events.extend(out.events);
        runs.push(RunRecord {
            index,
            origin,
            decisions: out.decisions.clone(),
            pc: out.pc.clone(),
            model: out.model.clone(),
            events,
            completed: out.completed,
            error: out.error.as_ref().map(|e| e.to_string()),
        });
        diagnostics.extend(out.diagnostics);
        for mut s in out.spawned {
            s.seq = seq;
            seq += 1;
            frontier.push(s);
        }
        match out.error {
            Some(EvalError::CallDepth(f)) => {
                diagnostics.push(format!("run {index}: call depth limit exceeded in `{f}`"));
                continue;
            }
            Some(e) => return Err(e.into()),
            None => {}
        }
        if !out.completed {
            continue;
        }
        let branches: Vec<(StmtId, Side)> = out.decisions.iter().map(|d| (d.site, d.side)).collect();
        if !seen_paths.insert(branches.clone()) {
            diagnostics.push(format!("run {index} repeated an explored path"));
            continue;
        }
        covered.extend(out.trace.executed.iter().copied());
        let path_index = paths.len() + 1;
        let mut fresh = 0;
        for r in out.reports {
            if !reports
                .iter()
                .any(|x| x.sink_stmt == r.sink_stmt && x.leak.stmt == r.leak.stmt)
            {
                reports.push(r);
                fresh += 1;
            }
        }
        for p in out.protected {
            if !protected.iter().any(|x| x.sink_stmt == p.sink_stmt) {
                protected.push(p);
            }
        }
        paths.push(PathRecord {
            index: path_index,
            run: index,
            branches,
            pc: out.pc,
            model: out.model,
            executed: out.trace.executed,
            leaks: out.trace.leaks.into_iter().map(|l| (l.stmt, l.target)).collect(),
            detections: fresh,
        });
        if fresh > 0 && first_detection.is_none() {
            first_detection = Some(path_index);
            if cfg.first_hit {
                stop = StopReason::FirstHit;
                break;
            }
        }
    }

    if cfg.strategy == Strategy::Guided {
        for (k, st) in cfg.stacks.iter().enumerate() {
            let Some(top) = st.entries.first() else { continue };
            if !covered.contains(&top.site) {
                continue;
            }
            let realized = paths.iter().any(|p| is_subsequence(&st.pairs(), &p.branches));
            if !realized {
                diagnostics.push(format!(
                    "stack {k} toward sink {} was not realized by any explored path",
                    st.sink
                ));
            }
        }
    }

    let statements = app.statement_count();
    let coverage = if statements == 0 {
        1.0
    } else {
        covered.len() as f64 / statements as f64
    };
    Ok(ExplorationResult {
        app: app.name.clone(),
        driver: driver.clone(),
        strategy: cfg.strategy,
        runs,
        paths,
        reports,
        protected,
        coverage,
        covered: covered.into_iter().collect(),
        statements,
        paths_until_first_detection: first_detection,
        pruned,
        diagnostics,
        stop,
        wall_time_ms: start.elapsed().as_secs_f64() * 1000.0,
    })
}

fn is_subsequence(needle: &[(StmtId, Side)], hay: &[(StmtId, Side)]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

fn check_driver(app: &MiniApp, driver: &Driver) -> Result<(), EvalError> {
    use crate::analysis::Action;
    for a in &driver.actions {
        match a {
            Action::Construct { component }
            | Action::Lifecycle { component, .. }
            | Action::ProviderInvoke { provider: component } => {
                if app.component(component).is_none() {
                    return Err(EvalError::UnknownComponent(component.clone()));
                }
            }
            Action::FindWidget { widget } | Action::TriggerEvent { widget } => {
                if app.widget(widget).is_none() {
                    return Err(EvalError::UnknownWidget(widget.clone()));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
