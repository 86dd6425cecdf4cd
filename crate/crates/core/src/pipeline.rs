//! One-call analysis of an app: static phase, then one exploration per driver.

use serde::Serialize;

use crate::analysis::{analyze_static, StaticArtifacts};
use crate::engine::{explore, EngineError, ExplorationResult, SearchConfig, Strategy};
use crate::ir::MiniApp;
use crate::taint::VulnReport;

/// Note emitted for apps that never reach a vulnerable function.
pub const NO_VULNERABLE_FUNCTIONS: &str = "no vulnerable functions reachable from any entry point";

#[derive(Debug, Clone, Serialize)]
pub struct AppAnalysis {
    pub app: String,
    pub statics: StaticArtifacts,
    /// One exploration per synthesized driver, in driver order.
    pub explorations: Vec<ExplorationResult>,
    pub notes: Vec<String>,
}

impl AppAnalysis {
    pub fn reports(&self) -> impl Iterator<Item = &VulnReport> + '_ {
        self.explorations.iter().flat_map(|e| e.reports.iter())
    }

    pub fn detections(&self) -> usize {
        self.reports().count()
    }

    pub fn total_paths(&self) -> usize {
        self.explorations.iter().map(|e| e.paths.len()).sum()
    }

    /// Paths explored, across drivers in order, up to and including the first
    /// one with a detection.
    pub fn first_detection(&self) -> Option<usize> {
        let mut before = 0;
        for e in &self.explorations {
            if let Some(n) = e.paths_until_first_detection {
                return Some(before + n);
            }
            before += e.paths.len();
        }
        None
    }

    /// Statement coverage over the union of all explorations.
    pub fn coverage(&self, app: &MiniApp) -> f64 {
        let total = app.statement_count();
        if total == 0 {
            return 1.0;
        }
        let mut covered: Vec<_> = self.explorations.iter().flat_map(|e| e.covered.iter().copied()).collect();
        covered.sort_unstable();
        covered.dedup();
        covered.len() as f64 / total as f64
    }

    pub fn wall_time_ms(&self) -> f64 {
        self.explorations.iter().fold(0.0, |acc, e| acc + e.wall_time_ms)
    }
}

/// Runs the static phase and explores every driver with `base`. In guided
/// mode the extracted stacks replace `base.stacks`.
pub fn analyze_app(app: &MiniApp, base: &SearchConfig) -> Result<AppAnalysis, EngineError> {
    let statics = analyze_static(app);
    let mut notes = Vec::new();
    let mut cfg = base.clone();
    if cfg.strategy == Strategy::Guided {
        cfg.stacks = statics.stacks.clone();
    }
    if statics.drivers.is_empty() {
        notes.push(NO_VULNERABLE_FUNCTIONS.to_string());
    } else if cfg.strategy == Strategy::Guided && cfg.stacks.is_empty() {
        notes.push("no vulnerable path found statically; exploring without guidance".into());
        cfg.strategy = Strategy::Dfs;
    }
    let mut explorations = Vec::new();
    for d in &statics.drivers {
        let r = explore(app, d, &cfg)?;
        let hit = !r.reports.is_empty();
        explorations.push(r);
        if hit && cfg.first_hit {
            break;
        }
    }
    Ok(AppAnalysis {
        app: app.name.clone(),
        statics,
        explorations,
        notes,
    })
}
