use std::fmt;

use serde::{Deserialize, Serialize};

use super::callgraph::{CallGraph, NodeRole};
use crate::ir::{LifecycleSlot, MiniApp, Trigger};

/// Upper bound on backward call-graph paths examined per app.
const MAX_CG_PATHS: usize = 4096;

/// One step of a synthesized entry point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Construct { component: String },
    Lifecycle { component: String, slot: LifecycleSlot },
    FindWidget { widget: String },
    /// A click on the widget.
    TriggerEvent { widget: String },
    /// IPC call into a provider with a symbolic argument.
    ProviderInvoke { provider: String },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Construct { component } => write!(f, "Construct({component})"),
            Action::Lifecycle { component, slot } => {
                write!(f, "{component}.{}()", slot.method_name())
            }
            Action::FindWidget { widget } => write!(f, "FindWidget({widget})"),
            Action::TriggerEvent { widget } => write!(f, "TriggerEvent({widget}, click)"),
            Action::ProviderInvoke { provider } => write!(f, "ProviderInvoke({provider}, *)"),
        }
    }
}

/// A synthesized entry point: the ordered actions that drive the app to one
/// entry handler.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Driver {
    pub actions: Vec<Action>,
}

impl Driver {
    /// Driver for an activity's lifecycle only.
    pub fn lifecycle(component: &str) -> Driver {
        let mut actions = vec![Action::Construct {
            component: component.to_string(),
        }];
        actions.extend(LifecycleSlot::ORDER.iter().map(|slot| Action::Lifecycle {
            component: component.to_string(),
            slot: *slot,
        }));
        Driver { actions }
    }

    /// Driver that brings `component` up and clicks `button`.
    pub fn click(component: &str, button: &str) -> Driver {
        let mut d = Driver::lifecycle(component);
        d.actions.push(Action::FindWidget {
            widget: button.to_string(),
        });
        d.actions.push(Action::TriggerEvent {
            widget: button.to_string(),
        });
        d
    }

    pub fn provider(provider: &str) -> Driver {
        Driver {
            actions: vec![Action::ProviderInvoke {
                provider: provider.to_string(),
            }],
        }
    }

    /// Driver reaching the given entry handler.
    pub fn for_handler(component: &str, trigger: &Trigger) -> Driver {
        match trigger {
            Trigger::Lifecycle(_) => Driver::lifecycle(component),
            Trigger::Click(w) => Driver::click(component, w),
            Trigger::Query { .. } => Driver::provider(component),
        }
    }
}

impl fmt::Display for Driver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.actions.iter().map(|a| a.to_string()).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// One driver per distinct backward call-graph path from a sink to the root,
/// ordered by the path's node ids and deduplicated by action sequence.
pub fn synthesize_drivers(_app: &MiniApp, cg: &CallGraph) -> Vec<Driver> {
    let mut paths: Vec<Vec<usize>> = Vec::new();
    for sink in cg.sink_nodes() {
        let mut path = vec![sink];
        backward(cg, &mut path, &mut paths);
    }
    for p in &mut paths {
        p.reverse();
    }
    paths.sort();
    let mut drivers: Vec<Driver> = Vec::new();
    for p in paths {
        let entry = cg.node(p[1]);
        let NodeRole::Handler { component, trigger } = &entry.role else {
            continue;
        };
        let d = Driver::for_handler(component, trigger);
        if !drivers.contains(&d) {
            drivers.push(d);
        }
    }
    drivers
}

fn backward(cg: &CallGraph, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if out.len() >= MAX_CG_PATHS {
        return;
    }
    let here = *path.last().expect("non-empty path");
    if here == cg.root {
        out.push(path.clone());
        return;
    }
    let mut callers: Vec<usize> = cg.callers(here).collect();
    callers.sort_unstable();
    for c in callers {
        if path.contains(&c) {
            continue;
        }
        path.push(c);
        backward(cg, path, out);
        path.pop();
    }
}
