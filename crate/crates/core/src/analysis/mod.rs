//! Static analysis: call graph, inter-procedural CFG, driver synthesis and
//! branch-precedence stacks for vulnerable paths.

mod callgraph;
mod driver;
mod icfg;

use serde::{Deserialize, Serialize};

use crate::ir::MiniApp;

pub use callgraph::{
    build_call_graph, handler_name, sink_name, CallGraph, CgEdge, FnKind, FnNode, NodeRole,
    DRIVER_MAIN,
};
pub use crate::ir::is_vulnerable_function;
pub use driver::{synthesize_drivers, Action, Driver};
pub use icfg::{
    build_icfg, extract_vulnerable_paths, BranchEntry, BranchStack, EdgeKind, Icfg, IcfgEdge,
    IcfgNode, IcfgNodeKind, MAX_PATHS,
};

/// Everything the static phase produces for one app.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticArtifacts {
    pub call_graph: CallGraph,
    pub icfg: Icfg,
    pub drivers: Vec<Driver>,
    pub stacks: Vec<BranchStack>,
}

pub fn analyze_static(app: &MiniApp) -> StaticArtifacts {
    let call_graph = build_call_graph(app);
    let drivers = synthesize_drivers(app, &call_graph);
    let icfg = build_icfg(app);
    let stacks = extract_vulnerable_paths(app, &icfg);
    StaticArtifacts {
        call_graph,
        icfg,
        drivers,
        stacks,
    }
}
