//! Command-line front end: `analyze`, `replay` and `bench`.

mod analyze;
mod bench;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use consicore::engine::{default_max_runs, SearchConfig, Strategy, DEFAULT_MAX_PATHS};
use consicore::ir::{parse_app, MiniApp};
use consicore::replay::{replay, MiniDb, ReplayOptions, ReplayStatus, DEFAULT_PAYLOAD};
use consicore::symbolic::{Nonlinear, SolverConfig, DEFAULT_ALPHABET};
use consicore::taint::VulnReport;

#[derive(Parser)]
#[command(name = "consicore", version, about = "Targeted concolic SQL-injection analysis for mini-apps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analyze apps and write static artifacts, explorations and reports.
    Analyze(AnalyzeArgs),
    /// Replay a report against a database fixture.
    Replay(ReplayArgs),
    /// Compare search strategies over a set of apps.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
pub struct SearchArgs {
    /// Search strategy: guided or dfs.
    #[arg(long, default_value = "guided")]
    strategy: Strategy,
    #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
    max_paths: usize,
    #[arg(long, env = "CONSICORE_SEED", default_value_t = 0)]
    seed: u64,
    /// Stop each exploration at its first detection.
    #[arg(long)]
    first_hit: bool,
    /// Draw initial inputs at random from the seed instead of empty text and zero.
    #[arg(long)]
    random_init: bool,
    #[arg(long, default_value_t = 1000)]
    int_bound: i64,
    #[arg(long = "str-maxlen", default_value_t = 16)]
    str_maxlen: usize,
    #[arg(long, default_value = DEFAULT_ALPHABET)]
    alphabet: String,
    /// Nonlinear integer terms: reject or enumerate.
    #[arg(long, default_value = "reject")]
    nonlinear: Nonlinear,
}

impl SearchArgs {
    pub fn config(&self) -> SearchConfig {
        SearchConfig {
            strategy: self.strategy,
            stacks: Vec::new(),
            max_paths: self.max_paths,
            max_runs: default_max_runs(self.max_paths),
            seed: self.seed,
            first_hit: self.first_hit,
            random_init: self.random_init,
            solver: SolverConfig {
                int_bound: self.int_bound,
                str_max_len: self.str_maxlen,
                alphabet: self.alphabet.chars().collect(),
                nonlinear: self.nonlinear,
                ..SolverConfig::default()
            },
            ..SearchConfig::default()
        }
    }
}

#[derive(Args, Clone)]
pub struct AppSet {
    /// App source files.
    files: Vec<PathBuf>,
    /// Directory whose `*.mapp` files are analyzed independently.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// File listing app paths, one per line, relative to the list.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl AppSet {
    pub fn resolve(&self) -> Result<Vec<PathBuf>> {
        let mut out = self.files.clone();
        if let Some(dir) = &self.corpus {
            let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
                .with_context(|| format!("reading corpus {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "mapp"))
                .collect();
            found.sort();
            out.extend(found);
        }
        if let Some(list) = &self.manifest {
            let text = std::fs::read_to_string(list).with_context(|| format!("reading {}", list.display()))?;
            let base = list.parent().unwrap_or(Path::new("."));
            out.extend(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(|l| base.join(l)),
            );
        }
        if out.is_empty() {
            bail!("no apps given: pass files, --corpus or --manifest");
        }
        Ok(out)
    }
}

#[derive(Args)]
pub struct ReplayFlags {
    /// Database fixture (JSON) for attack replay.
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_PAYLOAD)]
    payload: String,
    /// Inject the payload into every reported input.
    #[arg(long)]
    payload_all: bool,
}

impl ReplayFlags {
    fn options(&self) -> ReplayOptions {
        ReplayOptions {
            payload: self.payload.clone(),
            payload_all: self.payload_all,
        }
    }
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    apps: AppSet,
    /// Output directory; each app gets its own subdirectory.
    #[arg(long)]
    out: PathBuf,
    /// Also write call graph, ICFG, drivers and stacks.
    #[arg(long)]
    emit_static: bool,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    replay: ReplayFlags,
}

#[derive(Args)]
struct ReplayArgs {
    app: PathBuf,
    /// Report JSON written by `analyze`.
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    replay: ReplayFlags,
    /// Also write the outcome here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    apps: AppSet,
    /// Write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
}

pub fn load_app(path: &Path) -> Result<MiniApp> {
    let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_app(&src).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_db(path: &Path) -> Result<MiniDb> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    MiniDb::from_json(&text).with_context(|| format!("loading {}", path.display()))
}

fn cmd_replay(args: &ReplayArgs) -> Result<u8> {
    let app = load_app(&args.app)?;
    let text = std::fs::read_to_string(&args.report).with_context(|| format!("reading {}", args.report.display()))?;
    let report: VulnReport = serde_json::from_str(&text).context("parsing report")?;
    let Some(db_path) = &args.replay.db else {
        bail!("replay needs --db");
    };
    let db = load_db(db_path)?;
    let outcome = replay(&app, &report, &db, &args.replay.options())?;
    let json = serde_json::to_string_pretty(&outcome)? + "\n";
    print!("{json}");
    if let Some(out) = &args.out {
        std::fs::write(out, &json).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(match outcome.status {
        ReplayStatus::Exploited => 2,
        ReplayStatus::NotExploited => 0,
        ReplayStatus::Inconclusive => 3,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Analyze(a) => analyze::run(a),
        Cmd::Replay(r) => cmd_replay(r),
        Cmd::Bench(b) => bench::run(b),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
