use anyhow::{Context, Result};
use consicore::engine::Strategy;
use consicore::pipeline::analyze_app;
use serde::Serialize;

use crate::{load_app, BenchArgs};

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub app: String,
    pub strategy: String,
    pub drivers: usize,
    pub paths: usize,
    pub first_detection: String,
    pub coverage: String,
    pub time_ms: String,
}

const HEADER: [&str; 10] = [
    "app",
    "drivers",
    "paths_dfs",
    "paths_guided",
    "first_dfs",
    "first_guided",
    "coverage_dfs",
    "coverage_guided",
    "ms_dfs",
    "ms_guided",
];

/// One line per app with the two strategies side by side; `rows` holds the
/// dfs row of each app followed by its guided row.
fn render_table(rows: &[BenchRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .chunks(2)
        .map(|pair| {
            let (d, g) = (&pair[0], &pair[pair.len() - 1]);
            vec![
                d.app.clone(),
                d.drivers.to_string(),
                d.paths.to_string(),
                g.paths.to_string(),
                d.first_detection.clone(),
                g.first_detection.clone(),
                d.coverage.clone(),
                g.coverage.clone(),
                d.time_ms.clone(),
                g.time_ms.clone(),
            ]
        })
        .collect();
    let mut widths = HEADER.map(str::len);
    for r in &body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cols: &[String]| {
        cols.iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&HEADER.map(String::from));
    out.push('\n');
    for r in &body {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

pub fn run(args: &BenchArgs) -> Result<u8> {
    let files = args.apps.resolve()?;
    let mut rows = Vec::new();
    for file in &files {
        let app = load_app(file)?;
        for strategy in [Strategy::Dfs, Strategy::Guided] {
            let mut cfg = args.search.config();
            cfg.strategy = strategy;
            let a = analyze_app(&app, &cfg).with_context(|| format!("exploring {}", file.display()))?;
            rows.push(BenchRow {
                app: app.name.clone(),
                strategy: strategy.to_string(),
                drivers: a.statics.drivers.len(),
                paths: a.total_paths(),
                first_detection: a.first_detection().map_or_else(|| "-".into(), |n| n.to_string()),
                coverage: format!("{:.3}", a.coverage(&app)),
                time_ms: format!("{:.3}", a.wall_time_ms()),
            });
        }
    }
    print!("{}", render_table(&rows));
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(0)
}
