use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use consicore::engine::SearchConfig;
use consicore::pipeline::analyze_app;
use consicore::replay::{replay, MiniDb, ReplayOptions, ReplayStatus};
use consicore::taint::{render_json, render_text};
use rayon::prelude::*;
use serde::Serialize;

use crate::{load_app, load_db, AnalyzeArgs};

#[derive(Debug, Clone, Serialize)]
pub struct AppSummary {
    pub file: String,
    pub app: Option<String>,
    pub dir: String,
    pub drivers: usize,
    pub detections: usize,
    pub protected: usize,
    pub paths: usize,
    pub coverage: f64,
    pub first_detection: Option<usize>,
    pub confirmed: usize,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

impl AppSummary {
    fn line(&self) -> String {
        let name = self.app.as_deref().unwrap_or("?");
        if let Some(e) = &self.error {
            return format!("{}: error: {e}", self.file);
        }
        if self.drivers == 0 {
            return format!("{} ({name}): skipped: {}", self.file, self.notes.join("; "));
        }
        if self.detections == 0 {
            return format!(
                "{} ({name}): clean, {} path(s), coverage {:.3}",
                self.file, self.paths, self.coverage
            );
        }
        format!(
            "{} ({name}): {} report(s), {} path(s), coverage {:.3}",
            self.file, self.detections, self.paths, self.coverage
        )
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

struct Job<'a> {
    file: &'a Path,
    dir: PathBuf,
    cfg: &'a SearchConfig,
    emit_static: bool,
    db: Option<&'a MiniDb>,
    replay: &'a ReplayOptions,
}

fn process(job: &Job<'_>, summary: &mut AppSummary) -> Result<()> {
    std::fs::create_dir_all(&job.dir).with_context(|| format!("creating {}", job.dir.display()))?;
    let app = load_app(job.file)?;
    summary.app = Some(app.name.clone());
    let analysis = analyze_app(&app, job.cfg)?;
    if job.emit_static {
        write(&job.dir.join("static.json"), &json(&analysis.statics)?)?;
    }
    summary.drivers = analysis.statics.drivers.len();
    summary.notes = analysis.notes.clone();
    summary.paths = analysis.total_paths();
    summary.coverage = analysis.coverage(&app);
    summary.first_detection = analysis.first_detection();
    for (i, e) in analysis.explorations.iter().enumerate() {
        write(&job.dir.join(format!("exploration_{}.json", i + 1)), &json(e)?)?;
        summary.protected += e.protected.len();
    }
    for (n, report) in analysis.reports().enumerate() {
        let mut report = report.clone();
        if let Some(db) = job.db {
            let outcome = replay(&app, &report, db, job.replay)?;
            report.confirmed = outcome.status == ReplayStatus::Exploited;
            summary.confirmed += usize::from(report.confirmed);
            write(&job.dir.join(format!("replay_{}.json", n + 1)), &json(&outcome)?)?;
        }
        write(&job.dir.join(format!("report_{}.txt", n + 1)), &render_text(&report))?;
        write(&job.dir.join(format!("report_{}.json", n + 1)), &render_json(&report))?;
        summary.detections += 1;
    }
    Ok(())
}

/// Output subdirectory names: file stems, suffixed on collision.
fn dir_names(files: &[PathBuf]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    files
        .iter()
        .map(|f| {
            let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "app".into());
            let mut name = stem.clone();
            let mut k = 2;
            while !seen.insert(name.clone()) {
                name = format!("{stem}_{k}");
                k += 1;
            }
            name
        })
        .collect()
}

pub fn run(args: &AnalyzeArgs) -> Result<u8> {
    let files = args.apps.resolve()?;
    let cfg = args.search.config();
    let db = args.replay.db.as_deref().map(load_db).transpose()?;
    let replay_opts = args.replay.options();
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let names = dir_names(&files);
    let summaries: Vec<AppSummary> = files
        .par_iter()
        .zip(names.par_iter())
        .map(|(file, name)| {
            let job = Job {
                file,
                dir: args.out.join(name),
                cfg: &cfg,
                emit_static: args.emit_static,
                db: db.as_ref(),
                replay: &replay_opts,
            };
            let mut s = AppSummary {
                file: file.display().to_string(),
                app: None,
                dir: name.clone(),
                drivers: 0,
                detections: 0,
                protected: 0,
                paths: 0,
                coverage: 0.0,
                first_detection: None,
                confirmed: 0,
                notes: Vec::new(),
                error: None,
            };
            if let Err(e) = process(&job, &mut s) {
                s.error = Some(format!("{e:#}"));
            }
            if let Ok(text) = json(&s) {
                let _ = std::fs::write(job.dir.join("summary.json"), text);
            }
            s
        })
        .collect();
    let mut table = String::new();
    for s in &summaries {
        println!("{}", s.line());
        table.push_str(&s.line());
        table.push('\n');
    }
    write(&args.out.join("summary.txt"), &table)?;
    write(&args.out.join("summary.json"), &json(&summaries)?)?;
    let errors = summaries.iter().filter(|s| s.error.is_some()).count();
    let detections: usize = summaries.iter().map(|s| s.detections).sum();
    eprintln!(
        "{} app(s), {detections} report(s), {errors} error(s)",
        summaries.len()
    );
    Ok(if errors > 0 {
        1
    } else if detections > 0 {
        2
    } else {
        0
    })
}
