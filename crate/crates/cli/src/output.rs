use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Resolved;

/// One emitted file and where its numbers come from.
#[derive(Clone, Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub module: &'static str,
    pub operation: &'static str,
    /// How the seeds of the rows were derived from the master seed.
    pub seeds: String,
}

/// Collects artifacts and long-format plot rows for one run.
pub struct Sink {
    root: PathBuf,
    pub artifacts: Vec<Artifact>,
    plot: Vec<(f64, f64, String)>,
}

impl Sink {
    pub fn new(root: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("stage prepare-output: creating {}", root.display()))?;
        Ok(Sink {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
            plot: Vec::new(),
        })
    }

    pub fn path(&self, rel: &str) -> anyhow::Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(p)
    }

    pub fn record(&mut self, rel: &str, module: &'static str, operation: &'static str, seeds: impl Into<String>) {
        self.artifacts.push(Artifact {
            path: rel.to_string(),
            module,
            operation,
            seeds: seeds.into(),
        });
    }

    /// Write a CSV from a header and rows and record it.
    pub fn csv(
        &mut self,
        rel: &str,
        header: &str,
        rows: impl IntoIterator<Item = String>,
        module: &'static str,
        operation: &'static str,
        seeds: impl Into<String>,
    ) -> anyhow::Result<()> {
        let mut body = String::new();
        body.push_str(header);
        body.push('\n');
        for r in rows {
            body.push_str(&r);
            body.push('\n');
        }
        std::fs::write(self.path(rel)?, body).with_context(|| format!("writing {rel}"))?;
        self.record(rel, module, operation, seeds);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T, module: &'static str, operation: &'static str, seeds: impl Into<String>) -> anyhow::Result<()> {
        std::fs::write(self.path(rel)?, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {rel}"))?;
        self.record(rel, module, operation, seeds);
        Ok(())
    }

    pub fn plot(&mut self, x: f64, y: f64, series: impl Into<String>) {
        self.plot.push((x, y, series.into()));
    }

    /// Write `plot.csv` (x, y, series), sorted by series then x.
    pub fn finish_plot(&mut self) -> anyhow::Result<()> {
        let mut rows = std::mem::take(&mut self.plot);
        rows.sort_by(|a, b| a.2.cmp(&b.2).then(a.0.total_cmp(&b.0)));
        let mut body = String::from("x,y,series\n");
        for (x, y, s) in rows {
            let _ = writeln!(body, "{x},{y},{s}");
        }
        std::fs::write(self.path("plot.csv")?, body).context("writing plot.csv")?;
        self.record("plot.csv", "experiments_cli", "run", "derived from the other artifacts");
        Ok(())
    }
}

pub fn config_hash(cfg: &Resolved) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    experiment: &'static str,
    config: &'a Resolved,
    config_hash: String,
    master_seed: u64,
    seed_derivation: &'static str,
    threads: usize,
    started_unix_seconds: u64,
    wall_clock_seconds: f64,
    artifacts: &'a [Artifact],
}

pub fn write_manifest(root: &Path, cfg: &Resolved, sink: &Sink, started: std::time::SystemTime, wall: f64) -> anyhow::Result<()> {
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.name(),
        config: cfg,
        config_hash: config_hash(cfg),
        master_seed: cfg.seed,
        seed_derivation: "splitmix fan-out of (master seed, FNV-1a tag of the experiment, N, sample index)",
        threads: rayon::current_num_threads(),
        started_unix_seconds: started.duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        wall_clock_seconds: wall,
        artifacts: &sink.artifacts,
    };
    std::fs::write(root.join("MANIFEST.json"), serde_json::to_string_pretty(&manifest)?).context("writing MANIFEST.json")?;
    Ok(())
}
