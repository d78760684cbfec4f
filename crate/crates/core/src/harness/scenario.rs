//! Learning sweeps over agent kinds and sensor temperatures.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::output::{learning_csv, mu_label, sha256_hex, write_all};
use crate::detector::DetectionModel;
use crate::error::Result;
use crate::learner::{run_learning, AgentConfig, LearningRecord};
use crate::source::BathParams;

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn learning_file_name(kind: DetectionModel, bath: BathParams) -> String {
    format!("learning_{}_mu-{}.csv", kind.name(), mu_label(bath))
}

/// One learning trajectory of the sweep.
#[derive(Debug, Clone)]
pub struct PairResult {
    pub kind: DetectionModel,
    pub bath: BathParams,
    pub records: Vec<LearningRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub kind: DetectionModel,
    pub mu_sigma: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub files: Vec<OutputFile>,
    pub manifest: PathBuf,
    pub results: Vec<PairResult>,
}

/// Run every (agent, temperature) pair. Pairs are independent and run in
/// parallel; the result order follows the config.
pub fn run_pairs(cfg: &ExperimentConfig) -> Result<Vec<PairResult>> {
    let pairs: Vec<(&AgentConfig, BathParams)> = cfg
        .agents
        .iter()
        .flat_map(|a| cfg.temperatures.iter().map(move |&b| (a, b)))
        .collect();
    pairs
        .par_iter()
        .map(|&(agent, bath)| {
            let records = run_learning(agent, &cfg.world_at(bath), cfg.run.seed)?;
            Ok(PairResult { kind: agent.kind, bath, records })
        })
        .collect()
}

/// Run the sweep and write one CSV per pair plus a manifest into
/// `cfg.run.output_dir`. Nothing is moved into place unless every pair
/// succeeds.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let started = Instant::now();
    let results = run_pairs(cfg)?;
    let dir = &cfg.run.output_dir;

    let mut items = Vec::with_capacity(results.len() + 1);
    let mut files = Vec::with_capacity(results.len());
    for r in &results {
        let name = learning_file_name(r.kind, r.bath);
        let csv = learning_csv(&r.records).into_bytes();
        files.push(OutputFile {
            path: dir.join(&name),
            kind: r.kind,
            mu_sigma: mu_label(r.bath),
            rows: r.records.len(),
            sha256: sha256_hex(&csv),
        });
        items.push((name, csv));
    }

    let manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.run.seed,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "config": cfg.to_toml_string(),
        "files": files.iter().map(|f| json!({
            "name": f.path.file_name().map(|n| n.to_string_lossy().into_owned()),
            "kind": f.kind,
            "mu_sigma": f.mu_sigma,
            "rows": f.rows,
            "sha256": f.sha256,
        })).collect::<Vec<_>>(),
    });
    let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    items.push((MANIFEST_NAME.to_string(), manifest_bytes));
    write_all(dir, &items)?;

    Ok(ScenarioOutput { files, manifest: dir.join(MANIFEST_NAME), results })
}
