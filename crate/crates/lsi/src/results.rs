//! Result persistence: `lsi.csv`, `summary.json`, `manifest.json`.
//!
//! Data files are deterministic byte streams for a given table; wall-clock
//! time lives only in the manifest, which is excluded from byte-equality
//! comparisons.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loo::{ranking_stability, seed_disagreement, LsiTable};
use crate::stats::{summarize, Summary};

/// Everything needed to reproduce a run, plus wall-clock diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub engine_version: String,
    pub dataset_fingerprint: String,
    pub seeds: Vec<u64>,
    pub hessian_mode: String,
    pub worker_count: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub checkpoint_epochs: Vec<usize>,
    pub clip_norm: Option<f64>,
    pub noise_multiplier: Option<f64>,
    pub noise_seed: Option<u64>,
    pub wall_clock_seconds: f64,
    pub clamp_total_full: usize,
    pub clamp_total_loo: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointCorrelation {
    pub epoch: usize,
    pub spearman: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub n: usize,
    pub seeds: Vec<u64>,
    pub hessian_mode: String,
    pub per_sample_mean: Vec<f64>,
    pub ranking: Vec<usize>,
    pub stats: Summary,
    pub checkpoint_mean_lsi: BTreeMap<usize, Vec<f64>>,
    pub checkpoint_spearman: Vec<CheckpointCorrelation>,
    pub seed_disagreement: Option<f64>,
}

/// Formats with 17 significant digits, enough for an exact f64 round trip.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn build_summary(table: &LsiTable, hessian_mode: &str) -> Result<RunSummary> {
    let stats = summarize(&table.per_sample_mean)?;
    let checkpoint_spearman = if table.checkpoint_mean_lsi.is_empty() {
        Vec::new()
    } else {
        match ranking_stability(table) {
            Ok(rows) => rows
                .into_iter()
                .map(|(epoch, spearman)| CheckpointCorrelation { epoch, spearman })
                .collect(),
            Err(Error::Degenerate(_)) => Vec::new(),
            Err(e) => return Err(e),
        }
    };
    let disagreement = if table.seeds.len() >= 2 {
        match seed_disagreement(table) {
            Ok(v) => Some(v),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(RunSummary {
        n: table.num_samples(),
        seeds: table.seeds.clone(),
        hessian_mode: hessian_mode.to_string(),
        per_sample_mean: table.per_sample_mean.clone(),
        ranking: table.ranking.clone(),
        stats,
        checkpoint_mean_lsi: table.checkpoint_mean_lsi.clone(),
        checkpoint_spearman,
        seed_disagreement: disagreement,
    })
}

pub fn lsi_csv_bytes(table: &LsiTable) -> String {
    let mut out = String::from("sample_id,seed,lsi\n");
    for record in &table.records {
        out.push_str(&format!(
            "{},{},{}\n",
            record.sample_id,
            record.seed,
            format_f64(record.lsi)
        ));
    }
    out
}

/// Writes `lsi.csv`, `summary.json`, and `manifest.json` into `dir`.
pub fn write_results(table: &LsiTable, manifest: &RunManifest, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let csv_path = dir.join("lsi.csv");
    fs::write(&csv_path, lsi_csv_bytes(table)).map_err(|e| Error::io(&csv_path, e))?;

    let summary = build_summary(table, &manifest.hessian_mode)?;
    write_json(dir.join("summary.json"), &summary)?;
    write_json(dir.join("manifest.json"), manifest)?;
    Ok(())
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::MalformedResults {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedResults {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn read_summary(run_dir: impl AsRef<Path>) -> Result<RunSummary> {
    read_json(run_dir.as_ref().join("summary.json"))
}

/// Parses `lsi.csv` back into `(sample_id, seed, lsi)` rows.
pub fn read_lsi_csv(path: impl AsRef<Path>) -> Result<Vec<(usize, u64, f64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("sample_id,seed,lsi") => {}
        other => {
            return Err(Error::MalformedResults {
                path: path.to_path_buf(),
                reason: format!("bad header: {other:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let parse_err = |what: &str| Error::MalformedResults {
            path: path.to_path_buf(),
            reason: format!("line {}: bad {what}", lineno + 2),
        };
        let id = fields
            .next()
            .and_then(|f| f.parse::<usize>().ok())
            .ok_or_else(|| parse_err("sample_id"))?;
        let seed = fields
            .next()
            .and_then(|f| f.parse::<u64>().ok())
            .ok_or_else(|| parse_err("seed"))?;
        let lsi = fields
            .next()
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| parse_err("lsi"))?;
        if fields.next().is_some() {
            return Err(parse_err("column count"));
        }
        rows.push((id, seed, lsi));
    }
    Ok(rows)
}
