//! CSV and manifest output for experiment reports.
//!
//! Every arm of a report gets its own file set. Single-arm reports write
//! straight into the output directory; multi-arm reports write one
//! subdirectory per arm, named after the arm. Indices (trial, run, step,
//! policy) are 0-based. Floats carry 9 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::env::{EnvObservation, Room, Tool};
use crate::experiments::{ArmReport, ExperimentParams, ExperimentReport};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Rounds to 9 significant digits and prints the shortest text that parses
/// back to the rounded value.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    format!("{rounded:?}")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChecksum {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub created_at: String,
    pub config: RunConfig,
    pub params: ExperimentParams,
    pub files: Vec<FileChecksum>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Table {
    name: &'static str,
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &'static [&'static str]) -> Self {
        Self {
            name,
            header,
            rows: Vec::new(),
        }
    }

    fn to_bytes(&self, path: &Path) -> Result<Vec<u8>, OutputError> {
        let csv_err = |source| OutputError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| OutputError::Io {
            path: path.to_path_buf(),
            source: e.into_error(),
        })
    }
}

fn observed_names(obs: &EnvObservation) -> [&'static str; 3] {
    [
        Room::from_index(obs.room).map_or("?", Room::name),
        Tool::from_index(obs.tool).map_or("?", Tool::name),
        if obs.rewarded() { "Reward" } else { "Null" },
    ]
}

fn arm_tables(arm: &ArmReport) -> Vec<Table> {
    let mut steps = Table::new("steps.csv", &["trial", "run", "steps_to_solve"]);
    let mut ranks = Table::new(
        "ranks.csv",
        &["trial", "run", "step", "utility_rank", "infogain_rank"],
    );
    let mut probes = Table::new(
        "probes.csv",
        &["trial", "cumulative_step", "probe_name", "probability"],
    );
    let mut actions = Table::new(
        "actions.csv",
        &[
            "trial",
            "run",
            "step",
            "action",
            "observed_room",
            "observed_tool",
            "observed_reward",
        ],
    );
    let mut efe = Table::new(
        "efe.csv",
        &["policy_index", "utility", "state_ig", "param_ig", "G"],
    );
    for t in &arm.trials {
        for (r, run) in t.runs.iter().enumerate() {
            steps.rows.push(vec![
                t.trial.to_string(),
                r.to_string(),
                run.steps_to_solve.to_string(),
            ]);
            for (s, step) in run.steps.iter().enumerate() {
                ranks.rows.push(vec![
                    t.trial.to_string(),
                    r.to_string(),
                    s.to_string(),
                    step.utility_rank.to_string(),
                    step.infogain_rank.to_string(),
                ]);
                let [room, tool, reward] = observed_names(&step.observation);
                actions.rows.push(vec![
                    t.trial.to_string(),
                    r.to_string(),
                    s.to_string(),
                    step.action.name().to_string(),
                    room.to_string(),
                    tool.to_string(),
                    reward.to_string(),
                ]);
            }
        }
        for p in &t.probes {
            probes.rows.push(vec![
                t.trial.to_string(),
                p.cumulative_step.to_string(),
                p.name.clone(),
                format_float(p.probability),
            ]);
        }
        for evals in &t.first_decisions {
            for e in evals {
                efe.rows.push(vec![
                    e.policy_index.to_string(),
                    format_float(e.total_utility()),
                    format_float(e.total_state_ig()),
                    format_float(e.total_param_ig()),
                    format_float(e.g),
                ]);
            }
        }
    }

    let curves = arm.curves();
    let mut summary = Table::new(
        "steps_summary.csv",
        &["run", "location", "mean_steps", "ste_steps", "n"],
    );
    let locations = arm
        .schedule
        .blocks
        .iter()
        .flat_map(|b| std::iter::repeat_n(b.location, b.num_runs));
    for (r, (m, loc)) in curves.steps.iter().zip(locations).enumerate() {
        summary.rows.push(vec![
            r.to_string(),
            loc.name().to_string(),
            format_float(m.mean),
            format_float(m.ste),
            m.n.to_string(),
        ]);
    }

    let mut tables = vec![steps, ranks, probes, actions];
    if !efe.rows.is_empty() {
        tables.push(efe);
    }
    tables.push(summary);
    tables
}

/// Writes every arm's CSVs and a manifest with their checksums.
pub fn emit_outputs(
    report: &ExperimentReport,
    config: &RunConfig,
    dir: &Path,
) -> Result<RunManifest, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();
    let nested = report.arms.len() > 1;
    for arm in &report.arms {
        let sub = if nested { arm.name.as_str() } else { "" };
        let arm_dir = dir.join(sub);
        fs::create_dir_all(&arm_dir).map_err(io_err(&arm_dir))?;
        for table in arm_tables(arm) {
            let path = arm_dir.join(table.name);
            let bytes = table.to_bytes(&path)?;
            fs::write(&path, &bytes).map_err(io_err(&path))?;
            let rel = if nested {
                format!("{sub}/{}", table.name)
            } else {
                table.name.to_string()
            };
            files.push(FileChecksum {
                path: rel,
                sha256: sha256_hex(&bytes),
            });
        }
    }
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        config: config.clone(),
        params: report.params.clone(),
        files,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n").map_err(io_err(&path))?;
    Ok(manifest)
}

/// Recomputes the checksum of every file listed in the manifest under `dir`
/// and returns the paths that no longer match.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>, OutputError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let mut bad = Vec::new();
    for f in &manifest.files {
        let p = dir.join(&f.path);
        let bytes = fs::read(&p).map_err(io_err(&p))?;
        if sha256_hex(&bytes) != f.sha256 {
            bad.push(f.path.clone());
        }
    }
    Ok(bad)
}
