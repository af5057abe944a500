//! Experiment reports and their JSON and CSV forms.

use crate::config::{ExperimentConfig, Format};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spectral_transport::report::{float_repr, CheckRecord, Observation, SampleDump};
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: [&str; 5] = ["check", "paper_ref", "value", "tolerance", "pass"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub seed: u64,
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// SHA-256 of the compact JSON of `config`.
    pub config_sha256: String,
    pub environment: Environment,
    pub summary: Summary,
    pub checks: Vec<CheckRecord>,
    pub observations: Vec<Observation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    format!("{:x}", Sha256::digest(&bytes))
}

impl ExperimentReport {
    pub fn new(
        config: ExperimentConfig,
        checks: Vec<CheckRecord>,
        observations: Vec<Observation>,
    ) -> Self {
        let passed = checks.iter().filter(|c| c.pass).count();
        Self {
            config_sha256: config_hash(&config),
            environment: Environment {
                version: env!("CARGO_PKG_VERSION").into(),
                seed: config.seed,
                mode: if config.sequential {
                    "sequential"
                } else {
                    "parallel"
                }
                .into(),
            },
            summary: Summary {
                checks: checks.len(),
                passed,
                failed: checks.len() - passed,
            },
            config,
            checks,
            observations,
            wall_clock_seconds: None,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(CSV_HEADER)?;
        for c in &self.checks {
            w.write_record([
                c.check.as_str(),
                &c.paper_ref,
                &float_repr::text(c.value),
                &float_repr::text(c.tolerance),
                if c.pass { "true" } else { "false" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Json => self.to_json().into_bytes(),
            Format::Csv => {
                let mut buf = vec![];
                self.write_csv(&mut buf).expect("in-memory CSV");
                buf
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct WriteError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), WriteError> {
    let err = |source| WriteError {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    std::fs::write(path, bytes).map_err(err)
}

/// Writes the report to `path`, or to stdout when `path` is `None` or `-`.
pub fn emit_report(
    r: &ExperimentReport,
    format: Format,
    path: Option<&Path>,
) -> Result<(), WriteError> {
    let bytes = r.render(format);
    match path {
        Some(p) if p != Path::new("-") => write_file(p, &bytes),
        _ => std::io::stdout()
            .write_all(&bytes)
            .map_err(|source| WriteError {
                path: "<stdout>".into(),
                source,
            }),
    }
}

/// Long-format CSV `experiment,sample,index,log_eigenvalue`, eigenvalues in
/// non-increasing order.
pub fn samples_csv(dumps: &[SampleDump]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["experiment", "sample", "index", "log_eigenvalue"])
        .expect("in-memory CSV");
    for d in dumps {
        for (s, row) in d.rows.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                w.write_record([
                    d.experiment.as_str(),
                    &s.to_string(),
                    &i.to_string(),
                    &float_repr::text(*v),
                ])
                .expect("in-memory CSV");
            }
        }
    }
    w.into_inner().expect("in-memory CSV")
}

pub fn write_samples(dumps: &[SampleDump], path: &Path) -> Result<(), WriteError> {
    write_file(path, &samples_csv(dumps))
}
