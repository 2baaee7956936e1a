//! The `train` command and its report.

use std::path::Path;

use cipherfit::emulator::{Emulator, OpCounts};
use cipherfit::training::{accuracy, fit, fit_plain, AuditEntry, EpochRecord, PlainSoftmax, StepTrace};
use cipherfit::Result;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::csvio::{ingest, write_weights};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracies {
    pub train: f64,
    pub val: f64,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub epochs: Vec<EpochRecord>,
    /// Final accuracies of the decrypted best weights.
    pub accuracy: Accuracies,
    /// Plaintext NAG with the exact softmax and the same hyperparameters.
    pub reference_accuracy: Accuracies,
    pub counts: OpCounts,
    pub setup_counts: OpCounts,
    pub estimated_ms: f64,
    pub steps: Vec<StepTrace>,
    pub audit: Vec<AuditEntry>,
    pub server_violations: u64,
    pub client_bytes_sent: usize,
    pub server_bytes_sent: usize,
}

/// Runs the protocol described by `cfg`, writes `report.json` and
/// `weights.csv` into the output directory and returns the report.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let ctx = cfg.validate()?;
    let c = cfg.num_classes;
    let train = ingest(&cfg.train, c)?;
    let val = ingest(&cfg.val, c)?;
    let test = cfg.test.as_deref().map(|p| ingest(p, c)).transpose()?;
    for other in std::iter::once(&val).chain(test.as_ref()) {
        if other.num_features() != train.num_features() {
            return Err(cipherfit::Error::Shape(format!(
                "feature files disagree: {} vs {} columns",
                train.num_features(),
                other.num_features()
            )));
        }
    }
    let (he, key) = Emulator::new(ctx)?;
    let he = he.with_auto_bootstrap(cfg.context.auto_bootstrap);
    let r = fit(&he, &key, &train, &val, &cfg.training)?;
    let reference = fit_plain(&train, &val, &cfg.training, PlainSoftmax::Exact)?;
    let score = |w| Accuracies {
        train: accuracy(w, &train),
        val: accuracy(w, &val),
        test: test.as_ref().map(|t| accuracy(w, t)),
    };
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        best_epoch: r.best_epoch,
        stopped_early: r.stopped_early,
        epochs: r.epochs,
        accuracy: score(&r.weights),
        reference_accuracy: score(&reference.weights),
        counts: r.counts,
        setup_counts: r.setup_counts,
        estimated_ms: r.estimated_ms,
        steps: r.steps,
        audit: r.audit,
        server_violations: r.server_violations,
        client_bytes_sent: r.client_bytes_sent,
        server_bytes_sent: r.server_bytes_sent,
    };
    write_outputs(&cfg.output_dir, &report, &r.weights)?;
    Ok(report)
}

fn write_outputs(dir: &Path, report: &RunReport, weights: &ndarray::Array2<f64>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(dir.join("report.json"), json + "\n")?;
    write_weights(&dir.join("weights.csv"), weights)
}
