//! Downstream evaluation of frozen sequence-encoder embeddings: labelled
//! peptide tasks, self-contact prediction, metrics, and embedding export.

mod heads;
pub mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ingest::{PeptideRecord, Split};
use crate::model::ModelParams;
use crate::tensor::Tensor;

pub use heads::{
    bce_with_logits, binary_loss, contact_loss, predict_probabilities, predict_values,
    regression_loss, train_binary_head, train_contact_head, train_regression_head, valid_pairs,
    ContactExample, ContactHead, HeadConfig, LinearHead,
};

pub const CONTACT_THRESHOLD: f64 = 8.0;
pub const CONTACT_MIN_SEP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    BinaryClassification,
    Regression,
    SelfContact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Cpp,
    Solubility,
    Affinity,
    Contact,
}

impl Task {
    pub fn kind(self) -> TaskKind {
        match self {
            Task::Cpp | Task::Solubility => TaskKind::BinaryClassification,
            Task::Affinity => TaskKind::Regression,
            Task::Contact => TaskKind::SelfContact,
        }
    }

    /// Manifest label key, or `None` when targets come from structure.
    pub fn label_key(self) -> Option<&'static str> {
        match self {
            Task::Cpp => Some("cpp"),
            Task::Solubility => Some("solubility"),
            Task::Affinity => Some("affinity"),
            Task::Contact => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Cpp => "cpp",
            Task::Solubility => "solubility",
            Task::Affinity => "affinity",
            Task::Contact => "contact",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cpp" => Ok(Task::Cpp),
            "solubility" => Ok(Task::Solubility),
            "affinity" => Ok(Task::Affinity),
            "contact" => Ok(Task::Contact),
            other => Err(Error::Config(format!(
                "unknown task `{other}` (expected cpp|solubility|affinity|contact)"
            ))),
        }
    }
}

/// Binary Cα contact map: `1` where the distance is below `threshold` and
/// the chain separation is at least `min_sep`.
pub fn self_contact_targets(record: &PeptideRecord, threshold: f64, min_sep: usize) -> Tensor {
    let n = record.len();
    let mut m = Tensor::zeros(&[n, n]);
    for (i, j) in valid_pairs(n, min_sep) {
        let (a, b) = (record.coords[i], record.coords[j]);
        let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
        if d2.sqrt() < threshold {
            m.set(i, j, 1.0);
            m.set(j, i, 1.0);
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    /// `null` marks a metric that is undefined on this data.
    pub metrics: BTreeMap<String, Option<f64>>,
    pub n_samples: usize,
    pub n_train: usize,
    pub config: Value,
}

/// Frozen pooled sequence embeddings, one row per record.
pub fn sequence_embeddings(params: &ModelParams, records: &[&PeptideRecord]) -> Result<Tensor> {
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        let (_, pooled) = params
            .sequence
            .encode(&r.tokens()?, params.config.readout)?;
        rows.push(pooled);
    }
    Ok(Tensor::stack_rows(&rows))
}

fn labels_for(records: &[&PeptideRecord], key: &str) -> Result<Vec<f64>> {
    let missing: Vec<&str> = records
        .iter()
        .filter(|r| !r.labels.contains_key(key))
        .map(|r| r.id.as_str())
        .collect();
    if !missing.is_empty() {
        const SHOWN: usize = 10;
        let more = missing.len().saturating_sub(SHOWN);
        let mut list = missing[..missing.len().min(SHOWN)].join(", ");
        if more > 0 {
            list.push_str(&format!(" (+{more} more)"));
        }
        return Err(Error::Data(format!("label `{key}` missing for: {list}")));
    }
    Ok(records.iter().map(|r| r.labels[key]).collect())
}

fn contact_examples(
    params: &ModelParams,
    records: &[&PeptideRecord],
) -> Result<Vec<ContactExample>> {
    records
        .iter()
        .map(|r| {
            let (per, _) = params
                .sequence
                .encode(&r.tokens()?, params.config.readout)?;
            Ok(ContactExample {
                features: per,
                targets: self_contact_targets(r, CONTACT_THRESHOLD, CONTACT_MIN_SEP),
            })
        })
        .collect()
}

pub fn binary_metrics(scores: &[f64], labels: &[f64]) -> BTreeMap<String, Option<f64>> {
    BTreeMap::from([
        ("acc".to_string(), metrics::accuracy(scores, labels)),
        ("f1".to_string(), metrics::f1(scores, labels)),
        ("roc_auc".to_string(), metrics::roc_auc(scores, labels)),
    ])
}

pub fn regression_metrics(preds: &[f64], labels: &[f64]) -> BTreeMap<String, Option<f64>> {
    BTreeMap::from([
        ("rmse".to_string(), metrics::rmse(preds, labels)),
        ("pearson".to_string(), metrics::pearson(preds, labels)),
        ("spearman".to_string(), metrics::spearman(preds, labels)),
    ])
}

/// Train a head on the `train` split and score it on the `test` split.
pub fn run_task(
    params: &ModelParams,
    records: &[PeptideRecord],
    task: Task,
    head: &HeadConfig,
) -> Result<MetricsReport> {
    let train: Vec<&PeptideRecord> = records.iter().filter(|r| r.split == Split::Train).collect();
    let test: Vec<&PeptideRecord> = records.iter().filter(|r| r.split == Split::Test).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data(format!(
            "task {} needs train and test records (have {} and {})",
            task.name(),
            train.len(),
            test.len()
        )));
    }
    let (metrics, n_samples) = match task.kind() {
        TaskKind::BinaryClassification | TaskKind::Regression => {
            let key = task.label_key().expect("labelled task");
            let y_train = labels_for(&train, key)?;
            let y_test = labels_for(&test, key)?;
            let x_train = sequence_embeddings(params, &train)?;
            let x_test = sequence_embeddings(params, &test)?;
            if task.kind() == TaskKind::BinaryClassification {
                let h = train_binary_head(&x_train, &y_train, head)?;
                if let Some(bad) = y_test.iter().find(|&&v| v != 0.0 && v != 1.0) {
                    return Err(Error::Data(format!(
                        "binary labels must be 0 or 1, found {bad}"
                    )));
                }
                (
                    binary_metrics(&predict_probabilities(&h, &x_test)?, &y_test),
                    test.len(),
                )
            } else {
                let h = train_regression_head(&x_train, &y_train, head)?;
                (
                    regression_metrics(&predict_values(&h, &x_test)?, &y_test),
                    test.len(),
                )
            }
        }
        TaskKind::SelfContact => {
            let h = train_contact_head(&contact_examples(params, &train)?, CONTACT_MIN_SEP, head)?;
            let mut scores = Vec::new();
            let mut labels = Vec::new();
            for ex in contact_examples(params, &test)? {
                let p = h.probabilities(&ex.features);
                for (i, j) in valid_pairs(ex.features.rows(), CONTACT_MIN_SEP) {
                    scores.push(p.get(i, j));
                    labels.push(ex.targets.get(i, j));
                }
            }
            let n = scores.len();
            (binary_metrics(&scores, &labels), n)
        }
    };
    Ok(MetricsReport {
        task: task.name().to_string(),
        metrics,
        n_samples,
        n_train: train.len(),
        config: serde_json::json!({
            "head": head,
            "kind": task.kind(),
            "contact_threshold": CONTACT_THRESHOLD,
            "contact_min_sep": CONTACT_MIN_SEP,
            "model": params.config,
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Frozen pooled sequence embeddings keyed by record id.
pub fn embed(params: &ModelParams, records: &[PeptideRecord]) -> Result<Vec<EmbeddingRow>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Data(format!("duplicate record id `{}`", r.id)));
        }
        let (_, pooled) = params
            .sequence
            .encode(&r.tokens()?, params.config.readout)?;
        out.push(EmbeddingRow {
            id: r.id.clone(),
            vector: pooled.into_data(),
        });
    }
    Ok(out)
}

pub fn write_embeddings<W: Write>(rows: &[EmbeddingRow], mut w: W) -> Result<()> {
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<embeddings>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record_of_len;

    #[test]
    fn collinear_has_no_contacts() {
        assert_eq!(
            self_contact_targets(&record_of_len("a", 3), 8.0, 3).sum(),
            0.0
        );
        assert_eq!(
            self_contact_targets(&record_of_len("a", 4), 8.0, 3).sum(),
            0.0
        );
    }

    #[test]
    fn hairpin_contact() {
        let mut r = record_of_len("h", 4);
        r.coords = vec![
            [0.0, 0.0, 0.0],
            [3.8, 0.0, 0.0],
            [3.8, 3.8, 0.0],
            [0.0, 5.0, 0.0],
        ];
        let m = self_contact_targets(&r, 8.0, 3);
        assert_eq!(m.get(0, 3), 1.0);
        assert_eq!(m.get(3, 0), 1.0);
        assert_eq!(m.sum(), 2.0);
    }

    #[test]
    fn missing_label_names_ids() {
        let a = record_of_len("a", 3);
        let mut b = record_of_len("b", 3);
        b.labels.insert("cpp".into(), 1.0);
        let err = labels_for(&[&a, &b], "cpp").unwrap_err().to_string();
        assert!(
            err.contains("`cpp`") && err.ends_with("missing for: a"),
            "{err}"
        );
    }
}
