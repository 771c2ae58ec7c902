use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphConfig;
use crate::ingest::PeptideRecord;
use crate::ssl::LossKind;

use super::batching::BatchStrategy;
use super::pretrain::{held_out_matching, pretrain};
use super::TrainConfig;

/// Grid over objectives and batching strategies, repeated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub losses: Vec<LossKind>,
    pub strategies: Vec<BatchStrategy>,
    pub seeds: Vec<u64>,
    /// Every configuration is scored on held-out batches built this way, so
    /// the comparison does not depend on each run's own batching.
    pub eval_strategy: BatchStrategy,
    /// Mean accuracies within this distance of the best count as tied.
    pub tie_tolerance: f64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            losses: vec![LossKind::Contrastive, LossKind::Generative, LossKind::Both],
            strategies: vec![BatchStrategy::LengthSorted, BatchStrategy::Random],
            seeds: vec![0, 1, 2],
            eval_strategy: BatchStrategy::LengthSorted,
            tie_tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub loss: LossKind,
    pub strategy: BatchStrategy,
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub steps: u64,
}

impl AblationRow {
    pub fn label(&self) -> String {
        format!("{}+{}", self.loss.label(), self.strategy.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub config: AblationConfig,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn best_mean(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.mean)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn row(&self, loss: LossKind, strategy: BatchStrategy) -> Option<&AblationRow> {
        self.rows
            .iter()
            .find(|r| r.loss == loss && r.strategy == strategy)
    }

    /// Whether the given configuration is best or within the tie tolerance.
    pub fn is_best_or_tied(&self, loss: LossKind, strategy: BatchStrategy) -> Option<bool> {
        let best = self.best_mean();
        self.row(loss, strategy)
            .map(|r| r.mean >= best - self.config.tie_tolerance)
    }

    /// Plain-text comparison table, best first.
    pub fn table(&self) -> String {
        let mut rows: Vec<&AblationRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.mean.total_cmp(&a.mean));
        let best = self.best_mean();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "| config | mean match acc | per seed | steps | vs best |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|");
        for r in rows {
            let seeds: Vec<String> = r.per_seed.iter().map(|v| format!("{v:.3}")).collect();
            let mark = if r.mean >= best - self.config.tie_tolerance {
                "best/tied"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "| {} | {:.4} | {} | {} | {} |",
                r.label(),
                r.mean,
                seeds.join(" "),
                r.steps,
                mark
            );
        }
        out
    }
}

/// Pretrain every (loss, strategy, seed) cell from `base` and score each on
/// `held_out`. All cells share epochs and batch size, hence step counts.
pub fn run_ablation(
    train: &[PeptideRecord],
    held_out: &[PeptideRecord],
    base: &TrainConfig,
    graph: &GraphConfig,
    config: &AblationConfig,
) -> Result<AblationReport> {
    if config.losses.is_empty() || config.strategies.is_empty() || config.seeds.is_empty() {
        return Err(Error::Config("ablation grid is empty".into()));
    }
    let mut rows = Vec::new();
    for &loss in &config.losses {
        for &strategy in &config.strategies {
            let mut per_seed = Vec::with_capacity(config.seeds.len());
            let mut steps = 0;
            for &seed in &config.seeds {
                let mut cfg = base.clone();
                cfg.ssl.loss = loss;
                cfg.batch_strategy = strategy;
                cfg.seed = seed;
                let out = pretrain(train, &cfg, graph)?;
                steps = out.checkpoint.step;
                per_seed.push(held_out_matching(
                    &out.checkpoint.params,
                    held_out,
                    graph,
                    cfg.batch_size,
                    config.eval_strategy,
                    seed,
                )?);
            }
            let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
            rows.push(AblationRow {
                loss,
                strategy,
                per_seed,
                mean,
                steps,
            });
        }
    }
    Ok(AblationReport {
        config: config.clone(),
        rows,
    })
}
