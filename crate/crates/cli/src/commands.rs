use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pepalign_core::downstream::{embed, run_task, write_embeddings, HeadConfig};
use pepalign_core::graph::{build_residue_graph, EdgeType, GraphConfig};
use pepalign_core::ingest::{
    bucket_by_confidence, filter_peptides, parse_structure_file, read_manifest, write_manifest,
    PeptideRecord, Source, Split,
};
use pepalign_core::model::ModelConfig;
use pepalign_core::oracle::{format_table, run_suite};
use pepalign_core::ssl::SslConfig;
use pepalign_core::synthetic::{generate, SyntheticConfig};
use pepalign_core::train::{
    load_checkpoint, pretrain, run_ablation, save_checkpoint, write_container, AblationConfig,
    BatchStrategy, StepLog, TrainConfig, FORMAT_VERSION,
};
use pepalign_core::{Error, Result, Tensor};
use serde_json::{json, Value};

use crate::args::*;

pub enum Failure {
    Core(Error),
    /// The oracle suite ran but some component exceeded its tolerance.
    Gradcheck(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(e.into())
    }
}

pub type Outcome = std::result::Result<(), Failure>;

fn graph_config(g: &GraphArgs) -> GraphConfig {
    GraphConfig {
        radius_cutoff: g.radius,
        knn_k: g.knn,
        mask_residue_identity: g.mask_residues,
    }
}

fn train_config(optim: &OptimArgs, model: &ModelArgs, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig {
        batch_size: optim.batch,
        epochs: optim.epochs,
        seed,
        ssl: SslConfig {
            temperature: optim.temperature,
            ..SslConfig::default()
        },
        model: ModelConfig {
            hidden_dim: model.hidden,
            structure_layers: model.structure_layers,
            sequence_blocks: model.sequence_blocks,
            heads: model.heads,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    cfg.optimizer.lr = optim.lr;
    cfg
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One-line JSON summary on stdout.
fn report(value: Value) {
    println!("{value}");
}

fn structure_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("pdb" | "ent")) {
            files.push(path);
        }
    }
    // Directory order is filesystem-dependent; output must not be.
    files.sort();
    Ok(files)
}

pub fn ingest(a: &IngestArgs) -> Outcome {
    let source: Source = a.source.into();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let files = structure_files(&a.input)?;
    for path in &files {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("structure");
        let parsed = parse_structure_file(&bytes, name, source).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        records.extend(parsed.records);
        skipped.extend(parsed.skipped_chains);
    }
    let parsed = records.len();
    let mut seen = BTreeSet::new();
    if let Some(dup) = records.iter().find(|r| !seen.insert(r.id.clone())) {
        return Err(Error::Data(format!("duplicate record id `{}`", dup.id)).into());
    }
    let kept = filter_peptides(records, a.max_len)?;
    write_manifest(&kept, &a.out)?;
    report(json!({
        "command": "ingest",
        "config": {
            "in": a.input,
            "out": a.out,
            "max_len": a.max_len,
            "source": source,
        },
        "files": files.len(),
        "chains": parsed,
        "kept": kept.len(),
        "skipped_chains": skipped,
    }));
    Ok(())
}

pub fn bucket(a: &BucketArgs) -> Outcome {
    let records = read_manifest(&a.manifest)?;
    let buckets = bucket_by_confidence(&records, &a.thresholds, Some(a.sample), a.seed)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let config = json!({
        "manifest": a.manifest,
        "thresholds": a.thresholds,
        "sample": a.sample,
        "seed": a.seed,
        "out_dir": a.out_dir,
    });
    for (name, ids) in &buckets.buckets {
        let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        let subset: Vec<PeptideRecord> = records
            .iter()
            .filter(|r| wanted.contains(r.id.as_str()))
            .cloned()
            .collect();
        write_manifest(&subset, a.out_dir.join(format!("{name}.jsonl")))?;
    }
    write_json(
        &a.out_dir.join("buckets.json"),
        &json!({ "config": config, "buckets": buckets }),
    )?;
    let sizes: serde_json::Map<String, Value> = buckets
        .buckets
        .iter()
        .map(|(k, v)| (k.clone(), json!(v.len())))
        .collect();
    report(
        json!({ "command": "bucket", "config": config, "records": records.len(), "sizes": sizes }),
    );
    Ok(())
}

pub fn graphs(a: &GraphsArgs) -> Outcome {
    let cfg = graph_config(&a.graph);
    cfg.validate()?;
    let records = read_manifest(&a.manifest)?;
    let mut seen = BTreeSet::new();
    let mut topology = Vec::with_capacity(records.len());
    let mut tensors: Vec<(String, Tensor)> = Vec::with_capacity(2 * records.len());
    let mut total_edges = 0;
    for r in &records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Data(format!("duplicate record id `{}`", r.id)).into());
        }
        let g = build_residue_graph(r, &cfg)?;
        total_edges += g.num_edges();
        let edges: Vec<Value> = g
            .edges
            .iter()
            .map(|e| json!([e.src, e.dst, e.kind.index()]))
            .collect();
        topology.push(json!({ "id": g.id, "n": g.n, "edges": edges }));
        tensors.push((format!("{}/node_features", g.id), g.node_features));
        tensors.push((format!("{}/edge_features", g.id), g.edge_features));
    }
    let config = json!({ "manifest": a.manifest, "graph": cfg });
    let meta = json!({
        "kind": "graphs",
        "version": FORMAT_VERSION,
        "config": config,
        // Edge triples are [src, dst, relation index into this list].
        "edge_types": EdgeType::ALL,
        "graphs": topology,
    });
    write_container(&a.out, &meta, &tensors)?;
    report(json!({
        "command": "graphs",
        "config": config,
        "graphs": records.len(),
        "edges": total_edges,
    }));
    Ok(())
}

fn select(records: Vec<PeptideRecord>, split: SplitArg) -> Vec<PeptideRecord> {
    records
        .into_iter()
        .filter(|r| split.admits(r.split))
        .collect()
}

pub fn pretrain_cmd(a: &PretrainArgs) -> Outcome {
    let graph = graph_config(&a.graph);
    let mut train = train_config(&a.optim, &a.model, a.seed);
    train.ssl.loss = a.loss;
    train.batch_strategy = if a.sort_batches {
        BatchStrategy::LengthSorted
    } else {
        BatchStrategy::Random
    };
    let records = select(read_manifest(&a.manifest)?, a.split);
    if records.is_empty() {
        return Err(Error::Data(format!(
            "no `{}` records in {}",
            a.split.name(),
            a.manifest.display()
        ))
        .into());
    }
    let out = pretrain(&records, &train, &graph)?;
    save_checkpoint(&out.checkpoint, &a.out)?;
    let mut log = create(&a.log)?;
    for entry in &out.log {
        serde_json::to_writer(&mut log, entry)?;
        log.write_all(b"\n").map_err(|e| Error::io(&a.log, e))?;
    }
    log.flush().map_err(|e| Error::io(&a.log, e))?;
    let last: Option<&StepLog> = out.log.last();
    report(json!({
        "command": "pretrain",
        "config": {
            "manifest": a.manifest,
            "split": a.split.name(),
            "train": train,
            "graph": graph,
            "out": a.out,
            "log": a.log,
        },
        "records": records.len(),
        "steps": out.checkpoint.step,
        "final": last,
    }));
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Outcome {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let records = read_manifest(&a.manifest)?;
    let head = HeadConfig {
        steps: a.steps,
        lr: a.head_lr,
        seed: a.seed,
    };
    let mut metrics = run_task(&ckpt.params, &records, a.task, &head)?;
    if let Value::Object(map) = &mut metrics.config {
        map.insert("ckpt".into(), json!(a.ckpt));
        map.insert("manifest".into(), json!(a.manifest));
        map.insert("graph".into(), json!(ckpt.graph));
        map.insert("pretrain".into(), json!(ckpt.train));
    }
    write_json(&a.out, &serde_json::to_value(&metrics)?)?;
    report(json!({ "command": "eval", "task": metrics.task, "metrics": metrics.metrics }));
    Ok(())
}

pub fn embed_cmd(a: &EmbedArgs) -> Outcome {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let records = read_manifest(&a.manifest)?;
    let rows = embed(&ckpt.params, &records)?;
    let mut w = create(&a.out)?;
    write_embeddings(&rows, &mut w)?;
    w.flush().map_err(|e| Error::io(&a.out, e))?;
    report(json!({
        "command": "embed",
        "config": { "ckpt": a.ckpt, "manifest": a.manifest, "out": a.out, "model": ckpt.params.config },
        "rows": rows.len(),
        "dim": ckpt.params.config.hidden_dim,
    }));
    Ok(())
}

pub fn gradcheck(a: &GradcheckArgs) -> Outcome {
    let outcomes = run_suite(a.trials, a.seed)?;
    print!("{}", format_table(&outcomes));
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} ({:.2e})", o.component.name(), o.max_rel_error))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Gradcheck(failed))
    }
}

pub fn synth(a: &SynthArgs) -> Outcome {
    let cfg = SyntheticConfig {
        train: a.train,
        test: a.test,
        min_len: a.min_len,
        max_len: a.max_len,
        seed: a.seed,
        ..SyntheticConfig::default()
    };
    let records = generate(&cfg)?;
    write_manifest(&records, &a.out)?;
    report(json!({ "command": "synth", "config": cfg, "records": records.len() }));
    Ok(())
}

pub fn ablate(a: &AblateArgs) -> Outcome {
    let graph = graph_config(&a.graph);
    let base = train_config(&a.optim, &a.model, 0);
    let records = read_manifest(&a.manifest)?;
    let (train, held_out): (Vec<_>, Vec<_>) = records
        .into_iter()
        .filter(|r| r.split != Split::Valid)
        .partition(|r| r.split == Split::Train);
    if train.is_empty() || held_out.is_empty() {
        return Err(Error::Data(format!(
            "ablation needs train and test records (have {} and {})",
            train.len(),
            held_out.len()
        ))
        .into());
    }
    let config = AblationConfig {
        losses: a.losses.clone(),
        strategies: a.batching.iter().map(|&b| b.into()).collect(),
        seeds: a.seeds.clone(),
        eval_strategy: a.eval_batching.into(),
        tie_tolerance: a.tie_tolerance,
    };
    let result = run_ablation(&train, &held_out, &base, &graph, &config)?;
    let table = result.table();
    write_json(
        &a.out,
        &json!({
            "config": { "manifest": a.manifest, "base": base, "graph": graph },
            "report": result,
        }),
    )?;
    if let Some(path) = &a.table {
        fs::write(path, &table).map_err(|e| Error::io(path, e))?;
    }
    print!("{table}");
    Ok(())
}
