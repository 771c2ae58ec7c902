use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pepalign_bench::peptides;
use pepalign_core::encoders::Readout;
use pepalign_core::graph::{build_residue_graph, GraphConfig};
use pepalign_core::model::{prepare_all, ModelConfig, ModelParams, PreparedRecord};
use pepalign_core::nn::Mode;
use pepalign_core::train::{train_step, Adam, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

const LENGTHS: [usize; 3] = [10, 25, 49];

fn params(config: ModelConfig) -> ModelParams {
    ModelParams::new(config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

fn graph_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_residue_graph");
    let gc = GraphConfig::default();
    for n in LENGTHS {
        let record = &peptides(1, n, 1)[0];
        group.bench_with_input(BenchmarkId::from_parameter(n), record, |b, r| {
            b.iter(|| build_residue_graph(black_box(r), &gc).unwrap())
        });
    }
    group.finish();
}

fn structure_encoder(c: &mut Criterion) {
    let mut group = c.benchmark_group("structure_encode");
    let p = params(ModelConfig::default());
    for n in LENGTHS {
        let graph = build_residue_graph(&peptides(1, n, 2)[0], &GraphConfig::default()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &graph, |b, g| {
            b.iter(|| {
                p.structure
                    .encode(black_box(g), Readout::Mean, Mode::Eval)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn sequence_encoder(c: &mut Criterion) {
    let mut group = c.benchmark_group("sequence_encode");
    let p = params(ModelConfig::default());
    for n in LENGTHS {
        let tokens = peptides(1, n, 3)[0].tokens().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &tokens, |b, t| {
            b.iter(|| p.sequence.encode(black_box(t), Readout::Mean).unwrap())
        });
    }
    group.finish();
}

fn pretrain_step(c: &mut Criterion) {
    let train = TrainConfig::default();
    let records = peptides(train.batch_size, 25, 4);
    let prepared = prepare_all(&records, &GraphConfig::default()).unwrap();
    let batch: Vec<&PreparedRecord> = prepared.iter().collect();
    c.bench_function("train_step/batch16_len25", |b| {
        let mut p = params(train.model);
        let mut adam = Adam::new(&p, train.optimizer);
        b.iter(|| train_step(&mut p, &mut adam, black_box(&batch), &train, None).unwrap())
    });
}

criterion_group!(
    benches,
    graph_build,
    structure_encoder,
    sequence_encoder,
    pretrain_step
);
criterion_main!(benches);
