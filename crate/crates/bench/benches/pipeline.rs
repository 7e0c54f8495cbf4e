use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use stged::diffcore::{Tape, Tensor};
use stged::graph::DEFAULT_THRESHOLD_DB;
use stged::models::{Ctx, Model, ModelConfig, PairIndex};
use stged::sim::{simulate, SimConfig};
use stged::train::{train, ExperimentData, SplitConfig, TrainConfig};
use stged_bench::grouped_snapshots;

fn tape_matmul(c: &mut Criterion) {
    let a = Tensor::new(vec![128, 128], (0..128 * 128).map(|k| (k as f64).sin()).collect()).unwrap();
    c.bench_function("tape matmul 128 forward+backward", |b| {
        b.iter(|| {
            let mut store = stged::diffcore::ParamStore::new();
            let id = store.add("w", a.clone()).unwrap();
            let mut tape = Tape::new();
            let x = tape.constant(a.clone());
            let w = tape.param(&store, id);
            let y = tape.matmul(x, w).unwrap();
            let s = tape.sum(y).unwrap();
            tape.backward(s, &mut store).unwrap();
            black_box(store.grad_norm())
        })
    });
}

fn forward(c: &mut Criterion) {
    let snaps = grouped_snapshots(30);
    let mut group = c.benchmark_group("window forward, 24 nodes, w=5");
    for name in ["gtc-lstm", "gat-gru", "gcn", "mlp"] {
        let cfg = ModelConfig::desk().with_model_name(name).unwrap();
        let data = ExperimentData::new(&snaps, &cfg, &SplitConfig::default(), DEFAULT_THRESHOLD_DB).unwrap();
        let model = Model::new(cfg, data.scaler.clone(), 0).unwrap();
        let pairs = PairIndex::all(24);
        group.bench_function(name, |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let l = model.logits(&mut tape, &data.prepared, 0, &pairs, &mut Ctx::eval()).unwrap();
                black_box(tape.value(l).data()[0])
            })
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let cfg = SimConfig {
        n_steps: 100,
        ..SimConfig::grouped()
    };
    c.bench_function("simulate 100 grouped steps", |b| b.iter(|| black_box(simulate(&cfg).unwrap())));
}

fn training_epoch(c: &mut Criterion) {
    let snaps = grouped_snapshots(40);
    let cfg = ModelConfig::desk().with_model_name("gtc-lstm").unwrap();
    let data = ExperimentData::new(&snaps, &cfg, &SplitConfig::default(), DEFAULT_THRESHOLD_DB).unwrap();
    let tc = TrainConfig {
        epochs: 1,
        max_windows_per_epoch: Some(8),
        max_val_windows: Some(1),
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("gtc-lstm 8 windows", |b| {
        b.iter_batched(
            || Model::new(cfg.clone(), data.scaler.clone(), 0).unwrap(),
            |mut m| black_box(train(&mut m, &data, &tc).unwrap()),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, tape_matmul, forward, simulation, training_epoch);
criterion_main!(benches);
