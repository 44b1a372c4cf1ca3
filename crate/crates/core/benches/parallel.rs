//! Compares the data-parallel execution path (`exec::par_map`, rayon-backed
//! when the `parallel` feature is on) against the always-sequential
//! `exec::seq_map` on the two workloads the library fans out: per-fold
//! learner fits and per-target model evaluation. Outputs are asserted equal,
//! so the benchmark doubles as an order-preservation check.
//!
//! Run with `cargo bench --bench parallel`; add `--no-default-features` to
//! time the sequential build of `par_map` itself.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tabshift::exec;
use tabshift::learners::{accuracy, GbtConfig, LearnerSpec, LossKind, TrainConfig};
use tabshift::TabularDataset;

fn rule_set(n: usize, seed: u64) -> TabularDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feats = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.gen();
        let x2: f64 = rng.gen();
        let x3: f64 = rng.gen();
        feats.extend_from_slice(&[x1, x2, x3]);
        let mut y = u8::from(x1 + x2 > 1.0);
        if rng.gen_bool(0.1) {
            y ^= 1;
        }
        labels.push(y);
    }
    let names = (1..=3).map(|j| format!("x{j}")).collect();
    TabularDataset::new(feats, labels, vec![1.0; n], names).expect("bench dataset")
}

/// Per-fold fit-and-score work items, the shape `kfold_accuracy` parallelises.
fn fold_items(n: usize, k: usize) -> Vec<(TabularDataset, TabularDataset)> {
    (0..k as u64)
        .map(|fold| (rule_set(n, 10 + fold), rule_set(n / 3, 100 + fold)))
        .collect()
}

fn bench_fold_fits(c: &mut Criterion) {
    let spec = LearnerSpec::Gbt(GbtConfig {
        rounds: 40,
        learning_rate: 0.1,
        max_depth: 3,
        min_leaf: 5,
    });
    let items = fold_items(1_500, 4);
    let fit_and_score = |pair: &(TabularDataset, TabularDataset)| -> f64 {
        let model = spec.fit(&pair.0, 0).expect("fold fit");
        accuracy(&model, &pair.1)
    };
    let expected = exec::seq_map(&items, fit_and_score);

    let mut group = c.benchmark_group("fold_fits");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("par_map", exec::effective_threads()), |b| {
        b.iter(|| {
            let got = exec::par_map(&items, fit_and_score);
            assert_eq!(got, expected);
            got
        })
    });
    group.bench_function(BenchmarkId::new("seq_map", 1), |b| {
        b.iter(|| {
            let got = exec::seq_map(&items, fit_and_score);
            assert_eq!(got, expected);
            got
        })
    });
    group.finish();
}

fn bench_target_eval(c: &mut Criterion) {
    let source = rule_set(4_000, 1);
    let spec = LearnerSpec::Linear {
        loss: LossKind::Hinge,
        cfg: TrainConfig {
            steps: 400,
            ..TrainConfig::default()
        },
    };
    let model = spec.fit(&source, 0).expect("source fit");
    let targets: Vec<TabularDataset> = (0..16).map(|t| rule_set(2_000, 200 + t)).collect();
    let score = |data: &TabularDataset| accuracy(&model, data);
    let expected = exec::seq_map(&targets, score);

    let mut group = c.benchmark_group("target_eval");
    group.bench_function(BenchmarkId::new("par_map", exec::effective_threads()), |b| {
        b.iter(|| {
            let got = exec::par_map(&targets, score);
            assert_eq!(got, expected);
            got
        })
    });
    group.bench_function(BenchmarkId::new("seq_map", 1), |b| {
        b.iter(|| {
            let got = exec::seq_map(&targets, score);
            assert_eq!(got, expected);
            got
        })
    });
    group.finish();
}

criterion_group!(benches, bench_fold_fits, bench_target_eval);
criterion_main!(benches);
