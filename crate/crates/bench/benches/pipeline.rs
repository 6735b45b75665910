use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, Criterion};
use natcode::corpus::ExcludedLines;
use natcode::frontend::{analyze, tokenize};
use natcode::lm::{concrete_stream, score_file, NgramModel, DEFAULT_LAMBDA_CACHE, DEFAULT_LAMBDA_JM, DEFAULT_ORDER};
use natcode::stats::wilcoxon_signed_rank;
use natcode::transforms::{transform_file, TransformKind};

fn demo_sources() -> Vec<String> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo/corpus");
    let mut paths = Vec::new();
    for project in std::fs::read_dir(&root).expect("demo corpus") {
        let src = project.expect("entry").path().join("src");
        for file in std::fs::read_dir(src).expect("project sources") {
            paths.push(file.expect("entry").path());
        }
    }
    paths.sort();
    paths.iter().map(|p| std::fs::read_to_string(p).expect("readable")).collect()
}

fn frontend(c: &mut Criterion) {
    let sources = demo_sources();
    c.bench_function("analyze demo corpus", |b| {
        b.iter(|| {
            for s in &sources {
                black_box(analyze(black_box(s)).expect("lexes"));
            }
        })
    });
    let parsed: Vec<_> = sources.iter().map(|s| analyze(s).expect("lexes")).collect();
    c.bench_function("transform demo corpus", |b| {
        b.iter(|| {
            for (i, p) in parsed.iter().enumerate() {
                black_box(transform_file(p, "F.java", &TransformKind::ALL, &ExcludedLines::default(), i as u64));
            }
        })
    });
}

fn language_model(c: &mut Criterion) {
    let streams: Vec<Vec<String>> = demo_sources().iter().map(|s| concrete_stream(&tokenize(s).expect("lexes"))).collect();
    c.bench_function("train order-6 model", |b| {
        b.iter(|| black_box(NgramModel::train(&streams, DEFAULT_ORDER, DEFAULT_LAMBDA_JM, false).expect("trains")))
    });
    let model = NgramModel::train(&streams, DEFAULT_ORDER, DEFAULT_LAMBDA_JM, false).expect("trains");
    let ids: Vec<Vec<u32>> = streams.iter().map(|s| model.encode(s).ids).collect();
    c.bench_function("score with cache", |b| {
        b.iter(|| {
            for f in &ids {
                black_box(score_file(&model, f, Some(DEFAULT_LAMBDA_CACHE), f.len()));
            }
        })
    });
}

fn statistics(c: &mut Criterion) {
    let diffs: Vec<f64> = (0..2000).map(|i| ((i * 7919) % 1000) as f64 / 100.0 - 4.0).collect();
    c.bench_function("wilcoxon n=2000", |b| b.iter(|| black_box(wilcoxon_signed_rank(black_box(&diffs), 0.05, 24).expect("valid"))));
    let small: Vec<f64> = diffs[..20].to_vec();
    c.bench_function("wilcoxon exact n=20", |b| b.iter(|| black_box(wilcoxon_signed_rank(black_box(&small), 0.05, 1).expect("valid"))));
}

criterion_group!(benches, frontend, language_model, statistics);
criterion_main!(benches);
