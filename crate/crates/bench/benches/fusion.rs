use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use streamfuse::decoder::viterbi_with;
use streamfuse::experiment::{prepare, Setup};
use streamfuse::simulator::generate_reference;
use streamfuse::{
    build_scenario, entropy_attention, fuse, train_ae, Architecture, Context, PosteriorStream, ScenarioKind, StreamSet,
    TrainConfig,
};

fn scenario_set(streams: usize) -> StreamSet {
    let setup = Setup::default();
    let hmm = setup.hmm().unwrap();
    let spec = setup.corpus_spec(1, streams, 5);
    let corpus = build_scenario(ScenarioKind::HrmLike, &spec, &hmm, None, &setup.grading).unwrap();
    prepare(&corpus.utterances[0]).unwrap().streams
}

fn reference_streams(n: usize, seed: u64) -> Vec<PosteriorStream> {
    let setup = Setup::default();
    let spec = setup.corpus_spec(n, 2, seed);
    generate_reference(&spec, &setup.hmm().unwrap())
        .unwrap()
        .into_iter()
        .map(|u| u.streams.into_iter().next().unwrap())
        .collect()
}

fn bench_attention_and_fusion(c: &mut Criterion) {
    let mut group = c.benchmark_group("fusion");
    for m in [4, 12] {
        let set = scenario_set(m);
        let frames = set.frames().unwrap() as u64;
        group.throughput(Throughput::Elements(frames));
        group.bench_with_input(BenchmarkId::new("entropy_attention", m), &set, |b, set| {
            b.iter(|| entropy_attention(black_box(set)).unwrap())
        });
        let sched = entropy_attention(&set).unwrap();
        group.bench_with_input(BenchmarkId::new("fuse", m), &set, |b, set| {
            b.iter(|| fuse(black_box(set), black_box(&sched)).unwrap())
        });
    }
    group.finish();
}

fn bench_viterbi(c: &mut Criterion) {
    let setup = Setup::default();
    let hmm = setup.hmm().unwrap();
    let stream = reference_streams(1, 9).remove(0);
    let mut group = c.benchmark_group("decoder");
    group.throughput(Throughput::Elements(stream.len() as u64));
    group.bench_function("viterbi", |b| {
        b.iter(|| viterbi_with(black_box(&stream), &hmm, setup.decode).unwrap())
    });
    group.finish();
}

fn bench_ae_forward(c: &mut Criterion) {
    let train = reference_streams(2, 11);
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let (model, _) = train_ae(&train, &cfg, &Architecture::standard(Context::new(8, 5)).unwrap()).unwrap();
    let stream = &train[0];
    let mut group = c.benchmark_group("aemonitor");
    group.sample_size(20);
    group.throughput(Throughput::Elements(stream.len() as u64));
    group.bench_function("reconstruction_errors", |b| {
        b.iter(|| model.reconstruction_errors(black_box(stream)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_attention_and_fusion, bench_viterbi, bench_ae_forward);
criterion_main!(benches);
