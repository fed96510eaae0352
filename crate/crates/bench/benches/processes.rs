use criterion::{black_box, criterion_group, criterion_main, Criterion};
use sinai_bench::{three_letter_seed, two_letter_seed};
use sinai_core::process::{build_block_joining, decompose, sample_alternating, MarkerConfig};
use sinai_core::rng::stream;
use sinai_core::IterativeStarSampler;

fn processes(c: &mut Criterion) {
    let bj = build_block_joining(&three_letter_seed(), MarkerConfig::new(0, 1, 4).unwrap()).unwrap();
    c.bench_function("sample_alternating/100k", |b| {
        let mut rng = stream(0, "bench", 0);
        b.iter(|| sample_alternating(&mut rng, black_box(&bj), 100_000, 1_000).unwrap())
    });

    let mut rng = stream(0, "bench", 1);
    let w = sample_alternating(&mut rng, &bj, 100_000, 1_000).unwrap();
    c.bench_function("decompose/100k", |b| b.iter(|| decompose(black_box(&w.x), bj.cfg()).unwrap()));

    let small = build_block_joining(&two_letter_seed(), MarkerConfig::new(0, 1, 2).unwrap()).unwrap();
    let gamma = small.conditioned_block_coupling(1 << 16).unwrap();
    let sampler = IterativeStarSampler::new(&gamma, &gamma).unwrap();
    c.bench_function("iterative_star_sampler/1000", |b| {
        let mut rng = stream(0, "bench", 2);
        b.iter(|| sampler.sample(&mut rng, black_box(1_000)))
    });
}

criterion_group!(benches, processes);
criterion_main!(benches);
