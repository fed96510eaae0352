use std::collections::BTreeSet;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sinai_bench::three_letter_seed;
use sinai_core::{iterative_star, marriage_refine, product_power, star_couple};

fn couplings(c: &mut Criterion) {
    let seed = three_letter_seed();
    let mut group = c.benchmark_group("product_power");
    for m in [2, 4, 6] {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| product_power(black_box(&seed), m, 1 << 22).unwrap())
        });
    }
    group.finish();

    let alpha = product_power(&seed, 4, 1 << 22).unwrap();
    let good: BTreeSet<usize> = (0..alpha.cols().size()).step_by(3).collect();
    c.bench_function("marriage_refine/81", |b| {
        b.iter(|| marriage_refine(black_box(&alpha), &good).unwrap())
    });

    let block = product_power(&seed, 2, 1 << 22).unwrap();
    c.bench_function("star_couple/9x9", |b| b.iter(|| star_couple(black_box(&block), &block).unwrap()));
    c.bench_function("iterative_star/3", |b| {
        b.iter(|| iterative_star(black_box(&block), &vec![block.clone(); 3], 1 << 22).unwrap())
    });
}

criterion_group!(benches, couplings);
criterion_main!(benches);
