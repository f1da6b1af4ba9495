use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use schwarz_rand::harness::{mc_expectation, suites::inverse_rate_setup, Execution};
use schwarz_rand::solvers::Variant;

fn sequential_vs_parallel(c: &mut Criterion) {
    let (inst, u) = inverse_rate_setup(1).unwrap();
    let problem = inst.problem(u).unwrap();
    let mut group = c.benchmark_group("mc_expectation_d16_m256");
    group.sample_size(10);
    for runs in [256usize, 2048] {
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, runs), &runs, |b, &runs| {
                b.iter(|| {
                    let curve =
                        mc_expectation(&problem, inst.measure(), &Variant::Random, 256, runs, 7, exec).unwrap();
                    black_box(curve.means[256])
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sequential_vs_parallel);
criterion_main!(benches);
