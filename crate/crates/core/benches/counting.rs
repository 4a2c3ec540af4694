use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use armchain::arm::{group_transactions, mine_rules, MiningParams};
use armchain::experiment::{generate_synthetic, ExperimentConfig};
use armchain::parallel::{smp_mine, ThreadPoolConfig};

fn counting(c: &mut Criterion) {
    let mut group = c.benchmark_group("mine");
    let params = MiningParams::new(0.05, 0.7, 3).unwrap();
    for n_patients in [1_001, 10_000] {
        let cfg = ExperimentConfig {
            n_patients,
            ..Default::default()
        };
        let txns = group_transactions(&generate_synthetic(&cfg).unwrap());
        group.bench_with_input(BenchmarkId::new("sequential", n_patients), &txns, |b, t| {
            b.iter(|| mine_rules(t, &params).unwrap())
        });
        for threads in [2, 4, 8] {
            let pool = ThreadPoolConfig::new(threads).unwrap();
            group.bench_with_input(
                BenchmarkId::new(format!("smp-{threads}"), n_patients),
                &txns,
                |b, t| b.iter(|| smp_mine(t, &params, &pool).unwrap()),
            );
        }
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = counting
}
criterion_main!(benches);
