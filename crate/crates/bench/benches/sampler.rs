//! Benchmarks for the hot kernels: pattern coding, the collapsed domain
//! marginal, admissibility filtering, and whole sampler iterations.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use dlcm::encoding::MappingVector;
use dlcm::identifiability::{admissible, pooled_domains};
use dlcm::sampler::{domain_log_marginal, run_chain, ModelKind, SamplerConfig};
use dlcm::simgen::{build_truth, generate, Scenario};

fn bench_encode(c: &mut Criterion) {
    let q = vec![2u32; 24];
    let mv = MappingVector::new(&[0, 5, 11, 17, 23], &q).unwrap();
    let row: Vec<u32> = (0..24).map(|j| (j % 2) as u32).collect();
    c.bench_function("encode_pattern_5_items", |b| {
        b.iter(|| mv.encode(black_box(&row)))
    });
}

fn bench_domain_marginal(c: &mut Criterion) {
    let counts: Vec<u32> = (0..16).map(|k| (k * 7 + 3) % 40).collect();
    c.bench_function("domain_log_marginal_16_cells", |b| {
        b.iter(|| domain_log_marginal(black_box(&counts), 1.0))
    });
}

fn bench_admissibility(c: &mut Criterion) {
    let truth = build_truth(Scenario::Homogeneous);
    let q = vec![2u32; 24];
    c.bench_function("admissible_check_24_items", |b| {
        b.iter(|| {
            let pooled = pooled_domains(black_box(&truth.structure));
            black_box(pooled.blocks.len());
            admissible(&truth.structure, &q, 10, 2)
        })
    });
}

fn bench_chain_iterations(c: &mut Criterion) {
    let truth = build_truth(Scenario::Homogeneous);
    let mut group = c.benchmark_group("run_chain_64_iterations");
    group.sample_size(10);
    for &n in &[100usize, 500] {
        let (data, _) = generate(&truth, n, 7).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, data| {
            b.iter(|| {
                let mut config = SamplerConfig::new(2);
                config.model = ModelKind::Homogeneous;
                config.warmup = 0;
                config.main = 64;
                config.seed = 3;
                config.record_params = false;
                run_chain(data, &config, 0).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_encode,
    bench_domain_marginal,
    bench_admissibility,
    bench_chain_iterations
);
criterion_main!(benches);
