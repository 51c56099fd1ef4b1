use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fiberlink::dynamics::SimConfig;
use fiberlink::optimizer::{evaluate_ap, ApParams};
use fiberlink::parallel::{self, Execution};
use fiberlink::params::{derive_rates, AtomSpec, CavitySpec, FiberSpec, SetupConfig};

fn cells(cfg: &SetupConfig) -> Vec<ApParams> {
    let kappa = derive_rates(cfg).unwrap().kappa;
    let mut out = Vec::new();
    for t_units in [20.0, 40.0, 80.0] {
        for x_spl in [1.2, 1.6] {
            for g in [0.2, 0.5] {
                out.push(ApParams { t_units, x_spl, omega_ratio: g * kappa / cfg.atom.g_atc });
            }
        }
    }
    out
}

fn grid(c: &mut Criterion) {
    let cfg = SetupConfig::new(
        CavitySpec::new(0.02, 13e-6, 2e-6).unwrap(),
        FiberSpec::new(400.0, 0.2).unwrap(),
        AtomSpec::default(),
    );
    let sim = SimConfig::default();
    let ps = cells(&cfg);
    let mut group = c.benchmark_group("ap_grid_12");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| parallel::map(exec, &ps, |p| evaluate_ap(&cfg, black_box(p), &sim).unwrap().fidelity))
        });
    }
    group.finish();
}

criterion_group!(benches, grid);
criterion_main!(benches);
