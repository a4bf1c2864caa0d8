use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use sfwm_bench::{delayed_jsa, setup};
use sfwm_core::quantum::{tmsv_on, FockBasis, PairSource};
use sfwm_core::tomography::{pauli_settings, MleOptions};
use sfwm_core::{calibrate, mle_reconstruct, model_state, schmidt_decompose, simulate_counts, CalibrationTargets};

fn bench_calibration(c: &mut Criterion) {
    let t = CalibrationTargets::default();
    c.bench_function("calibrate default targets", |b| b.iter(|| calibrate(black_box(&t)).unwrap()));
}

fn bench_jsa(c: &mut Criterion) {
    let mut g = c.benchmark_group("jsa");
    g.sample_size(10);
    for n in [128, 256, 512] {
        let (cfg, model) = setup(n);
        g.bench_with_input(BenchmarkId::new("compute", n), &n, |b, _| b.iter(|| delayed_jsa(&cfg, &model)));
        let f = delayed_jsa(&cfg, &model);
        g.bench_with_input(BenchmarkId::new("schmidt", n), &n, |b, _| {
            b.iter(|| schmidt_decompose(black_box(&f)).unwrap())
        });
    }
    g.finish();
}

fn bench_fock(c: &mut Criterion) {
    let basis = FockBasis::new(6, 8).unwrap();
    let sources = [
        PairSource { signal: 0, idler: 4, r: 0.12, phase: 0.0 },
        PairSource { signal: 2, idler: 5, r: 0.12, phase: 0.0 },
    ];
    let state = tmsv_on(basis, &sources).unwrap();
    c.bench_function("fock beamsplitter 6 modes cutoff 8", |b| {
        b.iter(|| state.beamsplitter(0, 2, black_box(0.5), 0.0).unwrap())
    });
}

fn bench_mle(c: &mut Criterion) {
    let rec = simulate_counts(&model_state(0.95).unwrap(), &pauli_settings(), 10_000, 1).unwrap();
    let opts = MleOptions::default();
    c.bench_function("mle 9 settings 1e4 shots", |b| b.iter(|| mle_reconstruct(black_box(&rec), &opts).unwrap()));
}

criterion_group!(benches, bench_calibration, bench_jsa, bench_fock, bench_mle);
criterion_main!(benches);
