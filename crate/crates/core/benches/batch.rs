use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lurekit::certify::{check_lds_with, LdsOptions};
use lurekit::krasim::simulate_batch;
use lurekit::lyapunov::lie_sup_grid;
use lurekit::{presets, Execution, Matrix, SimOptions};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn lie_grid(c: &mut Criterion) {
    let (sys, lyap) = presets::example1();
    let axis: Vec<f64> = (0..100).map(|k| -2.0 + 4.0 * k as f64 / 99.0).collect();
    let pts: Vec<Vec<f64>> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| vec![a, b])).collect();
    let mut group = c.benchmark_group("lie_sup_grid_10k");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| lie_sup_grid(&sys, &lyap, black_box(&pts), exec).unwrap())
        });
    }
    group.finish();
}

fn batch_sim(c: &mut Criterion) {
    let (sys, _) = presets::preset("cnn-demo").unwrap();
    let x0s: Vec<Vec<f64>> = (0..64)
        .map(|k| {
            let a = k as f64 * 0.1;
            vec![0.9 * a.cos(), 0.9 * a.sin()]
        })
        .collect();
    let opts = SimOptions::with_horizon(2.0);
    let mut group = c.benchmark_group("simulate_batch_64");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_batch(&sys, black_box(&x0s), &opts, exec))
        });
    }
    group.finish();
}

fn lds_search(c: &mut Criterion) {
    let m = Matrix::from_rows(&[
        [2.0, 1.0, -0.5, 0.3, 0.0, 0.2],
        [-1.0, 1.5, 0.4, 0.0, 0.3, 0.0],
        [0.5, -0.4, 3.0, 1.0, 0.0, -0.2],
        [-0.3, 0.0, -1.0, 1.0, 0.5, 0.1],
        [0.0, -0.3, 0.0, -0.5, 2.5, 0.8],
        [-0.2, 0.0, 0.2, -0.1, -0.8, 1.2],
    ])
    .unwrap();
    let mut group = c.benchmark_group("lds_multistart_6x6");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = LdsOptions { execution: exec, ..LdsOptions::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| check_lds_with(black_box(&m), &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, lie_grid, batch_sim, lds_search);
criterion_main!(benches);
