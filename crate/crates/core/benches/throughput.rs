//! Parallel against sequential execution of the main batch loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spectral_transport::brenier::{brenier_radial, TransportMap};
use spectral_transport::concentration_lab::{eigen_log_variance, spectral_samples, SampleOptions};
use spectral_transport::exec::ExecMode;
use spectral_transport::measures::RadialMeasure;
use spectral_transport::suites::{run_suite, Suite, SuiteOptions};
use std::hint::black_box;

const MODES: [(&str, ExecMode); 2] = [
    ("parallel", ExecMode::Parallel),
    ("sequential", ExecMode::Sequential),
];

fn sampling(c: &mut Criterion) {
    let map = brenier_radial(
        RadialMeasure::uniform_ball(5, 1.0).unwrap(),
        RadialMeasure::gaussian(5, 1.0).unwrap(),
    )
    .unwrap();
    let mut g = c.benchmark_group("spectral_samples radial n=5, 20k draws");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mut o = SampleOptions::new(20_000, 1);
                o.mode = mode;
                let set = spectral_samples(black_box(&map as &dyn TransportMap), &o).unwrap();
                eigen_log_variance(&set)
            })
        });
    }
    g.finish();
}

fn geometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("geometry suite, 100 pairs");
    g.sample_size(10);
    for (name, mode) in MODES {
        let opts = SuiteOptions {
            geometry_pairs: 100,
            curve_points: 200,
            mode,
            ..SuiteOptions::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_suite(Suite::Geometry, black_box(&opts)))
        });
    }
    g.finish();
}

criterion_group!(benches, sampling, geometry);
criterion_main!(benches);
