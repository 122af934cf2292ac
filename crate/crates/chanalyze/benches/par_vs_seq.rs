//! Compares the parallel and sequential grid-map paths on a realistic
//! workload: building a local channel model and its linearized spectrum at
//! each energy of a grid.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nalgebra::DVector;

use chanalyze::model::ModelSpec;
use chanalyze::par;
use chanalyze::reduction::{ChannelGuess, LocalModel};
use chanalyze::spectral;

fn spectrum_at(model: &ModelSpec, energy: f64) -> f64 {
    let omega = DVector::from_vec(vec![1.0, 0.0]);
    let guess = ChannelGuess::from_direction(model, energy, omega);
    let lm = LocalModel::build(model, energy, &guess, 4).expect("channel build");
    let spec = spectral::decompose(&lm.b, spectral::HYPERBOLICITY_TOL).expect("spectrum");
    spec.beta_s.iter().map(|b| b.re).sum()
}

fn bench_energy_grid(c: &mut Criterion) {
    let model = ModelSpec::metric_example11(1.5).expect("model");
    let mut group = c.benchmark_group("energy_grid_spectra");
    for &count in &[8usize, 32] {
        let energies: Vec<f64> = (0..count).map(|i| 0.5 + 0.05 * i as f64).collect();
        group.bench_with_input(BenchmarkId::new("parallel", count), &energies, |b, es| {
            b.iter(|| par::map(es, |e| spectrum_at(&model, *e)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", count), &energies, |b, es| {
            b.iter(|| par::map_seq(es, |e| spectrum_at(&model, *e)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_energy_grid);
criterion_main!(benches);
