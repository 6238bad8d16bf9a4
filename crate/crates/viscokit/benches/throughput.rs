use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use viscokit::calibrate::{fit, FitTemplate};
use viscokit::driver::{run_sweep, DriverSettings, LoadProgram};
use viscokit::hyperelastic::{EquilibriumBranch, Volumetric};
use viscokit::par::Execution;
use viscokit::strains::ScaleFunction;
use viscokit::tensor::Tensor2;
use viscokit::verify::{calibration_data, shear_material, shear_program};
use viscokit::viscoelastic::{evaluate_batch, LocalSettings, Material, MaxwellBranch, PointState};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn batch_points(material: &Material, n: usize) -> Vec<(Tensor2, PointState)> {
    (0..n)
        .map(|k| {
            let s = k as f64 / n as f64;
            let f = Tensor2([[1.0 + 0.2 * s, 0.1 * s, 0.0], [0.0, 1.0 - 0.1 * s, 0.05], [0.02, 0.0, 1.0 + 0.05 * s]]);
            (f, PointState::initial(material))
        })
        .collect()
}

fn evaluate(c: &mut Criterion) {
    let cr = ScaleFunction::CurnierRakotomanana { m: 1.2, n: 1.4 };
    let material = Material::new(
        Volumetric::Quad { kappa: 50.0 },
        vec![EquilibriumBranch::new(1.0, cr)],
        vec![MaxwellBranch::with_tau(1.0, 0.5, cr), MaxwellBranch::with_tau(0.5, 5.0, ScaleFunction::HENCKY)],
    );
    let points = batch_points(&material, 4096);
    let mut group = c.benchmark_group("evaluate_batch");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| evaluate_batch(&material, black_box(&points), 0.05, &LocalSettings::default(), exec))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let mut program: LoadProgram = shear_program(1.0);
    program.t_end /= 6.0;
    let cases: Vec<_> = (0..8).map(|k| (program.clone(), shear_material(0.25 * k as f64, 0.0))).collect();
    let mut group = c.benchmark_group("run_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_sweep(black_box(&cases), &DriverSettings::default(), exec))
        });
    }
    group.finish();
}

fn multistart(c: &mut Criterion) {
    let data = calibration_data().expect("synthetic data");
    let mut template = FitTemplate::two_branch_cr(4e5);
    template.starts = 8;
    template.max_iterations = 60;
    let mut group = c.benchmark_group("fit_multistart");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| fit(black_box(&data), &template, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, evaluate, sweep, multistart);
criterion_main!(benches);
