use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twophase_bench::disk_fixture;
use twophase_core::design::{gradient_lambda1, project_to_admissible, DEFAULT_VOL_TOL};
use twophase_core::eigensolve::EigenSolver;
use twophase_core::mesh::build_disk_mesh;
use twophase_core::optimizer::run_projected_gradient;
use twophase_core::pencil_lab::{check_pseudoconcavity, pencil_lambda1, random_affine_pencil, DEFAULT_MULT_TOL};
use twophase_core::{DensityField, EigenOptions, Element, ProblemSpec, Variant, VolumeConstraint};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    for element in [Element::P1, Element::P2] {
        let f = disk_fixture(200, element);
        group.bench_function(BenchmarkId::new("stiffness", format!("{element:?}")), |b| {
            b.iter(|| f.assembler.stiffness(&f.coefficients).unwrap())
        });
        group.bench_function(BenchmarkId::new("mass", format!("{element:?}")), |b| {
            b.iter(|| f.assembler.mass(&f.coefficients).unwrap())
        });
    }
    group.bench_function("setup_p2", |b| b.iter(|| disk_fixture(200, Element::P2)));
    group.finish();
}

fn eigensolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigensolve");
    group.sample_size(20);
    for n in [100, 200] {
        let f = disk_fixture(n, Element::P2);
        let a = f.assembler.stiffness(&f.coefficients).unwrap();
        let m = f.assembler.mass(&f.coefficients).unwrap();
        let mut solver = EigenSolver::new(EigenOptions::default());
        let cold = solver.solve(&a, &m, None).unwrap();
        group.bench_function(BenchmarkId::new("cold", n), |b| {
            b.iter(|| solver.solve(&a, &m, None).unwrap())
        });
        group.bench_function(BenchmarkId::new("warm", n), |b| {
            b.iter(|| solver.solve(&a, &m, Some(&cold.u)).unwrap())
        });
        group.bench_function(BenchmarkId::new("gradient", n), |b| {
            b.iter(|| gradient_lambda1(&f.theta, &cold, &f.materials, &f.assembler).unwrap())
        });
    }
    group.finish();
}

fn projection(c: &mut Criterion) {
    let f = disk_fixture(200, Element::P2);
    let vc = VolumeConstraint::from_fraction(&f.mesh, 0.5).unwrap();
    let raw = DensityField::new(f.theta.values.iter().map(|t| 3.0 * t - 1.0).collect());
    c.bench_function("projection/disk200", |b| {
        b.iter(|| project_to_admissible(&raw, &vc, DEFAULT_VOL_TOL).unwrap())
    });
}

fn optimizer(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimizer");
    group.sample_size(10);
    let mesh = build_disk_mesh(100, 1.0).unwrap();
    let spec = ProblemSpec {
        max_iter: 10,
        ..ProblemSpec::for_variant(Variant::MaxBoth)
    };
    group.bench_function("ten_iterations/disk100", |b| {
        b.iter(|| run_projected_gradient(&mesh, &spec).unwrap())
    });
    group.finish();
}

fn pencils(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pencil = random_affine_pencil(8, 3, &mut rng).unwrap();
    let theta = [0.3, 0.5, 0.7];
    c.bench_function("pencil/lambda1_n8", |b| {
        b.iter(|| pencil_lambda1(&pencil, &theta, DEFAULT_MULT_TOL).unwrap())
    });
    c.bench_function("pencil/pseudoconcavity_100", |b| {
        b.iter(|| check_pseudoconcavity(&pencil, 100, 3).unwrap())
    });
}

criterion_group!(benches, assembly, eigensolve, projection, optimizer, pencils);
criterion_main!(benches);
