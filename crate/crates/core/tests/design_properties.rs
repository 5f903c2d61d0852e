use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twophase_core::design::{gradient_lambda1, project_to_admissible, DEFAULT_VOL_TOL};
use twophase_core::eigensolve::EigenSolver;
use twophase_core::fem::coefficients_from_density;
use twophase_core::mesh::{build_disk_mesh, build_square_mesh};
use twophase_core::{Assembler, DensityField, EigenOptions, Element, Materials, Variant, VolumeConstraint};

fn lambda1(asm: &Assembler, theta: &[f64], materials: &Materials) -> f64 {
    let cp = coefficients_from_density(theta, materials);
    EigenSolver::new(EigenOptions {
        tol: 1e-12,
        max_iter: 5000,
    })
    .solve(&asm.stiffness(&cp).unwrap(), &asm.mass(&cp).unwrap(), None)
    .unwrap()
    .lambda1
}

fn random_feasible(rng: &mut ChaCha8Rng, vc: &VolumeConstraint, n: usize) -> DensityField {
    let raw = DensityField::new((0..n).map(|_| rng.random_range(-0.5..1.5)).collect());
    project_to_admissible(&raw, vc, DEFAULT_VOL_TOL).unwrap()
}

#[test]
fn quasi_concavity_along_segments() {
    let mesh = build_disk_mesh(24, 1.0).unwrap();
    let asm = Assembler::new(&mesh, Element::P2);
    let vc = VolumeConstraint::from_fraction(&mesh, 0.5).unwrap();
    let n = mesh.n_triangles();
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    for variant in [Variant::MaxBoth, Variant::MaxNumeratorOnly, Variant::MaxDenominatorOnly] {
        let m = variant.default_materials();
        for _ in 0..8 {
            let a = random_feasible(&mut rng, &vc, n);
            let b = random_feasible(&mut rng, &vc, n);
            let (la, lb) = (lambda1(&asm, &a.values, &m), lambda1(&asm, &b.values, &m));
            for alpha in [0.25, 0.5, 0.75] {
                let mix: Vec<f64> = a
                    .values
                    .iter()
                    .zip(&b.values)
                    .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
                    .collect();
                let lm = lambda1(&asm, &mix, &m);
                assert!(lm >= la.min(lb) - 1e-8, "{variant}: {lm} < min({la}, {lb})");
            }
        }
    }
}

#[test]
fn gradient_matches_finite_differences_p1() {
    let mesh = build_square_mesh(6, 1.0).unwrap();
    let asm = Assembler::new(&mesh, Element::P1);
    let vc = VolumeConstraint::from_fraction(&mesh, 0.5).unwrap();
    let m = Materials::default();
    let n = mesh.n_triangles();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut solver = EigenSolver::new(EigenOptions {
        tol: 1e-13,
        max_iter: 5000,
    });
    for _ in 0..5 {
        let theta = DensityField::new((0..n).map(|_| rng.random_range(0.1..0.9)).collect());
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cp = coefficients_from_density(&theta.values, &m);
        let pair = solver
            .solve(&asm.stiffness(&cp).unwrap(), &asm.mass(&cp).unwrap(), None)
            .unwrap();
        let g = gradient_lambda1(&theta, &pair, &m, &asm).unwrap();
        let h = 1e-5;
        let at = |s: f64| {
            let x: Vec<f64> = theta.values.iter().zip(&d).map(|(t, d)| t + s * d).collect();
            lambda1(&asm, &x, &m)
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let analytic = vc.inner(&g.values, &d);
        assert!((fd - analytic).abs() <= 1e-4 * fd.abs(), "fd {fd} analytic {analytic}");
    }
}

#[test]
fn assembled_matrices_are_affine_in_theta() {
    let mesh = build_square_mesh(5, 1.0).unwrap();
    let asm = Assembler::new(&mesh, Element::P2);
    let m = Materials::default();
    let n = mesh.n_triangles();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let alpha = 0.3;
    let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect();
    let (ca, cb, cm) = (
        coefficients_from_density(&a, &m),
        coefficients_from_density(&b, &m),
        coefficients_from_density(&mix, &m),
    );
    let (ka, kb, km) = (
        asm.stiffness(&ca).unwrap(),
        asm.stiffness(&cb).unwrap(),
        asm.stiffness(&cm).unwrap(),
    );
    let (ma, mb, mm) = (asm.mass(&ca).unwrap(), asm.mass(&cb).unwrap(), asm.mass(&cm).unwrap());
    for i in 0..km.values().len() {
        let k = alpha * ka.values()[i] + (1.0 - alpha) * kb.values()[i];
        assert!((km.values()[i] - k).abs() <= 1e-12 * (1.0 + k.abs()));
        let w = alpha * ma.values()[i] + (1.0 - alpha) * mb.values()[i];
        assert!((mm.values()[i] - w).abs() <= 1e-12 * (1.0 + w.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_on_a_mesh(seed in any::<u64>(), frac in 0.05f64..0.95, spread in 0.01f64..5.0) {
        let mesh = build_disk_mesh(16, 1.0).unwrap();
        let vc = VolumeConstraint::from_fraction(&mesh, frac).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DensityField::new(
            (0..mesh.n_triangles()).map(|_| 0.5 + spread * rng.random_range(-1.0..1.0)).collect(),
        );
        let p = project_to_admissible(&raw, &vc, DEFAULT_VOL_TOL).unwrap();
        prop_assert!(p.in_box());
        prop_assert!(vc.relative_error(&p.values).abs() <= DEFAULT_VOL_TOL);
        let q = project_to_admissible(&p, &vc, DEFAULT_VOL_TOL).unwrap();
        for (x, y) in p.values.iter().zip(&q.values) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}
