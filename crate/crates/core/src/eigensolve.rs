//! Smallest eigenpair of the symmetric-definite pencil `A u = λ B u`.
//!
//! Inverse iteration at shift zero: `A` is factored once per call with a
//! sparse Cholesky (fill-reducing ordering, symbolic phase cached across
//! calls that share a sparsity pattern) and each step solves `A x = B y`,
//! then B-normalizes.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::{MatMut, Side};

use crate::error::{Error, Result};
use crate::fem::{Pattern, SparseSymMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Relative residual `‖A u − λ B u‖ / ‖A u‖` at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda1: f64,
    /// Coefficients over the free dofs, normalized so that `uᵀ B u = 1` and `Σ u ≥ 0`.
    pub u: Vec<f64>,
    /// Final relative residual.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Inverse-iteration solver that keeps the symbolic factorization of the
/// last sparsity pattern it saw.
#[derive(Debug, Default)]
pub struct EigenSolver {
    options: EigenOptions,
    cached: Option<(Arc<Pattern>, SymbolicLlt<usize>)>,
}

impl EigenSolver {
    pub fn new(options: EigenOptions) -> Self {
        Self { options, cached: None }
    }

    pub fn options(&self) -> EigenOptions {
        self.options
    }

    fn factor(&mut self, a: &SparseSymMatrix) -> Result<Llt<usize, f64>> {
        let reuse = matches!(&self.cached, Some((p, _)) if Arc::ptr_eq(p, a.pattern()));
        if !reuse {
            let symbolic = SymbolicLlt::try_new(a.faer_symbolic(), Side::Lower)
                .map_err(|e| Error::NotPositiveDefinite(format!("symbolic factorization: {e:?}")))?;
            self.cached = Some((Arc::clone(a.pattern()), symbolic));
        }
        let symbolic = self.cached.as_ref().map(|c| c.1.clone()).expect("cached symbolic");
        Llt::try_new_with_symbolic(symbolic, a.faer_ref(), Side::Lower)
            .map_err(|e| Error::NotPositiveDefinite(format!("stiffness factorization: {e:?}")))
    }

    /// Smallest eigenpair, optionally warm-started from `start`.
    pub fn solve(&mut self, a: &SparseSymMatrix, b: &SparseSymMatrix, start: Option<&[f64]>) -> Result<EigenPair> {
        let n = a.dim();
        if b.dim() != n {
            return Err(Error::DimensionMismatch {
                what: "mass matrix",
                expected: n,
                actual: b.dim(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidArgument("empty pencil".into()));
        }
        let llt = self.factor(a)?;
        let options = self.options;

        let mut x = match start {
            Some(s) if s.len() != n => {
                return Err(Error::DimensionMismatch {
                    what: "initial vector",
                    expected: n,
                    actual: s.len(),
                })
            }
            Some(s) if s.iter().any(|v| *v != 0.0) => s.to_vec(),
            _ => vec![1.0; n],
        };
        let mut bx = b.mul_vec(&x);
        let norm = dot(&x, &bx);
        if !(norm > 0.0) {
            return Err(Error::NotPositiveDefinite("mass matrix".into()));
        }
        let s = norm.sqrt().recip();
        x.iter_mut().for_each(|v| *v *= s);
        bx.iter_mut().for_each(|v| *v *= s);

        let mut ax = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for it in 1..=options.max_iter {
            let mut z = bx.clone();
            llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut z, n, 1));
            b.mul_vec_into(&z, &mut bx);
            let norm = dot(&z, &bx);
            if !(norm > 0.0) {
                return Err(Error::NotPositiveDefinite("mass matrix".into()));
            }
            let s = norm.sqrt().recip();
            x = z;
            x.iter_mut().for_each(|v| *v *= s);
            bx.iter_mut().for_each(|v| *v *= s);

            a.mul_vec_into(&x, &mut ax);
            let lambda = dot(&x, &ax) / dot(&x, &bx);
            let r: f64 = ax
                .iter()
                .zip(&bx)
                .map(|(p, q)| (p - lambda * q).powi(2))
                .sum::<f64>()
                .sqrt();
            residual = r / dot(&ax, &ax).sqrt();
            if residual <= options.tol {
                if x.iter().sum::<f64>() < 0.0 {
                    x.iter_mut().for_each(|v| *v = -*v);
                }
                return Ok(EigenPair {
                    lambda1: lambda,
                    u: x,
                    residual_norm: residual,
                    iterations: it,
                });
            }
        }
        Err(Error::EigenNotConverged {
            iterations: options.max_iter,
            residual,
        })
    }
}

/// Smallest eigenpair of `A u = λ B u` on the free dofs.
pub fn smallest_eigenpair(a: &SparseSymMatrix, b: &SparseSymMatrix, tol: f64, max_iter: usize) -> Result<EigenPair> {
    EigenSolver::new(EigenOptions { tol, max_iter }).solve(a, b, None)
}

/// `uᵀ A u / uᵀ B u`.
pub fn rayleigh_quotient(a: &SparseSymMatrix, b: &SparseSymMatrix, u: &[f64]) -> Result<f64> {
    if u.len() != a.dim() || u.len() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "rayleigh quotient vector",
            expected: a.dim(),
            actual: u.len(),
        });
    }
    let den = b.quad_form(u);
    if u.iter().all(|v| *v == 0.0) || den == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(a.quad_form(u) / den)
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{Assembler, CoefficientPair, Element};
    use crate::mesh::{build_disk_mesh, build_square_mesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[f64]) -> SparseSymMatrix {
        let t: Vec<_> = values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        SparseSymMatrix::from_triplets(values.len(), &t).unwrap()
    }

    #[test]
    fn identity_pencil() {
        let i = SparseSymMatrix::identity(4);
        let p = smallest_eigenpair(&i, &i, 1e-10, 100).unwrap();
        assert!((p.lambda1 - 1.0).abs() < 1e-14);
        assert!((i.quad_form(&p.u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_pencil() {
        let a = diag(&[2.0, 5.0]);
        let b = SparseSymMatrix::identity(2);
        let p = smallest_eigenpair(&a, &b, 1e-12, 200).unwrap();
        assert!((p.lambda1 - 2.0).abs() < 1e-12);
        assert!((p.u[0] - 1.0).abs() < 1e-10 && p.u[1].abs() < 1e-10);
    }

    #[test]
    fn non_spd_rejected() {
        let a = diag(&[2.0, -1.0]);
        let b = SparseSymMatrix::identity(2);
        assert!(matches!(
            smallest_eigenpair(&a, &b, 1e-10, 10),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn non_convergence_reports_residual() {
        let a = diag(&[1.0, 1.01, 3.0]);
        let b = SparseSymMatrix::identity(3);
        match smallest_eigenpair(&a, &b, 1e-14, 2) {
            Err(Error::EigenNotConverged {
                iterations: 2,
                residual,
            }) => assert!(residual > 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_vector_rayleigh() {
        let i = SparseSymMatrix::identity(2);
        assert!(matches!(rayleigh_quotient(&i, &i, &[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    fn unit_square_pencil(n: usize) -> (SparseSymMatrix, SparseSymMatrix) {
        let mesh = build_square_mesh(n, 1.0).unwrap();
        let asm = Assembler::new(&mesh, Element::P2);
        let cp = CoefficientPair::uniform(mesh.n_triangles(), 1.0, 1.0);
        (asm.stiffness(&cp).unwrap(), asm.mass(&cp).unwrap())
    }

    #[test]
    fn rayleigh_quotient_bounds_and_homogeneity() {
        let (a, b) = unit_square_pencil(6);
        let p = smallest_eigenpair(&a, &b, 1e-12, 500).unwrap();
        let rq = rayleigh_quotient(&a, &b, &p.u).unwrap();
        assert!((rq - p.lambda1).abs() < 1e-12 * p.lambda1);
        let scaled: Vec<f64> = p.u.iter().map(|v| 7.0 * v).collect();
        assert!((rayleigh_quotient(&a, &b, &scaled).unwrap() - rq).abs() < 1e-12 * rq);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let u: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = rayleigh_quotient(&a, &b, &u).unwrap();
            assert!(r >= p.lambda1 * (1.0 - 1e-10));
        }
    }

    #[test]
    fn warm_start_converges_faster() {
        let (a, b) = unit_square_pencil(8);
        let mut solver = EigenSolver::new(EigenOptions::default());
        let cold = solver.solve(&a, &b, None).unwrap();
        let warm = solver.solve(&a, &b, Some(&cold.u)).unwrap();
        assert!(warm.iterations <= 2);
        assert!((warm.lambda1 - cold.lambda1).abs() < 1e-12 * cold.lambda1);
    }

    #[test]
    fn coarse_unit_square_near_two_pi_squared() {
        let (a, b) = unit_square_pencil(10);
        let p = smallest_eigenpair(&a, &b, 1e-10, 1000).unwrap();
        let exact = 2.0 * std::f64::consts::PI.powi(2);
        assert!((p.lambda1 - exact).abs() / exact < 5e-3, "{}", p.lambda1);
        assert!(p.lambda1 >= exact, "conforming discretization bounds from above");
    }

    #[test]
    fn coefficient_monotonicity() {
        let mesh = build_disk_mesh(24, 1.0).unwrap();
        let asm = Assembler::new(&mesh, Element::P2);
        let n = mesh.n_triangles();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.0)).collect();
        let rho: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..0.7)).collect();
        let lam = |c: &[f64], rho: &[f64]| {
            let cp = CoefficientPair {
                c: c.to_vec(),
                rho: rho.to_vec(),
            };
            smallest_eigenpair(&asm.stiffness(&cp).unwrap(), &asm.mass(&cp).unwrap(), 1e-12, 2000)
                .unwrap()
                .lambda1
        };
        let base = lam(&c, &rho);
        let c_up: Vec<f64> = c.iter().map(|v| v + 0.1).collect();
        let rho_up: Vec<f64> = rho.iter().map(|v| v + 0.1).collect();
        assert!(lam(&c_up, &rho) >= base);
        assert!(lam(&c, &rho_up) <= base);
    }
}
