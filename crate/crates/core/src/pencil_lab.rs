//! Finite-dimensional checks of the eigenvalue theory on symmetric matrix
//! pencils `A(θ) u = λ B(θ) u` with `A(θ) = A0 + Σ θ_i A_i`,
//! `B(θ) = B0 + Σ θ_i B_i`.
//!
//! The checks are brute force: random sampling of Clarke subgradients, vertex
//! enumeration against dense grids, and projected ascent against a refined
//! grid maximum. Everything is seeded.

use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};

/// Relative eigenvalue gap below which eigenvalues count as one.
pub const DEFAULT_MULT_TOL: f64 = 1e-8;

/// Pairs whose eigenvalues differ by less than this (relative) are skipped
/// by the pseudo-concavity check: the strict inequality is unobservable there.
pub const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub weights: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct MatrixPencil {
    a0: DMatrix<f64>,
    a_terms: Vec<DMatrix<f64>>,
    b0: DMatrix<f64>,
    b_terms: Vec<DMatrix<f64>>,
    // θ_i² coefficients; only used by non-affine control pencils
    a_quad: Option<Vec<DMatrix<f64>>>,
    b_quad: Option<Vec<DMatrix<f64>>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    equality: Option<LinearConstraint>,
    // vertices of a convex set of parameters where λ1 is known to be double
    locus: Option<Vec<Vec<f64>>>,
}

fn check_symmetric(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Pencil(format!(
            "{what} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Pencil(format!("{what} is not symmetric")));
    }
    Ok(())
}

impl MatrixPencil {
    /// Affine pencil over the box `[lower, upper]`.
    pub fn new(
        a0: DMatrix<f64>,
        a_terms: Vec<DMatrix<f64>>,
        b0: DMatrix<f64>,
        b_terms: Vec<DMatrix<f64>>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let n = a0.nrows();
        let p = a_terms.len();
        if n == 0 {
            return Err(Error::Pencil("empty pencil".into()));
        }
        if b_terms.len() != p || lower.len() != p || upper.len() != p {
            return Err(Error::Pencil(format!(
                "parameter count mismatch: {p} A terms, {} B terms, box of dimension {}/{}",
                b_terms.len(),
                lower.len(),
                upper.len()
            )));
        }
        check_symmetric(&a0, n, "A0")?;
        check_symmetric(&b0, n, "B0")?;
        for (i, (a, b)) in a_terms.iter().zip(&b_terms).enumerate() {
            check_symmetric(a, n, &format!("A{}", i + 1))?;
            check_symmetric(b, n, &format!("B{}", i + 1))?;
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Pencil("box lower bound exceeds upper bound".into()));
        }
        Ok(Self {
            a0,
            a_terms,
            b0,
            b_terms,
            a_quad: None,
            b_quad: None,
            lower,
            upper,
            equality: None,
            locus: None,
        })
    }

    /// Restricts the parameters to `weights · θ = target`.
    pub fn with_equality(mut self, weights: Vec<f64>, target: f64) -> Result<Self> {
        if weights.len() != self.n_params() {
            return Err(Error::Pencil(
                "constraint weight count differs from parameter count".into(),
            ));
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(Error::Pencil("constraint weights are all zero".into()));
        }
        self.equality = Some(LinearConstraint { weights, target });
        Ok(self)
    }

    /// Adds `Σ θ_i² Q_i` to `B(θ)`, making the pencil non-affine.
    pub fn with_quadratic_b(mut self, terms: Vec<DMatrix<f64>>) -> Result<Self> {
        if terms.len() != self.n_params() {
            return Err(Error::Pencil(
                "quadratic term count differs from parameter count".into(),
            ));
        }
        for (i, q) in terms.iter().enumerate() {
            check_symmetric(q, self.dim(), &format!("quadratic B{}", i + 1))?;
        }
        self.b_quad = Some(terms);
        Ok(self)
    }

    /// Adds `Σ θ_i² Q_i` to `A(θ)`.
    pub fn with_quadratic_a(mut self, terms: Vec<DMatrix<f64>>) -> Result<Self> {
        if terms.len() != self.n_params() {
            return Err(Error::Pencil(
                "quadratic term count differs from parameter count".into(),
            ));
        }
        for (i, q) in terms.iter().enumerate() {
            check_symmetric(q, self.dim(), &format!("quadratic A{}", i + 1))?;
        }
        self.a_quad = Some(terms);
        Ok(self)
    }

    /// Records the vertices of a parameter set on which λ1 is double, so
    /// samplers can hit it on purpose.
    pub fn with_multiplicity_locus(mut self, vertices: Vec<Vec<f64>>) -> Self {
        self.locus = Some(vertices);
        self
    }

    pub fn dim(&self) -> usize {
        self.a0.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.a_terms.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn equality(&self) -> Option<&LinearConstraint> {
        self.equality.as_ref()
    }

    pub fn multiplicity_locus(&self) -> Option<&[Vec<f64>]> {
        self.locus.as_deref()
    }

    pub fn is_affine(&self) -> bool {
        self.a_quad.is_none() && self.b_quad.is_none()
    }

    /// The same pencil with every `A` matrix multiplied by `factor`.
    pub fn scale_a(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.a0 *= factor;
        out.a_terms.iter_mut().for_each(|a| *a *= factor);
        if let Some(q) = out.a_quad.as_mut() {
            q.iter_mut().for_each(|a| *a *= factor);
        }
        out
    }

    fn eval(
        base: &DMatrix<f64>,
        terms: &[DMatrix<f64>],
        quad: Option<&Vec<DMatrix<f64>>>,
        theta: &[f64],
    ) -> DMatrix<f64> {
        let mut m = base.clone();
        for (t, a) in theta.iter().zip(terms) {
            m += a * *t;
        }
        if let Some(q) = quad {
            for (t, a) in theta.iter().zip(q) {
                m += a * (t * t);
            }
        }
        m
    }

    pub fn a_at(&self, theta: &[f64]) -> DMatrix<f64> {
        Self::eval(&self.a0, &self.a_terms, self.a_quad.as_ref(), theta)
    }

    pub fn b_at(&self, theta: &[f64]) -> DMatrix<f64> {
        Self::eval(&self.b0, &self.b_terms, self.b_quad.as_ref(), theta)
    }

    /// `∂A/∂θ_j` at `theta`.
    pub fn da(&self, theta: &[f64], j: usize) -> DMatrix<f64> {
        match &self.a_quad {
            Some(q) => &self.a_terms[j] + &q[j] * (2.0 * theta[j]),
            None => self.a_terms[j].clone(),
        }
    }

    /// `∂B/∂θ_j` at `theta`.
    pub fn db(&self, theta: &[f64], j: usize) -> DMatrix<f64> {
        match &self.b_quad {
            Some(q) => &self.b_terms[j] + &q[j] * (2.0 * theta[j]),
            None => self.b_terms[j].clone(),
        }
    }

    pub fn is_feasible(&self, theta: &[f64], tol: f64) -> bool {
        theta.len() == self.n_params()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| *t >= l - tol && *t <= u + tol)
            && self.equality.as_ref().is_none_or(|c| {
                let s: f64 = c.weights.iter().zip(theta).map(|(w, t)| w * t).sum();
                (s - c.target).abs() <= tol * (1.0 + c.target.abs())
            })
    }

    /// Vertices of the feasible polytope (box, cut by the equality if any).
    pub fn polytope_vertices(&self) -> Result<Vec<Vec<f64>>> {
        let p = self.n_params();
        let corner = |mask: usize, skip: Option<usize>| -> Vec<f64> {
            let mut bit = 0;
            (0..p)
                .map(|i| {
                    if Some(i) == skip {
                        return 0.0;
                    }
                    let v = if mask >> bit & 1 == 1 {
                        self.upper[i]
                    } else {
                        self.lower[i]
                    };
                    bit += 1;
                    v
                })
                .collect()
        };
        let Some(c) = &self.equality else {
            return Ok((0..1usize << p).map(|m| corner(m, None)).collect());
        };
        let mut out: Vec<Vec<f64>> = Vec::new();
        for k in 0..p {
            if c.weights[k] == 0.0 {
                continue;
            }
            for mask in 0..1usize << (p - 1) {
                let mut v = corner(mask, Some(k));
                let rest: f64 = (0..p).filter(|&i| i != k).map(|i| c.weights[i] * v[i]).sum();
                let x = (c.target - rest) / c.weights[k];
                let eps = 1e-12 * (1.0 + self.upper[k].abs().max(self.lower[k].abs()));
                if x < self.lower[k] - eps || x > self.upper[k] + eps {
                    continue;
                }
                v[k] = x.clamp(self.lower[k], self.upper[k]);
                if !out
                    .iter()
                    .any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-12))
                {
                    out.push(v);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::EmptyPolytope);
        }
        Ok(out)
    }

    /// Euclidean projection onto the feasible polytope.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let clip = |mu: f64, w: Option<&[f64]>| -> Vec<f64> {
            y.iter()
                .enumerate()
                .map(|(i, v)| {
                    let shift = w.map_or(0.0, |w| mu * w[i]);
                    (v - shift).clamp(self.lower[i], self.upper[i])
                })
                .collect()
        };
        let Some(c) = &self.equality else {
            return clip(0.0, None);
        };
        let w = c.weights.as_slice();
        let excess = |mu: f64| -> f64 { clip(mu, Some(w)).iter().zip(w).map(|(t, w)| t * w).sum::<f64>() - c.target };
        // excess is non-increasing in mu
        let (mut lo, mut hi) = (-1.0, 1.0);
        while excess(lo) < 0.0 && lo > -1e12 {
            lo *= 2.0;
        }
        while excess(hi) > 0.0 && hi < 1e12 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * (1.0 + lo.abs()) {
                break;
            }
        }
        clip(0.5 * (lo + hi), Some(w))
    }

    /// A random feasible parameter: uniform on the box, or a random convex
    /// combination of polytope vertices under an equality constraint.
    pub fn sample_feasible<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        if self.equality.is_none() {
            return Ok(self
                .lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| if l == u { *l } else { rng.random_range(*l..*u) })
                .collect());
        }
        Ok(random_convex_combination(&self.polytope_vertices()?, rng))
    }

    /// Checks positive definiteness of `A(θ)` and `B(θ)` at every polytope
    /// vertex and at `n_samples` random feasible points.
    pub fn verify_spd<R: Rng + ?Sized>(&self, n_samples: usize, rng: &mut R) -> Result<()> {
        let mut points = self.polytope_vertices()?;
        for _ in 0..n_samples {
            points.push(self.sample_feasible(rng)?);
        }
        for theta in &points {
            for (name, m) in [("A", self.a_at(theta)), ("B", self.b_at(theta))] {
                if Cholesky::new(m).is_none() {
                    return Err(Error::Pencil(format!(
                        "{name}(θ) is not positive definite at θ = {theta:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn random_convex_combination<R: Rng + ?Sized>(points: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    let weights: Vec<f64> = points.iter().map(|_| Exp1.sample(rng)).collect();
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; points[0].len()];
    for (w, v) in weights.iter().zip(points) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += w / total * x;
        }
    }
    out
}

/// First eigenvalue with a B-orthonormal basis of its eigenspace.
#[derive(Debug, Clone)]
pub struct FirstEigenspace {
    pub lambda1: f64,
    /// `n × m1`, columns B-orthonormal.
    pub basis: DMatrix<f64>,
}

impl FirstEigenspace {
    pub fn multiplicity(&self) -> usize {
        self.basis.ncols()
    }
}

/// Smallest generalized eigenvalue at `theta` and every eigenvector whose
/// eigenvalue lies within `mult_tol · |λ1|` of it.
pub fn pencil_lambda1(pencil: &MatrixPencil, theta: &[f64], mult_tol: f64) -> Result<FirstEigenspace> {
    if theta.len() != pencil.n_params() {
        return Err(Error::DimensionMismatch {
            what: "pencil parameter",
            expected: pencil.n_params(),
            actual: theta.len(),
        });
    }
    let a = pencil.a_at(theta);
    let b = pencil.b_at(theta);
    if Cholesky::new(a.clone()).is_none() {
        return Err(Error::Pencil(format!("A(θ) is not positive definite at θ = {theta:?}")));
    }
    let chol =
        Cholesky::new(b).ok_or_else(|| Error::Pencil(format!("B(θ) is not positive definite at θ = {theta:?}")))?;
    let l = chol.l();
    let x = l.solve_lower_triangular(&a).expect("nonsingular factor");
    let c = l.solve_lower_triangular(&x.transpose()).expect("nonsingular factor");
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let lambda1 = eig.eigenvalues.min();
    let cut = lambda1 + mult_tol * lambda1.abs();
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, v)| **v <= cut)
        .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
        .collect();
    let w = DMatrix::from_columns(&cols);
    let basis = l.tr_solve_lower_triangular(&w).expect("nonsingular factor");
    Ok(FirstEigenspace { lambda1, basis })
}

/// `g_j(v) = vᵀ (∂A/∂θ_j − λ ∂B/∂θ_j) v`.
pub fn subgradient_for(pencil: &MatrixPencil, theta: &[f64], lambda: f64, v: &DVector<f64>) -> Vec<f64> {
    (0..pencil.n_params())
        .map(|j| {
            let m = pencil.da(theta, j) - pencil.db(theta, j) * lambda;
            v.dot(&(m * v))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SubgradientSample {
    pub theta: Vec<f64>,
    pub lambda1: f64,
    pub multiplicity: usize,
    pub basis: DMatrix<f64>,
    pub subgradients: Vec<Vec<f64>>,
}

/// Samples the Clarke subdifferential of λ1 at `theta`: the subgradient of
/// every basis vector, their average, and `n_samples` subgradients of random
/// B-unit vectors in the eigenspace.
pub fn sample_clarke_subgradients<R: Rng + ?Sized>(
    pencil: &MatrixPencil,
    theta: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<SubgradientSample> {
    let space = pencil_lambda1(pencil, theta, DEFAULT_MULT_TOL)?;
    let m = space.multiplicity();
    let mut subgradients: Vec<Vec<f64>> = (0..m)
        .map(|k| subgradient_for(pencil, theta, space.lambda1, &space.basis.column(k).into_owned()))
        .collect();
    let mut mean = vec![0.0; pencil.n_params()];
    for g in &subgradients {
        for (a, b) in mean.iter_mut().zip(g) {
            *a += b / m as f64;
        }
    }
    subgradients.push(mean);
    for _ in 0..n_samples {
        let mut w = DVector::<f64>::from_fn(m, |_, _| StandardNormal.sample(rng));
        let norm = w.norm();
        if norm == 0.0 {
            continue;
        }
        w /= norm;
        let v = &space.basis * w;
        subgradients.push(subgradient_for(pencil, theta, space.lambda1, &v));
    }
    Ok(SubgradientSample {
        theta: theta.to_vec(),
        lambda1: space.lambda1,
        multiplicity: m,
        basis: space.basis,
        subgradients,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub lambda: f64,
    pub lambda_prime: f64,
    pub multiplicity: usize,
    /// Smallest `⟨g, θ′ − θ⟩` over the sampled subgradients; NaN if skipped.
    pub margin: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PseudoconcavityReport {
    pub trials: Vec<TrialRecord>,
    pub skipped: usize,
    pub violations: usize,
    /// Trials where θ was drawn with a multiple first eigenvalue.
    pub multiple_trials: usize,
    pub min_margin: f64,
}

impl PseudoconcavityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("trial,lambda,lambda_prime,multiplicity,margin\n");
        for t in &self.trials {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{},{:.16e}",
                t.trial, t.lambda, t.lambda_prime, t.multiplicity, t.margin
            );
        }
        s
    }
}

/// Random pairs `θ, θ′` ordered so that `λ1(θ) < λ1(θ′)`; every sampled
/// subgradient at `θ` must pair positively with `θ′ − θ`. For pencils with a
/// multiplicity locus, every other `θ` is drawn from the locus.
pub fn check_pseudoconcavity(pencil: &MatrixPencil, n_trials: usize, seed: u64) -> Result<PseudoconcavityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PseudoconcavityReport {
        min_margin: f64::INFINITY,
        ..Default::default()
    };
    for trial in 0..n_trials {
        let mut x = match pencil.multiplicity_locus() {
            Some(locus) if trial % 2 == 0 => random_convex_combination(locus, &mut rng),
            _ => pencil.sample_feasible(&mut rng)?,
        };
        let mut y = pencil.sample_feasible(&mut rng)?;
        let mut lx = pencil_lambda1(pencil, &x, DEFAULT_MULT_TOL)?.lambda1;
        let mut ly = pencil_lambda1(pencil, &y, DEFAULT_MULT_TOL)?.lambda1;
        if (lx - ly).abs() <= TIE_TOL * lx.abs().max(ly.abs()) {
            report.skipped += 1;
            report.trials.push(TrialRecord {
                trial,
                lambda: lx,
                lambda_prime: ly,
                multiplicity: 0,
                margin: f64::NAN,
            });
            continue;
        }
        if lx > ly {
            std::mem::swap(&mut x, &mut y);
            std::mem::swap(&mut lx, &mut ly);
        }
        let sample = sample_clarke_subgradients(pencil, &x, 8, &mut rng)?;
        let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let margin = sample
            .subgradients
            .iter()
            .map(|g| g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        if margin <= 0.0 {
            report.violations += 1;
        }
        if sample.multiplicity > 1 {
            report.multiple_trials += 1;
        }
        report.min_margin = report.min_margin.min(margin);
        report.trials.push(TrialRecord {
            trial,
            lambda: lx,
            lambda_prime: ly,
            multiplicity: sample.multiplicity,
            margin,
        });
    }
    Ok(report)
}

/// Points of a regular grid over the feasible set. Under an equality
/// constraint the coordinate with the largest weight is solved for and the
/// grid runs over the others; infeasible lifts are dropped.
struct Grid<'a> {
    pencil: &'a MatrixPencil,
    solved: Option<usize>,
    free: Vec<usize>,
}

impl<'a> Grid<'a> {
    fn new(pencil: &'a MatrixPencil) -> Self {
        let p = pencil.n_params();
        let solved = pencil.equality().map(|c| {
            (0..p)
                .max_by(|&i, &j| c.weights[i].abs().total_cmp(&c.weights[j].abs()))
                .expect("at least one parameter")
        });
        let free = (0..p).filter(|i| Some(*i) != solved).collect();
        Self { pencil, solved, free }
    }

    fn lift(&self, coords: &[f64]) -> Option<Vec<f64>> {
        let mut theta = vec![0.0; self.pencil.n_params()];
        for (i, v) in self.free.iter().zip(coords) {
            theta[*i] = *v;
        }
        if let (Some(k), Some(c)) = (self.solved, self.pencil.equality()) {
            let rest: f64 = self.free.iter().map(|&i| c.weights[i] * theta[i]).sum();
            let x = (c.target - rest) / c.weights[k];
            let (l, u) = (self.pencil.lower()[k], self.pencil.upper()[k]);
            let eps = 1e-12 * (1.0 + l.abs().max(u.abs()));
            if x < l - eps || x > u + eps {
                return None;
            }
            theta[k] = x.clamp(l, u);
        }
        Some(theta)
    }

    /// Grid with `density` points per free axis over `[lo, hi]` (clipped to
    /// the box).
    fn points(&self, lo: &[f64], hi: &[f64], density: usize) -> Vec<Vec<f64>> {
        let dims = self.free.len();
        let axes: Vec<Vec<f64>> = (0..dims)
            .map(|d| {
                let i = self.free[d];
                let a = lo[d].max(self.pencil.lower()[i]);
                let b = hi[d].min(self.pencil.upper()[i]);
                if density <= 1 || a == b {
                    vec![a]
                } else {
                    (0..density)
                        .map(|k| {
                            if k + 1 == density {
                                b
                            } else {
                                a + (b - a) * k as f64 / (density - 1) as f64
                            }
                        })
                        .collect()
                }
            })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        let mut out = Vec::with_capacity(total);
        let mut coords = vec![0.0; dims];
        for flat in 0..total {
            let mut r = flat;
            for d in 0..dims {
                coords[d] = axes[d][r % axes[d].len()];
                r /= axes[d].len();
            }
            if let Some(theta) = self.lift(&coords) {
                out.push(theta);
            }
        }
        out
    }

    fn full(&self, density: usize) -> Vec<Vec<f64>> {
        let lo: Vec<f64> = self.free.iter().map(|&i| self.pencil.lower()[i]).collect();
        let hi: Vec<f64> = self.free.iter().map(|&i| self.pencil.upper()[i]).collect();
        self.points(&lo, &hi, density)
    }

    fn spacing(&self, density: usize) -> Vec<f64> {
        self.free
            .iter()
            .map(|&i| (self.pencil.upper()[i] - self.pencil.lower()[i]) / (density.max(2) - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExtremePointReport {
    pub n_vertices: usize,
    pub n_grid_points: usize,
    pub vertex_min: f64,
    pub argmin_vertex: Vec<f64>,
    pub grid_min: f64,
    pub argmin_grid: Vec<f64>,
}

impl ExtremePointReport {
    pub fn passed(&self) -> bool {
        self.vertex_min <= self.grid_min + 1e-9
    }
}

/// Compares the minimum of λ1 over the polytope vertices with its minimum
/// over a grid of `grid_density` points per free axis.
pub fn check_extreme_point_minimizer(pencil: &MatrixPencil, grid_density: usize) -> Result<ExtremePointReport> {
    if pencil.n_params() > 3 {
        return Err(Error::InvalidArgument(
            "brute-force checks need at most 3 parameters".into(),
        ));
    }
    let lambda = |t: &[f64]| pencil_lambda1(pencil, t, DEFAULT_MULT_TOL).map(|s| s.lambda1);
    let vertices = pencil.polytope_vertices()?;
    let (mut vertex_min, mut argmin_vertex) = (f64::INFINITY, Vec::new());
    for v in &vertices {
        let l = lambda(v)?;
        if l < vertex_min {
            vertex_min = l;
            argmin_vertex = v.clone();
        }
    }
    let grid = Grid::new(pencil).full(grid_density);
    if grid.is_empty() {
        return Err(Error::EmptyPolytope);
    }
    let (mut grid_min, mut argmin_grid) = (f64::INFINITY, Vec::new());
    for t in &grid {
        let l = lambda(t)?;
        if l < grid_min {
            grid_min = l;
            argmin_grid = t.clone();
        }
    }
    Ok(ExtremePointReport {
        n_vertices: vertices.len(),
        n_grid_points: grid.len(),
        vertex_min,
        argmin_vertex,
        grid_min,
        argmin_grid,
    })
}

#[derive(Debug, Clone)]
pub struct StationaryReport {
    pub grid_max: f64,
    pub argmax_grid: Vec<f64>,
    /// `(start, terminal point, terminal λ1)` per start.
    pub runs: Vec<(Vec<f64>, Vec<f64>, f64)>,
    /// Largest `|λ_terminal − grid_max| / |grid_max|`.
    pub max_relative_gap: f64,
}

impl StationaryReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_relative_gap <= tol
    }
}

/// Projected ascent with step halving from one start. Any strict increase
/// is accepted, after which the step is doubled again.
pub fn projected_ascent(pencil: &MatrixPencil, start: &[f64], max_iter: usize) -> Result<(Vec<f64>, f64)> {
    let mut theta = pencil.project(start);
    let mut space = pencil_lambda1(pencil, &theta, DEFAULT_MULT_TOL)?;
    let width = pencil
        .lower()
        .iter()
        .zip(pencil.upper())
        .map(|(l, u)| u - l)
        .fold(0.0, f64::max)
        .max(1e-12);
    let mut step = 0.25 * width;
    for _ in 0..max_iter {
        let g = subgradient_for(pencil, &theta, space.lambda1, &space.basis.column(0).into_owned());
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            break;
        }
        let mut moved = false;
        while step > 1e-14 * width {
            let trial: Vec<f64> = theta.iter().zip(&g).map(|(t, d)| t + step * d / gnorm).collect();
            let trial = pencil.project(&trial);
            let next = pencil_lambda1(pencil, &trial, DEFAULT_MULT_TOL)?;
            if next.lambda1 > space.lambda1 {
                theta = trial;
                space = next;
                moved = true;
                step = (2.0 * step).min(width);
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((theta, space.lambda1))
}

/// Maximum of λ1 over a grid, refined three times around the best point.
pub fn grid_maximum(pencil: &MatrixPencil, density: usize) -> Result<(Vec<f64>, f64)> {
    let grid = Grid::new(pencil);
    let lambda = |t: &[f64]| pencil_lambda1(pencil, t, DEFAULT_MULT_TOL).map(|s| s.lambda1);
    let (mut best, mut best_val) = (Vec::new(), f64::NEG_INFINITY);
    for t in grid.full(density) {
        let l = lambda(&t)?;
        if l > best_val {
            best_val = l;
            best = t;
        }
    }
    if best.is_empty() {
        return Err(Error::EmptyPolytope);
    }
    let mut h = grid.spacing(density);
    const LOCAL: usize = 41;
    for _ in 0..3 {
        let lo: Vec<f64> = grid.free.iter().zip(&h).map(|(&i, h)| best[i] - h).collect();
        let hi: Vec<f64> = grid.free.iter().zip(&h).map(|(&i, h)| best[i] + h).collect();
        for t in grid.points(&lo, &hi, LOCAL) {
            let l = lambda(&t)?;
            if l > best_val {
                best_val = l;
                best = t;
            }
        }
        h.iter_mut().for_each(|v| *v *= 2.0 / (LOCAL - 1) as f64);
    }
    Ok((best, best_val))
}

/// Runs [`projected_ascent`] from `n_starts` random feasible points and
/// compares every terminal value with [`grid_maximum`].
pub fn check_stationary_is_global(pencil: &MatrixPencil, n_starts: usize, seed: u64) -> Result<StationaryReport> {
    if pencil.n_params() > 3 {
        return Err(Error::InvalidArgument(
            "brute-force checks need at most 3 parameters".into(),
        ));
    }
    let density = match (pencil.n_params(), pencil.equality().is_some()) {
        (1, _) | (2, true) => 1001,
        (2, false) | (3, true) => 201,
        _ => 41,
    };
    let (argmax_grid, grid_max) = grid_maximum(pencil, density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut runs = Vec::with_capacity(n_starts);
    let mut max_relative_gap: f64 = 0.0;
    for _ in 0..n_starts {
        let start = pencil.sample_feasible(&mut rng)?;
        let (end, value) = projected_ascent(pencil, &start, 5000)?;
        max_relative_gap = max_relative_gap.max((value - grid_max).abs() / grid_max.abs().max(f64::MIN_POSITIVE));
        runs.push((start, end, value));
    }
    Ok(StationaryReport {
        grid_max,
        argmax_grid,
        runs,
        max_relative_gap,
    })
}

fn random_symmetric<R: Rng + ?Sized>(n: usize, half_width: f64, rng: &mut R) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-half_width..half_width);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn identity_plus_bump<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let r = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    DMatrix::identity(n, n) + (r.transpose() * r) * (0.1 / n as f64)
}

/// Random affine pencil on `[0, 1]^p`: `A0`, `B0` are the identity plus a
/// small SPD bump, the `A_i`, `B_i` symmetric with entries in `[−0.2, 0.2]`.
/// Draws that are not SPD at the vertices and 64 random points are redrawn.
pub fn random_affine_pencil<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<MatrixPencil> {
    for _ in 0..1000 {
        let a0 = identity_plus_bump(n, rng);
        let b0 = identity_plus_bump(n, rng);
        let a_terms = (0..p).map(|_| random_symmetric(n, 0.2, rng)).collect();
        let b_terms = (0..p).map(|_| random_symmetric(n, 0.2, rng)).collect();
        let pencil = MatrixPencil::new(a0, a_terms, b0, b_terms, vec![0.0; p], vec![1.0; p])?;
        if pencil.verify_spd(64, rng).is_ok() {
            return Ok(pencil);
        }
    }
    Err(Error::Pencil(format!("no SPD draw for n = {n}, p = {p}")))
}

/// Affine pencil on `[0, 1]^p` (`p ∈ {2, 3}`) whose first eigenvalue is
/// double exactly on `θ1 = θ2`: `A(θ) = M D_A(θ) Mᵀ`, `B(θ) = M D_B(θ) Mᵀ`
/// with diagonal `D_A`, `D_B` and a random well-conditioned `M`.
pub fn multiplicity_two_pencil<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<MatrixPencil> {
    if n < 3 || !(2..=3).contains(&p) {
        return Err(Error::InvalidArgument(
            "multiplicity pencil needs n ≥ 3 and p ∈ {2, 3}".into(),
        ));
    }
    let m = DMatrix::<f64>::identity(n, n) + DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.2..0.2) / n as f64);
    let congruence = |d: &[f64]| &m * DMatrix::from_diagonal(&DVector::from_column_slice(d)) * m.transpose();
    let tail: Vec<f64> = (2..n).map(|_| 4.0 + rng.random_range(0.0..1.0)).collect();

    let mut a0 = vec![1.0, 1.0];
    a0.extend(&tail);
    let mut b0 = vec![1.0; n];
    b0[2..].iter_mut().for_each(|v| *v = 1.0 + rng.random_range(0.0..0.1));

    let mut a_terms = Vec::new();
    let mut b_terms = Vec::new();
    for j in 0..p {
        let mut da = vec![0.0; n];
        let mut dbv = vec![0.0; n];
        match j {
            0 | 1 => {
                da[j] = 1.0;
                dbv[0] = 0.1;
                dbv[1] = 0.1;
            }
            _ => {
                da[0] = 0.5;
                da[1] = 0.5;
            }
        }
        for v in da[2..].iter_mut() {
            *v = rng.random_range(0.0..0.5);
        }
        a_terms.push(congruence(&da));
        b_terms.push(congruence(&dbv));
    }
    let symmetrize = |x: DMatrix<f64>| (&x + x.transpose()) * 0.5;
    let pencil = MatrixPencil::new(
        symmetrize(congruence(&a0)),
        a_terms.into_iter().map(symmetrize).collect(),
        symmetrize(congruence(&b0)),
        b_terms.into_iter().map(symmetrize).collect(),
        vec![0.0; p],
        vec![1.0; p],
    )?;
    let locus = if p == 2 {
        vec![vec![0.0, 0.0], vec![1.0, 1.0]]
    } else {
        vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ]
    };
    let pencil = pencil.with_multiplicity_locus(locus);
    pencil.verify_spd(64, rng)?;
    Ok(pencil)
}

/// `A(θ) = I₂ + θ diag(1, −1)`, `B = I₂` on `[−1/2, 1/2]`: λ1 = 1 − |θ|,
/// with a double eigenvalue at `θ = 0`.
pub fn kink_pencil() -> MatrixPencil {
    MatrixPencil::new(
        DMatrix::identity(2, 2),
        vec![DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1.0]))],
        DMatrix::identity(2, 2),
        vec![DMatrix::zeros(2, 2)],
        vec![-0.5],
        vec![0.5],
    )
    .expect("valid pencil")
    .with_multiplicity_locus(vec![vec![0.0]])
}

/// Non-affine control: `A = I₂`, `B(θ) = I₂ − θ² diag(1, 1/2)` on
/// `[−1/2, 1/2]`. `B` is concave in θ and λ1 = 1/(1 − θ²/2) has its
/// minimum in the interior, so pseudo-concavity fails.
pub fn concave_b_control_pencil() -> MatrixPencil {
    MatrixPencil::new(
        DMatrix::identity(2, 2),
        vec![DMatrix::zeros(2, 2)],
        DMatrix::identity(2, 2),
        vec![DMatrix::zeros(2, 2)],
        vec![-0.5],
        vec![0.5],
    )
    .expect("valid pencil")
    .with_quadratic_b(vec![DMatrix::from_diagonal(&DVector::from_column_slice(&[-1.0, -0.5]))])
    .expect("valid quadratic term")
}

/// Outcome of [`pencil_suite`].
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub pencils: usize,
    pub multiplicity_pencils: usize,
    pub trials: usize,
    pub violations: usize,
    pub min_margin: f64,
    pub extreme_point_failures: usize,
    pub stationary_failures: usize,
    pub stationary_max_gap: f64,
    pub control_violations: usize,
    pub pseudoconcavity_csv: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.extreme_point_failures == 0 && self.stationary_failures == 0
    }
}

/// Every pencil check at once: pseudo-concavity on 8 random affine pencils
/// and 2 constructed multiplicity-2 pencils, extreme-point minimizers and
/// stationary-is-global on 10 random equality-constrained pencils each, and
/// the non-affine control.
pub fn pencil_suite(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pencils = Vec::new();
    for k in 0..8 {
        pencils.push(random_affine_pencil(3 + k % 6, 1 + k % 3, &mut rng)?);
    }
    pencils.push(multiplicity_two_pencil(4, 2, &mut rng)?);
    pencils.push(multiplicity_two_pencil(6, 3, &mut rng)?);

    let mut report = SuiteReport {
        pencils: pencils.len(),
        multiplicity_pencils: 2,
        trials: 0,
        violations: 0,
        min_margin: f64::INFINITY,
        extreme_point_failures: 0,
        stationary_failures: 0,
        stationary_max_gap: 0.0,
        control_violations: 0,
        pseudoconcavity_csv: String::from("pencil,trial,lambda,lambda_prime,multiplicity,margin\n"),
    };
    for (i, pencil) in pencils.iter().enumerate() {
        let r = check_pseudoconcavity(pencil, trials, seed.wrapping_add(i as u64))?;
        report.trials += r.trials.len();
        report.violations += r.violations;
        report.min_margin = report.min_margin.min(r.min_margin);
        for line in r.to_csv().lines().skip(1) {
            let _ = writeln!(report.pseudoconcavity_csv, "{i},{line}");
        }
    }
    for i in 0..10 {
        let pencil = random_affine_pencil(2 + i % 5, 2, &mut rng)?.with_equality(vec![1.0, 1.0], 1.0)?;
        if !check_extreme_point_minimizer(&pencil, 1001)?.passed() {
            report.extreme_point_failures += 1;
        }
        let s = check_stationary_is_global(&pencil, 20, seed.wrapping_add(100 + i as u64))?;
        report.stationary_max_gap = report.stationary_max_gap.max(s.max_relative_gap);
        if !s.passed(1e-4) {
            report.stationary_failures += 1;
        }
    }
    report.control_violations = check_pseudoconcavity(&concave_b_control_pencil(), trials.max(100), seed)?.violations;
    Ok(report)
}
