//! Projected gradient method `θ_{k+1} = Π(θ_k ± α ∇λ1(θ_k))` for the four
//! solved variants, plus reference designs and area diagnostics used to
//! judge the results.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::design::{
    gradient_lambda1, project_to_admissible, DensityField, GradientField, VolumeConstraint, DEFAULT_VOL_TOL,
};
use crate::eigensolve::{EigenOptions, EigenSolver};
use crate::error::{Error, Result};
pub use crate::fem::Materials;
use crate::fem::{coefficients_from_density, Assembler, Element};
use crate::mesh::{DomainKind, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Density in numerator and denominator, maximized.
    #[default]
    MaxBoth,
    /// Density in the numerator only (`ρ1 = ρ2`), maximized.
    MaxNumeratorOnly,
    /// Density in the denominator only (`c1 = c2`), maximized.
    MaxDenominatorOnly,
    /// Density in the denominator only (`c1 = c2`), minimized.
    MinDenominatorOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::MaxBoth,
        Variant::MaxNumeratorOnly,
        Variant::MaxDenominatorOnly,
        Variant::MinDenominatorOnly,
    ];

    /// `+1` for maximization, `-1` for minimization.
    pub fn sign(self) -> f64 {
        match self {
            Variant::MinDenominatorOnly => -1.0,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::MaxBoth => "max_both",
            Variant::MaxNumeratorOnly => "max_numerator_only",
            Variant::MaxDenominatorOnly => "max_denominator_only",
            Variant::MinDenominatorOnly => "min_denominator_only",
        }
    }

    /// Material constants used for this variant in the reference experiments.
    pub fn default_materials(self) -> Materials {
        match self {
            Variant::MaxBoth => Materials::default(),
            Variant::MaxNumeratorOnly => Materials {
                rho1: 1.0,
                rho2: 1.0,
                ..Materials::default()
            },
            Variant::MaxDenominatorOnly | Variant::MinDenominatorOnly => Materials {
                c1: 1.0,
                c2: 1.0,
                ..Materials::default()
            },
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialDesign {
    /// `θ = volume_fraction` everywhere.
    #[default]
    Uniform,
    /// `θ = 1` on elements whose centroid has `x < x_threshold`, 0 elsewhere,
    /// then projected. Without a threshold, the left `volume_fraction` of the
    /// bounding box is filled.
    Halfplane { x_threshold: Option<f64> },
    /// Density CSV as written by [`crate::io::write_density_csv`].
    FromFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub variant: Variant,
    pub materials: Materials,
    pub volume_fraction: f64,
    pub stepsize: f64,
    pub max_iter: usize,
    pub initial_design: InitialDesign,
    pub vol_tol: f64,
    pub eigen: EigenOptions,
    pub element: Element,
    /// Stop once the stationarity measure drops below this value.
    pub stationarity_threshold: Option<f64>,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self::for_variant(Variant::MaxBoth)
    }
}

impl ProblemSpec {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            variant,
            materials: variant.default_materials(),
            volume_fraction: 0.5,
            stepsize: 0.05,
            max_iter: 200,
            initial_design: InitialDesign::Uniform,
            vol_tol: DEFAULT_VOL_TOL,
            eigen: EigenOptions::default(),
            element: Element::P2,
            stationarity_threshold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Materials { c1, c2, rho1, rho2 } = self.materials;
        let bad = |m: String| Err(Error::ProblemSpec(m));
        for (name, v) in [("c1", c1), ("c2", c2), ("rho1", rho1), ("rho2", rho2)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        match self.variant {
            Variant::MaxBoth if !(c1 < c2 && rho1 < rho2) => {
                return bad(format!(
                    "max_both requires c1 < c2 and rho1 < rho2 (got c = ({c1}, {c2}), rho = ({rho1}, {rho2}))"
                ))
            }
            Variant::MaxNumeratorOnly if rho1 != rho2 => {
                return bad(format!("max_numerator_only requires rho1 = rho2 (got {rho1}, {rho2})"))
            }
            Variant::MaxDenominatorOnly | Variant::MinDenominatorOnly if c1 != c2 => {
                return bad(format!("{} requires c1 = c2 (got {c1}, {c2})", self.variant))
            }
            _ => {}
        }
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return bad(format!(
                "volume_fraction must lie in (0, 1), got {}",
                self.volume_fraction
            ));
        }
        if !(self.stepsize > 0.0 && self.stepsize.is_finite()) {
            return bad(format!("stepsize must be positive, got {}", self.stepsize));
        }
        if !(self.vol_tol > 0.0) {
            return bad(format!("vol_tol must be positive, got {}", self.vol_tol));
        }
        if !(self.eigen.tol > 0.0) || self.eigen.max_iter == 0 {
            return bad("eigensolver tolerance and iteration cap must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lambda1: f64,
    /// `(∫θ − γ) / |Ω|` of the iterate.
    pub volume_error: f64,
    pub stationarity: f64,
}

#[derive(Debug, Clone)]
pub struct RunHistory {
    pub records: Vec<IterationRecord>,
    pub initial_density: DensityField,
    pub final_density: DensityField,
    /// First eigenvalue of the final density.
    pub final_lambda1: f64,
    /// Eigenvector of the final density over the free dofs.
    pub final_eigenvector: Vec<f64>,
    pub wall_time: Duration,
}

/// Builds the (projected) starting density.
pub fn initial_density(mesh: &TriMesh, spec: &ProblemSpec, vc: &VolumeConstraint) -> Result<DensityField> {
    let n = mesh.n_triangles();
    let raw = match &spec.initial_design {
        InitialDesign::Uniform => return Ok(DensityField::uniform(n, spec.volume_fraction)),
        InitialDesign::Halfplane { x_threshold } => {
            let (lo, hi) = mesh.bounding_box();
            let x0 = x_threshold.unwrap_or(lo[0] + spec.volume_fraction * (hi[0] - lo[0]));
            DensityField::new(
                (0..n)
                    .map(|t| if mesh.centroid(t)[0] < x0 { 1.0 } else { 0.0 })
                    .collect(),
            )
        }
        InitialDesign::FromFile(path) => {
            let field = crate::io::read_density_csv(path)?;
            if field.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "initial density file",
                    expected: n,
                    actual: field.len(),
                });
            }
            field
        }
    };
    project_to_admissible(&raw, vc, spec.vol_tol)
}

/// `‖θ − Π(θ + s g)‖ / s` in the area-weighted norm; zero exactly at fixed
/// points of the projected step. `g` is the ascent direction (negate the
/// gradient for minimization).
pub fn stationarity_measure(
    theta: &DensityField,
    g: &GradientField,
    vc: &VolumeConstraint,
    probe_step: f64,
) -> Result<f64> {
    if g.values.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            what: "gradient field",
            expected: theta.len(),
            actual: g.values.len(),
        });
    }
    if !(probe_step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "probe_step must be positive, got {probe_step}"
        )));
    }
    let trial = DensityField::new(
        theta
            .values
            .iter()
            .zip(&g.values)
            .map(|(t, d)| t + probe_step * d)
            .collect(),
    );
    let projected = project_to_admissible(&trial, vc, DEFAULT_VOL_TOL)?;
    let diff: Vec<f64> = theta.values.iter().zip(&projected.values).map(|(a, b)| a - b).collect();
    Ok(vc.inner(&diff, &diff).sqrt() / probe_step)
}

/// Runs the projected gradient method for `spec.max_iter` iterations (or
/// until the optional stationarity threshold is met).
///
/// Record `k` holds the eigenvalue and diagnostics of the `k`-th iterate
/// before it is updated; the final density is the iterate after the last
/// update.
pub fn run_projected_gradient(mesh: &TriMesh, spec: &ProblemSpec) -> Result<RunHistory> {
    spec.validate()?;
    let started = Instant::now();
    let assembler = Assembler::new(mesh, spec.element);
    let vc = VolumeConstraint::from_fraction(mesh, spec.volume_fraction)?;
    let mut theta = initial_density(mesh, spec, &vc)?;
    let initial = theta.clone();
    let mut solver = EigenSolver::new(spec.eigen);
    let sign = spec.variant.sign();
    let mut warm: Option<Vec<f64>> = None;
    let mut records = Vec::with_capacity(spec.max_iter);

    let at = |iteration: usize| {
        move |e: Error| Error::Iteration {
            iteration,
            source: Box::new(e),
        }
    };

    for k in 0..spec.max_iter {
        let coeffs = coefficients_from_density(&theta.values, &spec.materials);
        let a = assembler.stiffness(&coeffs)?;
        let b = assembler.mass(&coeffs)?;
        let pair = solver.solve(&a, &b, warm.as_deref()).map_err(at(k))?;
        let gradient = gradient_lambda1(&theta, &pair, &spec.materials, &assembler).map_err(at(k))?;
        let ascent = GradientField {
            values: gradient.values.iter().map(|g| sign * g).collect(),
        };
        let stationarity = stationarity_measure(&theta, &ascent, &vc, spec.stepsize)?;
        records.push(IterationRecord {
            iteration: k,
            lambda1: pair.lambda1,
            volume_error: vc.relative_error(&theta.values),
            stationarity,
        });
        log::info!("Iter. {k}, lambda1 = {}", pair.lambda1);
        warm = Some(pair.u);
        if spec.stationarity_threshold.is_some_and(|t| stationarity < t) {
            break;
        }
        let step = DensityField::new(
            theta
                .values
                .iter()
                .zip(&ascent.values)
                .map(|(t, g)| t + spec.stepsize * g)
                .collect(),
        );
        theta = project_to_admissible(&step, &vc, spec.vol_tol).map_err(at(k))?;
    }

    let coeffs = coefficients_from_density(&theta.values, &spec.materials);
    let last = records.len();
    let pair = solver
        .solve(
            &assembler.stiffness(&coeffs)?,
            &assembler.mass(&coeffs)?,
            warm.as_deref(),
        )
        .map_err(at(last))?;
    Ok(RunHistory {
        records,
        initial_density: initial,
        final_density: theta,
        final_lambda1: pair.lambda1,
        final_eigenvector: pair.u,
        wall_time: started.elapsed(),
    })
}

/// The explicit radially symmetric 0-1 optimum on a disk for the
/// denominator-only problems: a centered disk of material 2 for the
/// minimization, a boundary annulus for the maximization. Radii are chosen
/// so the material-2 region holds the fraction `volume_fraction` of the
/// domain. Element values are area coverage fractions.
pub fn krein_design(mesh: &TriMesh, variant: Variant, volume_fraction: f64) -> Result<DensityField> {
    let DomainKind::Disk { radius } = mesh.domain() else {
        return Err(Error::InvalidArgument("reference design needs a disk domain".into()));
    };
    let inside: Box<dyn Fn([f64; 2]) -> bool> = match variant {
        Variant::MinDenominatorOnly => {
            let r = radius * volume_fraction.sqrt();
            Box::new(move |p| p[0] * p[0] + p[1] * p[1] <= r * r)
        }
        Variant::MaxDenominatorOnly => {
            let r = radius * (1.0 - volume_fraction).sqrt();
            Box::new(move |p| p[0] * p[0] + p[1] * p[1] > r * r)
        }
        other => {
            return Err(Error::InvalidArgument(format!("no closed-form design for {other}")));
        }
    };
    // coverage estimated on the 64 sub-triangle centroids of a 3-level refinement
    const LEVELS: usize = 8;
    let values = (0..mesh.n_triangles())
        .map(|t| {
            let [p, q, r] = mesh.triangle_coords(t);
            let mut hits = 0usize;
            let mut total = 0usize;
            for i in 0..LEVELS {
                for j in 0..LEVELS - i {
                    let mut bary = vec![[(3 * i + 1) as f64, (3 * j + 1) as f64]];
                    if i + j + 1 < LEVELS {
                        bary.push([(3 * i + 2) as f64, (3 * j + 2) as f64]);
                    }
                    for [a, b] in bary {
                        let (a, b) = (a / (3 * LEVELS) as f64, b / (3 * LEVELS) as f64);
                        let c = 1.0 - a - b;
                        let x = [a * p[0] + b * q[0] + c * r[0], a * p[1] + b * q[1] + c * r[1]];
                        total += 1;
                        hits += usize::from(inside(x));
                    }
                }
            }
            hits as f64 / total as f64
        })
        .collect();
    Ok(DensityField::new(values))
}

/// `Σ_e |Ω_e| |θ_e − ref_e| / |Ω|`: the symmetric-difference area of two
/// 0-1 designs, as a fraction of the domain.
pub fn mismatch_area_fraction(mesh: &TriMesh, theta: &DensityField, reference: &DensityField) -> f64 {
    let areas = mesh.element_areas();
    let total: f64 = areas.iter().sum();
    areas
        .iter()
        .zip(theta.values.iter().zip(&reference.values))
        .map(|(a, (x, y))| a * (x - y).abs())
        .sum::<f64>()
        / total
}

/// Fraction of the domain area where `lo < θ < hi`.
pub fn gray_area_fraction(mesh: &TriMesh, theta: &DensityField, lo: f64, hi: f64) -> f64 {
    let areas = mesh.element_areas();
    let total: f64 = areas.iter().sum();
    areas
        .iter()
        .zip(&theta.values)
        .filter(|(_, t)| **t > lo && **t < hi)
        .map(|(a, _)| a)
        .sum::<f64>()
        / total
}
