//! Element-wise densities, the admissible set `{0 ≤ θ ≤ 1, ∫θ = γ}`, the
//! projection onto it, and the gradient of the first eigenvalue.

use crate::eigensolve::EigenPair;
use crate::error::{Error, Result};
use crate::fem::{Assembler, Materials};
use crate::mesh::TriMesh;

/// Default volume tolerance of the projection, relative to the domain area.
pub const DEFAULT_VOL_TOL: f64 = 1e-7;

/// Volume fraction of material 2, one value per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn uniform(n: usize, value: f64) -> Self {
        Self { values: vec![value; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when every entry lies in `[0, 1]`.
    pub fn in_box(&self) -> bool {
        self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// Per-element gradient values (L² representative with respect to the
/// area-weighted pairing).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeConstraint {
    pub gamma: f64,
    pub element_areas: Vec<f64>,
    total_area: f64,
}

impl VolumeConstraint {
    pub fn new(gamma: f64, element_areas: Vec<f64>) -> Result<Self> {
        let total_area: f64 = element_areas.iter().sum();
        if !(gamma > 0.0 && gamma < total_area) {
            return Err(Error::VolumeConstraint(format!(
                "gamma = {gamma} must lie strictly between 0 and the domain area {total_area}"
            )));
        }
        Ok(Self {
            gamma,
            element_areas,
            total_area,
        })
    }

    /// `γ = fraction · |Ω|` on the given mesh.
    pub fn from_fraction(mesh: &TriMesh, fraction: f64) -> Result<Self> {
        let areas = mesh.element_areas();
        let total: f64 = areas.iter().sum();
        Self::new(fraction * total, areas)
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn volume(&self, theta: &[f64]) -> f64 {
        self.element_areas.iter().zip(theta).map(|(a, t)| a * t).sum()
    }

    /// `(∫θ − γ) / |Ω|`.
    pub fn relative_error(&self, theta: &[f64]) -> f64 {
        (self.volume(theta) - self.gamma) / self.total_area
    }

    /// Area-weighted inner product.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.element_areas
            .iter()
            .zip(x.iter().zip(y))
            .map(|(a, (p, q))| a * p * q)
            .sum()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.element_areas.len() {
            return Err(Error::DimensionMismatch {
                what: "density field",
                expected: self.element_areas.len(),
                actual: n,
            });
        }
        Ok(())
    }
}

fn shifted_clip(raw: &[f64], mu: f64) -> Vec<f64> {
    raw.iter().map(|t| (t - mu).clamp(0.0, 1.0)).collect()
}

/// Projection onto the admissible set in the area-weighted metric:
/// `clip(θ_raw − μ, 0, 1)` with the scalar `μ` chosen so the volume is `γ`.
///
/// `μ` is bracketed in `[min θ_raw − 1, max θ_raw]` and bisected until the
/// volume error drops below `vol_tol · |Ω|`; the result is then polished by
/// solving the volume equation exactly on the current free set, which
/// makes the projection idempotent to rounding.
pub fn project_to_admissible(theta_raw: &DensityField, vc: &VolumeConstraint, vol_tol: f64) -> Result<DensityField> {
    let raw = &theta_raw.values;
    vc.check_len(raw.len())?;
    if !(vol_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "vol_tol must be positive, got {vol_tol}"
        )));
    }
    if let Some(bad) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite density entry {bad}")));
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut mu_lo, mut mu_hi) = (lo, hi);
    let mut mu = 0.5 * (mu_lo + mu_hi);
    // volume(μ) is continuous and nonincreasing, volume(lo) = |Ω| > γ, volume(hi) = 0 < γ
    for _ in 0..200 {
        mu = 0.5 * (mu_lo + mu_hi);
        let err = vc.relative_error(&shifted_clip(raw, mu));
        if err.abs() <= vol_tol {
            break;
        }
        if err > 0.0 {
            mu_lo = mu;
        } else {
            mu_hi = mu;
        }
    }

    // exact solve on the free set {0 < θ_raw − μ < 1}
    let (mut free_area, mut free_sum, mut upper_area) = (0.0, 0.0, 0.0);
    for (a, t) in vc.element_areas.iter().zip(raw) {
        let s = t - mu;
        if s >= 1.0 {
            upper_area += a;
        } else if s > 0.0 {
            free_area += a;
            free_sum += a * t;
        }
    }
    let mut out = shifted_clip(raw, mu);
    if free_area > 0.0 {
        let polished = (free_sum + upper_area - vc.gamma) / free_area;
        let candidate = shifted_clip(raw, polished);
        if vc.relative_error(&candidate).abs() <= vc.relative_error(&out).abs() {
            out = candidate;
        }
    }
    debug_assert!(vc.relative_error(&out).abs() <= vol_tol);
    Ok(DensityField::new(out))
}

/// `g_e = (c2 − c1)·mean_e|∇u|² − λ1 (ρ2 − ρ1)·mean_e u²`, the element
/// averages computed with the assembly quadrature.
///
/// `pair.u` must be normalized against the mass matrix of `theta`.
pub fn gradient_lambda1(
    theta: &DensityField,
    pair: &EigenPair,
    materials: &Materials,
    assembler: &Assembler,
) -> Result<GradientField> {
    if theta.len() != assembler.n_elements() {
        return Err(Error::DimensionMismatch {
            what: "density field",
            expected: assembler.n_elements(),
            actual: theta.len(),
        });
    }
    let (grad_sq, sq) = assembler.element_energies(&pair.u)?;
    let Materials { c1, c2, rho1, rho2 } = *materials;
    let norm: f64 = theta
        .values
        .iter()
        .zip(&sq)
        .map(|(t, s)| (rho1 + (rho2 - rho1) * t) * s)
        .sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(norm));
    }
    let values = assembler
        .areas()
        .iter()
        .zip(grad_sq.iter().zip(&sq))
        .map(|(a, (g, s))| ((c2 - c1) * g - pair.lambda1 * (rho2 - rho1) * s) / a)
        .collect();
    Ok(GradientField { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::smallest_eigenpair;
    use crate::fem::{coefficients_from_density, Element};
    use crate::mesh::build_square_mesh;
    use proptest::prelude::*;

    fn three_unit_elements(gamma: f64) -> VolumeConstraint {
        VolumeConstraint::new(gamma, vec![1.0, 1.0, 1.0]).unwrap()
    }

    /// Brute-force scan of μ for the volume equation on a fine grid.
    fn scan_mu(raw: &[f64], vc: &VolumeConstraint) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=400_000 {
            let mu = -3.0 + 6.0 * k as f64 / 400_000.0;
            let e = vc.relative_error(&shifted_clip(raw, mu)).abs();
            if e < best.0 {
                best = (e, mu);
            }
        }
        best.1
    }

    #[test]
    fn three_element_example() {
        let vc = three_unit_elements(1.5);
        let raw = [2.0, 0.5, -1.0];
        assert!(scan_mu(&raw, &vc).abs() < 1e-4);
        let out = project_to_admissible(&DensityField::new(raw.to_vec()), &vc, 1e-7).unwrap();
        for (o, e) in out.values.iter().zip([1.0, 0.5, 0.0]) {
            assert!((o - e).abs() < 1e-7);
        }
    }

    #[test]
    fn uniform_shift_lands_on_uniform_half() {
        let vc = three_unit_elements(1.5);
        let out = project_to_admissible(&DensityField::uniform(3, 5.0), &vc, 1e-7).unwrap();
        for o in out.values {
            assert!((o - 0.5).abs() < 1e-7);
        }
    }

    #[test]
    fn feasible_field_unchanged() {
        let vc = VolumeConstraint::new(1.1, vec![0.5, 1.0, 1.5]).unwrap();
        let theta = DensityField::new(vec![0.2, 0.4, 0.4]);
        let out = project_to_admissible(&theta, &vc, 1e-7).unwrap();
        for (o, t) in out.values.iter().zip(&theta.values) {
            assert!((o - t).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(VolumeConstraint::new(3.0, vec![1.0, 1.0, 1.0]).is_err());
        assert!(VolumeConstraint::new(0.0, vec![1.0]).is_err());
        let vc = three_unit_elements(1.0);
        assert!(project_to_admissible(&DensityField::new(vec![f64::NAN, 0.0, 0.0]), &vc, 1e-7).is_err());
        assert!(project_to_admissible(&DensityField::new(vec![0.0, 0.0]), &vc, 1e-7).is_err());
        assert!(project_to_admissible(&DensityField::uniform(3, 0.1), &vc, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn projection_properties(
            raw in prop::collection::vec(-3.0f64..4.0, 2..40),
            areas_seed in prop::collection::vec(0.1f64..2.0, 40),
            frac in 0.05f64..0.95,
            bump in 0.0f64..2.0,
            k in 0usize..40,
        ) {
            let n = raw.len();
            let areas = areas_seed[..n].to_vec();
            let total: f64 = areas.iter().sum();
            let vc = VolumeConstraint::new(frac * total, areas).unwrap();
            let out = project_to_admissible(&DensityField::new(raw.clone()), &vc, 1e-7).unwrap();
            prop_assert!(out.in_box());
            prop_assert!(vc.relative_error(&out.values).abs() <= 1e-7);
            let again = project_to_admissible(&out, &vc, 1e-7).unwrap();
            for (a, b) in out.values.iter().zip(&again.values) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            // raising one entry never lowers that entry's output and never raises the others
            let k = k % n;
            let mut raised = raw.clone();
            raised[k] += bump;
            let out2 = project_to_admissible(&DensityField::new(raised), &vc, 1e-7).unwrap();
            prop_assert!(out2.values[k] >= out.values[k] - 1e-6);
            for i in (0..n).filter(|&i| i != k) {
                prop_assert!(out2.values[i] <= out.values[i] + 1e-6);
            }
        }
    }

    fn square_setup(materials: Materials) -> (Assembler, DensityField, f64, GradientField) {
        let mesh = build_square_mesh(4, 1.0).unwrap();
        let asm = Assembler::new(&mesh, Element::P2);
        let theta = DensityField::new((0..mesh.n_triangles()).map(|t| ((t * 7) % 11) as f64 / 10.0).collect());
        let cp = coefficients_from_density(&theta.values, &materials);
        let pair = smallest_eigenpair(&asm.stiffness(&cp).unwrap(), &asm.mass(&cp).unwrap(), 1e-12, 1000).unwrap();
        let g = gradient_lambda1(&theta, &pair, &materials, &asm).unwrap();
        (asm, theta, pair.lambda1, g)
    }

    #[test]
    fn gradient_vanishes_for_identical_phases() {
        let (_, _, _, g) = square_setup(Materials {
            c1: 1.0,
            c2: 1.0,
            rho1: 0.5,
            rho2: 0.5,
        });
        assert!(g.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn denominator_only_gradient_is_nonpositive() {
        let (_, _, _, g) = square_setup(Materials {
            c1: 1.0,
            c2: 1.0,
            rho1: 0.3,
            rho2: 0.7,
        });
        assert!(g.values.iter().all(|v| *v <= 0.0));
        assert!(g.values.iter().any(|v| *v < 0.0));
    }

    #[test]
    fn unnormalized_eigenvector_rejected() {
        let mesh = build_square_mesh(3, 1.0).unwrap();
        let asm = Assembler::new(&mesh, Element::P2);
        let theta = DensityField::uniform(mesh.n_triangles(), 0.5);
        let m = Materials::default();
        let cp = coefficients_from_density(&theta.values, &m);
        let mut pair = smallest_eigenpair(&asm.stiffness(&cp).unwrap(), &asm.mass(&cp).unwrap(), 1e-12, 1000).unwrap();
        pair.u.iter_mut().for_each(|v| *v *= 2.0);
        assert!(matches!(
            gradient_lambda1(&theta, &pair, &m, &asm),
            Err(Error::NotNormalized(_))
        ));
    }
}
