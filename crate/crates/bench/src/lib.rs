//! Shared fixtures for the benchmarks.

use twophase_core::fem::coefficients_from_density;
use twophase_core::mesh::build_disk_mesh;
use twophase_core::{Assembler, CoefficientPair, DensityField, Element, Materials, TriMesh};

pub struct DiskFixture {
    pub mesh: TriMesh,
    pub assembler: Assembler,
    pub theta: DensityField,
    pub coefficients: CoefficientPair,
    pub materials: Materials,
}

/// Unit disk with `n_boundary` boundary vertices and a smooth non-uniform
/// density.
pub fn disk_fixture(n_boundary: usize, element: Element) -> DiskFixture {
    let mesh = build_disk_mesh(n_boundary, 1.0).expect("valid mesh parameters");
    let assembler = Assembler::new(&mesh, element);
    let theta = DensityField::new(
        (0..mesh.n_triangles())
            .map(|t| {
                let [x, y] = mesh.centroid(t);
                0.5 + 0.4 * (3.0 * x).sin() * (2.0 * y).cos()
            })
            .collect(),
    );
    let materials = Materials::default();
    let coefficients = coefficients_from_density(&theta.values, &materials);
    DiskFixture {
        mesh,
        assembler,
        theta,
        coefficients,
        materials,
    }
}
