//! P0 design space, P1/P2 Lagrange state spaces, and assembly of the
//! density-dependent stiffness and mass matrices on the free dofs.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{TriMesh, DIRICHLET_LABEL};

/// Material constants of the two phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Materials {
    pub c1: f64,
    pub c2: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl Default for Materials {
    fn default() -> Self {
        Self {
            c1: 0.5,
            c2: 1.0,
            rho1: 0.3,
            rho2: 0.7,
        }
    }
}

/// Lagrange space used for the eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Element {
    P1,
    #[default]
    P2,
}

impl Element {
    pub fn local_dofs(self) -> usize {
        match self {
            Element::P1 => 3,
            Element::P2 => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    P0,
    P1,
    P2,
}

/// Local-to-global numbering of a finite element space.
///
/// P2 numbers the vertices first, then one dof per edge midpoint. Local
/// order on a triangle `[a, b, c]` is `a, b, c, mid(ab), mid(bc), mid(ca)`.
#[derive(Debug, Clone)]
pub struct DofMap {
    space: Space,
    n_dofs: usize,
    local: usize,
    cell_dofs: Vec<usize>,
    dirichlet: Vec<usize>,
    free_index: Vec<Option<usize>>,
    n_free: usize,
}

impl DofMap {
    pub fn p0(mesh: &TriMesh) -> Self {
        let n = mesh.n_triangles();
        Self {
            space: Space::P0,
            n_dofs: n,
            local: 1,
            cell_dofs: (0..n).collect(),
            dirichlet: Vec::new(),
            free_index: (0..n).map(Some).collect(),
            n_free: n,
        }
    }

    pub fn new(mesh: &TriMesh, element: Element) -> Self {
        let nv = mesh.n_vertices();
        let mut on_dirichlet = vec![false; nv];
        let mut dirichlet_edges = std::collections::HashSet::new();
        for e in mesh.boundary_edges() {
            if e.label == DIRICHLET_LABEL {
                let [a, b] = e.vertices;
                on_dirichlet[a] = true;
                on_dirichlet[b] = true;
                dirichlet_edges.insert((a.min(b), a.max(b)));
            }
        }
        let (space, n_dofs, cell_dofs, mut constrained) = match element {
            Element::P1 => {
                let cells = mesh.triangles().iter().flatten().copied().collect();
                (Space::P1, nv, cells, on_dirichlet)
            }
            Element::P2 => {
                let edges = mesh.edges();
                let lookup: HashMap<(usize, usize), usize> = edges
                    .iter()
                    .enumerate()
                    .map(|(i, e)| ((e.vertices[0], e.vertices[1]), i))
                    .collect();
                let mut cells = Vec::with_capacity(6 * mesh.n_triangles());
                for tri in mesh.triangles() {
                    cells.extend_from_slice(tri);
                    for k in 0..3 {
                        let (a, b) = (tri[k], tri[(k + 1) % 3]);
                        cells.push(nv + lookup[&(a.min(b), a.max(b))]);
                    }
                }
                let mut constrained = on_dirichlet;
                constrained.extend(
                    edges
                        .iter()
                        .map(|e| dirichlet_edges.contains(&(e.vertices[0], e.vertices[1]))),
                );
                (Space::P2, nv + edges.len(), cells, constrained)
            }
        };
        constrained.resize(n_dofs, false);
        let mut free_index = vec![None; n_dofs];
        let mut dirichlet = Vec::new();
        let mut n_free = 0;
        for (d, &c) in constrained.iter().enumerate() {
            if c {
                dirichlet.push(d);
            } else {
                free_index[d] = Some(n_free);
                n_free += 1;
            }
        }
        Self {
            space,
            n_dofs,
            local: element.local_dofs(),
            cell_dofs,
            dirichlet,
            free_index,
            n_free,
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_cells(&self) -> usize {
        self.cell_dofs.len() / self.local
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        &self.cell_dofs[t * self.local..(t + 1) * self.local]
    }

    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet
    }

    /// Position of a global dof in the reduced (free) numbering.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    /// Extends a vector over the free dofs by zeros on the Dirichlet dofs.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        self.free_index.iter().map(|i| i.map_or(0.0, |i| free[i])).collect()
    }
}

/// Symmetric 7-point rule of degree 5 on a triangle, in barycentric
/// coordinates, with weights summing to one.
pub fn quadrature_rule() -> [([f64; 3], f64); 7] {
    let s = 15f64.sqrt();
    let a1 = (6.0 - s) / 21.0;
    let a2 = (6.0 + s) / 21.0;
    let w1 = (155.0 - s) / 1200.0;
    let w2 = (155.0 + s) / 1200.0;
    let b1 = 1.0 - 2.0 * a1;
    let b2 = 1.0 - 2.0 * a2;
    [
        ([1.0 / 3.0; 3], 9.0 / 40.0),
        ([a1, a1, b1], w1),
        ([a1, b1, a1], w1),
        ([b1, a1, a1], w1),
        ([a2, a2, b2], w2),
        ([a2, b2, a2], w2),
        ([b2, a2, a2], w2),
    ]
}

/// Shape function values and their derivatives with respect to the three
/// barycentric coordinates.
fn shape(element: Element, l: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    match element {
        Element::P1 => (l.to_vec(), vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        Element::P2 => {
            let mut v = Vec::with_capacity(6);
            let mut d = Vec::with_capacity(6);
            for i in 0..3 {
                v.push(l[i] * (2.0 * l[i] - 1.0));
                let mut g = [0.0; 3];
                g[i] = 4.0 * l[i] - 1.0;
                d.push(g);
            }
            for i in 0..3 {
                let j = (i + 1) % 3;
                v.push(4.0 * l[i] * l[j]);
                let mut g = [0.0; 3];
                g[i] = 4.0 * l[j];
                g[j] = 4.0 * l[i];
                d.push(g);
            }
            (v, d)
        }
    }
}

/// Unit-coefficient element matrices `(∫∇φ_i·∇φ_j, ∫φ_i φ_j)`, row-major.
pub fn element_matrices(element: Element, tri: [[f64; 2]; 3]) -> (Vec<f64>, Vec<f64>) {
    let [p, q, r] = tri;
    let area = crate::mesh::signed_area(p, q, r);
    // gradients of the barycentric coordinates, constant on a straight triangle
    let grad_l = [
        [(q[1] - r[1]) / (2.0 * area), (r[0] - q[0]) / (2.0 * area)],
        [(r[1] - p[1]) / (2.0 * area), (p[0] - r[0]) / (2.0 * area)],
        [(p[1] - q[1]) / (2.0 * area), (q[0] - p[0]) / (2.0 * area)],
    ];
    let n = element.local_dofs();
    let mut k = vec![0.0; n * n];
    let mut m = vec![0.0; n * n];
    let mut grads = vec![[0.0; 2]; n];
    for (l, w) in quadrature_rule() {
        let (v, dl) = shape(element, l);
        for (g, d) in grads.iter_mut().zip(&dl) {
            *g = [
                d[0] * grad_l[0][0] + d[1] * grad_l[1][0] + d[2] * grad_l[2][0],
                d[0] * grad_l[0][1] + d[1] * grad_l[1][1] + d[2] * grad_l[2][1],
            ];
        }
        let wa = w * area;
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] += wa * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                m[i * n + j] += wa * v[i] * v[j];
            }
        }
    }
    // exact symmetry regardless of summation order
    for i in 0..n {
        for j in 0..i {
            let ks = 0.5 * (k[i * n + j] + k[j * n + i]);
            let ms = 0.5 * (m[i * n + j] + m[j * n + i]);
            k[i * n + j] = ks;
            k[j * n + i] = ks;
            m[i * n + j] = ms;
            m[j * n + i] = ms;
        }
    }
    (k, m)
}

/// Per-element conductivity and density.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPair {
    pub c: Vec<f64>,
    pub rho: Vec<f64>,
}

impl CoefficientPair {
    pub fn uniform(n: usize, c: f64, rho: f64) -> Self {
        Self {
            c: vec![c; n],
            rho: vec![rho; n],
        }
    }
}

/// Arithmetic-mean coefficients `c = c1 + (c2 - c1) θ`, `ρ = ρ1 + (ρ2 - ρ1) θ`.
pub fn coefficients_from_density(theta: &[f64], materials: &Materials) -> CoefficientPair {
    let Materials { c1, c2, rho1, rho2 } = *materials;
    CoefficientPair {
        c: theta.iter().map(|&t| c1 + (c2 - c1) * t).collect(),
        rho: theta.iter().map(|&t| rho1 + (rho2 - rho1) * t).collect(),
    }
}

/// Symmetric sparse matrix in compressed-row storage holding both triangles.
///
/// Rows have sorted column indices. Because the matrix is symmetric, the
/// same arrays also describe it in compressed-column form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

#[derive(Debug, PartialEq)]
pub(crate) struct Pattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Pattern {
    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }
}

impl SparseSymMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    /// Only the given entries are stored; the caller supplies both triangles.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch {
                    what: "triplet index",
                    expected: n,
                    actual: i.max(j),
                });
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let m = Self {
            pattern: Arc::new(Pattern { n, row_ptr, col_idx }),
            values,
        };
        if !m.is_symmetric() {
            return Err(Error::InvalidArgument("triplets do not form a symmetric matrix".into()));
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            pattern: Arc::new(Pattern {
                n,
                row_ptr: (0..=n).collect(),
                col_idx: (0..n).collect(),
            }),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.pattern.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.pattern.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn is_symmetric(&self) -> bool {
        let p = &self.pattern;
        (0..p.n).all(|i| {
            (p.row_ptr[i]..p.row_ptr[i + 1]).all(|k| {
                p.position(p.col_idx[k], i)
                    .is_some_and(|kt| self.values[kt] == self.values[k])
            })
        })
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate().take(p.n) {
            let mut s = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                s += self.values[k] * x[p.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            pattern: Arc::clone(&self.pattern),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let p = &self.pattern;
        let mut d = vec![vec![0.0; p.n]; p.n];
        for (i, row) in d.iter_mut().enumerate() {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                row[p.col_idx[k]] = self.values[k];
            }
        }
        d
    }

    pub(crate) fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub(crate) fn faer_symbolic(&self) -> faer::sparse::SymbolicSparseColMatRef<'_, usize> {
        faer::sparse::SymbolicSparseColMatRef::new_checked(
            self.pattern.n,
            self.pattern.n,
            &self.pattern.row_ptr,
            None,
            &self.pattern.col_idx,
        )
    }

    pub(crate) fn faer_ref(&self) -> faer::sparse::SparseColMatRef<'_, usize, f64> {
        faer::sparse::SparseColMatRef::new(self.faer_symbolic(), &self.values)
    }
}

/// Reusable assembly context for one mesh and one state space.
///
/// Holds the unit-coefficient element matrices and, for every element,
/// the storage position of each local pair in the reduced matrix, so that
/// assembling for new coefficients is a single pass over the elements.
#[derive(Debug, Clone)]
pub struct Assembler {
    element: Element,
    dofmap: DofMap,
    areas: Vec<f64>,
    stiffness_local: Vec<f64>,
    mass_local: Vec<f64>,
    scatter: Vec<usize>,
    pattern: Arc<Pattern>,
}

const SKIP: usize = usize::MAX;

impl Assembler {
    pub fn new(mesh: &TriMesh, element: Element) -> Self {
        Self::with_dofmap(mesh, DofMap::new(mesh, element))
    }

    pub fn with_dofmap(mesh: &TriMesh, dofmap: DofMap) -> Self {
        let element = match dofmap.space() {
            Space::P1 => Element::P1,
            Space::P2 => Element::P2,
            Space::P0 => panic!("P0 is not a state space"),
        };
        let n = element.local_dofs();
        let nt = mesh.n_triangles();
        let mut stiffness_local = Vec::with_capacity(nt * n * n);
        let mut mass_local = Vec::with_capacity(nt * n * n);
        for t in 0..nt {
            let (k, m) = element_matrices(element, mesh.triangle_coords(t));
            stiffness_local.extend(k);
            mass_local.extend(m);
        }

        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); dofmap.n_free()];
        for t in 0..nt {
            let free: Vec<Option<usize>> = dofmap.cell_dofs(t).iter().map(|&d| dofmap.free_index(d)).collect();
            for i in free.iter().flatten() {
                rows[*i].extend(free.iter().flatten());
            }
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend(row);
            row_ptr.push(col_idx.len());
        }
        let pattern = Pattern {
            n: dofmap.n_free(),
            row_ptr,
            col_idx,
        };

        let mut scatter = Vec::with_capacity(nt * n * n);
        for t in 0..nt {
            let free: Vec<Option<usize>> = dofmap.cell_dofs(t).iter().map(|&d| dofmap.free_index(d)).collect();
            for fi in &free {
                for fj in &free {
                    scatter.push(match (fi, fj) {
                        (Some(i), Some(j)) => pattern.position(*i, *j).expect("pattern entry"),
                        _ => SKIP,
                    });
                }
            }
        }

        Self {
            element,
            dofmap,
            areas: mesh.element_areas(),
            stiffness_local,
            mass_local,
            scatter,
            pattern: Arc::new(pattern),
        }
    }

    pub fn element(&self) -> Element {
        self.element
    }

    pub fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn n_elements(&self) -> usize {
        self.areas.len()
    }

    fn assemble(&self, local: &[f64], coeff: &[f64], what: &'static str) -> Result<SparseSymMatrix> {
        if coeff.len() != self.n_elements() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.n_elements(),
                actual: coeff.len(),
            });
        }
        let nn = self.element.local_dofs().pow(2);
        let mut values = vec![0.0; self.pattern.col_idx.len()];
        for (t, &ce) in coeff.iter().enumerate() {
            let block = t * nn..(t + 1) * nn;
            for (&pos, &v) in self.scatter[block.clone()].iter().zip(&local[block]) {
                if pos != SKIP {
                    values[pos] += ce * v;
                }
            }
        }
        Ok(SparseSymMatrix {
            pattern: Arc::clone(&self.pattern),
            values,
        })
    }

    /// `A_uv = Σ_e c_e ∫_e ∇φ_u·∇φ_v` on the free dofs.
    pub fn stiffness(&self, coeffs: &CoefficientPair) -> Result<SparseSymMatrix> {
        self.assemble(&self.stiffness_local, &coeffs.c, "conductivity coefficients")
    }

    /// `B_uv = Σ_e ρ_e ∫_e φ_u φ_v` on the free dofs.
    pub fn mass(&self, coeffs: &CoefficientPair) -> Result<SparseSymMatrix> {
        self.assemble(&self.mass_local, &coeffs.rho, "density coefficients")
    }

    /// Per-element `(∫_e |∇u|², ∫_e u²)` for a field given on the free dofs.
    pub fn element_energies(&self, u_free: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if u_free.len() != self.dofmap.n_free() {
            return Err(Error::DimensionMismatch {
                what: "eigenvector length",
                expected: self.dofmap.n_free(),
                actual: u_free.len(),
            });
        }
        let u = self.dofmap.expand(u_free);
        let n = self.element.local_dofs();
        let mut grad_sq = Vec::with_capacity(self.n_elements());
        let mut sq = Vec::with_capacity(self.n_elements());
        let mut ue = vec![0.0; n];
        for t in 0..self.n_elements() {
            for (x, &d) in ue.iter_mut().zip(self.dofmap.cell_dofs(t)) {
                *x = u[d];
            }
            let k = &self.stiffness_local[t * n * n..(t + 1) * n * n];
            let m = &self.mass_local[t * n * n..(t + 1) * n * n];
            let (mut gk, mut gm) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    gk += ue[i] * k[i * n + j] * ue[j];
                    gm += ue[i] * m[i * n + j] * ue[j];
                }
            }
            grad_sq.push(gk.max(0.0));
            sq.push(gm.max(0.0));
        }
        Ok((grad_sq, sq))
    }

    /// Coefficients of the interpolant of `f` on all dofs (vertices, then edge midpoints).
    pub fn interpolate(&self, mesh: &TriMesh, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dofmap.n_dofs()];
        for t in 0..self.n_elements() {
            let p = mesh.triangle_coords(t);
            let dofs = self.dofmap.cell_dofs(t);
            for k in 0..3 {
                out[dofs[k]] = f(p[k]);
                if self.element == Element::P2 {
                    let q = p[(k + 1) % 3];
                    out[dofs[3 + k]] = f([0.5 * (p[k][0] + q[0]), 0.5 * (p[k][1] + q[1])]);
                }
            }
        }
        out
    }

    /// Restricts a full-dof vector to the free dofs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dofmap.n_free()];
        for (d, &v) in full.iter().enumerate() {
            if let Some(i) = self.dofmap.free_index(d) {
                out[i] = v;
            }
        }
        out
    }
}

pub fn assemble_stiffness(mesh: &TriMesh, dofmap: &DofMap, coeffs: &CoefficientPair) -> Result<SparseSymMatrix> {
    Assembler::with_dofmap(mesh, dofmap.clone()).stiffness(coeffs)
}

pub fn assemble_mass(mesh: &TriMesh, dofmap: &DofMap, coeffs: &CoefficientPair) -> Result<SparseSymMatrix> {
    Assembler::with_dofmap(mesh, dofmap.clone()).mass(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disk_mesh, build_square_mesh, DomainKind};

    /// Exact integration on a triangle via
    /// `∫ L1^a L2^b L3^c = 2|T| a! b! c! / (a + b + c + 2)!`,
    /// applied to products of polynomials in barycentric coordinates.
    mod symbolic {
        use std::collections::BTreeMap;

        pub type Poly = BTreeMap<[u32; 3], f64>;

        fn fact(n: u32) -> f64 {
            (1..=n).map(f64::from).product()
        }

        pub fn mul(p: &Poly, q: &Poly) -> Poly {
            let mut r = Poly::new();
            for (a, x) in p {
                for (b, y) in q {
                    *r.entry([a[0] + b[0], a[1] + b[1], a[2] + b[2]]).or_default() += x * y;
                }
            }
            r
        }

        pub fn integrate(p: &Poly, area: f64) -> f64 {
            p.iter()
                .map(|(e, c)| c * 2.0 * area * fact(e[0]) * fact(e[1]) * fact(e[2]) / fact(e[0] + e[1] + e[2] + 2))
                .sum()
        }

        pub fn deriv(p: &Poly, k: usize) -> Poly {
            let mut r = Poly::new();
            for (e, c) in p {
                if e[k] > 0 {
                    let mut f = *e;
                    f[k] -= 1;
                    *r.entry(f).or_default() += c * e[k] as f64;
                }
            }
            r
        }

        fn mono(e: [u32; 3], c: f64) -> Poly {
            Poly::from([(e, c)])
        }

        /// P2 basis: `L_i (2 L_i - 1)` then `4 L_i L_{i+1}`.
        pub fn p2_basis() -> Vec<Poly> {
            let unit = |i: usize| {
                let mut e = [0; 3];
                e[i] = 1;
                e
            };
            let mut out = Vec::new();
            for i in 0..3 {
                let mut sq = unit(i);
                sq[i] = 2;
                let mut p = mono(sq, 2.0);
                *p.entry(unit(i)).or_default() -= 1.0;
                out.push(p);
            }
            for i in 0..3 {
                let j = (i + 1) % 3;
                let mut e = unit(i);
                e[j] = 1;
                out.push(mono(e, 4.0));
            }
            out
        }
    }

    fn reference_triangle() -> [[f64; 2]; 3] {
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    }

    #[test]
    fn p2_reference_matrices_match_symbolic_integration() {
        for tri in [reference_triangle(), [[0.3, -0.2], [2.0, 0.4], [0.7, 1.9]]] {
            let [p, q, r] = tri;
            let area = crate::mesh::signed_area(p, q, r);
            let gl = [
                [(q[1] - r[1]) / (2.0 * area), (r[0] - q[0]) / (2.0 * area)],
                [(r[1] - p[1]) / (2.0 * area), (p[0] - r[0]) / (2.0 * area)],
                [(p[1] - q[1]) / (2.0 * area), (q[0] - p[0]) / (2.0 * area)],
            ];
            let basis = symbolic::p2_basis();
            let (k, m) = element_matrices(Element::P2, tri);
            for i in 0..6 {
                for j in 0..6 {
                    let mass = symbolic::integrate(&symbolic::mul(&basis[i], &basis[j]), area);
                    let mut stiff = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            let dot = gl[a][0] * gl[b][0] + gl[a][1] * gl[b][1];
                            let prod = symbolic::mul(&symbolic::deriv(&basis[i], a), &symbolic::deriv(&basis[j], b));
                            stiff += dot * symbolic::integrate(&prod, area);
                        }
                    }
                    assert!(
                        (m[i * 6 + j] - mass).abs() < 1e-15,
                        "mass {i},{j}: {} vs {mass}",
                        m[i * 6 + j]
                    );
                    assert!(
                        (k[i * 6 + j] - stiff).abs() < 1e-13,
                        "stiff {i},{j}: {} vs {stiff}",
                        k[i * 6 + j]
                    );
                }
            }
        }
    }

    #[test]
    fn p2_reference_mass_known_entries() {
        // area/180 * {6 on vertex diagonal, 32 on edge diagonal, -1 vertex-vertex}
        let (_, m) = element_matrices(Element::P2, reference_triangle());
        let s = 0.5 / 180.0;
        assert!((m[0] - 6.0 * s).abs() < 1e-16);
        assert!((m[3 * 6 + 3] - 32.0 * s).abs() < 1e-15);
        assert!((m[1] + s).abs() < 1e-16);
    }

    #[test]
    fn quadrature_weights_sum_to_one() {
        let s: f64 = quadrature_rule().iter().map(|q| q.1).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coefficient_endpoints() {
        let mat = Materials {
            c1: 0.5,
            c2: 1.0,
            rho1: 0.3,
            rho2: 0.7,
        };
        let cp = coefficients_from_density(&[0.0, 1.0, 0.5], &mat);
        assert_eq!(cp.c[0], 0.5);
        assert_eq!(cp.rho[1], 0.7);
        assert_eq!(cp.c[2], 0.75);
    }

    #[test]
    fn p2_dofs_shared_across_edges() {
        let mesh = build_square_mesh(3, 1.0).unwrap();
        let dm = DofMap::new(&mesh, Element::P2);
        assert_eq!(dm.n_dofs(), 16 + mesh.edges().len());
        // interior edges are seen from both sides: every edge dof appears in one or two cells
        let mut seen = vec![0; dm.n_dofs()];
        for t in 0..dm.n_cells() {
            for &d in &dm.cell_dofs(t)[3..] {
                seen[d] += 1;
            }
        }
        for e in mesh.edges() {
            let n = seen[mesh.n_vertices() + mesh.edges().iter().position(|x| *x == e).unwrap()];
            assert_eq!(n, if e.is_boundary() { 1 } else { 2 });
        }
        // 12 boundary vertices plus 12 boundary edges
        assert_eq!(dm.dirichlet_dofs().len(), 24);
    }

    #[test]
    fn stiffness_is_deterministic_and_linear() {
        let mesh = build_disk_mesh(24, 1.0).unwrap();
        let asm = Assembler::new(&mesh, Element::P2);
        let n = mesh.n_triangles();
        let a1 = asm.stiffness(&CoefficientPair::uniform(n, 1.0, 1.0)).unwrap();
        let a1b = Assembler::new(&build_disk_mesh(24, 1.0).unwrap(), Element::P2)
            .stiffness(&CoefficientPair::uniform(n, 1.0, 1.0))
            .unwrap();
        assert_eq!(a1.values(), a1b.values());
        let a2 = asm.stiffness(&CoefficientPair::uniform(n, 2.0, 1.0)).unwrap();
        for (x, y) in a1.values().iter().zip(a2.values()) {
            assert_eq!(2.0 * x, *y);
        }
        assert!(a1.is_symmetric());
        let b3 = asm.mass(&CoefficientPair::uniform(n, 1.0, 3.0)).unwrap();
        let b1 = asm.mass(&CoefficientPair::uniform(n, 1.0, 1.0)).unwrap();
        for (x, y) in b1.values().iter().zip(b3.values()) {
            assert!((3.0 * x - y).abs() <= 1e-15 * y.abs());
        }
    }

    #[test]
    fn mass_of_constant_function_is_area() {
        // with no Dirichlet edges, 1ᵀ B 1 is the domain area
        let mesh = build_square_mesh(4, 1.5).unwrap();
        let open = TriMesh::from_parts(
            mesh.vertices().to_vec(),
            mesh.triangles().to_vec(),
            vec![],
            DomainKind::Square { ratio: 1.5 },
        )
        .unwrap();
        for element in [Element::P1, Element::P2] {
            let asm = Assembler::new(&open, element);
            assert_eq!(asm.dofmap().n_free(), asm.dofmap().n_dofs());
            let b = asm
                .mass(&CoefficientPair::uniform(open.n_triangles(), 1.0, 1.0))
                .unwrap();
            let ones = vec![1.0; b.dim()];
            assert!((b.quad_form(&ones) - 1.5).abs() < 1e-13);
            let a = asm
                .stiffness(&CoefficientPair::uniform(open.n_triangles(), 1.0, 1.0))
                .unwrap();
            assert!(a.quad_form(&ones).abs() < 1e-12);
        }
    }

    #[test]
    fn stiffness_reproduces_dirichlet_energy_of_quadratic() {
        // u = x^2 + xy lies in P2; ∫|∇u|² over [0,1]² = ∫(2x+y)² + x² = 3
        let mesh = build_square_mesh(3, 1.0).unwrap();
        let open = TriMesh::from_parts(
            mesh.vertices().to_vec(),
            mesh.triangles().to_vec(),
            vec![],
            mesh.domain(),
        )
        .unwrap();
        let asm = Assembler::new(&open, Element::P2);
        let u = asm.interpolate(&open, |p| p[0] * p[0] + p[0] * p[1]);
        let a = asm
            .stiffness(&CoefficientPair::uniform(open.n_triangles(), 1.0, 1.0))
            .unwrap();
        let exact = 3.0;
        assert!((a.quad_form(&u) - exact).abs() < 1e-12, "{}", a.quad_form(&u));
        let (g, _) = asm.element_energies(&u).unwrap();
        assert!((g.iter().sum::<f64>() - exact).abs() < 1e-12);
    }

    #[test]
    fn vertex_ordering_does_not_change_element_matrices() {
        let tri = [[0.1, 0.2], [1.3, 0.1], [0.4, 0.9]];
        let rotated = [tri[1], tri[2], tri[0]];
        let (k, m) = element_matrices(Element::P2, tri);
        let (kr, mr) = element_matrices(Element::P2, rotated);
        // local dof i of `rotated` is local dof perm[i] of `tri`
        let perm = [1, 2, 0, 4, 5, 3];
        for i in 0..6 {
            for j in 0..6 {
                assert!((kr[i * 6 + j] - k[perm[i] * 6 + perm[j]]).abs() < 1e-13);
                assert!((mr[i * 6 + j] - m[perm[i] * 6 + perm[j]]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mesh = build_square_mesh(2, 1.0).unwrap();
        let asm = Assembler::new(&mesh, Element::P2);
        let err = asm.stiffness(&CoefficientPair::uniform(3, 1.0, 1.0)).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 8,
                actual: 3,
                ..
            }
        ));
    }

    #[test]
    fn free_dof_matrices_are_positive_definite() {
        let mesh = build_square_mesh(4, 1.0).unwrap();
        let asm = Assembler::new(&mesh, Element::P2);
        let theta: Vec<f64> = (0..mesh.n_triangles()).map(|t| (t % 5) as f64 / 4.0).collect();
        let cp = coefficients_from_density(&theta, &Materials::default());
        for m in [asm.stiffness(&cp).unwrap(), asm.mass(&cp).unwrap()] {
            m.faer_ref().sp_cholesky(faer::Side::Lower).expect("SPD");
        }
    }
}
