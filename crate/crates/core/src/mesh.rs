//! Structured triangulations of the disk and of rectangles.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Label carried by every Dirichlet boundary edge.
pub const DIRICHLET_LABEL: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    /// Regular polygon inscribed in the circle of the given radius, centered at the origin.
    Disk { radius: f64 },
    /// The rectangle `[0, ratio] x [0, 1]`.
    Square { ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub label: u32,
}

/// An edge of the triangulation together with the triangles sharing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub triangles: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles[1].is_none()
    }
}

/// A conforming triangulation with counterclockwise triangles.
///
/// Immutable once built; every constructor checks orientation.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    domain: DomainKind,
}

impl TriMesh {
    /// Builds a mesh from raw parts, rejecting out-of-range indices and
    /// triangles whose signed area is not strictly positive.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        domain: DomainKind,
    ) -> Result<Self> {
        let nv = vertices.len();
        for (index, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::MeshParameter(format!(
                    "triangle {index} references a vertex out of range"
                )));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { index, area });
            }
        }
        for edge in &boundary_edges {
            if edge.vertices.iter().any(|&v| v >= nv) {
                return Err(Error::MeshParameter(
                    "boundary edge references a vertex out of range".into(),
                ));
            }
        }
        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            domain,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [p, q, r] = self.triangle_coords(t);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Per-triangle areas.
    pub fn element_areas(&self) -> Vec<f64> {
        (0..self.n_triangles())
            .map(|t| {
                let [p, q, r] = self.triangle_coords(t);
                signed_area(p, q, r)
            })
            .collect()
    }

    pub fn total_area(&self) -> f64 {
        self.element_areas().iter().sum()
    }

    /// Longest triangle edge.
    pub fn max_diameter(&self) -> f64 {
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        (0..self.n_triangles())
            .map(|t| {
                let [p, q, r] = self.triangle_coords(t);
                d(p, q).max(d(q, r)).max(d(r, p))
            })
            .fold(0.0, f64::max)
    }

    /// Axis-aligned bounding box `([xmin, ymin], [xmax, ymax])`.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Unique edges in order of first appearance, each with its one or two triangles.
    pub fn edges(&self) -> Vec<Edge> {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::with_capacity(3 * self.n_triangles() / 2 + 1);
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                match index.get(&key) {
                    Some(&e) => {
                        if edges[e].triangles[1].is_some() {
                            // third triangle on an edge; recorded as a validation failure
                            edges[e].triangles[1] = Some(usize::MAX);
                        } else {
                            edges[e].triangles[1] = Some(t);
                        }
                    }
                    None => {
                        index.insert(key, edges.len());
                        edges.push(Edge {
                            vertices: [key.0, key.1],
                            triangles: [Some(t), None],
                        });
                    }
                }
            }
        }
        edges
    }

    /// Checks orientation, edge-manifoldness and that the labeled boundary
    /// edges are exactly the edges owned by a single triangle.
    pub fn validate(&self) -> Result<()> {
        for (index, area) in self.element_areas().into_iter().enumerate() {
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { index, area });
            }
        }
        let edges = self.edges();
        if edges.iter().any(|e| e.triangles[1] == Some(usize::MAX)) {
            return Err(Error::MeshParameter(
                "an edge is shared by more than two triangles".into(),
            ));
        }
        let mut open: Vec<(usize, usize)> = edges
            .iter()
            .filter(|e| e.is_boundary())
            .map(|e| (e.vertices[0], e.vertices[1]))
            .collect();
        let mut labeled: Vec<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|e| (e.vertices[0].min(e.vertices[1]), e.vertices[0].max(e.vertices[1])))
            .collect();
        open.sort_unstable();
        labeled.sort_unstable();
        if open != labeled {
            return Err(Error::MeshParameter(format!(
                "{} boundary edges in the triangulation but {} labeled",
                open.len(),
                labeled.len()
            )));
        }
        Ok(())
    }

    /// Index of a triangle containing `p`, if any. Linear scan; callers that
    /// query many points should use [`PointLocator`].
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        (0..self.n_triangles()).find(|&t| contains(self.triangle_coords(t), p))
    }
}

/// Signed area of the triangle `(p, q, r)`, positive when counterclockwise.
pub fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

fn contains(tri: [[f64; 2]; 3], p: [f64; 2]) -> bool {
    let eps = -1e-12 * signed_area(tri[0], tri[1], tri[2]);
    signed_area(tri[0], tri[1], p) >= eps
        && signed_area(tri[1], tri[2], p) >= eps
        && signed_area(tri[2], tri[0], p) >= eps
}

/// Uniform bucket grid for point-in-triangle queries.
#[derive(Debug)]
pub struct PointLocator<'a> {
    mesh: &'a TriMesh,
    origin: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let side = (mesh.n_triangles() as f64).sqrt().ceil().max(1.0) as usize;
        let dims = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE),
        ];
        let mut buckets = vec![Vec::new(); side * side];
        let clampi = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        for t in 0..mesh.n_triangles() {
            let tri = mesh.triangle_coords(t);
            let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
            for p in tri {
                x0 = x0.min(p[0]);
                y0 = y0.min(p[1]);
                x1 = x1.max(p[0]);
                y1 = y1.max(p[1]);
            }
            let i0 = clampi((x0 - lo[0]) / cell[0], side);
            let i1 = clampi((x1 - lo[0]) / cell[0], side);
            let j0 = clampi((y0 - lo[1]) / cell[1], side);
            let j1 = clampi((y1 - lo[1]) / cell[1], side);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * side + i].push(t);
                }
            }
        }
        Self {
            mesh,
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        let fi = (p[0] - self.origin[0]) / self.cell[0];
        let fj = (p[1] - self.origin[1]) / self.cell[1];
        if fi < 0.0 || fj < 0.0 {
            return None;
        }
        let (i, j) = (fi as usize, fj as usize);
        if i > self.dims[0] || j > self.dims[1] {
            return None;
        }
        let i = i.min(self.dims[0] - 1);
        let j = j.min(self.dims[1] - 1);
        self.buckets[j * self.dims[0] + i]
            .iter()
            .copied()
            .find(|&t| contains(self.mesh.triangle_coords(t), p))
    }
}

/// Triangulates the regular `n_boundary`-gon inscribed in the circle of
/// the given radius.
///
/// Vertices sit on `m ≈ n_boundary / 2π` concentric rings at radii `k R / m`,
/// ring `k` carrying about `k n_boundary / m` equally spaced vertices, and
/// consecutive rings are stitched by an angular sweep.
pub fn build_disk_mesh(n_boundary: usize, radius: f64) -> Result<TriMesh> {
    if n_boundary < 8 {
        return Err(Error::MeshParameter(format!(
            "disk mesh needs at least 8 boundary vertices, got {n_boundary}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::MeshParameter(format!("radius must be positive, got {radius}")));
    }
    let rings = ((n_boundary as f64 / (2.0 * PI)).round() as usize).max(1);
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_start = Vec::with_capacity(rings);
    let mut ring_len = Vec::with_capacity(rings);
    for k in 1..=rings {
        let count = if k == rings {
            n_boundary
        } else {
            ((n_boundary * k) as f64 / rings as f64).round().max(6.0) as usize
        };
        let r = radius * k as f64 / rings as f64;
        ring_start.push(vertices.len());
        ring_len.push(count);
        for j in 0..count {
            let a = 2.0 * PI * j as f64 / count as f64;
            vertices.push([r * a.cos(), r * a.sin()]);
        }
    }

    let mut triangles = Vec::new();
    let (s1, n1) = (ring_start[0], ring_len[0]);
    for j in 0..n1 {
        triangles.push([0, s1 + j, s1 + (j + 1) % n1]);
    }
    for k in 1..rings {
        stitch_rings(
            (ring_start[k - 1], ring_len[k - 1]),
            (ring_start[k], ring_len[k]),
            &mut triangles,
        );
    }

    let (sb, nb) = (ring_start[rings - 1], ring_len[rings - 1]);
    let boundary_edges = (0..nb)
        .map(|j| BoundaryEdge {
            vertices: [sb + j, sb + (j + 1) % nb],
            label: DIRICHLET_LABEL,
        })
        .collect();
    TriMesh::from_parts(vertices, triangles, boundary_edges, DomainKind::Disk { radius })
}

/// Fills the annulus between two rings whose vertices both start at angle 0.
fn stitch_rings(inner: (usize, usize), outer: (usize, usize), triangles: &mut Vec<[usize; 3]>) {
    let (si, ni) = inner;
    let (so, no) = outer;
    let (mut i, mut o) = (0, 0);
    while i < ni || o < no {
        let next_inner = (i + 1) as f64 / ni as f64;
        let next_outer = (o + 1) as f64 / no as f64;
        let advance_inner = o == no || (i < ni && next_inner <= next_outer);
        let vi = si + i % ni;
        let vo = so + o % no;
        if advance_inner {
            triangles.push([vi, vo, si + (i + 1) % ni]);
            i += 1;
        } else {
            triangles.push([vi, vo, so + (o + 1) % no]);
            o += 1;
        }
    }
}

/// Structured triangulation of `[0, ratio] x [0, 1]` with `n_per_side`
/// cells along the unit side and `round(n_per_side * ratio)` along the
/// other; each cell is split along its rising diagonal.
pub fn build_square_mesh(n_per_side: usize, ratio: f64) -> Result<TriMesh> {
    if n_per_side < 2 {
        return Err(Error::MeshParameter(format!(
            "square mesh needs at least 2 cells per side, got {n_per_side}"
        )));
    }
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::MeshParameter(format!("ratio must be positive, got {ratio}")));
    }
    let ny = n_per_side;
    let nx = ((n_per_side as f64 * ratio).round() as usize).max(1);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([ratio * i as f64 / nx as f64, j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    let mut push = |a: usize, b: usize| {
        boundary_edges.push(BoundaryEdge {
            vertices: [a, b],
            label: DIRICHLET_LABEL,
        })
    };
    for i in 0..nx {
        push(id(i, 0), id(i + 1, 0));
        push(id(i + 1, ny), id(i, ny));
    }
    for j in 0..ny {
        push(id(nx, j), id(nx, j + 1));
        push(id(0, j + 1), id(0, j));
    }
    TriMesh::from_parts(vertices, triangles, boundary_edges, DomainKind::Square { ratio })
}

/// Area of the regular `n`-gon inscribed in the circle of radius `r`.
pub fn regular_polygon_area(n: usize, r: f64) -> f64 {
    0.5 * n as f64 * r * r * (2.0 * PI / n as f64).sin()
}
