//! Writers and readers for densities, eigenfunctions and run histories:
//! legacy ASCII VTK, CSV, and binary PPM heatmaps. Every writer goes
//! through a temporary file in the target directory and a rename.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::design::DensityField;
use crate::error::{Error, Result};
use crate::fem::DofMap;
use crate::mesh::{PointLocator, TriMesh};
use crate::optimizer::RunHistory;

pub const HISTORY_HEADER: &str = "iter,lambda1,volume_error,stationarity";
pub const DENSITY_HEADER: &str = "element,density";
pub const MIN_HEATMAP_RESOLUTION: usize = 64;

/// Writes `bytes` to `path` via a sibling temporary file and a rename, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn vtk_geometry(mesh: &TriMesh, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID"
    );
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for [x, y] in mesh.vertices() {
        let _ = writeln!(s, "{x:.16e} {y:.16e} 0");
    }
    let nt = mesh.n_triangles();
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    s
}

pub fn write_mesh_vtk(mesh: &TriMesh, path: &Path) -> Result<()> {
    write_atomic(path, vtk_geometry(mesh, "mesh").as_bytes())
}

pub fn density_vtk_string(mesh: &TriMesh, theta: &DensityField) -> Result<String> {
    if theta.len() != mesh.n_triangles() {
        return Err(Error::DimensionMismatch {
            what: "density field",
            expected: mesh.n_triangles(),
            actual: theta.len(),
        });
    }
    let mut s = vtk_geometry(mesh, "density");
    let _ = writeln!(
        s,
        "CELL_DATA {}\nSCALARS density double 1\nLOOKUP_TABLE default",
        theta.len()
    );
    for v in &theta.values {
        let _ = writeln!(s, "{v:.16e}");
    }
    Ok(s)
}

/// Legacy VTK unstructured grid with the cell scalar `density`.
pub fn write_density_vtk(mesh: &TriMesh, theta: &DensityField, path: &Path) -> Result<()> {
    write_atomic(path, density_vtk_string(mesh, theta)?.as_bytes())
}

/// Reads the `density` cell scalars back from a file written by
/// [`write_density_vtk`].
pub fn read_density_vtk(path: &Path) -> Result<DensityField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut tokens = text.split_whitespace();
    let count = loop {
        match tokens.next() {
            Some("CELL_DATA") => {
                let n = tokens
                    .next()
                    .ok_or_else(|| parse_err("CELL_DATA without count".into()))?;
                break n
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("bad CELL_DATA count: {e}")))?;
            }
            Some(_) => {}
            None => return Err(parse_err("no CELL_DATA section".into())),
        }
    };
    match (tokens.next(), tokens.next()) {
        (Some("SCALARS"), Some("density")) => {}
        _ => return Err(parse_err("expected `SCALARS density`".into())),
    }
    // type, optional component count, then the lookup table line
    for tok in tokens.by_ref() {
        if tok == "LOOKUP_TABLE" {
            break;
        }
    }
    tokens.next();
    let values = tokens
        .take(count)
        .map(|t| t.parse::<f64>().map_err(|e| parse_err(format!("bad value `{t}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != count {
        return Err(parse_err(format!(
            "expected {count} cell values, found {}",
            values.len()
        )));
    }
    Ok(DensityField::new(values))
}

/// Vertex values of an eigenfunction (zero on the Dirichlet boundary) as
/// point data, optionally with the density as cell data.
pub fn write_eigenfunction_vtk(
    mesh: &TriMesh,
    dofmap: &DofMap,
    u_free: &[f64],
    theta: Option<&DensityField>,
    path: &Path,
) -> Result<()> {
    if u_free.len() != dofmap.n_free() {
        return Err(Error::DimensionMismatch {
            what: "eigenvector",
            expected: dofmap.n_free(),
            actual: u_free.len(),
        });
    }
    let full = dofmap.expand(u_free);
    let mut s = match theta {
        Some(t) => density_vtk_string(mesh, t)?,
        None => vtk_geometry(mesh, "eigenfunction"),
    };
    // P1 and P2 number the vertex dofs first
    let _ = writeln!(
        s,
        "POINT_DATA {}\nSCALARS eigenfunction double 1\nLOOKUP_TABLE default",
        mesh.n_vertices()
    );
    for v in &full[..mesh.n_vertices()] {
        let _ = writeln!(s, "{v:.16e}");
    }
    write_atomic(path, s.as_bytes())
}

pub fn density_csv_string(theta: &DensityField) -> String {
    let mut s = String::with_capacity(32 * theta.len());
    s.push_str(DENSITY_HEADER);
    s.push('\n');
    for (i, v) in theta.values.iter().enumerate() {
        let _ = writeln!(s, "{i},{v:.16e}");
    }
    s
}

pub fn write_density_csv(theta: &DensityField, path: &Path) -> Result<()> {
    write_atomic(path, density_csv_string(theta).as_bytes())
}

pub fn read_density_csv(path: &Path) -> Result<DensityField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == DENSITY_HEADER => {}
        _ => return Err(parse_err(1, format!("expected header `{DENSITY_HEADER}`"))),
    }
    let mut values = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (idx, v) = line
            .split_once(',')
            .ok_or_else(|| parse_err(i + 1, "expected `element,density`".into()))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|e| parse_err(i + 1, format!("bad element index: {e}")))?;
        if idx != values.len() {
            return Err(parse_err(i + 1, format!("element {idx} out of order")));
        }
        values.push(
            v.trim()
                .parse()
                .map_err(|e| parse_err(i + 1, format!("bad density: {e}")))?,
        );
    }
    Ok(DensityField::new(values))
}

pub fn history_csv_string(history: &RunHistory) -> Result<String> {
    if history.records.is_empty() {
        return Err(Error::InvalidArgument("empty run history".into()));
    }
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for r in &history.records {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e}",
            r.iteration, r.lambda1, r.volume_error, r.stationarity
        );
    }
    Ok(s)
}

/// One row per iteration under [`HISTORY_HEADER`].
pub fn write_history_csv(history: &RunHistory, path: &Path) -> Result<()> {
    write_atomic(path, history_csv_string(history)?.as_bytes())
}

/// Rasterizes `theta` over the mesh bounding box into a binary PPM, the
/// longer side `resolution` pixels. θ = 0 is white, θ = 1 black; pixels
/// outside the mesh are white.
pub fn heatmap_ppm(mesh: &TriMesh, theta: &DensityField, resolution: usize) -> Result<Vec<u8>> {
    if resolution < MIN_HEATMAP_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "heatmap resolution must be at least {MIN_HEATMAP_RESOLUTION}, got {resolution}"
        )));
    }
    if theta.len() != mesh.n_triangles() {
        return Err(Error::DimensionMismatch {
            what: "density field",
            expected: mesh.n_triangles(),
            actual: theta.len(),
        });
    }
    let (lo, hi) = mesh.bounding_box();
    let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
    let pixel = w.max(h) / resolution as f64;
    let width = ((w / pixel).round() as usize).max(1);
    let height = ((h / pixel).round() as usize).max(1);
    let locator = PointLocator::new(mesh);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(3 * width * height);
    for row in 0..height {
        let y = hi[1] - (row as f64 + 0.5) * pixel;
        for col in 0..width {
            let x = lo[0] + (col as f64 + 0.5) * pixel;
            let g = match locator.locate([x, y]) {
                Some(t) => (255.0 * (1.0 - theta.values[t].clamp(0.0, 1.0))).round() as u8,
                None => 255,
            };
            out.extend_from_slice(&[g, g, g]);
        }
    }
    Ok(out)
}

pub fn write_heatmap(mesh: &TriMesh, theta: &DensityField, path: &Path, resolution: usize) -> Result<()> {
    write_atomic(path, &heatmap_ppm(mesh, theta, resolution)?)
}

/// Paths of everything a run writes into its output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub density_vtk: PathBuf,
    pub density_csv: PathBuf,
    pub eigenfunction_vtk: PathBuf,
    pub history_csv: PathBuf,
    pub heatmap: PathBuf,
}

impl RunArtifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            density_vtk: dir.join("density.vtk"),
            density_csv: dir.join("density.csv"),
            eigenfunction_vtk: dir.join("eigenfunction.vtk"),
            history_csv: dir.join("history.csv"),
            heatmap: dir.join("density.ppm"),
        }
    }

    /// Writes all artifacts of a finished run.
    pub fn write(&self, mesh: &TriMesh, dofmap: &DofMap, history: &RunHistory, resolution: usize) -> Result<()> {
        let theta = &history.final_density;
        write_density_vtk(mesh, theta, &self.density_vtk)?;
        write_density_csv(theta, &self.density_csv)?;
        write_eigenfunction_vtk(
            mesh,
            dofmap,
            &history.final_eigenvector,
            Some(theta),
            &self.eigenfunction_vtk,
        )?;
        write_history_csv(history, &self.history_csv)?;
        write_heatmap(mesh, theta, &self.heatmap, resolution)
    }
}
