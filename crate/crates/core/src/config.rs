//! Plain `key = value` run configuration with named presets.
//!
//! ```text
//! # max_both on the unit square
//! variant = max_both
//! domain = square
//! n_per_side = 50
//! stepsize = 0.01
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::fem::Element;
use crate::mesh::{build_disk_mesh, build_square_mesh, TriMesh};
use crate::optimizer::{InitialDesign, ProblemSpec, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DomainChoice {
    #[default]
    Disk,
    Square,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshConfig {
    pub domain: DomainChoice,
    pub radius: f64,
    pub n_boundary: usize,
    /// Width of the `[0, ratio] × [0, 1]` rectangle.
    pub ratio: f64,
    pub n_per_side: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            domain: DomainChoice::Disk,
            radius: 1.0,
            n_boundary: 200,
            ratio: 1.0,
            n_per_side: 50,
        }
    }
}

impl MeshConfig {
    pub fn build(&self) -> Result<TriMesh> {
        match self.domain {
            DomainChoice::Disk => build_disk_mesh(self.n_boundary, self.radius),
            DomainChoice::Square => build_square_mesh(self.n_per_side, self.ratio),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ProblemSpec,
    pub mesh: MeshConfig,
    pub out_dir: Option<PathBuf>,
    pub heatmap_resolution: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spec: ProblemSpec::default(),
            mesh: MeshConfig::default(),
            out_dir: None,
            heatmap_resolution: 256,
        }
    }
}

pub const PRESETS: [&str; 12] = [
    "fig2a",
    "fig2b",
    "fig3a",
    "fig3b",
    "fig4a",
    "fig4b",
    "fig5a",
    "fig5b",
    "fig6a",
    "fig6b",
    "krein_min",
    "krein_max",
];

impl RunConfig {
    /// Named parameter sets of the reference experiments. Panel `a` is the
    /// disk, panel `b` the unit square, except `fig5*`: the square
    /// minimization started from the left half-plane.
    pub fn preset(name: &str) -> Result<Self> {
        let (variant, square) = match name {
            "fig2a" => (Variant::MaxBoth, false),
            "fig2b" => (Variant::MaxBoth, true),
            "fig3a" => (Variant::MaxNumeratorOnly, false),
            "fig3b" => (Variant::MaxNumeratorOnly, true),
            "fig4a" | "krein_min" => (Variant::MinDenominatorOnly, false),
            "fig4b" | "fig5a" | "fig5b" => (Variant::MinDenominatorOnly, true),
            "fig6a" | "krein_max" => (Variant::MaxDenominatorOnly, false),
            "fig6b" => (Variant::MaxDenominatorOnly, true),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown preset `{other}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        let mut cfg = RunConfig {
            spec: ProblemSpec::for_variant(variant),
            ..RunConfig::default()
        };
        if square {
            cfg.mesh.domain = DomainChoice::Square;
        }
        if name == "fig2b" {
            // the square max_both run oscillates at 0.05
            cfg.spec.stepsize = 0.01;
        }
        if name.starts_with("fig5") {
            cfg.spec.initial_design = InitialDesign::Halfplane { x_threshold: None };
        }
        Ok(cfg)
    }

    /// Serializes to text that [`parse_config`] reads back to `self`.
    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let m = &s.materials;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("variant", s.variant.to_string());
        kv("c1", format!("{:?}", m.c1));
        kv("c2", format!("{:?}", m.c2));
        kv("rho1", format!("{:?}", m.rho1));
        kv("rho2", format!("{:?}", m.rho2));
        kv("volume_fraction", format!("{:?}", s.volume_fraction));
        kv("stepsize", format!("{:?}", s.stepsize));
        kv("max_iter", s.max_iter.to_string());
        match &s.initial_design {
            InitialDesign::Uniform => kv("initial_design", "uniform".into()),
            InitialDesign::Halfplane { x_threshold } => {
                kv("initial_design", "halfplane".into());
                if let Some(x) = x_threshold {
                    kv("halfplane_x", format!("{x:?}"));
                }
            }
            InitialDesign::FromFile(p) => {
                kv("initial_design", "file".into());
                kv("initial_file", p.display().to_string());
            }
        }
        kv("vol_tol", format!("{:?}", s.vol_tol));
        kv("eigen_tol", format!("{:?}", s.eigen.tol));
        kv("eigen_max_iter", s.eigen.max_iter.to_string());
        kv("element", if s.element == Element::P1 { "p1" } else { "p2" }.into());
        if let Some(t) = s.stationarity_threshold {
            kv("stationarity_threshold", format!("{t:?}"));
        }
        let mc = &self.mesh;
        kv(
            "domain",
            if mc.domain == DomainChoice::Disk {
                "disk"
            } else {
                "square"
            }
            .into(),
        );
        kv("radius", format!("{:?}", mc.radius));
        kv("n_boundary", mc.n_boundary.to_string());
        kv("ratio", format!("{:?}", mc.ratio));
        kv("n_per_side", mc.n_per_side.to_string());
        if let Some(d) = &self.out_dir {
            kv("out_dir", d.display().to_string());
        }
        kv("heatmap_resolution", self.heatmap_resolution.to_string());
        out
    }
}

/// Parses a configuration on top of the default parameters.
pub fn parse_config(source: &str) -> Result<RunConfig> {
    parse_config_over(source, RunConfig::default())
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| err(line, format!("`{key}`: cannot parse `{v}`: {e}")))
}

fn positive(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(line, key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(err(line, format!("`{key}` must be positive, got {v}")));
    }
    Ok(x)
}

/// Parses `source` on top of `base` (a preset, usually). Changing the
/// variant resets the material constants to that variant's defaults unless
/// they are set explicitly.
pub fn parse_config_over(source: &str, base: RunConfig) -> Result<RunConfig> {
    let mut cfg = base;
    let mut variant: Option<(usize, Variant)> = None;
    let mut materials: [Option<(usize, f64)>; 4] = [None; 4];
    let mut initial: Option<(usize, String)> = None;
    let mut halfplane_x: Option<f64> = None;
    let mut initial_file: Option<PathBuf> = None;

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{text}`")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "variant" => variant = Some((line, value.parse().map_err(|e: String| err(line, e))?)),
            "c1" => materials[0] = Some((line, positive(line, key, value)?)),
            "c2" => materials[1] = Some((line, positive(line, key, value)?)),
            "rho1" => materials[2] = Some((line, positive(line, key, value)?)),
            "rho2" => materials[3] = Some((line, positive(line, key, value)?)),
            "volume_fraction" | "frac" => {
                let f: f64 = num(line, key, value)?;
                if !(f > 0.0 && f < 1.0) {
                    return Err(err(line, format!("`{key}` must lie in (0, 1), got {value}")));
                }
                cfg.spec.volume_fraction = f;
            }
            "stepsize" => cfg.spec.stepsize = positive(line, key, value)?,
            "max_iter" => cfg.spec.max_iter = num(line, key, value)?,
            "initial_design" => initial = Some((line, value.to_string())),
            "halfplane_x" => halfplane_x = Some(num(line, key, value)?),
            "initial_file" => initial_file = Some(PathBuf::from(value)),
            "vol_tol" => cfg.spec.vol_tol = positive(line, key, value)?,
            "eigen_tol" => cfg.spec.eigen.tol = positive(line, key, value)?,
            "eigen_max_iter" => {
                let n: usize = num(line, key, value)?;
                if n == 0 {
                    return Err(err(line, "`eigen_max_iter` must be positive"));
                }
                cfg.spec.eigen.max_iter = n;
            }
            "element" => {
                cfg.spec.element = match value.to_ascii_lowercase().as_str() {
                    "p1" => Element::P1,
                    "p2" => Element::P2,
                    _ => return Err(err(line, format!("`element` must be p1 or p2, got `{value}`"))),
                }
            }
            "stationarity_threshold" => cfg.spec.stationarity_threshold = Some(positive(line, key, value)?),
            "domain" => {
                cfg.mesh.domain = match value {
                    "disk" => DomainChoice::Disk,
                    "square" => DomainChoice::Square,
                    _ => return Err(err(line, format!("`domain` must be disk or square, got `{value}`"))),
                }
            }
            "radius" => cfg.mesh.radius = positive(line, key, value)?,
            "ratio" => cfg.mesh.ratio = positive(line, key, value)?,
            "n_boundary" => {
                let n: usize = num(line, key, value)?;
                if n < 8 {
                    return Err(err(line, format!("`n_boundary` must be at least 8, got {n}")));
                }
                cfg.mesh.n_boundary = n;
            }
            "n_per_side" => {
                let n: usize = num(line, key, value)?;
                if n < 2 {
                    return Err(err(line, format!("`n_per_side` must be at least 2, got {n}")));
                }
                cfg.mesh.n_per_side = n;
            }
            "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
            "heatmap_resolution" => {
                let n: usize = num(line, key, value)?;
                if n < crate::io::MIN_HEATMAP_RESOLUTION {
                    return Err(err(line, format!("`heatmap_resolution` must be at least 64, got {n}")));
                }
                cfg.heatmap_resolution = n;
            }
            other => return Err(err(line, format!("unknown key `{other}`"))),
        }
    }

    if let Some((_, v)) = variant {
        if v != cfg.spec.variant {
            cfg.spec.variant = v;
            cfg.spec.materials = v.default_materials();
        }
    }
    let m = &mut cfg.spec.materials;
    for (slot, value) in [&mut m.c1, &mut m.c2, &mut m.rho1, &mut m.rho2]
        .into_iter()
        .zip(&materials)
    {
        if let Some((_, v)) = value {
            *slot = *v;
        }
    }

    if let Some((line, kind)) = initial {
        cfg.spec.initial_design = match kind.as_str() {
            "uniform" => InitialDesign::Uniform,
            "halfplane" => InitialDesign::Halfplane {
                x_threshold: halfplane_x,
            },
            "file" => InitialDesign::FromFile(
                initial_file
                    .clone()
                    .ok_or_else(|| err(line, "`initial_design = file` needs `initial_file`"))?,
            ),
            _ => {
                return Err(err(
                    line,
                    format!("`initial_design` must be uniform, halfplane or file, got `{kind}`"),
                ))
            }
        };
    } else if let InitialDesign::Halfplane { x_threshold } = &mut cfg.spec.initial_design {
        if halfplane_x.is_some() {
            *x_threshold = halfplane_x;
        }
    }

    // cross-key invariants point at the variant or material line involved
    let blame = materials
        .iter()
        .flatten()
        .map(|(l, _)| *l)
        .chain(variant.map(|(l, _)| l))
        .max()
        .unwrap_or(0);
    cfg.spec.validate().map_err(|e| err(blame, e.to_string()))?;
    Ok(cfg)
}
