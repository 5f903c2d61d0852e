//! `twophase`: run, check and export two-phase eigenvalue design experiments.
//!
//! Every subcommand ends with a single `summary ...` line of `key=value`
//! pairs on stdout. Exit status is 0 when the command succeeded and its
//! checks passed, 1 when a check failed, 2 on errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twophase_core::config::{parse_config_over, DomainChoice, RunConfig};
use twophase_core::io::{
    read_density_csv, write_atomic, write_density_vtk, write_heatmap, RunArtifacts, MIN_HEATMAP_RESOLUTION,
};
use twophase_core::optimizer::{
    gray_area_fraction, krein_design, mismatch_area_fraction, run_projected_gradient, RunHistory,
};
use twophase_core::pencil_lab::pencil_suite;
use twophase_core::{DofMap, Error, Result, TriMesh, Variant};

const CONFIG_FILE: &str = "config.txt";

#[derive(Parser)]
#[command(
    name = "twophase",
    version,
    about = "Two-phase optimal design of the first Dirichlet eigenvalue"
)]
struct Cli {
    /// Log progress (-v: per-iteration eigenvalues).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the projected gradient method and write all artifacts.
    Run(ConfigArgs),
    /// Run both denominator-only variants on the disk and compare with the
    /// closed-form designs.
    VerifyKrein {
        #[command(flatten)]
        config: ConfigArgs,
        /// Largest accepted mismatch area fraction.
        #[arg(long, default_value_t = 0.05)]
        threshold: f64,
    },
    /// Run the matrix-pencil checks.
    PencilSuite {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Pseudo-concavity trials per pencil.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Directory for the per-trial CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the heatmap and VTK of a finished run from its CSV.
    Export {
        run_dir: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
    },
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// `key = value` configuration file, applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named parameter set (fig2a ... fig6b, krein_min, krein_max).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides `out_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let base = match &self.preset {
            Some(name) => RunConfig::preset(name)?,
            None => RunConfig::default(),
        };
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                parse_config_over(&text, base).map_err(|e| Error::Parse {
                    path: path.clone(),
                    message: e.to_string(),
                })?
            }
            None => base,
        };
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        Ok(cfg)
    }

    fn default_out(&self, fallback: &str) -> PathBuf {
        PathBuf::from("runs").join(self.preset.as_deref().unwrap_or(fallback))
    }
}

struct Summary {
    passed: bool,
    fields: Vec<(&'static str, String)>,
}

impl Summary {
    fn new(command: &str, passed: bool) -> Self {
        Self {
            passed,
            fields: vec![("command", command.to_string())],
        }
    }

    fn field(mut self, key: &'static str, value: impl ToString) -> Self {
        self.fields.push((key, value.to_string()));
        self
    }

    fn print(&self) {
        let status = if self.passed { "pass" } else { "fail" };
        let rest: Vec<String> = self.fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("summary status={status} {}", rest.join(" "));
    }
}

fn write_run(dir: &Path, cfg: &RunConfig, mesh: &TriMesh, history: &RunHistory) -> Result<()> {
    let artifacts = RunArtifacts::in_dir(dir);
    artifacts.write(
        mesh,
        &DofMap::new(mesh, cfg.spec.element),
        history,
        cfg.heatmap_resolution,
    )?;
    write_heatmap(
        mesh,
        &history.initial_density,
        &dir.join("initial.ppm"),
        cfg.heatmap_resolution,
    )?;
    let mut stored = cfg.clone();
    stored.out_dir = None;
    write_atomic(&dir.join(CONFIG_FILE), stored.to_text().as_bytes())
}

fn cmd_run(args: &ConfigArgs) -> Result<Summary> {
    let cfg = args.load()?;
    let mesh = cfg.mesh.build()?;
    log::info!(
        "{} on {} triangles, {} iterations",
        cfg.spec.variant,
        mesh.n_triangles(),
        cfg.spec.max_iter
    );
    let history = run_projected_gradient(&mesh, &cfg.spec)?;
    let dir = cfg.out_dir.clone().unwrap_or_else(|| args.default_out("run"));
    write_run(&dir, &cfg, &mesh, &history)?;
    let last = history.records.last();
    println!("final lambda1: {:.10}", history.final_lambda1);
    Ok(Summary::new("run", true)
        .field("variant", cfg.spec.variant)
        .field("iterations", history.records.len())
        .field("lambda1", format!("{:.10e}", history.final_lambda1))
        .field("volume_error", format!("{:.3e}", last.map_or(0.0, |r| r.volume_error)))
        .field("stationarity", format!("{:.3e}", last.map_or(0.0, |r| r.stationarity)))
        .field("seconds", format!("{:.2}", history.wall_time.as_secs_f64()))
        .field("out", dir.display()))
}

fn cmd_verify_krein(args: &ConfigArgs, threshold: f64) -> Result<Summary> {
    let cfg = args.load()?;
    if cfg.mesh.domain != DomainChoice::Disk {
        return Err(Error::InvalidArgument("verify-krein needs `domain = disk`".into()));
    }
    let mesh = cfg.mesh.build()?;
    let mut summary = Summary::new("verify-krein", true);
    for (variant, key, gray_key) in [
        (Variant::MinDenominatorOnly, "min_mismatch", "min_gray"),
        (Variant::MaxDenominatorOnly, "max_mismatch", "max_gray"),
    ] {
        let mut run_cfg = cfg.clone();
        run_cfg.spec.variant = variant;
        run_cfg.spec.materials = variant.default_materials();
        let history = run_projected_gradient(&mesh, &run_cfg.spec)?;
        let reference = krein_design(&mesh, variant, run_cfg.spec.volume_fraction)?;
        let mismatch = mismatch_area_fraction(&mesh, &history.final_density, &reference);
        let gray = gray_area_fraction(&mesh, &history.final_density, 0.05, 0.95);
        let ok = mismatch <= threshold;
        println!(
            "{variant}: mismatch area fraction {mismatch:.4} (threshold {threshold}), gray fraction {gray:.4}, lambda1 {:.8} {}",
            history.final_lambda1,
            if ok { "ok" } else { "FAILED" }
        );
        if let Some(dir) = &cfg.out_dir {
            let sub = dir.join(variant.name());
            write_run(&sub, &run_cfg, &mesh, &history)?;
            write_density_vtk(&mesh, &reference, &sub.join("reference.vtk"))?;
        }
        summary.passed &= ok;
        summary = summary
            .field(key, format!("{mismatch:.4}"))
            .field(gray_key, format!("{gray:.4}"));
    }
    Ok(summary)
}

fn cmd_pencil_suite(seed: u64, trials: usize, out: Option<&Path>) -> Result<Summary> {
    let r = pencil_suite(seed, trials)?;
    println!(
        "pseudo-concavity: {} pencils ({} with a double eigenvalue), {} trials, min margin {:.3e}",
        r.pencils, r.multiplicity_pencils, r.trials, r.min_margin
    );
    println!("violations: {}", r.violations);
    println!("extreme-point failures: {}", r.extreme_point_failures);
    println!(
        "stationary-is-global failures: {} (max relative gap {:.2e})",
        r.stationary_failures, r.stationary_max_gap
    );
    println!("non-affine control violations: {}", r.control_violations);
    if let Some(dir) = out {
        write_atomic(&dir.join("pseudoconcavity.csv"), r.pseudoconcavity_csv.as_bytes())?;
    }
    Ok(Summary::new("pencil-suite", r.passed())
        .field("seed", seed)
        .field("trials", r.trials)
        .field("violations", r.violations)
        .field("extreme_point_failures", r.extreme_point_failures)
        .field("stationary_failures", r.stationary_failures)
        .field("control_violations", r.control_violations))
}

fn cmd_export(run_dir: &Path, resolution: Option<usize>) -> Result<Summary> {
    let config_path = run_dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&config_path).map_err(|e| Error::Io {
        path: config_path.clone(),
        source: e,
    })?;
    let cfg = parse_config_over(&text, RunConfig::default()).map_err(|e| Error::Parse {
        path: config_path,
        message: e.to_string(),
    })?;
    let resolution = resolution.unwrap_or(cfg.heatmap_resolution);
    if resolution < MIN_HEATMAP_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "resolution must be at least {MIN_HEATMAP_RESOLUTION}"
        )));
    }
    let mesh = cfg.mesh.build()?;
    let artifacts = RunArtifacts::in_dir(run_dir);
    let theta = read_density_csv(&artifacts.density_csv)?;
    if theta.len() != mesh.n_triangles() {
        return Err(Error::DimensionMismatch {
            what: "stored density",
            expected: mesh.n_triangles(),
            actual: theta.len(),
        });
    }
    write_heatmap(&mesh, &theta, &artifacts.heatmap, resolution)?;
    write_density_vtk(&mesh, &theta, &artifacts.density_vtk)?;
    Ok(Summary::new("export", true)
        .field("elements", theta.len())
        .field("resolution", resolution)
        .field("heatmap", artifacts.heatmap.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::VerifyKrein { config, threshold } => cmd_verify_krein(config, *threshold),
        Command::PencilSuite { seed, trials, out } => cmd_pencil_suite(*seed, *trials, out.as_deref()),
        Command::Export { run_dir, resolution } => cmd_export(run_dir, *resolution),
    };
    match result {
        Ok(summary) => {
            summary.print();
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            println!("summary status=error");
            ExitCode::from(2)
        }
    }
}
