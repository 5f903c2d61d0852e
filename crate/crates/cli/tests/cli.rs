use std::path::Path;
use std::process::{Command, Output};

fn twophase(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twophase"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn summary(o: &Output) -> String {
    stdout(o)
        .lines()
        .rfind(|l| l.starts_with("summary "))
        .expect("summary line")
        .to_string()
}

const SMALL: &str = "domain = square\nn_per_side = 6\nmax_iter = 12\nheatmap_resolution = 64\n";

#[test]
fn run_is_reproducible_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    for out in ["a", "b"] {
        let o = twophase(&["run", "--config", "small.cfg", "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let s = summary(&o);
        assert!(s.starts_with("summary status=pass command=run"), "{s}");
        assert!(s.contains("iterations=12"));
    }
    for name in [
        "density.vtk",
        "density.csv",
        "eigenfunction.vtk",
        "history.csv",
        "density.ppm",
        "initial.ppm",
        "config.txt",
    ] {
        assert!(dir.path().join("a").join(name).exists(), "{name}");
    }
    let ha = std::fs::read(dir.path().join("a/history.csv")).unwrap();
    let hb = std::fs::read(dir.path().join("b/history.csv")).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(String::from_utf8(ha).unwrap().lines().count(), 13);
}

#[test]
fn export_regenerates_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    assert!(twophase(&["run", "--config", "small.cfg", "--out", "r"], dir.path())
        .status
        .success());
    let heatmap = dir.path().join("r/density.ppm");
    let before = std::fs::read(&heatmap).unwrap();
    std::fs::remove_file(&heatmap).unwrap();
    let o = twophase(&["export", "r"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&heatmap).unwrap(), before);
    let o = twophase(&["export", "r", "--resolution", "63"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_reports_line_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "# header\nstepsize = -1\n").unwrap();
    let o = twophase(&["run", "--config", "bad.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("stepsize"), "{err}");
    assert_eq!(summary(&o), "summary status=error");

    std::fs::write(dir.path().join("unknown.cfg"), "colour = red\n").unwrap();
    let o = twophase(&["run", "--config", "unknown.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));

    let o = twophase(&["run", "--preset", "fig9z"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pencil_suite_reports_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = twophase(
        &["pencil-suite", "--trials", "200", "--seed", "42", "--out", "p"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("violations: 0\n"));
    assert!(summary(&o).contains("violations=0"));
    let csv = std::fs::read_to_string(dir.path().join("p/pseudoconcavity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 10 * 200);
}

#[test]
fn verify_krein_on_a_coarse_disk() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("k.cfg"), "n_boundary = 80\n").unwrap();
    let o = twophase(&["verify-krein", "--config", "k.cfg", "--out", "k"], dir.path());
    let s = summary(&o);
    assert!(s.contains("min_mismatch=") && s.contains("max_mismatch="), "{s}");
    assert_eq!(o.status.success(), s.starts_with("summary status=pass"));
    assert!(dir.path().join("k/min_denominator_only/reference.vtk").exists());

    std::fs::write(dir.path().join("sq.cfg"), "domain = square\n").unwrap();
    let o = twophase(&["verify-krein", "--config", "sq.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
