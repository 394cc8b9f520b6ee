//! End-to-end runs of the command-line binary on small grids.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use cartel_storage::io::RunManifest;
use tempfile::TempDir;

const GRID: &str = "10,10";
const DT: &str = "8e-3";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cartel-storage"));
    c.env("RUST_LOG", "warn");
    c
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stdout:\n{}", String::from_utf8_lossy(&out.stdout));
        eprintln!("stderr:\n{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn solve_into(dir: &Path, cfg: &str) -> Output {
    run(bin().args(["solve", preset(cfg).to_str().unwrap(), dir.to_str().unwrap(), "--grid", GRID, "--dt", DT]))
}

/// One small baseline solve shared by the read-only tests.
fn baseline_dir() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let d = TempDir::new().unwrap();
        let o = solve_into(d.path(), "baseline.cfg");
        assert!(o.status.success());
        d
    })
    .path()
}

const FIELDS: [&str; 6] = ["U.csv", "p.csv", "q_star.csv", "drift_k.csv", "drift_z.csv", "shock_locus.csv"];

#[test]
fn solve_writes_fields_and_manifest_deterministically() {
    let a = baseline_dir();
    for f in FIELDS.iter().chain(&["manifest.json", "state.ckpt"]) {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    let m = RunManifest::read(a).unwrap();
    assert!(m.verify(a).is_empty());
    assert_eq!(m.grid, [10, 10]);
    assert_eq!(m.results["converged"], true);
    assert!(m.outputs.iter().any(|o| o.file == "U.csv"));

    let b = TempDir::new().unwrap();
    assert!(solve_into(b.path(), "baseline.cfg").status.success());
    for f in FIELDS {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
    }
}

#[test]
fn resume_from_converged_checkpoint() {
    let d = TempDir::new().unwrap();
    let ckpt = baseline_dir().join("state.ckpt");
    let o = run(bin().args([
        "solve",
        preset("baseline.cfg").to_str().unwrap(),
        d.path().to_str().unwrap(),
        "--grid",
        GRID,
        "--dt",
        DT,
        "--resume",
        ckpt.to_str().unwrap(),
    ]));
    assert!(o.status.success());
    let m = RunManifest::read(d.path()).unwrap();
    let resumed = m.results["resumed_from"].as_u64().unwrap();
    let total = m.results["iterations"].as_u64().unwrap();
    assert!(resumed > 0 && total - resumed <= 5, "{resumed} -> {total}");
}

#[test]
fn appendix_preset_solves() {
    let d = TempDir::new().unwrap();
    assert!(solve_into(d.path(), "appendix.cfg").status.success());
    let m = RunManifest::read(d.path()).unwrap();
    assert!(m.config.contains("k_max = 0.07"));
    assert!(m.config.contains("g_coeff = 10"));
}

#[test]
fn short_simulation_reports_no_period() {
    let d = TempDir::new().unwrap();
    let o = run(bin().args([
        "simulate",
        baseline_dir().to_str().unwrap(),
        "--out",
        d.path().to_str().unwrap(),
        "--t-end",
        "2",
    ]));
    assert!(o.status.success());
    assert!(stdout(&o).contains("period: none"));
    let m = RunManifest::read_file(&d.path().join("simulate_manifest.json")).unwrap();
    assert!(m.results["period"].is_null());
    let csv = fs::read_to_string(d.path().join("trajectory.csv")).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "t,k,z,p,q");
}

#[test]
fn seeded_simulation_is_byte_identical() {
    let run_once = || {
        let d = TempDir::new().unwrap();
        let o = run(bin().args([
            "simulate",
            baseline_dir().to_str().unwrap(),
            "--out",
            d.path().to_str().unwrap(),
            "--t-end",
            "3",
            "--seed",
            "11",
        ]));
        assert!(o.status.success());
        fs::read(d.path().join("trajectory.csv")).unwrap()
    };
    let a = run_once();
    assert_eq!(a, run_once());
    assert!(String::from_utf8_lossy(&a).contains("seed=11"));
}

#[test]
fn measure_csv_is_normalized() {
    let d = TempDir::new().unwrap();
    let o = run(bin().args([
        "measure",
        baseline_dir().to_str().unwrap(),
        "--out",
        d.path().to_str().unwrap(),
        "--t-end",
        "40",
        "--burn-in",
        "5",
        "--paths",
        "2",
        "--seed",
        "3",
    ]));
    assert!(o.status.success());
    let text = fs::read_to_string(d.path().join("measure.csv")).unwrap();
    let mut rows = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    assert_eq!(rows.next().unwrap(), "k,z,density,log10_density");
    let mut mass = 0.0;
    let mut count = 0;
    for row in rows {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        mass += v[2];
        count += 1;
        if v[2] > 0.0 {
            assert!((v[3] - v[2].log10()).abs() < 1e-12);
        } else {
            assert_eq!(v[3], -99.0);
        }
    }
    assert_eq!(count, 11 * 11);
    assert!((mass - 1.0).abs() < 1e-12, "mass {mass}");
    assert!(RunManifest::read_file(&d.path().join("measure_manifest.json")).unwrap().verify(d.path()).is_empty());
}

#[test]
fn asymptotics_prints_closed_forms() {
    let o = run(bin().args(["asymptotics", preset("baseline.cfg").to_str().unwrap(), "--z", "0.5"]));
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("V0 = -906.666666667"), "{s}");
    assert!(s.contains("p0 = 343.333333333"), "{s}");
    assert!(s.contains("(alpha eps)^2 + alpha eps - 1 = 19"), "{s}");

    let d = TempDir::new().unwrap();
    let cfg = d.path().join("golden.cfg");
    let alpha = (5f64.sqrt() - 1.0) / 2.0 / 4e-4;
    fs::write(&cfg, format!("alpha = {alpha}\n")).unwrap();
    let o = run(bin().args(["asymptotics", cfg.to_str().unwrap()]));
    assert!(o.status.success());
    assert!(stdout(&o).contains("need not be unique"), "{}", stdout(&o));
}

#[test]
fn validate_oracles_and_fault_injection() {
    let o = run(bin().args(["validate", "--skip-solve"]));
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("FAIL"));

    let o = bin().args(["validate", "--skip-solve", "--inject-flux-bug"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let s = stdout(&o);
    let flux = s.lines().find(|l| l.starts_with("flux oracle")).expect("flux row");
    assert!(flux.contains("FAIL"), "{flux}");
    assert!(s.lines().filter(|l| l.contains("FAIL")).count() >= 1);
}

#[test]
fn bad_config_exits_2_and_names_the_line() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("bad.cfg");
    fs::write(&cfg, "preset = baseline\nn = 10\nbogus_key = 1\n").unwrap();
    let o = bin().args(["solve", cfg.to_str().unwrap(), d.path().join("out").to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("bogus_key"), "{err}");
}

#[test]
fn missing_fields_is_a_usage_error() {
    let d = TempDir::new().unwrap();
    let o = bin().args(["simulate", d.path().to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_plots_writes_scripts() {
    let d = TempDir::new().unwrap();
    let o = run(bin().args(["export-plots", baseline_dir().to_str().unwrap(), "--out", d.path().to_str().unwrap()]));
    assert!(o.status.success());
    for f in ["value.gp", "price.gp", "production.gp", "shock.gp", "trajectory.gp", "measure.gp"] {
        let body = fs::read_to_string(d.path().join(f)).unwrap();
        assert!(body.contains(".csv"), "{f}");
    }
}
