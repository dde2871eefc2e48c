use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"
dimension = 3
radius = 2

[potential]
kind = "checkerboard"
amplitude = 1.0

[nonlinearity]
kind = "power"
p = 4.0

[bloch]
grid = 8

[solver]
multistart = 2
"#;

fn dnls(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn setup(text: &str) -> (TempDir, std::path::PathBuf) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, text).unwrap();
    (dir, cfg)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn certify_gap_reports_unit_edges() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("out");
    let o = dnls(&["certify-gap"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let gap: Value = serde_json::from_str(&fs::read_to_string(out.join("gap.json")).unwrap()).unwrap();
    assert!((gap["sigma_minus"].as_f64().unwrap() + 1.0).abs() <= 1e-8);
    assert!((gap["sigma_plus"].as_f64().unwrap() - 1.0).abs() <= 1e-8);
    let bands = fs::read_to_string(out.join("bands.csv")).unwrap();
    // one row per (k, band), 2^3 bands
    assert_eq!(bands.lines().count(), 1 + 8 * 8 * 8 * 8);
}

#[test]
fn gapless_potential_is_refused() {
    let text = SMALL.replace("kind = \"checkerboard\"\namplitude = 1.0", "kind = \"constant\"\namplitude = 0.0");
    let (dir, cfg) = setup(&text);
    let out = dir.path().join("out");
    let o = dnls(&["solve"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no spectral gap at 0"), "{}", stderr(&o));
    let o = dnls(&["certify-gap"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn solve_needs_a_certified_gap() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("out");
    let o = dnls(&["solve"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("certify-gap"), "{}", stderr(&o));
    assert!(!out.join("ground_state.txt").exists());
}

#[test]
fn stale_gap_certificate_is_not_reused() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("out");
    assert!(dnls(&["certify-gap"], &cfg, &out).status.success());
    fs::write(&cfg, SMALL.replace("amplitude = 1.0", "amplitude = 0.8")).unwrap();
    let o = dnls(&["solve"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn configuration_errors_exit_2() {
    for text in [
        format!("{SMALL}\ncolour = \"red\"\n"),
        SMALL.replace("multistart = 2", "multistart = 2\nmultistrat = 3"),
        SMALL.replace("radius = 2", "radius = 1"),
        SMALL.replace("p = 4.0", "p = 1.5"),
    ] {
        let (dir, cfg) = setup(&text);
        let o = dnls(&["validate"], &cfg, &dir.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{text}\n{}", stderr(&o));
    }
    let (dir, _) = setup(SMALL);
    let o = dnls(&["solve"], &dir.path().join("missing.toml"), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_dnls")).arg("bogus").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hardy_commands_need_three_dimensions() {
    let (dir, cfg) = setup(&SMALL.replace("dimension = 3", "dimension = 2"));
    let o = dnls(&["constants"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

fn full_pipeline(cfg: &Path, out: &Path, threads: &str) {
    for cmd in ["certify-gap", "validate", "constants", "solve", "sweep"] {
        let o = dnls(&[cmd, "--threads", threads], cfg, out);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
}

#[test]
fn outputs_are_reproducible_across_runs_and_thread_counts() {
    let text = format!("{SMALL}\n[rho]\nsolve_fraction = 0.2\nsweep_fractions = [0.4, 0.2, 0.1]\n");
    let (dir, cfg) = setup(&text);
    let runs: Vec<_> = [("a", "1"), ("b", "1"), ("c", "4")]
        .iter()
        .map(|(name, threads)| {
            let out = dir.path().join(name);
            full_pipeline(&cfg, &out, threads);
            snapshot(&out)
        })
        .collect();
    let names: Vec<_> = runs[0].keys().cloned().collect();
    for expected in ["gap.json", "constants.json", "ground_state.txt", "solve.json", "run_log.jsonl", "sweep.csv"] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}: {names:?}");
    }
    for other in &runs[1..] {
        assert_eq!(other.keys().collect::<Vec<_>>(), runs[0].keys().collect::<Vec<_>>());
        for (name, bytes) in other {
            assert!(bytes == &runs[0][name], "{name} differs");
        }
    }
    let solve: Value = serde_json::from_slice(&runs[0]["solve.json"]).unwrap();
    assert!(solve["residual"].as_f64().unwrap() <= 1e-8);
    assert!(solve["level"].as_f64().unwrap() > 0.0);
}

#[test]
fn seed_flag_overrides_config() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("out");
    assert!(dnls(&["certify-gap"], &cfg, &out).status.success());
    let o = dnls(&["solve", "--seed", "7"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let solve: Value = serde_json::from_str(&fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    assert_eq!(solve["seed"], 7);
}
