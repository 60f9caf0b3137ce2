use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn finsler(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finsler"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn write_fibre(path: &Path, phase: f64, swap: bool) {
    let mut text = String::from("x1,x2,x3,x4\n");
    for i in 0..300 {
        let t = std::f64::consts::TAU * i as f64 / 300.0 + phase;
        let (a, b) = if swap { ([0.0, 0.0], [t.cos(), t.sin()]) } else { ([t.cos(), t.sin()], [0.0, 0.0]) };
        text.push_str(&format!("{},{},{},{}\n", a[0], a[1], b[0], b[1]));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, format!(r#"{{"kind":"shoot","params":{{"r":1,"delta":"x"}},"out":{:?}}}"#, out)).unwrap();
    let res = finsler(&out, &["run", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());

    std::fs::write(&cfg, r#"{"kind":"surface","params":{"R":0.5,"Kmax":4.0},"tol":{"profile":-1}}"#).unwrap();
    assert_eq!(finsler(&out, &["run", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(finsler(&out, &["shoot", "--r", "1", "--delta", "0.3"]).status.code(), Some(2));
    assert_eq!(finsler(&out, &["hopf", "scan", "--f", "1+0.01*cubic"]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn cz_of_doubled_equator_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let res = finsler(dir.path(), &["cz", "--metric", "window-r1", "--orbit", "equator2"]);
    assert_eq!(res.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["cz"], 1);
    assert_eq!(v["orbit"], "equator2");
}

#[test]
fn shoot_finds_one_transverse_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let res = finsler(dir.path(), &["shoot", "--r", "1", "--delta", "0.24"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(dir.path().join("report.json"));
    assert_eq!(report["transverse_count"], 1);
    assert_eq!(report["intersections"].as_array().unwrap().len(), 1);
    assert!(report["failures"].as_array().unwrap().is_empty());
    let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("phi,T_phi,theta_adv\n"));
    let manifest = read_json(dir.path().join("manifest.json"));
    assert_eq!(manifest["config_hash"], report["config_hash"]);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 3);
}

#[test]
fn surface_table_has_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let res = finsler(dir.path(), &["surface", "--R", "0.49", "--Kmax", "4.25"]);
    assert_eq!(res.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("surface.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,rho,rhodot,K"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 4);
    let mantissa = row[1].split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17);
}

#[test]
fn outputs_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let res = finsler(dir, &["--seed", "3", "hopf", "scan", "--f", "1+0.01*quadratic", "--cap", "8", "--seeds", "1", "--grid", "2"]);
        assert_eq!(res.status.code(), Some(0));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 3);
    for name in names {
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
    let scan = read_json(a.path().join("scan.json"));
    assert_eq!(scan["seed"], 3);
}

#[test]
fn link_reads_csv_polygons() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_fibre(&a, 0.0, false);
    write_fibre(&b, 0.0, true);
    let res = finsler(&dir.path().join("out"), &["link", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["integer"], 1);
    assert!(v["residual"].as_f64().unwrap() < 0.05);

    // Two copies of one circle are too close to link: an experiment failure.
    let c = dir.path().join("c.csv");
    write_fibre(&c, 0.01, false);
    let out = dir.path().join("fail");
    let res = finsler(&out, &["link", a.to_str().unwrap(), c.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let diag = read_json(out.join("diagnostics.json"));
    assert!(diag["error"].as_str().unwrap().contains("pass within"));

    std::fs::write(&c, "x1,x2,x3,x4\n1,0,0\n").unwrap();
    let res = finsler(&dir.path().join("bad"), &["link", a.to_str().unwrap(), c.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn fixtures_match_committed_values() {
    let committed = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dir = tempfile::tempdir().unwrap();
    let res = finsler(dir.path(), &["fixtures", "--check", committed.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for entry in std::fs::read_dir(&committed).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() == "manifest.json" {
            continue;
        }
        let v = read_json(path.clone());
        let tag = v["provenance"].as_str().unwrap();
        assert!(tag == "paper" || tag == "trivial" || tag.starts_with("derived:"), "{}: {tag}", path.display());
    }
    let round = read_json(committed.join("round_sphere.json"));
    assert!((round["values"]["t_return"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-8);
    assert_eq!(round["values"]["eta"], 0.0);
}
