use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

/// Closed-form energy of the linear path between spheres of radius 1 and 2.5 with a = 1, lambda = 1/8, c = 0.
const SPHERES_ENERGY: f64 = 254.4690;

fn elastica(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastica"))
        .args(args)
        .current_dir(dir)
        .env("ELASTICA_CACHE", dir.join("cache"))
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = elastica(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn gen(dir: &Path, recipe: &str, grid: usize, name: &str) -> PathBuf {
    ok(dir, &["gen", recipe, "--grid", &grid.to_string(), "-o", name]);
    dir.join(name)
}

fn totals(json: &Value) -> Vec<f64> {
    json["evaluators"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["total"].as_f64().unwrap())
        .collect()
}

#[test]
fn all_evaluators_reproduce_the_spheres_energy() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let recipe = r#"{"waypoints":[{"kind":"sphere","radius":1},{"kind":"sphere","radius":2.5}],"frames":10}"#;
    gen(d, recipe, 100, "p.gip1");
    ok(d, &["energy", "p.gip1", "--all-evaluators", "--a", "1", "--lambda", "0.125", "--c", "0", "-o", "e.json"]);
    let json: Value = serde_json::from_slice(&fs::read(d.join("e.json")).unwrap()).unwrap();
    let t = totals(&json);
    assert_eq!(t.len(), 4);
    for (r, total) in json["evaluators"].as_array().unwrap().iter().zip(&t) {
        assert!((total - SPHERES_ENERGY).abs() < 0.05 * SPHERES_ENERGY, "{r}");
        assert!(r["wall_time"].as_f64().unwrap() >= 0.0);
    }
    assert!(d.join("e.json.manifest.json").exists());
}

#[test]
fn constant_path_has_zero_energy() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let recipe = r#"{"waypoints":[{"kind":"ellipsoid","a":1.4,"b":1,"c":0.8},{"kind":"ellipsoid","a":1.4,"b":1,"c":0.8}],"frames":4}"#;
    gen(d, recipe, 20, "p.gip1");
    let out = ok(d, &["energy", "p.gip1", "--all-evaluators"]);
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(totals(&json), vec![0.0; 4]);
}

#[test]
fn mismatched_frames_are_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    gen(d, r#"{"kind":"sphere","radius":1}"#, 12, "a.gis1");
    gen(d, r#"{"kind":"sphere","radius":1.1}"#, 12, "b.gis1");
    gen(d, r#"{"kind":"sphere","radius":1.2}"#, 14, "c.gis1");
    let out = elastica(d, &["energy", "a.gis1", "b.gis1", "c.gis1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("frame 2"), "{err}");
}

#[test]
fn truncated_path_reports_the_byte_position() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let p = gen(d, r#"{"waypoints":[{"kind":"sphere","radius":1},{"kind":"sphere","radius":2}],"frames":3}"#, 10, "p.gip1");
    let bytes = fs::read(&p).unwrap();
    fs::write(&p, &bytes[..bytes.len() - 5]).unwrap();
    let out = elastica(d, &["energy", "p.gip1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at byte"));
}

#[test]
fn distance_matrix_orders_the_shapes() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::create_dir(d.join("set")).unwrap();
    gen(d, r#"{"kind":"sphere","radius":1}"#, 16, "set/a.gis1");
    gen(d, r#"{"kind":"sphere","radius":1.2}"#, 16, "set/b.gis1");
    gen(d, r#"{"kind":"ellipsoid","a":2,"b":1,"c":1}"#, 16, "set/c.gis1");
    let args = [
        "distmat", "set", "-o", "d.csv", "--no-align", "--harmonics-degree", "2", "--time-modes", "2", "--frames", "5",
        "--max-iter", "200",
    ];
    ok(d, &args);
    let csv = fs::read_to_string(d.join("d.csv")).unwrap();
    let m: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(m.len(), 3);
    for i in 0..3 {
        assert_eq!(m[i][i], 0.0);
        for j in 0..3 {
            assert_eq!(m[i][j], m[j][i]);
        }
    }
    assert!(m[0][1] < m[0][2], "{m:?}");
    let manifest: Value = serde_json::from_slice(&fs::read(d.join("d.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 3);
    assert!(manifest["notes"]["max_asymmetry"].as_f64().unwrap() < 0.1);
}

#[test]
fn sphere_mesh_has_the_grid_counts() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    gen(d, r#"{"kind":"sphere","radius":1}"#, 10, "s.gis1");
    for scalar in ["none", "k1", "gauss", "pole-distance"] {
        ok(d, &["export-obj", "s.gis1", "--scalar", scalar, "-o", "s.obj"]);
        let obj = fs::read_to_string(d.join("s.obj")).unwrap();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 100, "{scalar}");
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 2 * 9 * 10, "{scalar}");
    }
}

#[test]
fn aligning_spheres_is_a_degeneracy_error() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    gen(d, r#"{"kind":"sphere","radius":1}"#, 16, "a.gis1");
    gen(d, r#"{"kind":"sphere","radius":1.5}"#, 16, "b.gis1");
    let out = elastica(d, &["align", "a.gis1", "b.gis1", "--out-first", "x.gis1", "--out-second", "y.gis1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("triaxial"));
}

#[test]
fn align_writes_normalized_pair_and_report() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    gen(d, r#"{"kind":"ellipsoid","a":1.5,"b":1,"c":0.7}"#, 20, "a.gis1");
    let rotated = r#"{"shape":{"kind":"ellipsoid","a":1.5,"b":1,"c":0.7},"reparam":{"kind":"sphere_rotation","axis":[0,0,1],"angle":0.5}}"#;
    gen(d, rotated, 20, "b.gis1");
    ok(d, &["align", "a.gis1", "b.gis1", "--out-first", "x.gis1", "--out-second", "y.gis1", "--report", "r.json"]);
    let report: Value = serde_json::from_slice(&fs::read(d.join("r.json")).unwrap()).unwrap();
    assert!(report["hypothesis_chosen"].as_u64().unwrap() < 4);
    assert!(d.join("x.gis1").exists() && d.join("y.gis1").exists());
}

#[test]
fn iteration_cap_exits_with_code_four() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    gen(d, r#"{"kind":"sphere","radius":1}"#, 14, "a.gis1");
    gen(d, r#"{"kind":"ellipsoid","a":2,"b":1,"c":1}"#, 14, "b.gis1");
    let args = [
        "geodesic", "a.gis1", "b.gis1", "-o", "g.gip1", "--trace", "t.json", "--obj-dir", "frames", "--no-align",
        "--harmonics-degree", "2", "--time-modes", "2", "--frames", "4", "--max-iter", "2",
    ];
    let out = elastica(d, &args);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("g.gip1").exists());
    assert_eq!(fs::read_dir(d.join("frames")).unwrap().count(), 4);
    let trace: Value = serde_json::from_slice(&fs::read(d.join("t.json")).unwrap()).unwrap();
    assert_eq!(trace["stop_reason"], "max_iterations");
}

#[test]
fn bad_flags_are_validation_errors() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    gen(d, r#"{"kind":"sphere","radius":1}"#, 10, "s.gis1");
    for args in [
        vec!["energy", "s.gis1", "s.gis1", "--evaluator", "nope"],
        vec!["energy", "s.gis1", "s.gis1", "--eps1", "-1"],
        vec!["energy", "s.gis1"],
        vec!["gen", r#"{"kind":"sphere","radius":-1}"#, "-o", "x.gis1"],
    ] {
        assert_eq!(elastica(d, &args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn reruns_reproduce_output_digests() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let digests = |name: &str| -> Vec<String> {
        let m: Value = serde_json::from_slice(&fs::read(d.join(format!("{name}.manifest.json"))).unwrap()).unwrap();
        m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["digest"].as_str().unwrap().to_string())
            .collect()
    };
    let recipe = r#"{"kind":"bump_sphere","radius":1,"amplitude":0.2,"degree":3,"order":2}"#;
    gen(d, recipe, 24, "s.gis1");
    let first_gen = digests("s.gis1");
    ok(d, &["curvature", "s.gis1", "--estimator", "polyfit", "-o", "k.csv", "--seedless"]);
    let first_curv = digests("k.csv");
    gen(d, recipe, 24, "s.gis1");
    ok(d, &["curvature", "s.gis1", "--estimator", "polyfit", "-o", "k.csv", "--seedless"]);
    assert_eq!(digests("s.gis1"), first_gen);
    assert_eq!(digests("k.csv"), first_curv);
    let m: Value = serde_json::from_slice(&fs::read(d.join("k.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["inputs"][0]["digest"].as_str().unwrap(), first_gen[0]);
    assert_eq!(m["command"], "curvature");
}
