use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn hhx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hhx"))
        .current_dir(dir)
        .env_remove("HHX_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hhx(dir, args);
    assert!(
        out.status.success(),
        "hhx {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn workspace() -> TempDir {
    let t = tempfile::tempdir().unwrap();
    let w = |name: &str, body: &str| fs::write(t.path().join(name), body).unwrap();
    w("cube4.json", r#"{"shape":"box","lengths":[1,1,1],"h":0.25}"#);
    w("cube8.json", r#"{"shape":"box","lengths":[1,1,1],"h":0.125}"#);
    w("cube16.json", r#"{"shape":"box","lengths":[1,1,1],"h":0.0625}"#);
    w("ball.json", r#"{"shape":"ball","center":[0,0,0],"radius":1,"h":0.25}"#);
    t
}

/// Solid torus around the vertical axis of the unit cube, as a mask file.
fn torus_mask(dir: &Path) -> PathBuf {
    let n = 16usize;
    let h = 1.0 / n as f64;
    let mut mask = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let x = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h];
                let rho = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
                mask.push((rho - 0.3).powi(2) + (x[2] - 0.5).powi(2) < 0.15f64.powi(2));
            }
        }
    }
    let path = dir.join("torus.hhxm");
    fs::write(&path, hhx_core::io::encode_mask([n; 3], h, &mask)).unwrap();
    path
}

#[test]
fn voxelize_writes_mask_and_sidecar() {
    let t = workspace();
    let d = t.path();
    ok(d, &["voxelize", "cube4.json", "--out", "m/cube.hhxm"]);
    let bytes = fs::read(d.join("m/cube.hhxm")).unwrap();
    assert_eq!(&bytes[..4], b"HHXM");
    assert_eq!(bytes.len(), 4 + 1 + 12 + 8 + 64 / 8);
    assert!(bytes[25..].iter().all(|&b| b == 0xff));
    let sc = json(d.join("m/cube.json"));
    assert_eq!(sc["cells"], 64);
    assert!((sc["d"].as_f64().unwrap() - 3f64.sqrt()).abs() < 1e-12);
    for v in sc["d_jk"].as_array().unwrap() {
        assert!((v.as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    ok(d, &["voxelize", "ball.json", "--out", "m/ball.hhxm"]);
    let sc = json(d.join("m/ball.json"));
    assert_eq!(sc["d"].as_f64().unwrap(), 2.0);
    assert_eq!(sc["improvement"], false);
}

#[test]
fn input_errors_exit_with_2() {
    let t = workspace();
    let d = t.path();
    fs::write(d.join("bad.json"), r#"{"shape":"blob","h":0.25}"#).unwrap();
    let out = hhx(d, &["voxelize", "bad.json", "--out", "bad.hhxm"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid geometry spec"));

    fs::write(d.join("neg.json"), r#"{"shape":"ball","center":[0,0,0],"radius":-1,"h":0.25}"#).unwrap();
    assert_eq!(code(&hhx(d, &["voxelize", "neg.json", "--out", "neg.hhxm"])), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_hhx"))
        .current_dir(d)
        .env("HHX_THREADS", "many")
        .args(["voxelize", "cube4.json", "--out", "x.hhxm"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);

    let out = hhx(d, &["zeromean", "--domain", "cube16.json", "--generate", "random", "--theorem", "D", "--N", "5", "--out", "z"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nearest valid N is 4"));
}

#[test]
fn outputs_are_never_overwritten_without_force() {
    let t = workspace();
    let d = t.path();
    ok(d, &["voxelize", "cube4.json", "--out", "cube.hhxm"]);
    let out = hhx(d, &["voxelize", "cube4.json", "--out", "cube.hhxm"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
    ok(d, &["--force", "voxelize", "cube4.json", "--out", "cube.hhxm"]);
}

#[test]
fn missing_data_exits_with_3() {
    let t = workspace();
    let d = t.path();
    let out = hhx(d, &["decompose", "--domain", "cube4.json", "--field", "nope.hhxf", "--flavor", "hd1", "--out", "o"]);
    assert_eq!(code(&out), 3);
    assert_eq!(code(&hhx(d, &["constants", "--domain", "nope.json", "--out", "o"])), 3);
    fs::create_dir(d.join("empty")).unwrap();
    assert_eq!(code(&hhx(d, &["report", "empty"])), 3);
}

#[test]
fn decomposing_a_gradient_leaves_no_other_parts() {
    let t = workspace();
    let d = t.path();
    for (flavor, kind) in [("hd1", "edge"), ("hd2", "face"), ("hd1", "face"), ("hd2", "edge")] {
        let out = format!("g-{flavor}-{kind}");
        ok(d, &[
            "decompose", "--domain", "cube8.json", "--generate", "gradient", "--flavor", flavor, "--kind", kind,
            "--tol", "1e-10", "--out", &out,
        ]);
        let rep = json(d.join(&out).join("decompose.json"));
        let norms = &rep["decomposition"]["norms"];
        let input = norms["input"].as_f64().unwrap();
        assert!(norms["rotational"].as_f64().unwrap() <= 1e-10 * input, "{flavor} {kind}");
        assert!(norms["harmonic"].as_f64().unwrap() <= 1e-9 * input, "{flavor} {kind}");
        assert_eq!(rep["pass"], true);
        assert_eq!(rep["meta"]["version"], hhx_core::VERSION);
        assert!(rep["meta"]["bounds"]["d_over_pi"].is_number());
    }
}

#[test]
fn seeded_decompositions_are_byte_identical() {
    let t = workspace();
    let d = t.path();
    for out in ["a", "b"] {
        ok(d, &["decompose", "--domain", "cube8.json", "--generate", "random", "--seed", "7", "--flavor", "hd2", "--out", out]);
    }
    for f in ["decompose.json", "input.hhxf", "gradient.hhxf", "harmonic.hhxf", "rotational.hhxf"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let rep = json(d.join("a/decompose.json"));
    let orth = &rep["decomposition"]["orthogonality"];
    for k in ["gradient_harmonic", "gradient_rotational", "harmonic_rotational"] {
        assert!(orth[k].as_f64().unwrap() <= 1e-9);
    }
    assert_eq!(rep["meta"]["seed"], 7);

    // the parts can be fed back in and reproduce themselves
    ok(d, &["decompose", "--domain", "cube8.json", "--field", "a/rotational.hhxf", "--flavor", "hd2", "--out", "c"]);
    let again = json(d.join("c/decompose.json"));
    let n = &again["decomposition"]["norms"];
    assert!(n["gradient"].as_f64().unwrap() <= 1e-8 * n["input"].as_f64().unwrap());
}

#[test]
fn torus_circulation_has_a_harmonic_part() {
    let t = workspace();
    let d = t.path();
    torus_mask(d);
    ok(d, &["decompose", "--domain", "torus.hhxm", "--generate", "circulation", "--flavor", "hd2", "--kind", "face", "--out", "t"]);
    let rep = json(d.join("t/decompose.json"));
    let n = &rep["decomposition"]["norms"];
    assert!(n["harmonic"].as_f64().unwrap() > 0.1 * n["input"].as_f64().unwrap());
}

fn rows(path: PathBuf) -> Vec<Value> {
    json(path)["reports"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r["rows"].as_array().unwrap().clone())
        .collect()
}

#[test]
fn zeromean_checks() {
    let t = workspace();
    let d = t.path();
    ok(d, &[
        "zeromean", "--domain", "cube16.json", "--generate", "solenoidal", "--theorem", "D", "--axis", "1", "--N", "8",
        "--out", "div",
    ]);
    let r = rows(d.join("div/zeromean.json"));
    assert_eq!(r.len(), 8);
    for row in &r {
        assert!(row["relative"].as_f64().unwrap() <= 1e-12);
        assert_eq!(row["pass"], true);
    }
    let csv = fs::read_to_string(d.join("div/zeromean.csv")).unwrap();
    assert!(csv.starts_with("# hhx "));
    assert_eq!(csv.lines().count(), 2 + 8);

    ok(d, &["zeromean", "--domain", "cube16.json", "--generate", "random", "--seed", "3", "--theorem", "D", "--out", "rand"]);
    for row in rows(d.join("rand/zeromean.json")) {
        assert!(row["ratio"].as_f64().unwrap() <= 1.0 + 1e-10);
    }

    ok(d, &["zeromean", "--domain", "cube16.json", "--generate", "random", "--seed", "4", "--theorem", "R", "--out", "beams"]);
    let r = rows(d.join("beams/zeromean.json"));
    assert_eq!(r.len(), 3 * 16);
    for row in &r {
        assert!(row["ratio"].as_f64().unwrap() <= 1.0 + 1e-10);
    }

    ok(d, &[
        "zeromean", "--domain", "cube16.json", "--generate", "random", "--field-flavor", "natural", "--theorem", "D",
        "--out", "control",
    ]);
    let doc = json(d.join("control/zeromean.json"));
    for rep in doc["reports"].as_array().unwrap() {
        assert_eq!(rep["negative_control"], true);
    }
    assert!(rows(d.join("control/zeromean.json")).iter().all(|r| r["bound"].is_null()));

    ok(d, &["zeromean", "--domain", "cube16.json", "--generate", "gradient", "--theorem", "remark", "--axis", "3", "--N", "4", "--out", "rem"]);
    for row in rows(d.join("rem/zeromean.json")) {
        assert_eq!(row["hypothesis_met"], true);
        assert_eq!(row["pass"], true);
    }
}

#[test]
fn constants_on_the_cube_pass_every_inequality() {
    let t = workspace();
    let d = t.path();
    fs::write(d.join("cube32.json"), r#"{"shape":"box","lengths":[1,1,1],"h":0.03125}"#).unwrap();
    ok(d, &["constants", "--domain", "cube32.json", "--which", "cp,cf,cm1,cm2,cmt,cmn,cpw", "--N", "1,2,4,8", "--out", "c"]);
    let doc = json(d.join("c/bounds.json"));
    let rep = &doc["bounds_report"];
    assert_eq!(rep["improvement"], true);
    let ineq = rep["inequalities"].as_array().unwrap();
    assert!(!ineq.is_empty());
    for row in ineq {
        assert_eq!(row["pass"], true, "{row}");
    }
    let cp = rep["estimates"].as_array().unwrap().iter().find(|e| e["name"] == "c_p").unwrap();
    assert!((cp["value"].as_f64().unwrap() - 1.0 / std::f64::consts::PI).abs() < 0.02 / std::f64::consts::PI);
    assert_eq!(doc["meta"]["h"], 0.03125);
    assert!(doc["meta"]["tolerances"]["eigen"]["tol"].is_number());
    let csv = fs::read_to_string(d.join("c/bounds.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("kind,name,h,value,bound,margin,pass"));
}

#[test]
fn ball_offers_no_improvement() {
    let t = workspace();
    let d = t.path();
    ok(d, &["constants", "--domain", "ball.json", "--which", "cp", "--out", "b"]);
    let rep = &json(d.join("b/bounds.json"))["bounds_report"];
    assert_eq!(rep["improvement"], false);
    assert_eq!(rep["d_over_pi"], rep["max_djk_over_pi"]);
}

#[test]
fn nonconvex_masks_get_bounds_only() {
    let t = workspace();
    let d = t.path();
    torus_mask(d);
    let out = hhx(d, &["constants", "--domain", "torus.hhxm", "--out", "nc"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not convex"));
    let rep = &json(d.join("nc/bounds.json"))["bounds_report"];
    assert_eq!(rep["convex"], false);
    assert!(rep["estimates"].as_array().unwrap().is_empty());
    assert!(rep["d_over_pi"].as_f64().unwrap() > 0.0);
}

#[test]
fn report_consolidates_a_two_grid_run() {
    let t = workspace();
    let d = t.path();
    for (spec, out) in [("cube8.json", "runs/h8"), ("cube16.json", "runs/h16")] {
        ok(d, &["constants", "--domain", spec, "--which", "cp,cf,cm1", "--out", out]);
    }
    ok(d, &["report", "runs", "--richardson"]);
    let csv = fs::read_to_string(d.join("runs/convergence.csv")).unwrap();
    for name in ["c_p", "c_f", "c_m1"] {
        let n = csv.lines().filter(|l| l.starts_with(&format!("h,{name},"))).count();
        assert_eq!(n, 2, "{name}");
        assert_eq!(csv.lines().filter(|l| l.starts_with(&format!("richardson,{name},"))).count(), 1);
    }
    let extrapolated: f64 = csv
        .lines()
        .find(|l| l.starts_with("richardson,c_p,"))
        .unwrap()
        .split(',')
        .nth(5)
        .unwrap()
        .parse()
        .unwrap();
    assert!((extrapolated - 1.0 / std::f64::consts::PI).abs() < 1e-4);

    let first = fs::read(d.join("runs/consolidated.json")).unwrap();
    assert_eq!(code(&hhx(d, &["report", "runs", "--richardson"])), 2);
    ok(d, &["--force", "report", "runs", "--richardson"]);
    assert_eq!(first, fs::read(d.join("runs/consolidated.json")).unwrap());
    assert_eq!(json(d.join("runs/consolidated.json"))["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn mask_files_round_trip_through_their_sidecar() {
    let t = workspace();
    let d = t.path();
    ok(d, &["voxelize", "cube8.json", "--out", "cube.hhxm"]);
    ok(d, &["constants", "--domain", "cube.hhxm", "--which", "", "--out", "g"]);
    let rep = &json(d.join("g/bounds.json"))["bounds_report"];
    assert_eq!(format!("{:.6}", rep["d_over_pi"].as_f64().unwrap()), "0.551329");
    assert_eq!(format!("{:.6}", rep["max_djk_over_pi"].as_f64().unwrap()), "0.450158");
    assert_eq!(rep["convex"], true);
}
