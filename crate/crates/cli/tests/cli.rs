use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn selfsample(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfsample"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = selfsample(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn cube(dir: &Path) {
    ok(
        dir,
        &[
            "fixture",
            "--kind",
            "cube_missing_edges",
            "--points",
            "3000",
            "--output",
            "cube.ply",
            "--mesh-output",
            "cube.obj",
        ],
    );
}

const QUICK: &[&str] = &["--iters", "20", "--progress", "0", "--seed", "7"];

fn with_quick<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().chain(QUICK).copied().collect()
}

#[test]
fn consolidate_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cube(d);
    for out in ["a.ply", "b.ply"] {
        ok(
            d,
            &with_quick(&[
                "consolidate",
                "--input",
                "cube.ply",
                "--criterion",
                "sharp",
                "--out-points",
                "4800",
                "--output",
                out,
            ]),
        );
    }
    let a = fs::read(d.join("a.ply")).unwrap();
    assert_eq!(a, fs::read(d.join("b.ply")).unwrap());
    let prov = fs::read_to_string(d.join("a.ply.provenance.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&prov).unwrap();
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["config"]["iters"], 20);
    assert_eq!(v["details"]["points"], 4800);
}

#[test]
fn train_then_infer_matches_consolidate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cube(d);
    ok(
        d,
        &with_quick(&[
            "consolidate",
            "--input",
            "cube.ply",
            "--out-points",
            "3000",
            "--output",
            "one.ply",
        ]),
    );
    ok(
        d,
        &with_quick(&[
            "train",
            "--input",
            "cube.ply",
            "--checkpoint",
            "net.ck",
            "--log",
            "log.csv",
        ]),
    );
    ok(
        d,
        &[
            "infer",
            "--input",
            "cube.ply",
            "--checkpoint",
            "net.ck",
            "--out-points",
            "3000",
            "--seed",
            "7",
            "--output",
            "two.ply",
        ],
    );
    assert_eq!(
        fs::read(d.join("one.ply")).unwrap(),
        fs::read(d.join("two.ply")).unwrap()
    );
    let log = fs::read_to_string(d.join("log.csv")).unwrap();
    assert!(log.starts_with("iteration,loss,wall_ms\n"));
    assert_eq!(log.lines().count(), 21);
}

#[test]
fn fixture_and_label_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (name, label) in [("s1.ply", "l1.ply"), ("s2.ply", "l2.ply")] {
        ok(
            d,
            &[
                "fixture",
                "--kind",
                "two_density_sphere",
                "--points",
                "4000",
                "--seed",
                "3",
                "--output",
                name,
            ],
        );
        ok(
            d,
            &[
                "label",
                "--input",
                name,
                "--criterion",
                "sparse",
                "--output",
                label,
            ],
        );
    }
    assert_eq!(
        fs::read(d.join("s1.ply")).unwrap(),
        fs::read(d.join("s2.ply")).unwrap()
    );
    assert_eq!(
        fs::read(d.join("l1.ply")).unwrap(),
        fs::read(d.join("l2.ply")).unwrap()
    );
}

#[test]
fn labeling_mechanism_is_selectable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cube(d);
    for (mode, out) in [
        ("auto", "auto.ply"),
        ("threshold", "thr.ply"),
        ("kmeans", "km.ply"),
    ] {
        ok(
            d,
            &[
                "label",
                "--input",
                "cube.ply",
                "--criterion",
                "sharp",
                "--labeling",
                mode,
                "--output",
                out,
            ],
        );
    }
    let read = |name: &str| fs::read(d.join(name)).unwrap();
    assert_eq!(read("auto.ply"), read("thr.ply"));
    assert_ne!(read("thr.ply"), read("km.ply"));
    let prov: serde_json::Value = serde_json::from_slice(&read("km.ply.provenance.json")).unwrap();
    assert_eq!(prov["config"]["labeling"], "kmeans");
    let bad = selfsample(
        d,
        &[
            "label",
            "--input",
            "cube.ply",
            "--labeling",
            "median",
            "--output",
            "x.ply",
        ],
    );
    assert!(!bad.status.success());
}

#[test]
fn eval_fscore_of_identical_clouds_is_100() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cube(d);
    let out = ok(
        d,
        &[
            "eval", "fscore", "--input", "cube.ply", "--gt", "cube.ply", "--output", "f.json",
        ],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["f_score"], 100.0);
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("f.json")).unwrap()).unwrap();
    assert_eq!(saved, v);
    assert!(d.join("f.json.provenance.json").exists());
}

#[test]
fn eval_commands_on_fixture_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cube(d);
    let out = ok(
        d,
        &[
            "eval",
            "surface-dist",
            "--input",
            "cube.ply",
            "--mesh",
            "cube.obj",
        ],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["mean_dist_to_surface"].as_f64().unwrap() < 1e-9);

    let out = ok(
        d,
        &[
            "eval",
            "fscore",
            "--input",
            "cube.ply",
            "--gt-mesh",
            "cube.obj",
        ],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let f = v["f_score"].as_f64().unwrap();
    assert!(f > 0.0 && f < 100.0, "{f}");

    ok(
        d,
        &[
            "fixture",
            "--kind",
            "dihedral_wedge",
            "--points",
            "4000",
            "--band",
            "0",
            "--output",
            "w.ply",
            "--mesh-output",
            "w.obj",
        ],
    );
    let out = ok(
        d,
        &["eval", "normals", "--input", "w.ply", "--mesh", "w.obj"],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["normal_error_median_deg"].as_f64().unwrap() > 0.0);

    ok(d, &["fixture", "--kind", "grid", "--output", "g.xyz"]);
    let out = ok(d, &["eval", "density", "--input", "g.xyz"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["density_iqr"].as_f64().unwrap() >= 0.0);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cube(d);
    fs::write(
        d.join("run.toml"),
        "criterion = \"uniform\"\niters = 5\nseed = 1\ninput = \"cube.ply\"\nout_points = 2400\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "consolidate",
            "--config",
            "run.toml",
            "--seed",
            "4",
            "--progress",
            "0",
            "--output",
            "c.ply",
        ],
    );
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("c.ply.provenance.json")).unwrap())
            .unwrap();
    assert_eq!(v["config"]["criterion"], "uniform");
    assert_eq!(v["config"]["iters"], 5);
    assert_eq!(v["config"]["seed"], 4);
    assert_eq!(v["details"]["points"], 2400);

    fs::write(d.join("run.json"), r#"{"iters": 3, "criterion": "sparse"}"#).unwrap();
    ok(
        d,
        &[
            "consolidate",
            "--config",
            "run.json",
            "--input",
            "cube.ply",
            "--progress",
            "0",
            "--output",
            "j.xyz",
        ],
    );
    assert_eq!(
        fs::read_to_string(d.join("j.xyz")).unwrap().lines().count(),
        3000
    );
}

#[test]
fn errors_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cube(d);
    let cases: &[&[&str]] = &[
        &["consolidate", "--input", "missing.ply", "--output", "x.ply"],
        &["consolidate", "--input", "cube.ply"],
        &["train", "--input", "cube.ply", "--iters", "1"],
        &[
            "infer",
            "--input",
            "cube.ply",
            "--checkpoint",
            "cube.obj",
            "--output",
            "x.ply",
        ],
        &[
            "consolidate",
            "--input",
            "cube.ply",
            "--output",
            "x.ply",
            "--criterion",
            "uniform",
            "--sampling",
            "balanced",
        ],
        &[
            "consolidate",
            "--input",
            "cube.ply",
            "--output",
            "x.ply",
            "--p-source",
            "0.9",
            "--p-target",
            "0.5",
        ],
        &[
            "consolidate",
            "--input",
            "cube.ply",
            "--output",
            "x.ply",
            "--iters",
            "1",
            "--out-points",
            "10",
        ],
        &[
            "label",
            "--input",
            "cube.ply",
            "--output",
            "x.ply",
            "--criterion",
            "uniform",
        ],
        &["eval", "fscore", "--input", "cube.ply"],
        &[
            "fixture",
            "--kind",
            "grid",
            "--output",
            "g.ply",
            "--mesh-output",
            "g.obj",
        ],
    ];
    for args in cases {
        let out = selfsample(d, args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty(), "{args:?} printed nothing");
    }
    fs::write(d.join("bad.toml"), "itres = 3\n").unwrap();
    let out = selfsample(d, &["train", "--config", "bad.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
}
