use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypermodel"))
}

fn cases_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Runs with JSON output; returns exit code and parsed report.
fn json(args: &[&str]) -> (i32, Value) {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let out = run(&all);
    let v = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (out.status.code().unwrap(), v)
}

fn coeffs(v: &Value) -> Vec<f64> {
    v["data"]["coeffs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn residual(v: &Value, name: &str) -> f64 {
    let c = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"));
    c["residual"].as_f64().unwrap()
}

#[test]
fn series_commands() {
    let (code, v) = json(&["series", "invert", "--weights", "bergman:2", "--terms", "4"]);
    assert_eq!(code, 0);
    assert_eq!(coeffs(&v), vec![1.0, -2.0, 1.0, 0.0]);
    let (_, v) = json(&["series", "invert", "--weights", "hardy", "--terms", "3"]);
    assert_eq!(coeffs(&v), vec![1.0, -1.0, 0.0]);
    let (code, v) = json(&[
        "series",
        "props",
        "--weights",
        "bergman:1.5,bergman:2",
        "--terms",
        "16",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["data"]["properties"]["p1_ok"], true);
    let (_, v) = json(&[
        "series",
        "quotient",
        "--weights",
        "hardy",
        "--terms",
        "4",
        "--r",
        "0.5",
        "--s",
        "0.5",
    ]);
    assert_eq!(coeffs(&v), vec![1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn check_commands() {
    let (code, _) = json(&[
        "check",
        "--weights",
        "bergman:2,hardy",
        "--tuple",
        "multishift:4,4",
    ]);
    assert_eq!(code, 0);
    let (code, _) = json(&[
        "check",
        "--weights",
        "bergman:1,bergman:1",
        "--tuple",
        "scalars:[0.5,0.5]",
    ]);
    assert_eq!(code, 0);
    let (code, v) = json(&[
        "check",
        "--weights",
        "hardy,hardy",
        "--tuple",
        "random-contraction:3:4:2:1.2",
    ]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "NotContraction");
    let cfg = cases_dir().join("06-check-jordan-fails.toml");
    let (code, v) = json(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(v["verdict"], "fail");
}

#[test]
fn dilate_commands() {
    let (code, v) = json(&[
        "dilate",
        "--pure",
        "--weights",
        "hardy,hardy",
        "--tuple",
        "nilpotent:11:4:2",
        "--degrees",
        "4,4",
    ]);
    assert_eq!(code, 0);
    assert!(residual(&v, "isometry") < 1e-9);
    assert!(residual(&v, "intertwining_1") < 1e-9 && residual(&v, "intertwining_2") < 1e-9);
    let (code, v) = json(&[
        "dilate",
        "--general",
        "--weights",
        "hardy,bergman:2",
        "--tuple",
        "unitaries:6:3:2",
        "--degrees",
        "3,3",
    ]);
    assert_eq!(code, 0);
    let live: Vec<u64> = v["data"]["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|b| b["e_dim"].as_u64() != Some(0))
        .map(|b| b["mask"].as_u64().unwrap())
        .collect();
    assert_eq!(live, vec![0]);
    // I - 2TT* is not positive for the 0.95 Jordan block.
    let data = cases_dir().join("data/jordan095.json");
    let spec = format!("explicit:[{}]", data.display());
    let (code, v) = json(&[
        "dilate",
        "--pure",
        "--weights",
        "bergman:2",
        "--tuple",
        &spec,
        "--degrees",
        "2",
    ]);
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], "NotHypercontractive");
    let (_, v) = json(&[
        "dilate",
        "--pure",
        "--full",
        "--weights",
        "hardy",
        "--tuple",
        "scalars:[0]",
        "--degrees",
        "3",
    ]);
    assert_eq!(v["data"]["map"]["rows"], 3);
}

#[test]
fn charfn_commands() {
    let (code, v) = json(&[
        "charfn",
        "--weights",
        "hardy",
        "--tuple",
        "scalars:[0]",
        "--degrees",
        "4",
    ]);
    assert_eq!(code, 0);
    // θ(z) = z on one column of E, zero on the rest.
    for row in v["data"]["theta"].as_array().unwrap() {
        let (zr, zi) = (row["z"][0].as_f64().unwrap(), row["z"][1].as_f64().unwrap());
        let th = &row["theta"];
        let re: Vec<f64> = th["re"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        let im: Vec<f64> = th["im"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        let modulus: f64 = re
            .iter()
            .zip(&im)
            .map(|(a, b)| a * a + b * b)
            .sum::<f64>()
            .sqrt();
        assert!((modulus - (zr * zr + zi * zi).sqrt()).abs() < 1e-14);
        assert!(
            re.iter()
                .zip(&im)
                .filter(|(a, b)| a.abs() + b.abs() > 1e-14)
                .count()
                <= 1
        );
    }
    let (code, v) = json(&[
        "charfn",
        "--weights",
        "bergman:2",
        "--tuple",
        "nilpotent:12:4:1",
        "--degrees",
        "4",
    ]);
    assert_eq!(code, 0, "{v}");
    let (code, v) = json(&[
        "charfn",
        "--weights",
        "hardy",
        "--tuple",
        "unitaries:1:2:1",
        "--degrees",
        "4",
    ]);
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], "NotPure");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(
        run(&[
            "check",
            "--weights",
            "bergman:-1",
            "--tuple",
            "scalars:[0.1]"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["check", "--weights", "hardy", "--tuple", "scalars:[0.1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "check",
            "--weights",
            "hardy,hardy",
            "--tuple",
            "scalars:[0.1]"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(run(&["dilate", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["check", "--config", "/nonexistent.toml"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn out_flag_and_seeded_determinism() {
    let dir = std::env::temp_dir().join(format!("hypermodel-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let a = dir.join("a.txt");
    let b = dir.join("b.txt");
    for p in [&a, &b] {
        let out = run(&[
            "dilate",
            "--weights",
            "bergman:2,hardy",
            "--tuple",
            "nilpotent:1:3:2",
            "--degrees",
            "3,3",
            "--seed",
            "9",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert!(String::from_utf8(ta).unwrap().contains("verdict: PASS"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn verify_all_from_directory() {
    let out = run(&["verify-all", "--cases", cases_dir().to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("(expected exit").count(), 12);
}
