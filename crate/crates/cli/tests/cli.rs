use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_spinimage");

const SUBCOMMANDS: &[&[&str]] = &[
    &[],
    &["bp"],
    &["bp", "eval"],
    &["bp", "gibbs"],
    &["bp", "check-recursion"],
    &["weitz"],
    &["weitz", "check"],
    &["image"],
    &["image", "vertices"],
    &["image", "member"],
    &["image", "extremize"],
    &["counterexample"],
    &["counterexample", "certify"],
    &["counterexample", "verify"],
    &["signature"],
    &["signature", "scan"],
    &["signature", "build"],
    &["potts"],
    &["potts", "solve-product"],
    &["potts", "criterion"],
    &["potts", "bulk"],
    &["inequalities"],
    &["inequalities", "check"],
    &["influence"],
    &["influence", "compute"],
    &["influence", "contraction"],
];

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn help_matches_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut stale = Vec::new();
    for path in SUBCOMMANDS {
        let mut args: Vec<&str> = path.to_vec();
        args.push("--help");
        let out = run(&args);
        assert!(out.status.success(), "{args:?}");
        let text = String::from_utf8(out.stdout).unwrap();
        let name = if path.is_empty() { "root".to_owned() } else { path.join("_") };
        let file = golden_dir().join(format!("{name}.txt"));
        if update {
            fs::write(&file, &text).unwrap();
        } else if fs::read_to_string(&file).ok().as_deref() != Some(text.as_str()) {
            stale.push(name);
        }
    }
    assert!(stale.is_empty(), "help text changed for {stale:?}; rerun with UPDATE_GOLDEN=1");
}

#[test]
fn every_leaf_help_lists_global_flags() {
    for path in SUBCOMMANDS.iter().filter(|p| p.len() == 2) {
        let mut args: Vec<&str> = path.to_vec();
        args.push("--help");
        let text = String::from_utf8(run(&args).stdout).unwrap();
        for flag in ["--seed", "--budget", "--tol", "--out"] {
            assert!(text.contains(flag), "{path:?} help lacks {flag}");
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ferro = write(d, "a.json", r#"{"q":3,"entries":[[2,1,1],[1,2,1],[1,1,2]]}"#);
    let ones = write(d, "ones.json", r#"{"q":3,"entries":[[1,1,1],[1,1,1],[1,1,1]]}"#);
    let bad = write(d, "bad.json", r#"{"q":3,"entries":[[2,1,1],[1,-2,1],[1,1,2]]}"#);
    let big = write(d, "g.json", r#"{"n":30,"edges":[[0,1]]}"#);

    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["bp", "gibbs", "--graph", &big, "--matrix", &ferro]).status.code(), Some(3));

    let out = run(&["bp", "gibbs", "--graph", &big, "--matrix", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("entries"), "{err}");

    // condition (a) fails for the all-ones matrix
    let out = run(&["counterexample", "certify", "--beta", "1", "--matrix", &ones, "--d", "2"]);
    assert_eq!(out.status.code(), Some(1));

    let w = d.join("w.json");
    let w = w.to_str().unwrap();
    let out = run(&["counterexample", "certify", "--beta", "2", "--matrix", &ferro, "--d", "2", "--seed", "7", "--out", w]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(run(&["counterexample", "verify", "--witness", w]).status.code(), Some(0));

    // a tampered witness no longer verifies
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(w).unwrap()).unwrap();
    json["extremal_value"] = serde_json::json!(0.15);
    let tampered = write(d, "t.json", &json.to_string());
    let out = run(&["counterexample", "verify", "--witness", &tampered]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ferro = write(d, "a.json", r#"{"q":3,"entries":[[2,1,1],[1,2,1],[1,1,2]]}"#);
    let obj = write(d, "o.json", "[1, 0, 0]");
    let cases: Vec<Vec<&str>> = vec![
        vec!["counterexample", "certify", "--beta", "2", "--matrix", &ferro, "--d", "2", "--seed", "7"],
        vec!["image", "extremize", "--matrix", &ferro, "--d", "3", "--objective", &obj, "--restarts", "16", "--seed", "3"],
        vec!["potts", "bulk", "--q", "3", "--d", "6", "--beta", "0.6", "--eps", "0.2", "--n", "8", "--seed", "1"],
        vec!["influence", "contraction", "--matrix", &ferro, "--delta", "3", "--n", "20", "--seed", "3"],
    ];
    for args in cases {
        let first = run(&args);
        let second = run(&args);
        assert!(first.status.success(), "{args:?}");
        assert!(!first.stdout.is_empty());
        assert_eq!(first.stdout, second.stdout, "{args:?}");
    }
}

#[test]
fn bp_eval_and_member_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ferro = write(d, "a.json", r#"{"q":3,"entries":[[2,1,1],[1,2,1],[1,1,2]]}"#);
    let mu = write(d, "mu.json", r#"{"q":3,"d":1,"weights":[0.5,0.25,0.25]}"#);
    let out = run(&["bp", "eval", "--matrix", &ferro, "--dist", &mu]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let f: Vec<f64> = serde_json::from_value(v["f"].clone()).unwrap();
    // G = A mu = (1.5, 1.25, 1.25)
    for (x, y) in f.iter().zip([0.375, 0.3125, 0.3125]) {
        assert!((x - y).abs() < 1e-15);
    }
    let p = write(d, "p.json", &serde_json::to_string(&f).unwrap());
    let out = run(&["image", "member", "--matrix", &ferro, "--d", "1", "--point", &p]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["is_member"], serde_json::json!(true));
}
