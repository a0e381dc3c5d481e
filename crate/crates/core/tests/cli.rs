use std::path::PathBuf;
use std::process::{Command, Output};

fn setmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_setmap"))
        .args(args)
        .env_remove("SETMAP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("setmap-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn embed_json_reports_every_trial() {
    let o = setmap(&["embed", "--pattern", "clique:4", "--C", "64", "--trials", "3", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["spec"]["seed"], 7);
    assert_eq!(doc["spec"]["C"], 64.0);
    assert_eq!(doc["trials"].as_array().unwrap().len(), 3);
}

#[test]
fn embed_csv_has_header_and_one_row_per_trial() {
    let o = setmap(&["embed", "--pattern", "path:6", "--C", "64", "--trials", "4", "--seed", "1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows[0],
        "seed,N,C,ell,retries,success,rule_a_rejects,rule_b_rejects,rule_c_rejects,prop1_ok,prop2_max_ratio,prop3_max_ratio"
    );
    assert_eq!(rows.len(), 5);
    assert!(rows[1..].iter().all(|r| r.split(',').count() == 12));
}

#[test]
fn out_dir_environment_names_the_file_after_the_command() {
    let dir = scratch("outdir");
    let o = Command::new(env!("CARGO_BIN_EXE_setmap"))
        .args(["scan", "--pattern", "clique:3", "--N-range", "3..5", "--trials", "10", "--seed", "2", "--format", "csv"])
        .env("SETMAP_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(dir.join("scan.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    assert_eq!(setmap(&["embed"]).status.code(), Some(2));
    assert_eq!(setmap(&["embed", "--pattern", "nosuch:3"]).status.code(), Some(2));
    assert_eq!(setmap(&["scan", "--pattern", "clique:3", "--N-range", "9..3"]).status.code(), Some(2));
    assert_eq!(setmap(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn mapping_file_with_other_host_is_a_usage_error() {
    let dir = scratch("mismatch");
    let map = dir.join("f.map");
    let o = setmap(&["gen-mapping", "--N", "8", "--ell", "1", "--seed", "3", "--out", map.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = setmap(&["oracle", "--pattern", "clique:3", "--mapping", map.to_str().unwrap(), "--N", "9"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains('8') && err.contains('9'), "{err}");
}

#[test]
fn mapping_file_round_trips_through_oracle() {
    let dir = scratch("roundtrip");
    let map = dir.join("f.map");
    setmap(&["gen-mapping", "--N", "7", "--ell", "1", "--seed", "3", "--out", map.to_str().unwrap()]);
    let o = setmap(&["oracle", "--pattern", "path:3", "--mapping", map.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(doc["found"].is_boolean());
}

#[test]
fn tampered_certificate_fails_replay() {
    let dir = scratch("cert");
    let cert = dir.join("k3.cert");
    let o = setmap(&[
        "certify", "--pattern", "clique:3", "--N", "3", "--ell", "1", "--kind", "w", "--trials", "1", "--seed", "1",
        "--certificate", cert.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(setmap(&["certify", "--replay", cert.to_str().unwrap()]).status.code(), Some(0));

    let text = std::fs::read_to_string(&cert).unwrap();
    let forged = text.replacen("nodes=", "nodes=1", 1);
    std::fs::write(&cert, forged).unwrap();
    assert_eq!(setmap(&["certify", "--replay", cert.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn gen_graph_output_parses_back() {
    let o = setmap(&["gen-graph", "--pattern", "random:n=9,m=12", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let p = setmap::graphs::parse_pattern(&stdout(&o)).unwrap();
    assert_eq!((p.n(), p.m()), (9, 12));
}
