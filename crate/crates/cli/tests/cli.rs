use std::path::Path;
use std::process::{Command, Output};

fn qchain(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qchain"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_verifier(dir: &Path, name: &str, first: &str) -> String {
    let p = dir.join(name);
    let body = format!(
        r#"{{"n1":1,"n2":1,"circuit":{{"n":2,"gates":[{{"name":"{first}","qubits":[1]}},{{"name":"SWAP","qubits":[1,2]}}]}}}}"#
    );
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn chain_lists_every_template() {
    let o = qchain(&["chain", "--n", "2", "--L", "4"], &[]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("17 templates, T = 16"), "{text}");
    assert!(text.lines().next().unwrap().contains("T_R Q Q N N N"));
}

#[test]
fn graph_reports_one_all_legal_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    let o = qchain(&["graph", "--n", "2", "--L", "4", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0);
    let v = read_json(&out);
    let legal = v["result"]["all_legal"].as_array().unwrap();
    assert_eq!(legal.len(), 1);
    assert_eq!(legal[0]["m"], 2);
    assert_eq!(legal[0]["templates"].as_array().unwrap().len(), 17);
}

#[test]
fn bad_input_exits_one() {
    assert_eq!(code(&qchain(&["chain", "--n", "2", "--L", "4", "--bogus"], &[])), 1);
    assert_eq!(code(&qchain(&["chain", "--n", "2", "--L", "3"], &[])), 1);
    assert_eq!(code(&qchain(&["canonicalize", "--circuit", "/nonexistent.json"], &[])), 1);
    assert_eq!(code(&qchain(&["gap-scan", "--n", "2", "--L", "4", "--grid", "1", "--out", "/tmp/x.csv"], &[])), 1);
}

#[test]
fn materialization_cap_is_an_input_error() {
    let o = qchain(
        &["encode", "--n", "2", "--L", "2", "--check"],
        &[("CHAIN_MAX_DIM", "100")],
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
    let o = qchain(&["encode", "--n", "2", "--L", "2"], &[("CHAIN_MAX_DIM", "lots")]);
    assert_eq!(code(&o), 0, "cap is only read when something is materialized");
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    let csv = dir.path().join("g.csv");
    let rep = dir.path().join("g.json");
    for _ in 0..2 {
        let o = qchain(
            &["gap-scan", "--n", "2", "--L", "4", "--out", csv.to_str().unwrap(), "--report", rep.to_str().unwrap()],
            &[],
        );
        assert_eq!(code(&o), 0);
        texts.push((std::fs::read(&csv).unwrap(), std::fs::read(&rep).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn gap_scan_csv_has_header_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let o = qchain(&["gap-scan", "--n", "2", "--L", "4", "--grid", "11", "--out", csv.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "s,lambda0,lambda1,gap");
    assert_eq!(lines.len(), 12);
    let last: Vec<f64> = lines[11].split(',').map(|x| x.parse().unwrap()).collect();
    let want = 1.0 - (std::f64::consts::PI / 17.0).cos();
    assert!((last[3] - want).abs() < 1e-9);
}

#[test]
fn qma_check_decides_calibrated_verifiers() {
    let dir = tempfile::tempdir().unwrap();
    let acc = write_verifier(dir.path(), "acc.json", "X");
    let rej = write_verifier(dir.path(), "rej.json", "I");
    for (v, want) in [(acc, "Yes"), (rej, "No")] {
        let out = dir.path().join("r.json");
        let o = qchain(&["qma", "check", "--verifier", &v, "--out", out.to_str().unwrap()], &[]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(read_json(&out)["result"]["decision"], want);
    }
}

#[test]
fn qma_build_writes_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let v = write_verifier(dir.path(), "acc.json", "X");
    let out = dir.path().join("inst");
    let o = qchain(&["qma", "build", "--verifier", &v, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0);
    let side = read_json(&dir.path().join("inst.json"))["result"].clone();
    for k in ["a", "b", "n1", "n2", "n", "L", "d"] {
        assert!(!side[k].is_null(), "sidecar lacks {k}");
    }
    assert_eq!(side["d"], 13);
}

#[test]
fn canonicalize_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("c.json");
    std::fs::write(&src, r#"{"n":2,"gates":[{"name":"H","qubits":[1]},{"name":"CNOT","qubits":[1,2]}]}"#).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(code(&qchain(&["canonicalize", "--circuit", src.to_str().unwrap(), "--out", a.to_str().unwrap()], &[])), 0);
    assert_eq!(code(&qchain(&["canonicalize", "--circuit", a.to_str().unwrap(), "--out", b.to_str().unwrap()], &[])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn verify_lemmas_passes_on_the_small_chain() {
    let o = qchain(&["verify-lemmas", "--trials", "50"], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
