use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn lazyid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lazyid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("lazyid-cli-{}-{name}", std::process::id()));
    std::fs::write(&path, text).expect("temp file");
    path
}

#[test]
fn solve_prints_rule_and_counts() {
    let ex61 = fixture("ex61.id");
    let o = lazyid(&["solve", &ex61]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("meu        9.9"), "{out}");
    assert!(out.contains("ops        21 "), "{out}");
    assert!(out.contains("rule D | C1"), "{out}");
    assert!(out.contains("C1=f -> d1"), "{out}");
    assert!(out.contains("C1=t -> d0"), "{out}");
}

#[test]
fn evidence_collapses_the_rule() {
    let ex61 = fixture("ex61.id");
    let o = lazyid(&["solve", &ex61, "--evidence", "C1=f"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("meu        15.6"), "{out}");
    assert!(out.contains("rule D\n  * -> d1"), "{out}");
}

#[test]
fn json_is_byte_stable_across_runs() {
    let ex52 = fixture("ex52.id");
    for engine in ["lazy", "hugin", "ve", "brute"] {
        let a = lazyid(&["solve", &ex52, "--engine", engine, "--json"]);
        let b = lazyid(&["solve", &ex52, "--engine", engine, "--json"]);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{engine}");
        let v: serde_json::Value = serde_json::from_slice(&a.stdout).expect("valid json");
        assert_eq!(v["engine"], engine);
        assert_eq!(v["rules"].as_array().map(Vec::len), Some(4));
    }
}

#[test]
fn flags_keep_the_meu() {
    let ex52 = fixture("ex52.id");
    let base = lazyid(&["solve", &ex52, "--json"]);
    let meu = serde_json::from_slice::<serde_json::Value>(&base.stdout).unwrap()["meu"].clone();
    for flag in ["--no-prune", "--force-divide"] {
        let o = lazyid(&["solve", &ex52, flag, "--json"]);
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["meu"], meu, "{flag}");
    }
}

#[test]
fn dump_tree_lists_cliques() {
    let o = lazyid(&["solve", &fixture("ex61.id"), "--dump-tree"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("C1"));
}

#[test]
fn compare_reports_agreement() {
    let o = lazyid(&["compare", &fixture("ex52.id")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("engines agree"), "{out}");
    for engine in ["lazy", "hugin", "ve", "brute"] {
        assert!(out.lines().any(|l| l.starts_with(engine)), "{out}");
    }
}

#[test]
fn model_errors_exit_with_two() {
    let ex61 = fixture("ex61.id");
    for bad in [
        vec!["solve", ex61.as_str(), "--evidence", "C2=f"],
        vec!["solve", ex61.as_str(), "--evidence", "C1=maybe"],
        vec!["solve", ex61.as_str(), "--evidence", "C1"],
        vec!["compare", ex61.as_str(), "--evidence", "Q=f"],
    ] {
        let o = lazyid(&bad);
        assert_eq!(o.status.code(), Some(2), "{bad:?}");
        assert!(!o.stderr.is_empty());
    }
    let broken = std::fs::read_to_string(&ex61).unwrap().replace("0.2 0.3 0.4 0.1", "0.2 0.3 0.4 0.2");
    let path = scratch("rows.id", &broken);
    let o = lazyid(&["solve", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    let _ = std::fs::remove_file(path);
}

#[test]
fn unreadable_file_exits_with_one() {
    let o = lazyid(&["solve", "/nonexistent/model.id"]);
    assert_eq!(o.status.code(), Some(1));
}
