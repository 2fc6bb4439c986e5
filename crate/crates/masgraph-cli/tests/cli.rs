use std::path::PathBuf;
use std::process::{Command, Output};

fn mc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_masgraph-mc"))
        .args(args)
        .env_remove("MASGRAPH_MEM_BUDGET_MB")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("masgraph-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

/// The golden columns of a CSV data row: "conf,property,mode" (unsplit),
/// sat, conclusive, states_stored, states_explored.
fn golden(line: &str) -> Vec<String> {
    // conf is quoted and contains commas
    let rest = line.rsplitn(7, ',').collect::<Vec<_>>();
    let mut cols: Vec<String> = rest.into_iter().rev().map(String::from).collect();
    cols.truncate(5);
    cols
}

#[test]
fn documented_examples() {
    let o = mc(&["check", "--corpus", "1,1,1,1", "--prop", "bstuff"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("bstuff concrete: true"));

    let o = mc(&["check", "--corpus", "1,1,1,1", "--prop", "bstuff", "--format", "csv"]);
    let concrete = golden(stdout(&o).lines().nth(1).unwrap());
    let o = mc(&["check", "--corpus", "1,1,1,1", "--prop", "bstuff", "--abstraction", "bstuff_spec", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let abs = golden(stdout(&o).lines().nth(1).unwrap());
    assert_eq!(abs[..3], ["\"1,1,1,1\",bstuff,abstract", "true", "true"]);
    let explored = |r: &[String]| r[4].parse::<usize>().unwrap();
    assert!(explored(&abs) < explored(&concrete));

    let o = mc(&["check", "--corpus", "1,1,1,1", "--prop", "valvote", "--voter", "1", "--cand", "1", "--trace"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("valvote concrete: false"));
    assert!(out.contains("trace ("));
}

#[test]
fn exit_codes() {
    let o = mc(&["check", "--corpus", "1,1,1,1", "--prop", "valvote", "--abstraction", "valvote_spec"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mc(&["check", "--corpus", "2,1,2,3", "--prop", "bstuff", "--mem-budget-mb", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_masgraph-mc"))
        .args(["check", "--corpus", "2,1,2,3", "--prop", "bstuff", "--format", "csv"])
        .env("MASGRAPH_MEM_BUDGET_MB", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains(",memout,false,"));
    let o = mc(&["check", "--corpus", "1,1,1,1", "--prop", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mc(&["check", "--corpus", "1,1,1,1", "--prop", "valvote", "--voter", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("voter 2"));
    let o = mc(&["check", "--corpus", "1,1,1,1", "--prop", "bstuff", "--mem-budget-mb", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mc(&["check", "--prop", "bstuff"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn model_and_query_files() {
    let d = scratch("files");
    let model = d.join("counter.masg");
    std::fs::write(
        &model,
        "int[0,3] x;\nprocess P {\n    state a;\n    init a;\n    trans a -> a { guard x < 3; assign x++; };\n}\nsystem P;\n",
    )
    .unwrap();
    let queries = d.join("counter.q");
    std::fs::write(&queries, "low: A[] x <= 2\nhigh: E<> x == 3\n").unwrap();
    let m = model.to_str().unwrap();
    let q = queries.to_str().unwrap();

    let o = mc(&["check", "--model", m, "--query", q, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("counter,low,concrete,false,true"), "{out}");
    assert!(out.contains("counter,high,concrete,true,true"), "{out}");

    let o = mc(&["check", "--model", m, "--query", q, "--query-name", "high", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);
    assert_eq!(rows[0]["sat"], true);

    let o = mc(&["check", "--model", m, "--query-text", "E[] x < 3", "--semantics", "finite-run"]);
    assert!(stdout(&o).contains(": true"));
    let o = mc(&["check", "--model", m, "--query-text", "E[] x < 3"]);
    assert!(stdout(&o).contains(": false"));

    let abs = d.join("hide.abs");
    std::fs::write(&abs, "merge big : bool = x >= 3;\nremove x;\nquery A[] !big;\n").unwrap();
    // Incrementing x makes `big` ambiguous, so neither direction decides.
    let o = mc(&["check", "--model", m, "--query-text", "A[] x < 3", "--abstraction", abs.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("abstract: inconclusive"), "{}", stdout(&o));
    let toggle = d.join("toggle.masg");
    std::fs::write(
        &toggle,
        "int[0,3] x;\nbool y;\nprocess P {\n    state a;\n    init a;\n    trans a -> a { guard x < 3; assign x++, y = !y; };\n}\nsystem P;\n",
    )
    .unwrap();
    let drop_y = d.join("drop_y.abs");
    std::fs::write(&drop_y, "remove y;\n").unwrap();
    let o = mc(&["check", "--model", toggle.to_str().unwrap(), "--query-text", "A[] x < 3", "--abstraction", drop_y.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("abstract: false"), "{}", stdout(&o));

    let bad = d.join("bad.masg");
    std::fs::write(&bad, "int x;\nprocess P {\n  state a\n}\n").unwrap();
    let o = mc(&["check", "--model", bad.to_str().unwrap(), "--query-text", "A[] true"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.masg") && err.contains("4:1"), "{err}");

    let o = mc(&["check", "--model", m, "--prop", "bstuff"]);
    assert_eq!(o.status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn bench_tables() {
    let o = mc(&["bench"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "conf,property,mode,sat,conclusive,states_stored,states_explored,time_s,mem_mb\n"
    );

    let d = scratch("bench");
    let md = d.join("t.md");
    let args = ["bench", "--up-to", "1,1,1,2", "--props", "bstuff,valvote", "--markdown", md.to_str().unwrap()];
    let a = mc(&args);
    let b = mc(&args);
    assert_eq!(a.status.code(), Some(0));
    let rows = |o: &Output| stdout(o).lines().skip(1).map(golden).collect::<Vec<_>>();
    assert_eq!(rows(&a).len(), 8);
    assert_eq!(rows(&a), rows(&b), "single-threaded runs are deterministic");
    let table = std::fs::read_to_string(&md).unwrap();
    assert_eq!(table.lines().count(), 10);
    assert!(table.lines().nth(3).unwrap().ends_with("| 1.4 |"), "{table}");
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn abstract_writes_specs_and_layouts() {
    let d = scratch("abstract");
    let o = mc(&["abstract", "--corpus", "1,1,1,2", "--abstraction", "bstuff_spec", "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let conf = d.join("1,1,1,2");
    for f in ["model.masg", "queries.q", "bstuff_spec.abs", "bstuff_spec.under.layout", "bstuff_spec.over.layout"] {
        assert!(conf.join(f).is_file(), "{f} missing");
    }
    let layout = std::fs::read_to_string(conf.join("bstuff_spec.under.layout")).unwrap();
    assert!(layout.starts_with("direction under"));
    assert!(layout.contains("merge ballot_diff : [-1,1] from b_recv, ep_sent"));
    let o = mc(&["abstract", "--corpus", "1,1,1,1", "--abstraction", "no_such_spec", "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&d);
}
