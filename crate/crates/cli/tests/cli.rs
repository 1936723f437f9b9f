use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn labmine(args: &[&str], data_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_labmine"));
    cmd.args(args).env_remove("LABMINE_DATA_DIR").env_remove("LABMINE_JOBS");
    if let Some(d) = data_dir {
        cmd.env("LABMINE_DATA_DIR", d);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    o
}

fn corpus(patients: &str, items: &str, informative: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(labmine(&["synth", "--out", d, "--patients", patients, "--items", items, "--informative", informative, "--seed", "3"], None));
    dir
}

fn jsonl(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn usage_errors_exit_one() {
    let o = labmine(&["rank", "--mode", "avg"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--events"), "{}", stderr(&o));
    assert_eq!(labmine(&["rank", "--bogus"], None).status.code(), Some(1));
    assert_eq!(labmine(&["explode"], None).status.code(), Some(1));
    assert_eq!(labmine(&["sweep", "--events", "e", "--outcomes", "o", "--algo", "perceptron"], None).status.code(), Some(1));
    assert_eq!(labmine(&["--help"], None).status.code(), Some(0));
    assert_eq!(labmine(&["--version"], None).status.code(), Some(0));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = labmine(&["rank", "--events", missing.to_str().unwrap(), "--outcomes", missing.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));

    let events = dir.path().join("e.csv");
    let outcomes = dir.path().join("o.csv");
    std::fs::write(&events, "SUBJECT_ID,ITEMID,CHARTTIME,VALUENUM\n1,50001,3/1/2800 10:00,1.0\n").unwrap();
    std::fs::write(&outcomes, "SUBJECT_ID,DIED\n1,7\n").unwrap();
    let o = labmine(&["rank", "--events", events.to_str().unwrap(), "--outcomes", outcomes.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn rank_writes_sorted_ranking_with_run_record() {
    let dir = corpus("200", "30", "3");
    let out = dir.path().join("ranking.csv");
    ok(labmine(&["rank", "--mode", "avg", "--out", out.to_str().unwrap()], Some(dir.path())));
    let text = std::fs::read_to_string(&out).unwrap();
    let gains: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(gains.len(), 30);
    assert!(gains.windows(2).all(|w| w[0] >= w[1]));
    let planted = std::fs::read_to_string(dir.path().join("planted.txt")).unwrap();
    let head: Vec<&str> = text.lines().skip(1).take(3).map(|l| l.split(',').nth(1).unwrap()).collect();
    for p in planted.lines() {
        assert!(head.contains(&p), "planted {p} not in {head:?}");
    }
    let run: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ranking.csv.run.json")).unwrap()).unwrap();
    assert_eq!(run["config"]["command"]["command"], "rank");
    assert!(run.get("seed").is_some());
}

#[test]
fn sweep_reports_published_head_sizes() {
    let dir = corpus("40", "619", "2");
    let o = ok(labmine(&["sweep", "--algo", "zeror", "--k", "4", "--format", "structured"], Some(dir.path())));
    let selected: Vec<u64> = jsonl(&stdout(&o)).iter().map(|r| r["selected"].as_u64().unwrap()).collect();
    assert_eq!(selected, [62, 124, 186, 248, 310, 371, 433, 495, 557, 619]);
    let text = stdout(&ok(labmine(&["sweep", "--algo", "zeror", "--k", "4"], Some(dir.path()))));
    assert!(text.contains("\n10%                 62 "), "{text}");
}

#[test]
fn runs_are_reproducible_and_eval_matches_sweep() {
    let dir = corpus("150", "40", "3");
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        ok(labmine(&["sweep", "--algo", "rf", "--seed", "9", "--out", out.to_str().unwrap()], Some(dir.path())));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let sweep = jsonl(&stdout(&ok(labmine(&["sweep", "--algo", "rf", "--seed", "9", "--format", "structured"], Some(dir.path())))));
    let eval = jsonl(&stdout(&ok(labmine(&["eval", "--algo", "rf", "--seed", "9", "--format", "structured"], Some(dir.path())))));
    let last = sweep.last().unwrap();
    assert_eq!(last["percent"], 100);
    assert_eq!(last["accuracy"], eval[0]["accuracy"]);
    assert_eq!(last["confusion"], eval[0]["confusion"]);
    assert_eq!(eval[0]["run"]["seed"], 9);

    let again = corpus("150", "40", "3");
    for f in ["labevents.csv", "outcomes.csv", "labitems.csv", "planted.txt"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(again.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn eval_all_and_split_protocol() {
    let dir = corpus("120", "20", "2");
    let text = stdout(&ok(labmine(&["eval", "--k", "5"], Some(dir.path()))));
    for name in ["NaiveBayes", "SMO", "ZeroR", "J48", "RandomForest"] {
        assert!(text.contains(name), "{text}");
    }
    let rows = jsonl(&stdout(&ok(labmine(
        &["eval", "--algo", "j48", "--protocol", "split", "--repeats", "3", "--format", "structured"],
        Some(dir.path()),
    ))));
    assert_eq!(rows[0]["repeats"].as_array().unwrap().len(), 3);
    assert!(rows[0]["mean_train"]["accuracy"].is_number() && rows[0]["mean_test"]["accuracy"].is_number());
    let o = labmine(&["eval", "--protocol", "split", "--train-fraction", "1.5"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn table_formats_feed_rank_identically() {
    let dir = corpus("100", "15", "2");
    let arff = dir.path().join("t.arff");
    let csv = dir.path().join("t.csv");
    for t in [&arff, &csv] {
        ok(labmine(&["ingest", "--mode", "count", "--out", t.to_str().unwrap()], Some(dir.path())));
    }
    let from_events = stdout(&ok(labmine(&["rank", "--mode", "count", "--format", "structured"], Some(dir.path()))));
    let strip = |t: &str| -> Vec<(Value, Value)> { jsonl(t).iter().map(|r| (r["item"].clone(), r["gain"].clone())).collect() };
    for t in [&arff, &csv] {
        let o = ok(labmine(&["rank", "--table", t.to_str().unwrap(), "--mode", "count", "--format", "structured"], None));
        assert_eq!(strip(&stdout(&o)), strip(&from_events));
    }
}

#[test]
fn monitor_replays_stdin_and_files() {
    let dir = corpus("80", "20", "3");
    let model = dir.path().join("model.json");
    let tree = stdout(&ok(labmine(&["train", "--algo", "j48", "--out", model.to_str().unwrap()], Some(dir.path()))));
    assert!(tree.contains("Number of leaves"));
    let warnings = dir.path().join("w.csv");
    let summary = dir.path().join("s.csv");
    ok(labmine(
        &[
            "monitor",
            "--model",
            model.to_str().unwrap(),
            "--threshold",
            "0.5",
            "--out",
            warnings.to_str().unwrap(),
            "--summary",
            summary.to_str().unwrap(),
        ],
        Some(dir.path()),
    ));
    let summary = std::fs::read_to_string(&summary).unwrap();
    assert_eq!(summary.lines().count(), 81);
    assert!(std::fs::read_to_string(&warnings).unwrap().starts_with("SUBJECT_ID,CHARTTIME,PROBABILITY,THRESHOLD\n"));

    let events = std::fs::read(dir.path().join("labevents.csv")).unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_labmine"))
        .args(["monitor", "--model", model.to_str().unwrap(), "--events", "-", "--suppression", "none"])
        .env_remove("LABMINE_DATA_DIR")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&events).unwrap();
    let o = ok(child.wait_with_output().unwrap());
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines[0], "SUBJECT_ID,CHARTTIME,PROBABILITY,THRESHOLD");
    assert!(lines.iter().skip(1).all(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap() >= 0.5));
    assert_eq!(labmine(&["monitor", "--model", model.to_str().unwrap(), "--threshold", "0"], Some(dir.path())).status.code(), Some(1));
}
