use std::fs;
use std::process::{Command, Output};

fn spinlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinlab")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = spinlab(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out.json");
    let out = spinlab(&["--out", target.to_str().unwrap(), "marginals", "--tree", "path:3", "--q", "3", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.exists());
}

#[test]
fn usage_and_domain_errors_have_distinct_codes() {
    assert_eq!(spinlab(&["marginals", "--q", "3"]).status.code(), Some(2));
    assert_eq!(spinlab(&["marginals", "--tree", "path:3", "--q", "3", "--pin", "0-1"]).status.code(), Some(2));
    assert_eq!(spinlab(&["marginals", "--graph", "/nonexistent/graph.txt", "--q", "3"]).status.code(), Some(1));
    // A triangle with two colors has no proper coloring.
    assert_eq!(spinlab(&["marginals", "--tree", "cycle:3", "--q", "2"]).status.code(), Some(1));
    assert_eq!(spinlab(&["--threads", "0", "gen-graph", "--n", "10", "--max-degree", "3"]).status.code(), Some(2));
    assert_eq!(spinlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let args = ["glauber", "--tree", "path:4", "--q", "4", "--method", "coalescence", "--trials", "40", "--seed", "9"];
    assert_eq!(stdout(&args), stdout(&args));
}

#[test]
fn thread_count_does_not_change_results() {
    let base = ["couple", "--tree", "bintree:4", "--q", "6", "--u", "0", "--b", "0", "--c", "1", "--trials", "300", "--seed", "5"];
    let one: Vec<&str> = ["--threads", "1"].iter().chain(&base).copied().collect();
    let four: Vec<&str> = ["--threads", "4"].iter().chain(&base).copied().collect();
    assert_eq!(stdout(&one), stdout(&four));
    let cert = ["certify", "--family", "coloring", "--q", "6", "--delta-max", "3", "--samples", "1500", "--seed", "3"];
    let one: Vec<&str> = ["--threads", "1"].iter().chain(&cert).copied().collect();
    let three: Vec<&str> = ["--threads", "3"].iter().chain(&cert).copied().collect();
    assert_eq!(stdout(&one), stdout(&three));
}

#[test]
fn json_embeds_config_and_csv_starts_with_it() {
    let json: serde_json::Value = serde_json::from_str(&stdout(&["marginals", "--tree", "path:2", "--q", "3", "--pin", "0:1"])).unwrap();
    assert_eq!(json["config"]["command"]["marginals"]["model"]["q"], 3);
    let probs = &json["result"]["marginals"][1]["probs"];
    assert_eq!(probs[1], 0.0);
    assert!((probs[0].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let csv = stdout(&["--format", "csv", "decay", "--kind", "tid", "--tree", "bintree:4", "--q", "6", "--depths", "1:3"]);
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config: "));
    assert_eq!(lines.next(), Some("distance,value,mode"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!((first[1].parse::<f64>().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn generated_graph_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    let out = spinlab(&["--out", path.to_str().unwrap(), "gen-graph", "--n", "40", "--max-degree", "3", "--min-girth", "5", "--seed", "2", "--text"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# config: "));
    // Far too large to enumerate, so parsing succeeds and the cap stops the run.
    let out = spinlab(&["influence", "--graph", path.to_str().unwrap(), "--q", "5", "--state-cap", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
    let out = spinlab(&["constants", "--regime", "eps-delta", "--eps", "0.5", "--delta-max", "28"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((1.0 - json["result"]["delta"].as_f64().unwrap() - 0.8825).abs() < 1e-4);
}

#[test]
fn json_lines_mode_ends_with_a_summary() {
    let text = stdout(&["couple", "--tree", "path:5", "--q", "4", "--u", "2", "--b", "0", "--c", "1", "--trials", "5", "--lines"]);
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].get("config").is_some());
    assert_eq!(lines[6]["summary"]["trials"], 5);
}
