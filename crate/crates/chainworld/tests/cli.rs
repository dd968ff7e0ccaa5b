mod support;

use std::path::Path;
use std::process::{Command, Output};

use support::fixture;

fn chainworld(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainworld"))
        .args(args)
        .current_dir(dir)
        .env_remove("CHAINWORLD_API_KEY")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = chainworld(&["replay", "--no-such-flag"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let tasks = fixture("tasks.txt");
    let o = chainworld(
        &["gen-corpus", "--tasks", path(&tasks), "--out", "out"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed"));
    let o = chainworld(
        &["replay", "--plan", "x.jsonl", "--matcher", "fuzzy"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn replay_prints_states_and_steps() {
    let dir = tempfile::tempdir().unwrap();
    let o = chainworld(
        &["replay", "--plan", path(&fixture("toy.jsonl"))],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let expected = "\
plan p1 (3 steps): toy plan
state 0: p1; p3
step 1 s1: s1 action: valid
  add: e1
  delete: -
state 1: p1; p3; e1
step 2 s2: s2 action: valid
  add: e2
  delete: -
state 2: p1; p3; e1; e2
step 3 s3: s3 action: valid
  add: e3
  delete: -
state 3: p1; p3; e1; e2; e3
3/3 steps valid
";
    assert_eq!(stdout(&o), expected);
}

#[test]
fn replay_missing_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = chainworld(&["replay", "--plan", "missing.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn check_endpoint_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let url = support::mock_server::dead_url();
    let o = chainworld(
        &[
            "check-endpoint",
            "--base-url",
            &url,
            "--model",
            "m",
            "--timeout",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL health"));
}

#[test]
fn corpus_commands_write_artifacts_with_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = chainworld(
        &[
            "gen-corpus",
            "--seed",
            "3",
            "--tasks",
            path(&fixture("tasks.txt")),
            "--script",
            path(&fixture("toy_script.json")),
            "--out",
            "full",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Full: 40 tasks, 40 plans built, 0 failed, 38 kept, 2 discarded"));
    for f in ["plans", "reports", "corpus", "discarded", "failures"] {
        let artifact = d.join("full").join(format!("{f}.jsonl"));
        assert!(artifact.exists(), "{f}");
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(d.join("full").join(format!("{f}.jsonl.manifest.json")))
                .unwrap(),
        )
        .unwrap();
        assert_eq!(manifest["command"], "gen-corpus");
        assert_eq!(manifest["seed"], 3);
        assert_eq!(
            manifest["artifact"]["sha256"],
            chainworld::io::sha256_file(&artifact).unwrap()
        );
        let names: Vec<&str> = manifest["inputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|i| i["file"].as_str().unwrap())
            .collect();
        assert!(
            names.contains(&"tasks.txt") && names.contains(&"toy_script.json"),
            "{names:?}"
        );
    }

    let corpus = d.join("full/corpus.jsonl");
    let o = chainworld(
        &[
            "refactor",
            "--corpus",
            path(&corpus),
            "--out",
            "traces.jsonl",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("traces.jsonl.manifest.json").exists());

    let o = chainworld(
        &[
            "export-training",
            "--corpus",
            path(&corpus),
            "--direction",
            "effect",
            "--out",
            "pairs.jsonl",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let pairs = std::fs::read_to_string(d.join("pairs.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(pairs.lines().next().unwrap()).unwrap();
    assert!(first["input"]
        .as_str()
        .unwrap()
        .starts_with("List the effects of the action:"));

    let o = chainworld(
        &[
            "filter",
            "--corpus",
            path(&d.join("full/plans.jsonl")),
            "--kept",
            "k.jsonl",
            "--discarded",
            "x.jsonl",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(d.join("k.jsonl")).unwrap(),
        std::fs::read(&corpus).unwrap(),
        "filtering the unfiltered plans again reproduces the corpus"
    );
}

#[test]
fn evaluation_and_search_on_the_toy_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = fixture("toy_corpus.jsonl");
    let run = format!("toy={}", path(&corpus));
    let o = chainworld(&["eval-inference", "--run", &run, "--out", "inf"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(d.join("inf/report.txt")).unwrap();
    assert!(report.contains("toy"), "{report}");
    assert!(d.join("inf/report.json.manifest.json").exists());

    let o = chainworld(
        &[
            "eval-worldmodel",
            "--seed",
            "5",
            "--run",
            &run,
            "--out",
            "wm",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("wm/report.txt").exists());
    assert!(d.join("wm/valid_action.toy.jsonl").exists());

    let o = chainworld(
        &[
            "analyze-search",
            "--train",
            path(&corpus),
            "--test",
            path(&corpus),
            "--out",
            "search",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("search/summary.json.manifest.json").exists());

    let o = chainworld(&["eval-worldmodel", "--run", &run, "--out", "wm2"], d);
    assert_eq!(
        o.status.code(),
        Some(2),
        "a sampling command without a seed"
    );
}
