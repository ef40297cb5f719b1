use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gamilt"));
    c.env_remove("GAMI_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gamilt")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "gamilt {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    data: PathBuf,
    model: PathBuf,
}

const QUICK: [&str; 6] = ["--rounds", "2", "--max-iterations", "40", "--patience", "5"];

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("sim.csv");
    ok(&["simulate", "--model", "2", "--n", "1500", "--rho", "0.3", "--seed", "4", "--out", p(&data)]);
    let model = dir.path().join("model.json");
    let mut args = vec!["fit", "--data", p(&data), "--response", "y", "--seed", "3", "--out", p(&model)];
    args.extend(QUICK);
    ok(&args);
    Fixture { dir, data, model }
}

#[test]
fn simulate_writes_data_and_truth() {
    let f = fixture();
    let text = fs::read_to_string(&f.data).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 31);
    assert_eq!(header[0], "x1");
    assert_eq!(header[30], "y");
    assert_eq!(lines.count(), 1500);
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(f.dir.path().join("sim.csv.truth.json")).unwrap()).unwrap();
    assert_eq!(truth["pairs"].as_array().unwrap().len(), 8);
    assert_eq!(truth["pairs"][0], serde_json::json!(["x1", "x2"]));
}

#[test]
fn predict_appends_column_deterministically() {
    let f = fixture();
    let out1 = f.dir.path().join("p1.csv");
    let out2 = f.dir.path().join("p2.csv");
    ok(&["predict", "--model", p(&f.model), "--data", p(&f.data), "--out", p(&out1)]);
    ok(&["predict", "--model", p(&f.model), "--data", p(&f.data), "--out", p(&out2)]);
    let a = fs::read_to_string(&out1).unwrap();
    assert_eq!(a, fs::read_to_string(&out2).unwrap());
    let header = a.lines().next().unwrap();
    assert!(header.ends_with(",y,prediction"));
    assert_eq!(a.lines().count(), 1501);
    // the original cells are carried through untouched
    let src_first = fs::read_to_string(&f.data).unwrap().lines().nth(1).unwrap().to_string();
    assert!(a.lines().nth(1).unwrap().starts_with(&src_first));
}

#[test]
fn thread_count_does_not_change_the_model() {
    let f = fixture();
    let other = f.dir.path().join("model3.json");
    let mut args = vec![
        "--threads", "3", "fit", "--data", p(&f.data), "--seed", "3", "--out", p(&other),
    ];
    args.extend(QUICK);
    ok(&args);
    assert_eq!(fs::read(&f.model).unwrap(), fs::read(&other).unwrap());
}

#[test]
fn report_writes_one_csv_per_term() {
    let f = fixture();
    let out = f.dir.path().join("report");
    let listed = ok(&["report", "--model", p(&f.model), "--out", p(&out)]);
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(&f.model).unwrap()).unwrap();
    let effects = &model["model"]["effects"];
    let n_terms = effects["mains"].as_array().unwrap().len() + effects["interactions"].as_array().unwrap().len();
    assert_eq!(listed.lines().count(), n_terms + 1);
    let files: Vec<_> = fs::read_dir(&out).unwrap().collect();
    assert_eq!(files.len(), n_terms + 1);
    let main = fs::read_to_string(out.join("main_x1.csv")).unwrap();
    assert_eq!(main.lines().count(), 257);
    let importance = fs::read_to_string(out.join("importance.csv")).unwrap();
    assert!(importance.starts_with("rank,kind,term,importance"));
}

#[test]
fn verify_passes_on_training_rows() {
    let f = fixture();
    let out = ok(&[
        "verify", "--model", p(&f.model), "--data", p(&f.data), "--rows", "train", "--seed", "3",
    ]);
    assert!(out.trim_end().ends_with("ok"), "{out}");
}

#[test]
fn purify_then_verify_on_all_rows() {
    let f = fixture();
    let purified = f.dir.path().join("purified.json");
    ok(&["purify", "--model", p(&f.model), "--data", p(&f.data), "--out", p(&purified)]);
    ok(&["verify", "--model", p(&purified), "--data", p(&f.data)]);
}

#[test]
fn filter_methods_rank_every_pair() {
    let f = fixture();
    for method in ["tree", "fast"] {
        let out = f.dir.path().join(format!("{method}.csv"));
        ok(&[
            "filter", "--data", p(&f.data), "--method", method, "--max-iterations", "30", "--out", p(&out),
        ]);
        let text = fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("rank,feature_j,feature_k,sse_jk,sse_kj,score,selected"));
        assert_eq!(text.lines().count(), 1 + 435);
        assert_eq!(text.lines().filter(|l| l.ends_with(",true")).count(), 10);
    }
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let f = fixture();
    let cfg = f.dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"rounds": 0, "max_iterations": 40, "patience": 5}"#).unwrap();
    let out = f.dir.path().join("m.json");
    let bad = run(&["--config", p(&cfg), "fit", "--data", p(&f.data), "--out", p(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    ok(&["--config", p(&cfg), "fit", "--data", p(&f.data), "--rounds", "1", "--out", p(&out)]);
}

#[test]
fn exit_codes() {
    let f = fixture();
    assert_eq!(run(&["fit", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));

    let missing = f.dir.path().join("nope.csv");
    let out = f.dir.path().join("m.json");
    assert_eq!(run(&["fit", "--data", p(&missing), "--out", p(&out)]).status.code(), Some(3));
    assert_eq!(
        run(&["fit", "--data", p(&f.data), "--response", "zz", "--out", p(&out)]).status.code(),
        Some(3)
    );

    let text = fs::read_to_string(&f.model).unwrap();
    let truncated = f.dir.path().join("truncated.json");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert_eq!(
        run(&["predict", "--model", p(&truncated), "--data", p(&f.data)]).status.code(),
        Some(4)
    );
    let future = f.dir.path().join("future.json");
    fs::write(&future, text.replacen("\"format_version\": 1", "\"format_version\": 2", 1)).unwrap();
    assert_eq!(run(&["predict", "--model", p(&future), "--data", p(&f.data)]).status.code(), Some(4));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["fit", "--help"]).status.code(), Some(0));
}
