use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn texret(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_texret"))
        .args(args)
        .output()
        .expect("run texret")
}

fn ok(args: &[&str]) -> String {
    let out = texret(args);
    assert!(
        out.status.success(),
        "texret {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// 4 grating classes x 12 tiles of 64 px, indexed with GGD1 on a small pyramid.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let f = Fixture { dir };
        ok(&["ingest", "--synthetic", "4x12@64", "--seed", "3", "--out", p(&f.path("ds"))]);
        ok(&["index", "--dataset", p(&f.path("ds")), "--L", "2", "--D", "4", "--out", p(&f.path("g1.idx"))]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn first_id(&self) -> String {
        let text = fs::read_to_string(self.path("g1.idx")).unwrap();
        let line = text.lines().find(|l| !l.starts_with('#')).unwrap();
        line.split('\t').next().unwrap().to_string()
    }
}

#[test]
fn help_exits_zero() {
    let out = texret(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["ingest", "index", "train", "query", "evaluate", "decompose"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn usage_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("no_such_manifest.tsv");
    let out = texret(&["ingest", "--manifest", p(&missing), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_manifest.tsv"));

    assert_eq!(code(&texret(&["index", "--bogus"])), 2);
    let out = texret(&["ingest", "--synthetic", "4by12", "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn bad_method_and_cv_and_missing_model_exit_two() {
    let f = Fixture::new();
    let out = texret(&["index", "--dataset", p(&f.path("ds")), "--method", "GGD3", "--out", p(&f.path("x.idx"))]);
    assert_eq!(code(&out), 2);
    assert!(!f.path("x.idx").exists());

    let out = texret(&["train", "--index", p(&f.path("g1.idx")), "--cv", "1", "--out", p(&f.path("m"))]);
    assert_eq!(code(&out), 2);
    assert!(!f.path("m").exists());

    let id = f.first_id();
    let out = texret(&["query", "--index", p(&f.path("g1.idx")), "--id", &id, "--scheme", "ml"]);
    assert_eq!(code(&out), 2);

    ok(&["index", "--dataset", p(&f.path("ds")), "--method", "E", "--L", "2", "--D", "4", "--out", p(&f.path("e.idx"))]);
    let out = texret(&["query", "--index", p(&f.path("e.idx")), "--id", &id, "--metric", "KLD"]);
    assert_eq!(code(&out), 2, "KLD on energy features must be rejected");
}

#[test]
fn synthetic_chain_and_query_output() {
    let f = Fixture::new();
    let idx = f.path("g1.idx");
    for algo in ["knn", "svm"] {
        let model = f.path(&format!("{algo}.model"));
        let stdout = ok(&["train", "--index", p(&idx), "--algo", algo, "--cv", "4", "--out", p(&model)]);
        let acc: f64 = stdout
            .lines()
            .find_map(|l| l.strip_prefix("cv_accuracy="))
            .and_then(|l| l.split_whitespace().next())
            .unwrap()
            .parse()
            .unwrap();
        assert!(acc >= 0.95, "{algo} cv accuracy {acc}");
    }

    let id = f.first_id();
    let class = id.split('_').next().unwrap().to_string();
    let trad = ok(&["query", "--index", p(&idx), "--id", &id, "--N", "5"]);
    let lines: Vec<_> = trad.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(!trad.contains("#predicted_class"));
    assert!(lines.iter().all(|l| !l.contains(&format!("\t{id}\t"))));

    let out = f.path("ml.txt");
    ok(&[
        "query", "--index", p(&idx), "--id", &id, "--N", "5", "--scheme", "ml", "--model",
        p(&f.path("svm.model")), "--out", p(&out),
    ]);
    let ml = fs::read_to_string(&out).unwrap();
    assert_eq!(ml.lines().next().unwrap(), format!("#predicted_class={class}"));
    for line in ml.lines().skip(1) {
        let fields: Vec<_> = line.split('\t').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[2], class);
    }

    let img = f.path("ds").join(format!("{id}.pgm"));
    let by_image = ok(&["query", "--index", p(&idx), "--image", p(&img), "--N", "5", "--include-self"]);
    let top: Vec<_> = by_image.lines().next().unwrap().split('\t').collect();
    assert_eq!(top[1], id);
}

#[test]
fn outputs_are_deterministic() {
    let a = Fixture::new();
    let b = Fixture::new();
    for name in ["g1.idx", "ds/dataset.tsv"] {
        assert_eq!(fs::read(a.path(name)).unwrap(), fs::read(b.path(name)).unwrap(), "{name}");
    }
    for f in [&a, &b] {
        ok(&["train", "--index", p(&f.path("g1.idx")), "--algo", "svm", "--cv", "0", "--out", p(&f.path("s.model"))]);
    }
    assert_eq!(fs::read(a.path("s.model")).unwrap(), fs::read(b.path("s.model")).unwrap());
}

#[test]
fn evaluate_reports_and_comparison() {
    let f = Fixture::new();
    let stdout = ok(&[
        "evaluate", "--dataset", p(&f.path("ds")), "--L", "2", "--D", "4", "--cv", "0",
        "--out", p(&f.path("rep.csv")), "--compare", "trad", "ml", "--compare-out", p(&f.path("cmp.csv")),
        "--per-query", p(&f.path("pq")),
    ]);
    let report = fs::read_to_string(f.path("rep.csv")).unwrap();
    let rows: Vec<_> = report.lines().collect();
    assert_eq!(rows[0], "scheme,method,AR_percent,false_predictions,accuracy,n_queries");
    assert_eq!(rows.len(), 10);
    let cmp = fs::read_to_string(f.path("cmp.csv")).unwrap();
    assert!(cmp.lines().next().unwrap().ends_with("Difference_percent"));
    assert_eq!(cmp.lines().count(), 7);
    assert!(stdout.contains("Difference"));
    assert_eq!(fs::read_dir(f.path("pq")).unwrap().count(), 9);
}

#[test]
fn jobs_do_not_change_results() {
    let f = Fixture::new();
    let idx = p(&f.path("g1.idx")).to_string();
    let run = |jobs: &str, out: &str| {
        ok(&[
            "--jobs", jobs, "evaluate", "--index", &idx, "--scheme", "trad,knn", "--cv", "3",
            "--out", p(&f.path(out)),
        ]);
        fs::read(f.path(out)).unwrap()
    };
    assert_eq!(run("1", "one.csv"), run("4", "four.csv"));

    ok(&["--jobs", "1", "index", "--dataset", p(&f.path("ds")), "--L", "2", "--D", "4", "--out", p(&f.path("j1.idx"))]);
    assert_eq!(fs::read(f.path("j1.idx")).unwrap(), fs::read(f.path("g1.idx")).unwrap());
}

#[test]
fn failed_commands_leave_no_partial_outputs() {
    let f = Fixture::new();
    let before: Vec<_> = fs::read_dir(f.dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();

    let out = texret(&["index", "--dataset", p(&f.path("ds")), "--L", "2", "--D", "5", "--out", p(&f.path("bad.idx"))]);
    assert_eq!(code(&out), 2);
    let out = texret(&["evaluate", "--index", p(&f.path("g1.idx")), "--method", "E", "--out", p(&f.path("r.csv"))]);
    assert_eq!(code(&out), 2);

    let after: Vec<_> = fs::read_dir(f.dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(before.len(), after.len(), "{after:?}");

    // A directory with foreign files is never replaced.
    let foreign = f.path("keep");
    fs::create_dir(&foreign).unwrap();
    fs::write(foreign.join("notes.txt"), "mine").unwrap();
    let out = texret(&["ingest", "--synthetic", "2x2@16", "--out", p(&foreign)]);
    assert_eq!(code(&out), 2);
    assert_eq!(fs::read_to_string(foreign.join("notes.txt")).unwrap(), "mine");

    // Re-ingesting over an earlier dataset is allowed.
    ok(&["ingest", "--synthetic", "2x2@16", "--out", p(&f.path("ds"))]);
    assert_eq!(fs::read_dir(f.path("ds")).unwrap().count(), 5);
}

#[test]
fn decompose_writes_one_file_per_subband() {
    let f = Fixture::new();
    let id = f.first_id();
    let img = f.path("ds").join(format!("{id}.pgm"));
    let dec = f.path("dec");
    ok(&["decompose", "--image", p(&img), "--L", "2", "--D", "4,8", "--out", p(&dec)]);
    let mut names: Vec<_> = fs::read_dir(&dec)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 4 + 8 + 1);
    assert!(names.iter().all(|n| n.ends_with(".rctp")));
}
