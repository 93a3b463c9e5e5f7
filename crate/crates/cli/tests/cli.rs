use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wordcnn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Two-class corpus: class 2 documents contain "great film".
fn write_corpus(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for i in 0..n {
        let label = 1 + i % 2;
        let mut words: Vec<String> = (0..15).map(|_| format!("w{}", rng.random_range(0..30))).collect();
        if label == 2 {
            let at = rng.random_range(0..14);
            words[at] = "great".into();
            words[at + 1] = "film".into();
        }
        out.push_str(&format!("\"{label}\",\"Title {i}\",\"{}\"\n", words.join(" ")));
    }
    fs::write(path, out).unwrap();
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

fn workspace(extra: &str) -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    write_corpus(&root.join("train.csv"), 300, 1);
    write_corpus(&root.join("test.csv"), 100, 2);
    let config = root.join("run.cfg");
    fs::write(
        &config,
        format!(
            "# small run\ntrain_data = {0}/train.csv\ntest_data = {0}/test.csv\nwork_dir = {0}/work\ndim = 16\nepochs = 6\ndecay_epoch = 5\nlr = 0.25\nregion_sizes = 2,3\nlrs = 0.25\nprofile = sentiment\n{extra}",
            root.display()
        ),
    )
    .unwrap();
    Workspace { _dir: dir, root, config }
}

impl Workspace {
    fn run(&self, args: &[&str]) -> Output {
        let mut all = vec!["--config", self.config.to_str().unwrap()];
        all.extend_from_slice(args);
        run(&all)
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    }
}

#[test]
fn params_prints_the_base_count() {
    let o = run(&["params", "--set", "num_classes=5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "45003005");
}

#[test]
fn flags_override_the_config_file() {
    let w = workspace("seed = 4\n");
    let shown = w.ok(&["config", "--seed", "8", "--set", "dim=20"]);
    assert!(shown.contains("seed = 8\n"), "{shown}");
    assert!(shown.contains("dim = 20\n"));
    assert!(shown.contains("pooling_ks = 1\n"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["params", "--set", "no_such_key=1"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["train"]).status.code(), Some(1), "train_data unset");
    let w = workspace("learning_rate = 0.1\n");
    let o = w.run(&["vocab"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));
}

#[test]
fn data_errors_exit_2() {
    let w = workspace("");
    assert_eq!(w.run(&["eval"]).status.code(), Some(2), "no model yet");
    assert_eq!(w.run(&["train"]).status.code(), Some(2), "no vocabulary yet");
    fs::write(w.root.join("bad.csv"), "\"1\",\"ok\"\nnot a label,\"x\"\n").unwrap();
    let bad = w.root.join("bad.csv");
    let o = w.run(&["vocab", "--set", &format!("train_data={}", bad.display())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn divergence_exits_3() {
    let w = workspace("");
    w.ok(&["vocab"]);
    let o = w.run(&["train", "--set", "lr=1e300", "--set", "init_std=1"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn full_pipeline_round_trips_and_reproduces() {
    let w = workspace("tvs = bow-word:3:6, bow-ngram123:3:6\ntv_epochs = 2\n");
    let v = w.ok(&["vocab"]);
    assert!(v.contains("kind=word") && v.contains("kind=ngram123"), "{v}");
    let t = w.ok(&["tv-train"]);
    assert!(t.contains("tv=1 epoch=2 loss="), "{t}");
    let work = w.root.join("work");
    assert!(work.join("tv-0.swcn").exists() && work.join("tv-1.swcn").exists());

    let metrics = w.ok(&["train"]);
    let epoch_lines: Vec<&str> = metrics.lines().filter(|l| l.starts_with("epoch=")).collect();
    assert_eq!(epoch_lines.len(), 6);
    for l in &epoch_lines {
        for key in ["lr=", "train_loss=", "val_error=", "elapsed="] {
            assert!(l.contains(key), "{l}");
        }
    }
    assert_eq!(fs::read_to_string(work.join("metrics.txt")).unwrap().lines().count(), 6);
    let first = fs::read(work.join("model.swcn")).unwrap();
    w.ok(&["train"]);
    assert_eq!(first, fs::read(work.join("model.swcn")).unwrap(), "retraining is bitwise reproducible");

    let report = w.ok(&["eval"]);
    assert!(report.contains("n_docs=100"), "{report}");
    let model = wordcnn::container::load_model(&work.join("model.swcn")).unwrap();
    let text = "Title x w1 w2 great film w3\nnothing here\n\n";
    let mut child = bin()
        .args(["--config", w.config.to_str().unwrap(), "predict"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let predicted: Vec<usize> = stdout(&out).lines().map(|l| l.parse().unwrap()).collect();
    let expected: Vec<usize> = text
        .lines()
        .map(|l| {
            let doc = model.prepare(&model.encode(&wordcnn::text::tokenize(l), 0)).unwrap();
            model.predict(&doc).unwrap()
        })
        .collect();
    assert_eq!(predicted, expected);
}

#[test]
fn select_reports_every_grid_point() {
    let w = workspace("");
    w.ok(&["vocab"]);
    let out = w.ok(&["select"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("grid ")).count(), 2);
    assert!(out.lines().any(|l| l.starts_with("best region_size=")));
    assert!(w.root.join("work/model.swcn").exists());
}

#[test]
fn predict_on_empty_input_prints_nothing() {
    let w = workspace("");
    w.ok(&["vocab"]);
    w.ok(&["train"]);
    let out = bin()
        .args(["--config", w.config.to_str().unwrap(), "predict"])
        .stdin(Stdio::null())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn version_mismatch_is_a_data_error() {
    let w = workspace("");
    w.ok(&["vocab"]);
    w.ok(&["train"]);
    let path = w.root.join("work/model.swcn");
    let mut bytes = fs::read(&path).unwrap();
    bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
    fs::write(&path, bytes).unwrap();
    let o = w.run(&["eval"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("version"));
}

#[test]
fn bench_reports_timing() {
    let w = workspace("bench_repetitions = 2\n");
    w.ok(&["vocab"]);
    w.ok(&["train"]);
    let out = w.ok(&["bench", "--skip-independence"]);
    assert!(out.contains("docs_per_second="), "{out}");
}
