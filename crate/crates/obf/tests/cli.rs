//! End-to-end runs of the `obf` binary on small synthetic corpora.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use obf::store::EmbeddingStore;
use obf::trainlog::TrainingLog;
use tempfile::TempDir;

const CONFIG: &str = "\
[model]
hidden = 8
cl_hidden = 8

[pretrain]
epochs = 2
batch = 4

[synth]
n_participants = 8
n_stimuli = 3
duration_s = 12

[head]
widths = 16, 16
epochs = 5
batch = 8

[protonet]
dim = 8
epochs = 2
iterations = 3

[lasso]
folds = 2
inner_folds = 2
n_lambdas = 4
";

fn obf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = obf(args);
    assert!(
        out.status.success(),
        "obf {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    let out = obf(args);
    assert!(!out.stderr.is_empty() || out.status.success());
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let w = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        fs::write(w.path("config.txt"), CONFIG).unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Synthetic raw corpus and its canonical version.
    fn corpus(&self) -> (PathBuf, PathBuf) {
        let raw = self.path("raw");
        let canon = self.path("canon");
        ok(&[
            "synth",
            "--config",
            s(&self.path("config.txt")),
            "--out",
            s(&raw),
        ]);
        ok(&["preprocess", "--in", s(&raw), "--out", s(&canon)]);
        (raw, canon)
    }

    fn pretrained(&self, canon: &Path) -> PathBuf {
        let ckpt = self.path("model.ckpt");
        ok(&[
            "pretrain",
            "--config",
            s(&self.path("config.txt")),
            "--corpus",
            s(canon),
            "--out",
            s(&ckpt),
        ]);
        ckpt
    }
}

fn read_labels(path: &Path) -> Vec<u8> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn synthetic_corpus_survives_preprocessing_and_ivt_matches_truth() {
    let w = Workspace::new();
    let (raw, canon) = w.corpus();
    let discards = fs::read_to_string(canon.join("discards.csv")).unwrap();
    assert_eq!(discards.lines().count(), 1, "{discards}");
    let manifest = fs::read_to_string(canon.join("manifest.txt")).unwrap();
    assert_eq!(manifest.matches("file = ").count(), 24);
    assert!(manifest.contains("format = canonical"));

    let (mut agree, mut total) = (0, 0);
    for entry in fs::read_dir(raw.join("truth")).unwrap() {
        let truth_path = entry.unwrap().path();
        let name = truth_path
            .file_name()
            .unwrap()
            .to_str()
            .unwrap()
            .to_string();
        let out = w.path(&format!("ivt_{name}"));
        let summary = ok(&["ivt", "--in", s(&canon.join(&name)), "--out", s(&out)]);
        assert!(summary.contains("n_fixations = "));
        let (truth, got) = (read_labels(&truth_path), read_labels(&out));
        assert_eq!(truth.len(), got.len());
        total += truth.len();
        agree += truth.iter().zip(&got).filter(|(a, b)| a == b).count();
    }
    assert!(agree as f64 >= 0.99 * total as f64, "{agree}/{total}");
}

#[test]
fn synth_is_deterministic_under_seed() {
    let w = Workspace::new();
    let cfg = w.path("config.txt");
    let (a, b, c) = (w.path("a"), w.path("b"), w.path("c"));
    ok(&["synth", "--config", s(&cfg), "--out", s(&a), "--seed", "4"]);
    ok(&["synth", "--config", s(&cfg), "--out", s(&b), "--seed", "4"]);
    ok(&["synth", "--config", s(&cfg), "--out", s(&c), "--seed", "5"]);
    let file = "p000_s0001_r0.csv";
    assert_eq!(
        fs::read(a.join(file)).unwrap(),
        fs::read(b.join(file)).unwrap()
    );
    assert_ne!(
        fs::read(a.join(file)).unwrap(),
        fs::read(c.join(file)).unwrap()
    );
}

#[test]
fn mostly_missing_recording_is_listed_as_discarded() {
    let w = Workspace::new();
    let dir = w.path("gappy");
    fs::create_dir_all(&dir).unwrap();
    let mut rows = String::from("t_ms,lx,ly,rx,ry,valid\n");
    for i in 0..100 {
        let t = i as f64 * 2.0;
        if i < 51 {
            rows.push_str(&format!("{t},,,,,0\n"));
        } else {
            rows.push_str(&format!("{t},960,540,960,540,1\n"));
        }
    }
    fs::write(dir.join("a.csv"), rows).unwrap();
    fs::write(
        dir.join("manifest.txt"),
        "format = raw\nsource_tag = lab\nnative_hz = 500\nwidth_px = 1920\nheight_px = 1080\n\
         width_mm = 531\nheight_mm = 299\nviewing_distance_mm = 650\nfile = a.csv, p1, s1\n",
    )
    .unwrap();
    let out = w.path("gappy_out");
    ok(&["preprocess", "--in", s(&dir), "--out", s(&out)]);
    let report = fs::read_to_string(out.join("discards.csv")).unwrap();
    assert!(
        report.contains("a.csv") && report.contains("0.510"),
        "{report}"
    );
}

#[test]
fn usage_and_data_errors_have_distinct_exit_codes() {
    let w = Workspace::new();
    let empty = w.path("empty");
    fs::create_dir_all(&empty).unwrap();
    assert_eq!(
        code(&["preprocess", "--in", s(&empty), "--out", s(&w.path("o"))]),
        2
    );
    assert_eq!(
        code(&[
            "embed",
            "--ckpt",
            s(&w.path("nope.ckpt")),
            "--in",
            s(&empty),
            "--out",
            s(&w.path("e"))
        ]),
        2
    );
    assert_eq!(code(&["preprocess", "--bogus"]), 1);
    let bad = w.path("bad.txt");
    fs::write(&bad, "[pretrain]\nlr = \"fast\"\n").unwrap();
    let out = obf(&["synth", "--config", s(&bad), "--out", s(&w.path("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pretrain.lr"));
    assert!(!w.path("x").exists(), "nothing written on failure");
}

#[test]
fn full_workflow_on_a_small_corpus() {
    let w = Workspace::new();
    let cfg = w.path("config.txt");
    let (_, canon) = w.corpus();
    let ckpt = w.pretrained(&canon);

    let log = TrainingLog::parse(&fs::read_to_string(w.path("model.log.csv")).unwrap()).unwrap();
    assert_eq!(log.rows.len(), 2);
    assert_eq!(log.meta("active_tasks"), Some("rc,pc,fi,cl"));
    assert!(log.meta("config_hash").is_some());

    // embeddings are deterministic and sized by the checkpoint
    let (e1, e2) = (w.path("e1.store"), w.path("e2.store"));
    ok(&[
        "embed",
        "--ckpt",
        s(&ckpt),
        "--in",
        s(&canon),
        "--out",
        s(&e1),
    ]);
    ok(&[
        "embed",
        "--ckpt",
        s(&ckpt),
        "--in",
        s(&canon),
        "--out",
        s(&e2),
    ]);
    assert_eq!(fs::read(&e1).unwrap(), fs::read(&e2).unwrap());
    let store = EmbeddingStore::load(&e1).unwrap();
    assert_eq!(store.dim, 16);
    assert_eq!(store.len(), 24);

    // curves and difference vectors for plotting
    let curve = w.path("curve.csv");
    ok(&[
        "plotdata",
        "--log",
        s(&w.path("model.log.csv")),
        "--out",
        s(&curve),
    ]);
    assert_eq!(fs::read_to_string(&curve).unwrap().lines().count(), 3);
    let segs = w.path("segs.store");
    ok(&[
        "embed",
        "--ckpt",
        s(&ckpt),
        "--in",
        s(&canon),
        "--out",
        s(&segs),
        "--segments",
        "2",
    ]);
    let pairs = w.path("pairs.csv");
    fs::write(&pairs, "a,b\n0,1\n0,2\n").unwrap();
    let diffs = w.path("diffs.csv");
    ok(&[
        "plotdata",
        "--store",
        s(&segs),
        "--pairs",
        s(&pairs),
        "--out",
        s(&diffs),
    ]);
    let text = fs::read_to_string(&diffs).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(
        lines[1].starts_with("0,1,1,"),
        "segments of one scanpath: {}",
        lines[1]
    );
    assert!(lines[2].starts_with("0,2,0,"));
    assert_eq!(lines[1].split(',').count(), 3 + 16);

    // stimulus prediction, reproducible under a fixed seed
    let report = w.path("stim.csv");
    let args = [
        "eval-stimulus",
        "--ckpt",
        s(&ckpt),
        "--corpus",
        s(&canon),
        "--ways",
        "3",
        "--shots",
        "1",
        "--config",
        s(&cfg),
        "--seed",
        "3",
        "--out",
        s(&report),
    ];
    let first = ok(&args);
    assert_eq!(ok(&args), first);
    assert!(fs::read_to_string(&report).unwrap().contains("# seed = 3"));

    // metric mode refuses more ways than meta-testing stimuli
    let out = obf(&[
        "eval-stimulus",
        "--ckpt",
        s(&ckpt),
        "--corpus",
        s(&canon),
        "--ways",
        "3",
        "--shots",
        "1",
        "--mode",
        "metric",
        "--meta-train-stimuli",
        "1",
        "--config",
        s(&cfg),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("meta-testing"));

    // participant classification with the paired expert baseline
    let preport = w.path("participants.csv");
    ok(&[
        "eval-participant",
        "--ckpt",
        s(&ckpt),
        "--corpus",
        s(&canon),
        "--expert-baseline",
        "--config",
        s(&cfg),
        "--out",
        s(&preport),
    ]);
    let text = fs::read_to_string(&preport).unwrap();
    assert!(text.contains("# fold_seed = "));
    let methods: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(methods.iter().filter(|m| **m == "embedding").count(), 3);
    assert_eq!(methods.iter().filter(|m| **m == "expert").count(), 3);
}

#[test]
fn ablation_flags_shape_the_log() {
    let w = Workspace::new();
    let cfg = w.path("config.txt");
    let root = w.path("multi");
    ok(&["synth", "--config", s(&cfg), "--out", s(&root.join("a"))]);
    let b_cfg = w.path("b.txt");
    fs::write(&b_cfg, format!("{CONFIG}\n[synth]\nsource_tag = other\n")).unwrap();
    ok(&[
        "synth",
        "--config",
        s(&b_cfg),
        "--out",
        s(&root.join("b")),
        "--seed",
        "9",
    ]);
    let canon = w.path("multi_canon");
    ok(&["preprocess", "--in", s(&root), "--out", s(&canon)]);
    assert!(canon.join("a/manifest.txt").is_file() && canon.join("b/manifest.txt").is_file());

    let log_path = w.path("ablate.csv");
    ok(&[
        "pretrain",
        "--config",
        s(&cfg),
        "--corpus",
        s(&canon),
        "--out",
        s(&w.path("ablate.ckpt")),
        "--log",
        s(&log_path),
        "--disable-task",
        "pc",
        "--exclude-source",
        "other",
        "--epochs",
        "1",
    ]);
    let log = TrainingLog::parse(&fs::read_to_string(&log_path).unwrap()).unwrap();
    assert_eq!(log.meta("active_tasks"), Some("rc,fi,cl"));
    assert_eq!(log.meta("sources"), Some("synth"));
    assert_eq!(log.meta("excluded_sources"), Some("other"));
    let row = &log.rows[0];
    assert!(row.losses[1].is_none());
    assert!(row.losses[0].is_some() && row.losses[2].is_some() && row.losses[3].is_some());

    assert_eq!(
        code(&[
            "pretrain",
            "--config",
            s(&cfg),
            "--corpus",
            s(&canon),
            "--out",
            s(&w.path("x.ckpt")),
            "--exclude-source",
            "missing",
        ]),
        1
    );
}
