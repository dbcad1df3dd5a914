//! The `obf` subcommands.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use obf_core::downstream::{
    self, eval_metric, eval_supervised, participant_records, participant_vector, roster,
    StimulusMode, StimulusReport, StimulusTaskSpec,
};
use obf_core::fixation::{expert_features, ivt_labels, IvtParams};
use obf_core::gaze::{self, is_sentinel};
use obf_core::model::Task;
use obf_core::pretrain::{self, EpochLog};
use obf_core::synth::{participant_style, synth_corpus, SynthConfig};
use obf_core::{rng, ObfModel, RawSample, Scanpath, CANONICAL_HZ};
use rayon::prelude::*;

use crate::checkpoint;
use crate::config::{parse_config, short_hash, tasks_text, RunConfig};
use crate::corpus::{self, read_text, write_atomic, Recordings};
use crate::error::{ObfError, Result};
use crate::manifest::{DataFormat, FileEntry, Manifest, MANIFEST_NAME};
use crate::recording;
use crate::store::{EmbeddingRecord, EmbeddingStore};
use crate::trainlog::{LogRow, TrainingLog, COLUMNS};

#[derive(Debug, Parser)]
#[command(
    name = "obf",
    version,
    about = "Scanpath preprocessing, encoder pre-training and downstream evaluation"
)]
pub struct Cli {
    /// Seed for every random stream; overrides the seeds in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-file and per-scanpath work.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert raw recordings to canonical 60 Hz scanpaths.
    Preprocess(PreprocessArgs),
    /// Label the samples of one canonical scanpath as fixation or saccade.
    Ivt(IvtArgs),
    /// Pre-train an encoder on a corpus.
    Pretrain(PretrainArgs),
    /// Write scanpath embeddings of a corpus to an embedding store.
    Embed(EmbedArgs),
    /// c-way k-shot stimulus prediction.
    EvalStimulus(EvalStimulusArgs),
    /// Cross-validated participant classification from embeddings.
    EvalParticipant(EvalParticipantArgs),
    /// Generate a synthetic raw corpus with ground-truth fixation labels.
    Synth(SynthArgs),
    /// Plot-ready CSV from a training log or from embedding pairs.
    Plotdata(PlotdataArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IvtArgs {
    /// Canonical scanpath CSV (`x_deg,y_deg`).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Label CSV (`index,label`) to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    pub vt_degps: f64,
    #[arg(long, default_value_t = 200.0)]
    pub min_fix_ms: f64,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log; defaults to the checkpoint path with `.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Turn off a pre-task (repeatable): rc, pc, fi or cl.
    #[arg(long = "disable-task")]
    pub disable_task: Vec<Task>,
    /// Leave out every dataset with this source tag (repeatable).
    #[arg(long = "exclude-source")]
    pub exclude_source: Vec<String>,
    /// Overrides `pretrain.epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Embed this many random segments per scanpath instead of the whole
    /// scanpath; segment lengths follow `pretrain.input_len_s`.
    #[arg(long)]
    pub segments: Option<u32>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalStimulusArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub ways: usize,
    #[arg(long)]
    pub shots: usize,
    #[arg(long, default_value = "supervised")]
    pub mode: StimulusMode,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Train the encoder together with the head.
    #[arg(long)]
    pub fine_tune: bool,
    /// Use a freshly initialized encoder with the checkpoint's architecture.
    #[arg(long)]
    pub untrained: bool,
    /// Evaluation episodes in metric mode.
    #[arg(long, default_value_t = 500)]
    pub episodes: usize,
    /// Stimuli reserved for meta-training in metric mode.
    #[arg(long, default_value_t = 200)]
    pub meta_train_stimuli: usize,
    /// Report CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalParticipantArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Also evaluate expert fixation statistics on the same folds.
    #[arg(long)]
    pub expert_baseline: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["log", "store"]))]
pub struct PlotdataArgs {
    /// Training log; emits one loss/metric row per epoch.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Embedding store; emits |E(a) - E(b)| for every pair in `--pairs`.
    #[arg(long, requires = "pairs")]
    pub store: Option<PathBuf>,
    /// CSV `a,b` of store record indices.
    #[arg(long, requires = "store")]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a command; returns the paths written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let seed = cli.seed;
    match cli.command {
        Command::Preprocess(a) => preprocess(&a),
        Command::Ivt(a) => ivt(&a),
        Command::Pretrain(a) => pretrain(&a, seed),
        Command::Embed(a) => embed(&a, seed),
        Command::EvalStimulus(a) => eval_stimulus(&a, seed),
        Command::EvalParticipant(a) => eval_participant(&a, seed),
        Command::Synth(a) => synth(&a, seed),
        Command::Plotdata(a) => plotdata(&a),
    }
}

pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => parse_config(&read_text(p)?)
            .map_err(|e| ObfError::Usage(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn comment_lines(pairs: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        writeln!(s, "# {k} = {v}").unwrap();
    }
    s
}

fn warn_row_issues(datasets: &[corpus::Dataset]) {
    for d in datasets {
        for r in d.reports.iter().filter(|r| r.skipped()) {
            for i in &r.issues {
                eprintln!("warning: {}:{}: {}", r.path.display(), i.line, i.message);
            }
            eprintln!(
                "warning: {} skipped ({} of {} rows rejected)",
                r.path.display(),
                r.issues.len(),
                r.total_rows
            );
        }
        if d.manifest.files.is_empty() {
            eprintln!("warning: {}: empty roster", d.dir.display());
        }
    }
}

fn load_canonical(path: &Path) -> Result<corpus::Canonical> {
    let sets = corpus::load_corpus(path)?;
    warn_row_issues(&sets);
    let c = corpus::canonical_scanpaths(&sets)?;
    for d in &c.discards {
        eprintln!("warning: discarded {}: {}", d.path.display(), d.reason);
    }
    Ok(c)
}

fn preprocess(a: &PreprocessArgs) -> Result<Vec<PathBuf>> {
    let dirs = corpus::dataset_dirs(&a.input)?;
    let nested = !(dirs.len() == 1 && dirs[0] == a.input);
    let mut written = Vec::new();
    let mut discards: Vec<Vec<String>> = Vec::new();
    let mut converted = 0usize;
    for dir in &dirs {
        let d = corpus::load_dataset(dir)?;
        warn_row_issues(std::slice::from_ref(&d));
        let out_dir = match (nested, dir.file_name()) {
            (true, Some(name)) => a.out.join(name),
            _ => a.out.clone(),
        };
        for (r, f) in d.reports.iter().zip(&d.manifest.files) {
            if let Some(first) = r.issues.first() {
                discards.push(vec![
                    r.path.display().to_string(),
                    f.participant_id.clone(),
                    f.stimulus_id.clone(),
                    format!(
                        "{} bad row(s), first at line {}: {}",
                        r.issues.len(),
                        first.line,
                        first.message
                    ),
                ]);
            }
        }
        let results: Vec<std::result::Result<Scanpath, String>> = match &d.recordings {
            Recordings::Raw(raws) => raws
                .par_iter()
                .map(|r| gaze::preprocess(r).map_err(|e| e.to_string()))
                .collect(),
            Recordings::Canonical(sps) => sps.iter().cloned().map(Ok).collect(),
        };
        let mut files = Vec::new();
        for (res, entry) in results.into_iter().zip(&d.entries) {
            match res {
                Ok(sp) => {
                    let path = out_dir.join(&entry.path);
                    write_atomic(&path, recording::write_canonical(&sp.points).as_bytes())?;
                    written.push(path);
                    files.push(entry.clone());
                    converted += 1;
                }
                Err(reason) => {
                    eprintln!("discarded {}: {reason}", d.dir.join(&entry.path).display());
                    discards.push(vec![
                        d.dir.join(&entry.path).display().to_string(),
                        entry.participant_id.clone(),
                        entry.stimulus_id.clone(),
                        reason,
                    ]);
                }
            }
        }
        let labels = match &d.labels {
            Some(l) => {
                let path = out_dir.join("labels.csv");
                write_atomic(&path, corpus::write_labels(l).as_bytes())?;
                written.push(path);
                Some("labels.csv".to_string())
            }
            None => None,
        };
        let manifest = Manifest {
            format: DataFormat::Canonical,
            source_tag: d.manifest.source_tag.clone(),
            native_hz: CANONICAL_HZ,
            geometry: d.manifest.geometry,
            labels,
            files,
        };
        let path = out_dir.join(MANIFEST_NAME);
        write_atomic(&path, manifest.to_text().as_bytes())?;
        written.push(path);
    }
    let path = a.out.join("discards.csv");
    let n_discarded = discards.len();
    write_atomic(
        &path,
        csv_text(
            &["file", "participant_id", "stimulus_id", "reason"],
            discards,
        )
        .as_bytes(),
    )?;
    written.push(path);
    println!("converted {converted} recording(s), discarded {n_discarded}");
    Ok(written)
}

fn ivt(a: &IvtArgs) -> Result<Vec<PathBuf>> {
    let parsed = recording::parse_canonical(&read_text(&a.input)?);
    if let Some(i) = parsed.issues.first() {
        return Err(ObfError::Data(format!(
            "{}:{}: {}",
            a.input.display(),
            i.line,
            i.message
        )));
    }
    let params = IvtParams {
        velocity_threshold_degps: a.vt_degps,
        min_fixation_ms: a.min_fix_ms,
    };
    if !(params.velocity_threshold_degps > 0.0) || !(params.min_fixation_ms >= 0.0) {
        return Err(ObfError::Usage(
            "--vt-degps must be positive and --min-fix-ms non-negative".into(),
        ));
    }
    let labels = ivt_labels(&parsed.rows, &params)?;
    let feats = expert_features(&parsed.rows, &labels)?;
    let rows = labels
        .0
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), l.to_string()]);
    write_atomic(&a.out, csv_text(&["index", "label"], rows).as_bytes())?;
    println!("samples = {}", labels.len());
    println!(
        "fixation_samples = {}",
        labels.0.iter().filter(|&&l| l == 1).count()
    );
    println!("n_fixations = {}", feats.n_fixations);
    println!(
        "total_fixation_duration_s = {}",
        feats.total_fixation_duration_s
    );
    println!(
        "mean_saccade_speed_degps = {}",
        feats.mean_saccade_speed_degps
    );
    println!(
        "max_saccade_speed_degps = {}",
        feats.max_saccade_speed_degps
    );
    println!(
        "mean_fixation_speed_degps = {}",
        feats.mean_fixation_speed_degps
    );
    Ok(vec![a.out.clone()])
}

fn pretrain(a: &PretrainArgs, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let mut cfg = load_config(a.config.as_deref(), seed)?;
    for &t in &a.disable_task {
        *cfg.pretrain.weights.get_mut(t) = 0.0;
    }
    if let Some(e) = a.epochs {
        cfg.pretrain.epochs = e;
    }
    if cfg.pretrain.tasks().is_empty() {
        return Err(ObfError::Usage("every pre-task is disabled".into()));
    }
    let corpus = load_canonical(&a.corpus)?;
    let present: BTreeSet<&str> = corpus
        .scanpaths
        .iter()
        .map(|s| s.source_tag.as_str())
        .collect();
    for tag in &a.exclude_source {
        if !present.contains(tag.as_str()) {
            return Err(ObfError::Usage(format!(
                "--exclude-source {tag}: no such source in the corpus"
            )));
        }
    }
    let scanpaths: Vec<Scanpath> = corpus
        .scanpaths
        .into_iter()
        .filter(|s| !a.exclude_source.contains(&s.source_tag))
        .collect();
    if scanpaths.is_empty() {
        return Err(ObfError::Data("no scanpaths left to train on".into()));
    }
    let sources: BTreeSet<&str> = scanpaths.iter().map(|s| s.source_tag.as_str()).collect();
    let tasks = cfg.pretrain.tasks();
    let mut log = TrainingLog {
        meta: vec![
            ("seed".into(), cfg.pretrain.seed.to_string()),
            ("config_hash".into(), cfg.hash()),
            ("optimizer".into(), cfg.pretrain.optimizer.name().into()),
            (
                "decoder_feed".into(),
                cfg.pretrain.decoder_feed.name().into(),
            ),
            ("active_tasks".into(), tasks_text(tasks)),
            (
                "sources".into(),
                sources.iter().copied().collect::<Vec<_>>().join(","),
            ),
            ("excluded_sources".into(), a.exclude_source.join(",")),
        ],
        rows: Vec::new(),
    };
    let epochs = cfg.pretrain.epochs;
    let outcome = pretrain::train(
        &scanpaths,
        &cfg.model,
        &cfg.pretrain,
        &mut |e: &EpochLog| {
            let row = LogRow::from_epoch(e, tasks);
            eprint!(
                "epoch {}/{epochs}: {}",
                e.epoch,
                TrainingLog::row_text(&row)
            );
        },
    )?;
    log.rows = outcome
        .log
        .iter()
        .map(|e| LogRow::from_epoch(e, tasks))
        .collect();
    checkpoint::save(&a.out, &outcome.model, cfg.pretrain.seed)?;
    let log_path = a
        .log
        .clone()
        .unwrap_or_else(|| a.out.with_extension("log.csv"));
    write_atomic(&log_path, log.to_text().as_bytes())?;
    println!(
        "trained {} epoch(s) on {} scanpath(s) ({} train / {} validation)",
        outcome.log.len(),
        scanpaths.len(),
        outcome.train_indices.len(),
        outcome.val_indices.len()
    );
    Ok(vec![a.out.clone(), log_path])
}

fn load_checkpoint(path: &Path) -> Result<(ObfModel, String)> {
    let bytes = std::fs::read(path).map_err(|e| ObfError::io(path, e))?;
    let (model, _) = checkpoint::from_bytes(&bytes)
        .map_err(|e| ObfError::Data(format!("{}: {e}", path.display())))?;
    Ok((model, short_hash(&bytes)))
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Embeddings of one scanpath: the whole path, or `segments` random
/// windows drawn from a stream derived from `seed` and the scanpath index.
fn embed_one(
    model: &ObfModel,
    sp: &Scanpath,
    index: usize,
    segments: Option<u32>,
    len_range: (usize, usize),
    seed: u64,
) -> Result<Vec<EmbeddingRecord>> {
    let record = |segment: u32, v: &[f64]| EmbeddingRecord {
        source_tag: sp.source_tag.clone(),
        participant_id: sp.participant_id.clone(),
        stimulus_id: sp.stimulus_id.clone(),
        segment,
        vector: to_f32(v),
    };
    let Some(k) = segments else {
        return Ok(vec![record(0, &downstream::extract_embedding(model, sp)?)]);
    };
    let n = sp.len();
    if n < len_range.0 {
        return Err(obf_core::Error::TooShort {
            needed: len_range.0,
            got: n,
        }
        .into());
    }
    let mut r = rng::derived(seed, &format!("segments/{index}"));
    let mut out = Vec::with_capacity(k as usize);
    for s in 1..=k {
        let len = rng::uniform_usize(&mut r, len_range.0, len_range.1.min(n));
        let start = rng::uniform_usize(&mut r, 0, n - len);
        out.push(record(s, &model.encode(&sp.points[start..start + len])?));
    }
    Ok(out)
}

fn embed(a: &EmbedArgs, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let (model, model_hash) = load_checkpoint(&a.ckpt)?;
    let cfg = load_config(a.config.as_deref(), seed)?;
    let corpus = load_canonical(&a.input)?;
    let len_range = cfg.pretrain.input_len_samples();
    let per_path: Vec<Result<Vec<EmbeddingRecord>>> = corpus
        .scanpaths
        .par_iter()
        .enumerate()
        .map(|(i, sp)| embed_one(&model, sp, i, a.segments, len_range, cfg.pretrain.seed))
        .collect();
    let mut store = EmbeddingStore::new(model.embedding_dim(), model_hash);
    for (res, sp) in per_path.into_iter().zip(&corpus.scanpaths) {
        match res {
            Ok(recs) => {
                for r in recs {
                    store.push(r).map_err(|e| ObfError::Data(e.to_string()))?;
                }
            }
            Err(ObfError::Core(obf_core::Error::TooShort { needed, got })) => eprintln!(
                "warning: skipped {}/{}/{}: {got} samples, need {needed}",
                sp.source_tag, sp.participant_id, sp.stimulus_id
            ),
            Err(e) => return Err(e),
        }
    }
    store.save(&a.out)?;
    println!(
        "wrote {} embedding(s) of dimension {}",
        store.len(),
        store.dim
    );
    Ok(vec![a.out.clone()])
}

fn stimulus_report_text(
    r: &StimulusReport,
    cfg: &RunConfig,
    model_hash: &str,
    untrained: bool,
) -> String {
    let mut s = comment_lines(&[
        ("seed", r.seed.to_string()),
        ("config_hash", cfg.hash()),
        ("checkpoint", model_hash.to_string()),
        (
            "encoder",
            if untrained { "untrained" } else { "checkpoint" }.to_string(),
        ),
    ]);
    s.push_str(&csv_text(
        &["ways", "shots", "mode", "accuracy", "evaluated", "seed"],
        [vec![
            r.ways.to_string(),
            r.shots.to_string(),
            r.mode.name().to_string(),
            r.accuracy.to_string(),
            r.evaluated.to_string(),
            r.seed.to_string(),
        ]],
    ));
    s
}

fn eval_stimulus(a: &EvalStimulusArgs, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let (mut model, model_hash) = load_checkpoint(&a.ckpt)?;
    let mut cfg = load_config(a.config.as_deref(), seed)?;
    if a.untrained {
        model = ObfModel::new(model.config, model.tasks, cfg.pretrain.seed)?;
    }
    if a.fine_tune {
        cfg.head.fine_tune = true;
        cfg.protonet.fine_tune = true;
    }
    let mut spec = StimulusTaskSpec::new(a.ways, a.shots, a.mode);
    spec.episodes = a.episodes;
    spec.meta_train_stimuli = a.meta_train_stimuli;
    let corpus = load_canonical(&a.corpus)?;
    let report = match a.mode {
        StimulusMode::Supervised => eval_supervised(&model, &corpus.scanpaths, &spec, &cfg.head)?,
        StimulusMode::Metric => eval_metric(&model, &corpus.scanpaths, &spec, &cfg.protonet)?,
    };
    println!(
        "{}-way {}-shot {} accuracy {:.4} over {} (seed {})",
        report.ways,
        report.shots,
        report.mode.name(),
        report.accuracy,
        report.evaluated,
        report.seed
    );
    let mut written = Vec::new();
    if let Some(out) = &a.out {
        write_atomic(
            out,
            stimulus_report_text(&report, &cfg, &model_hash, a.untrained).as_bytes(),
        )?;
        written.push(out.clone());
    }
    Ok(written)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn lasso_rows(method: &str, r: &downstream::EvalReport) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = r
        .folds
        .iter()
        .map(|f| {
            vec![
                method.to_string(),
                f.fold.to_string(),
                f.n_train.to_string(),
                f.n_test.to_string(),
                f.lambda.to_string(),
                f.accuracy.to_string(),
                fmt_opt(f.auc),
                f.f1.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        method.to_string(),
        "pooled".into(),
        String::new(),
        r.folds.iter().map(|f| f.n_test).sum::<usize>().to_string(),
        String::new(),
        r.accuracy.to_string(),
        r.auc.to_string(),
        r.f1.to_string(),
    ]);
    rows
}

fn eval_participant(a: &EvalParticipantArgs, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let (model, model_hash) = load_checkpoint(&a.ckpt)?;
    let cfg = load_config(a.config.as_deref(), seed)?;
    let corpus = load_canonical(&a.corpus)?;
    if !corpus.has_labels {
        return Err(ObfError::Data(format!(
            "{}: no participant labels (set `labels` in the manifest)",
            a.corpus.display()
        )));
    }
    if let Some(p) = corpus.label_conflicts.first() {
        return Err(ObfError::Data(format!(
            "participant `{p}` has conflicting labels across datasets"
        )));
    }
    let ros = roster(&corpus.scanpaths);
    let mut records = participant_records(&corpus.scanpaths, &ros, &corpus.labels)?;
    records.retain(|r| {
        let keep = r.scanpaths.iter().any(Option::is_some);
        if !keep {
            eprintln!(
                "warning: participant `{}` has no scanpaths; left out",
                r.participant_id
            );
        }
        keep
    });
    let vectors = records
        .par_iter()
        .map(|r| participant_vector(&model, r))
        .collect::<obf_core::Result<Vec<_>>>()?;
    let labels: Vec<bool> = records.iter().map(|r| r.label).collect();
    let report = downstream::lasso_cv(&vectors, &labels, &cfg.lasso)?;
    let mut rows = lasso_rows("embedding", &report);
    println!(
        "embedding: accuracy {:.4} auc {:.4} f1 {:.4} ({} participants, {} folds, seed {})",
        report.accuracy,
        report.auc,
        report.f1,
        records.len(),
        report.folds.len(),
        report.seed
    );
    if a.expert_baseline {
        let base = downstream::expert_baseline(&records, &cfg.pretrain.ivt, &cfg.lasso)?;
        println!(
            "expert:    accuracy {:.4} auc {:.4} f1 {:.4} (seed {})",
            base.accuracy, base.auc, base.f1, base.seed
        );
        rows.extend(lasso_rows("expert", &base));
    }
    let mut written = Vec::new();
    if let Some(out) = &a.out {
        let mut text = comment_lines(&[
            ("seed", cfg.lasso.seed.to_string()),
            ("fold_seed", report.seed.to_string()),
            ("config_hash", cfg.hash()),
            ("checkpoint", model_hash),
        ]);
        text.push_str(&csv_text(
            &[
                "method", "fold", "n_train", "n_test", "lambda", "accuracy", "auc", "f1",
            ],
            rows,
        ));
        write_atomic(out, text.as_bytes())?;
        written.push(out.clone());
    }
    Ok(written)
}

fn raw_samples(points: &[[f64; 2]], geometry: &obf_core::ScreenGeometry) -> Vec<RawSample> {
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let t_ms = i as f64 * 1000.0 / CANONICAL_HZ;
            if is_sentinel(p) {
                RawSample {
                    t_ms,
                    left: None,
                    right: None,
                    valid: false,
                }
            } else {
                let px = gaze::deg_to_px(p, geometry);
                RawSample {
                    t_ms,
                    left: Some(px),
                    right: Some(px),
                    valid: true,
                }
            }
        })
        .collect()
}

fn synth(a: &SynthArgs, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let cfg = load_config(a.config.as_deref(), seed)?.synth;
    let corpus = synth_corpus(&cfg)?;
    let mut files = Vec::with_capacity(corpus.len());
    let mut written = Vec::new();
    for (i, (sp, truth)) in corpus.iter().enumerate() {
        let rep = i % cfg.scanpaths_per_pair;
        let stem = format!("{}_{}_r{rep}", sp.participant_id, sp.stimulus_id);
        let path = a.out.join(format!("{stem}.csv"));
        write_atomic(
            &path,
            recording::write_raw(&raw_samples(&sp.points, &cfg.geometry)).as_bytes(),
        )?;
        let truth_path = a.out.join("truth").join(format!("{stem}.csv"));
        let rows = truth
            .0
            .iter()
            .enumerate()
            .map(|(k, l)| vec![k.to_string(), l.to_string()]);
        write_atomic(&truth_path, csv_text(&["index", "label"], rows).as_bytes())?;
        written.extend([path, truth_path]);
        files.push(FileEntry {
            path: format!("{stem}.csv"),
            participant_id: sp.participant_id.clone(),
            stimulus_id: sp.stimulus_id.clone(),
        });
    }
    let labels = (0..cfg.n_participants)
        .map(|p| {
            (
                SynthConfig::participant_id(p),
                participant_style(&cfg, p).label == 1,
            )
        })
        .collect();
    let labels_path = a.out.join("labels.csv");
    write_atomic(&labels_path, corpus::write_labels(&labels).as_bytes())?;
    let manifest = Manifest {
        format: DataFormat::Raw,
        source_tag: cfg.source_tag.clone(),
        native_hz: CANONICAL_HZ,
        geometry: cfg.geometry,
        labels: Some("labels.csv".into()),
        files,
    };
    let manifest_path = a.out.join(MANIFEST_NAME);
    write_atomic(&manifest_path, manifest.to_text().as_bytes())?;
    written.extend([labels_path, manifest_path]);
    println!(
        "wrote {} synthetic recording(s) (seed {})",
        corpus.len(),
        cfg.seed
    );
    Ok(written)
}

fn read_pairs(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let bad =
        |line: usize, msg: String| ObfError::Data(format!("{}:{line}: {msg}", path.display()));
    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if !header.iter().eq(["a", "b"]) {
        return Err(bad(1, "expected header `a,b`".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let idx = |c: &str| -> Result<usize> {
            let v: usize = c
                .parse()
                .map_err(|_| bad(line, format!("`{c}` is not an index")))?;
            if v >= n {
                return Err(bad(line, format!("index {v} out of range for {n} records")));
            }
            Ok(v)
        };
        out.push((idx(&rec[0])?, idx(&rec[1])?));
    }
    Ok(out)
}

fn plotdata(a: &PlotdataArgs) -> Result<Vec<PathBuf>> {
    let text = if let Some(log_path) = &a.log {
        let log = TrainingLog::parse(&read_text(log_path)?)
            .map_err(|e| ObfError::Data(format!("{}: {e}", log_path.display())))?;
        let mut s = COLUMNS.join(",");
        s.push('\n');
        for r in &log.rows {
            s.push_str(&TrainingLog::row_text(r));
        }
        s
    } else {
        let (store_path, pairs_path) = match (&a.store, &a.pairs) {
            (Some(s), Some(p)) => (s, p),
            _ => return Err(ObfError::Usage("--store needs --pairs".into())),
        };
        let store = EmbeddingStore::load(store_path)?;
        let pairs = read_pairs(pairs_path, store.len())?;
        let recs = store.records();
        let mut header = vec![
            "a".to_string(),
            "b".to_string(),
            "same_scanpath".to_string(),
        ];
        header.extend((0..store.dim).map(|i| format!("d{i}")));
        let mut s = header.join(",");
        s.push('\n');
        for (i, j) in pairs {
            let (x, y) = (&recs[i], &recs[j]);
            write!(s, "{i},{j},{}", u8::from(x.same_scanpath(y))).unwrap();
            for (u, v) in x.vector.iter().zip(&y.vector) {
                write!(s, ",{}", (u - v).abs()).unwrap();
            }
            s.push('\n');
        }
        s
    };
    write_atomic(&a.out, text.as_bytes())?;
    Ok(vec![a.out.clone()])
}
