//! Downstream protocols on top of a pre-trained encoder: c-way k-shot
//! stimulus prediction (supervised head or prototypical network) and
//! participant classification with an L1-regularized linear model.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::gaze::Scanpath;
use crate::math::Mat;
use crate::model::{to_network, Embedding, ObfModel};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng;

mod lasso;
mod mlp;
mod participant;
mod protonet;

pub use lasso::{lasso_cv, stratified_folds, EvalReport, FoldReport, L1Logistic, LassoConfig};
pub use mlp::{argmax, cross_entropy, softmax_in_place, MlpHead};
pub use participant::{
    expert_baseline, expert_vector, participant_records, participant_vector, roster,
    ParticipantRecord,
};
pub use protonet::{
    episode_loss, eval_metric, meta_split, nearest_prototype, protonet_eval, protonet_train,
    prototypes, squared_distance, MetaSplit, ProtoConfig, ProtoNet,
};

/// Embedding of a whole scanpath (no segmentation).
pub fn extract_embedding(model: &ObfModel, sp: &Scanpath) -> Result<Embedding> {
    model.encode(&sp.points)
}

/// Scanpaths grouped by stimulus, one per participant, both sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusIndex {
    pub stimuli: Vec<StimulusUsers>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusUsers {
    pub stimulus_id: String,
    /// `(participant_id, corpus index)`; the first scanpath of each
    /// participant is used.
    pub users: Vec<(String, usize)>,
}

impl StimulusIndex {
    pub fn build(corpus: &[Scanpath]) -> Self {
        let mut by_stim: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
        for (i, sp) in corpus.iter().enumerate() {
            by_stim
                .entry(sp.stimulus_id.as_str())
                .or_default()
                .entry(sp.participant_id.as_str())
                .or_insert(i);
        }
        let stimuli = by_stim
            .into_iter()
            .map(|(s, users)| StimulusUsers {
                stimulus_id: s.into(),
                users: users.into_iter().map(|(p, i)| (p.into(), i)).collect(),
            })
            .collect();
        Self { stimuli }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StimulusMode {
    Supervised,
    Metric,
}

impl StimulusMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Supervised => "supervised",
            Self::Metric => "metric",
        }
    }
}

impl core::str::FromStr for StimulusMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "supervised" => Ok(Self::Supervised),
            "metric" => Ok(Self::Metric),
            _ => Err(Error::Config(format!(
                "unknown mode `{s}` (supervised, metric)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StimulusTaskSpec {
    pub ways: usize,
    pub shots: usize,
    pub mode: StimulusMode,
    /// Evaluation episodes in metric mode.
    pub episodes: usize,
    /// Query scanpaths per class in a metric episode.
    pub queries: usize,
    /// Stimuli reserved for meta-training in metric mode.
    pub meta_train_stimuli: usize,
}

impl StimulusTaskSpec {
    pub fn new(ways: usize, shots: usize, mode: StimulusMode) -> Self {
        Self {
            ways,
            shots,
            mode,
            episodes: 500,
            queries: 5,
            meta_train_stimuli: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ways < 2 || self.shots == 0 {
            return Err(Error::Config("need at least 2 ways and 1 shot".into()));
        }
        if self.mode == StimulusMode::Metric && (self.episodes == 0 || self.queries == 0) {
            return Err(Error::Config(
                "metric mode needs episodes and queries".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusReport {
    pub ways: usize,
    pub shots: usize,
    pub mode: StimulusMode,
    pub accuracy: f64,
    /// Test scanpaths (supervised) or episodes (metric).
    pub evaluated: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledExample {
    /// Corpus index.
    pub index: usize,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSplit {
    /// Stimulus id of each class.
    pub classes: Vec<String>,
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

/// Picks `ways` stimuli with more than `shots` participants; per stimulus,
/// `shots` random participants go to training and all others to testing, so
/// no (participant, stimulus) pair is on both sides.
pub fn supervised_split<R: rand::RngCore + ?Sized>(
    index: &StimulusIndex,
    ways: usize,
    shots: usize,
    rng: &mut R,
) -> Result<SupervisedSplit> {
    let mut eligible: Vec<&StimulusUsers> = index
        .stimuli
        .iter()
        .filter(|s| s.users.len() > shots)
        .collect();
    if eligible.len() < ways {
        return Err(Error::Episode(format!(
            "{} stimuli have more than {shots} participants, {ways} needed",
            eligible.len()
        )));
    }
    eligible.shuffle(rng);
    eligible.truncate(ways);
    let mut split = SupervisedSplit {
        classes: Vec::with_capacity(ways),
        train: Vec::new(),
        test: Vec::new(),
    };
    for (class, s) in eligible.into_iter().enumerate() {
        split.classes.push(s.stimulus_id.clone());
        let mut users: Vec<usize> = s.users.iter().map(|u| u.1).collect();
        users.shuffle(rng);
        for (j, index) in users.into_iter().enumerate() {
            let ex = LabeledExample { index, class };
            if j < shots {
                split.train.push(ex);
            } else {
                split.test.push(ex);
            }
        }
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadConfig {
    pub widths: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Also update the encoder while training the head.
    pub fine_tune: bool,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            widths: vec![256, 512],
            dropout: 0.5,
            epochs: 200,
            batch: 64,
            lr: 1e-3,
            fine_tune: false,
            seed: 0,
        }
    }
}

/// Splits `0..n` into shuffled mini-batches of at most `batch`, folding a
/// trailing singleton into the previous batch (batch normalization needs
/// two rows).
pub(crate) fn minibatches<R: rand::RngCore + ?Sized>(
    n: usize,
    batch: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order.chunks(batch.max(2)).map(|c| c.to_vec()).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap_or_default();
        if let Some(prev) = out.last_mut() {
            prev.extend(last);
        }
    }
    out
}

/// Encodes the given inputs with caches, for fine-tuning.
pub(crate) struct EncodedBatch {
    pub emb: Mat,
    caches: Vec<crate::model::EncodeCache>,
}

impl EncodedBatch {
    pub fn new(model: &ObfModel, inputs: &[&[[f64; 2]]]) -> Result<Self> {
        let dim = model.embedding_dim();
        let mut emb = Mat::zeros(inputs.len(), dim);
        let mut caches = Vec::with_capacity(inputs.len());
        for (r, pts) in inputs.iter().enumerate() {
            model.check_input(pts)?;
            let (e, c) = model.encode_train(&model.params.values, &to_network(pts))?;
            emb.row_mut(r).copy_from_slice(&e);
            caches.push(c);
        }
        Ok(Self { emb, caches })
    }

    pub fn backward(&self, model: &ObfModel, d_emb: &Mat, g: &mut [f64]) {
        for (r, c) in self.caches.iter().enumerate() {
            model.encode_backward(&model.params.values, c, d_emb.row(r), g);
        }
    }
}

pub(crate) fn embed_rows(model: &ObfModel, inputs: &[&[[f64; 2]]]) -> Result<Mat> {
    let mut m = Mat::zeros(inputs.len(), model.embedding_dim());
    for (r, pts) in inputs.iter().enumerate() {
        m.row_mut(r).copy_from_slice(&model.encode(pts)?);
    }
    Ok(m)
}

fn select_rows(m: &Mat, rows: &[usize]) -> Mat {
    let mut out = Mat::zeros(rows.len(), m.cols);
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).copy_from_slice(m.row(i));
    }
    out
}

/// Encoder (possibly fine-tuned copy) plus a trained softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusClassifier {
    pub model: ObfModel,
    pub head: MlpHead,
}

impl StimulusClassifier {
    pub fn predict_proba(&self, points: &[[f64; 2]]) -> Result<Vec<f64>> {
        let e = self.model.encode(points)?;
        let x = Mat::from_vec(1, e.len(), e);
        Ok(self.head.predict(&x).data)
    }

    pub fn predict(&self, points: &[[f64; 2]]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(points)?))
    }
}

/// Trains the head (and, with `fine_tune`, the encoder) by softmax
/// cross-entropy on `(segment, class)` examples.
pub fn train_mlp_head(
    model: &ObfModel,
    examples: &[(&[[f64; 2]], usize)],
    classes: usize,
    cfg: &HeadConfig,
) -> Result<StimulusClassifier> {
    let mut counts = vec![0usize; classes];
    for &(_, c) in examples {
        if c >= classes {
            return Err(Error::Invalid(format!("class {c} outside 0..{classes}")));
        }
        counts[c] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(c));
    }
    if !(0.0..1.0).contains(&cfg.dropout) || cfg.epochs == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config(
            "head needs dropout in [0,1), epochs > 0, lr > 0".into(),
        ));
    }
    let mut model = model.clone();
    let mut head = MlpHead::new(
        model.embedding_dim(),
        &cfg.widths,
        classes,
        cfg.dropout,
        cfg.seed,
    );
    let inputs: Vec<&[[f64; 2]]> = examples.iter().map(|e| e.0).collect();
    let targets: Vec<usize> = examples.iter().map(|e| e.1).collect();
    let frozen = if cfg.fine_tune {
        None
    } else {
        Some(embed_rows(&model, &inputs)?)
    };
    let mut head_opt = Optimizer::new(OptimizerKind::Adam, head.params.len());
    let mut enc_opt = Optimizer::new(
        OptimizerKind::Adam,
        if cfg.fine_tune { model.params.len() } else { 0 },
    );
    let mut rng = rng::derived(cfg.seed, "mlp-head");
    let mut g_head = vec![0.0; head.params.len()];
    let mut g_enc = if cfg.fine_tune {
        model.params.zeros_like()
    } else {
        Vec::new()
    };
    for _ in 0..cfg.epochs {
        for batch in minibatches(examples.len(), cfg.batch, &mut rng) {
            let t: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
            g_head.iter_mut().for_each(|g| *g = 0.0);
            let (x, encoded) = match &frozen {
                Some(all) => (select_rows(all, &batch), None),
                None => {
                    let pts: Vec<&[[f64; 2]]> = batch.iter().map(|&i| inputs[i]).collect();
                    let enc = EncodedBatch::new(&model, &pts)?;
                    (enc.emb.clone(), Some(enc))
                }
            };
            let (logits, cache) = head.forward_train(&x, &mut rng);
            let (loss, d) = cross_entropy(&logits, &t);
            if !loss.is_finite() {
                return Err(Error::NonFinite("head loss"));
            }
            let dx = head.backward(&cache, &d, &mut g_head);
            head_opt.step(&mut head.params.values, &g_head, cfg.lr);
            if let Some(enc) = &encoded {
                g_enc.iter_mut().for_each(|g| *g = 0.0);
                enc.backward(&model, &dx, &mut g_enc);
                enc_opt.step(&mut model.params.values, &g_enc, cfg.lr);
            }
        }
    }
    Ok(StimulusClassifier { model, head })
}

/// Supervised c-way k-shot protocol: split, train a head on the support
/// scanpaths, report accuracy on the held-out participants.
pub fn eval_supervised(
    model: &ObfModel,
    corpus: &[Scanpath],
    spec: &StimulusTaskSpec,
    cfg: &HeadConfig,
) -> Result<StimulusReport> {
    spec.validate()?;
    let index = StimulusIndex::build(corpus);
    let mut rng = rng::derived(cfg.seed, "stimulus-split");
    let split = supervised_split(&index, spec.ways, spec.shots, &mut rng)?;
    let train: Vec<(&[[f64; 2]], usize)> = split
        .train
        .iter()
        .map(|e| (corpus[e.index].points.as_slice(), e.class))
        .collect();
    let clf = train_mlp_head(model, &train, spec.ways, cfg)?;
    let mut hits = 0usize;
    for e in &split.test {
        if clf.predict(&corpus[e.index].points)? == e.class {
            hits += 1;
        }
    }
    Ok(StimulusReport {
        ways: spec.ways,
        shots: spec.shots,
        mode: StimulusMode::Supervised,
        accuracy: hits as f64 / split.test.len().max(1) as f64,
        evaluated: split.test.len(),
        seed: cfg.seed,
    })
}
