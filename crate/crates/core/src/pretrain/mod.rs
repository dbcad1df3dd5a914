//! Four-task self-supervised pre-training: segment sampling, losses, the
//! optimization loop and validation metrics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fixation::IvtParams;
use crate::gaze::{self, AugmentConfig, Scanpath};
use crate::model::{ModelConfig, ObfModel, Task, TaskSet};
use crate::optim::{self, Optimizer, OptimizerKind};
use crate::{rng, CANONICAL_HZ};

mod eval;
pub mod loss;
mod sampling;
mod step;

pub use eval::{
    educated_guess_distance, evaluate_pretasks, MeanPredictor, PretaskMetrics, PretaskPredictor,
    ValItem, ValidationSet,
};
pub use loss::{loss_cl, loss_fi, loss_pc, loss_rc, total_loss, PerTask};
pub use sampling::{plan_batches, sample_cl_pairs, sample_segment_pair, ClPair, SegmentPair};
pub use step::{batch_gradient, batch_total, grad_check, BatchItem};

/// What the recurrent/sequential decoders see as step inputs during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecoderFeed {
    /// The target shifted by one step.
    #[default]
    Teacher,
    /// The decoder's own previous outputs, treated as constants.
    Free,
}

impl DecoderFeed {
    pub fn name(self) -> &'static str {
        match self {
            Self::Teacher => "teacher",
            Self::Free => "free",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lr_halving_every: usize,
    pub grad_clip: f64,
    pub batch: usize,
    pub weights: PerTask,
    pub input_len_s: (f64, f64),
    pub pc_horizon_ms: f64,
    pub cl_frac: (f64, f64),
    pub train_frac: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub decoder_feed: DecoderFeed,
    pub augment: AugmentConfig,
    pub ivt: IvtParams,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr: 0.001,
            lr_halving_every: 100,
            grad_clip: 0.5,
            batch: 64,
            weights: PerTask::uniform(1.0),
            input_len_s: (5.0, 10.0),
            pc_horizon_ms: 500.0,
            cl_frac: (0.2, 0.4),
            train_frac: 0.8,
            seed: 0,
            optimizer: OptimizerKind::default(),
            decoder_feed: DecoderFeed::default(),
            augment: AugmentConfig::identity(),
            ivt: IvtParams::default(),
        }
    }
}

fn samples(seconds: f64) -> usize {
    libm::round(seconds * CANONICAL_HZ) as usize
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.epochs == 0 || self.batch == 0 {
            return bad("`epochs` and `batch` must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.grad_clip > 0.0) {
            return bad("`lr` and `grad_clip` must be positive");
        }
        let (a, b) = self.input_len_s;
        if !(a > 0.0 && a <= b) {
            return bad("`input_len_s` must be a positive, ordered range");
        }
        let (a, b) = self.cl_frac;
        if !(a > 0.0 && a <= b && b < 1.0) {
            return bad("`cl_frac` must be an ordered range inside (0, 1)");
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return bad("`train_frac` must lie in (0, 1)");
        }
        if !(self.pc_horizon_ms > 0.0) || self.pc_horizon_samples() == 0 {
            return bad("`pc_horizon_ms` must cover at least one sample");
        }
        for t in Task::ALL {
            let w = self.weights.get(t);
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!(
                    "weight of {t} must be finite and >= 0"
                )));
            }
        }
        if self.tasks().is_empty() {
            return bad("at least one task needs a positive weight");
        }
        self.augment.validate()
    }

    /// Tasks with a positive weight.
    pub fn tasks(&self) -> TaskSet {
        Task::ALL
            .into_iter()
            .filter(|&t| self.weights.get(t) > 0.0)
            .fold(TaskSet::none(), TaskSet::with)
    }

    pub fn input_len_samples(&self) -> (usize, usize) {
        (samples(self.input_len_s.0), samples(self.input_len_s.1))
    }

    pub fn pc_horizon_samples(&self) -> usize {
        samples(self.pc_horizon_ms / 1000.0)
    }

    /// Shortest scanpath usable for training.
    pub fn min_scanpath_len(&self) -> usize {
        self.input_len_samples().0 + self.pc_horizon_samples()
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training losses; entries of inactive tasks are 0.
    pub losses: PerTask,
    pub val: PretaskMetrics,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ObfModel,
    pub log: Vec<EpochLog>,
    /// Indices into the input corpus.
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub validation: ValidationSet,
}

/// Scanpath-level split of `n` items; both sides are nonempty when `n >= 2`.
pub fn split_indices(n: usize, train_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::derived(seed, "split"));
    let mut n_train = libm::round(train_frac * n as f64) as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    } else {
        n_train = n;
    }
    let val = idx.split_off(n_train);
    (idx, val)
}

/// Draws the batch's segment pairs and contrastive pairs. Everything is
/// sampled regardless of which tasks are active so that the data stream
/// does not depend on the task selection.
pub fn sample_batch<R: rand::RngCore + ?Sized>(
    scanpaths: &[&Scanpath],
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<Vec<BatchItem>> {
    let augmented: Vec<Scanpath> = scanpaths
        .iter()
        .map(|s| gaze::augment(s, &cfg.augment, rng))
        .collect();
    let mut segs = Vec::with_capacity(augmented.len());
    for sp in &augmented {
        segs.push(sample_segment_pair(sp, cfg, rng)?);
    }
    let refs: Vec<&Scanpath> = augmented.iter().collect();
    let cls = sample_cl_pairs(&refs, cfg, rng)?;
    Ok(segs
        .into_iter()
        .zip(cls)
        .map(|(seg, cl)| BatchItem { seg, cl })
        .collect())
}

/// Pre-trains a model on `corpus`. Scanpaths shorter than
/// [`PretrainConfig::min_scanpath_len`] are ignored. `on_epoch` sees every
/// log row as soon as it is complete.
pub fn train(
    corpus: &[Scanpath],
    mcfg: &ModelConfig,
    pcfg: &PretrainConfig,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    pcfg.validate()?;
    mcfg.validate()?;
    let usable: Vec<usize> = (0..corpus.len())
        .filter(|&i| corpus[i].len() >= pcfg.min_scanpath_len())
        .collect();
    if usable.is_empty() {
        return Err(Error::Invalid(format!(
            "no scanpath has the required {} samples",
            pcfg.min_scanpath_len()
        )));
    }
    let (tr, va) = split_indices(usable.len(), pcfg.train_frac, pcfg.seed);
    let train_indices: Vec<usize> = tr.iter().map(|&i| usable[i]).collect();
    let val_indices: Vec<usize> = va.iter().map(|&i| usable[i]).collect();
    let train_set: Vec<&Scanpath> = train_indices.iter().map(|&i| &corpus[i]).collect();
    let val_set: Vec<&Scanpath> = val_indices.iter().map(|&i| &corpus[i]).collect();
    let sources: Vec<&str> = train_set.iter().map(|s| s.source_tag.as_str()).collect();
    for s in &sources {
        if sources.iter().filter(|t| *t == s).count() < 2 {
            return Err(Error::Invalid(format!(
                "source `{s}` has fewer than two training scanpaths"
            )));
        }
    }

    let tasks = pcfg.tasks();
    let mut model = ObfModel::new(*mcfg, tasks, pcfg.seed)?;
    let validation = ValidationSet::build(&val_set, pcfg, pcfg.seed)?;
    let mut opt = Optimizer::new(pcfg.optimizer, model.params.len());
    let mut data_rng = rng::derived(pcfg.seed, "data");
    let mut grads = vec![0.0; model.params.len()];
    let mut log = Vec::with_capacity(pcfg.epochs);

    for epoch in 1..=pcfg.epochs {
        let lr = optim::step_lr(pcfg.lr, epoch, pcfg.lr_halving_every);
        let mut sums = PerTask::default();
        let mut seen = 0.0;
        for batch in plan_batches(&sources, pcfg.batch, &mut data_rng) {
            let sps: Vec<&Scanpath> = batch.iter().map(|&i| train_set[i]).collect();
            let items = sample_batch(&sps, pcfg, &mut data_rng)?;
            grads.iter_mut().for_each(|g| *g = 0.0);
            let mut buffers = core::mem::take(&mut model.buffers.values);
            let parts = step::batch_gradient(
                &model,
                &model.params.values,
                Some(&mut buffers),
                &items,
                pcfg,
                Some(&mut grads),
            );
            model.buffers.values = buffers;
            let parts = parts?;
            loss::total_loss(&parts, &pcfg.weights)?;
            optim::clip_elementwise(&mut grads, pcfg.grad_clip);
            opt.step(&mut model.params.values, &grads, lr);
            let n = items.len() as f64;
            for t in tasks.iter() {
                *sums.get_mut(t) += parts.get(t) * n;
            }
            seen += n;
        }
        for t in tasks.iter() {
            *sums.get_mut(t) /= seen;
        }
        let val = evaluate_pretasks(&model, &validation)?;
        let row = EpochLog {
            epoch,
            lr,
            losses: sums,
            val,
        };
        on_epoch(&row);
        log.push(row);
    }
    Ok(TrainOutcome {
        model,
        log,
        train_indices,
        val_indices,
        validation,
    })
}
