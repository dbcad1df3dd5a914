//! Validation-set construction and the pre-task metrics.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fixation::FixationLabels;
use crate::gaze::{distance, Scanpath};
use crate::metrics;
use crate::model::{ObfModel, Task};
use crate::rng;

use super::sampling::{sample_segment_pair, ClPair};
use super::PretrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ValItem {
    pub x: Vec<[f64; 2]>,
    pub future: Vec<[f64; 2]>,
    pub labels: FixationLabels,
}

/// A fixed, seed-determined sample of validation segments and contrastive
/// pairs, built once and reused every epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationSet {
    pub items: Vec<ValItem>,
    /// Alternating same/different pairs so the classes are balanced.
    pub cl_pairs: Vec<ClPair>,
}

impl ValidationSet {
    pub fn build(scanpaths: &[&Scanpath], cfg: &PretrainConfig, seed: u64) -> Result<Self> {
        let mut r = rng::derived(seed, "validation");
        let mut items = Vec::with_capacity(scanpaths.len());
        for sp in scanpaths {
            let pair = sample_segment_pair(sp, cfg, &mut r)?;
            items.push(ValItem {
                x: pair.x,
                future: pair.future,
                labels: pair.fi,
            });
        }
        let mut cl_pairs = Vec::new();
        let n = scanpaths.len();
        for (i, sp) in scanpaths.iter().enumerate() {
            let same = i % 2 == 0;
            // prefer a partner from the same source, as in training batches
            let partner = (1..n)
                .map(|k| (i + k) % n)
                .find(|&j| scanpaths[j].source_tag == sp.source_tag)
                .or_else(|| (n > 1).then(|| (i + 1) % n));
            let other = match (same, partner) {
                (true, _) => *sp,
                (false, Some(j)) => scanpaths[j],
                (false, None) => continue,
            };
            let seg = |s: &Scanpath, r: &mut rng::DetRng| {
                let (a, b) = cfg.cl_frac;
                let lo = libm::ceil(a * s.len() as f64) as usize;
                let hi = (libm::floor(b * s.len() as f64) as usize).max(lo);
                let len = r.random_range(lo.max(1)..=hi.max(1)).min(s.len());
                let start = r.random_range(0..=s.len() - len);
                (start, s.points[start..start + len].to_vec())
            };
            let (s1, x1) = seg(sp, &mut r);
            let mut second = seg(other, &mut r);
            while same && second.0 == s1 && other.len() > second.1.len() {
                second = seg(other, &mut r);
            }
            cl_pairs.push(ClPair {
                x1,
                x2: second.1,
                same_source: same,
            });
        }
        Ok(Self { items, cl_pairs })
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Anything that can be scored on the pre-tasks. Methods return `None`
/// when the predictor does not implement that task.
pub trait PretaskPredictor {
    fn reconstruct(&self, x: &[[f64; 2]]) -> Result<Option<Vec<[f64; 2]>>>;
    fn predict_future(&self, x: &[[f64; 2]], horizon: usize) -> Result<Option<Vec<[f64; 2]>>>;
    fn fixation_probs(&self, x: &[[f64; 2]]) -> Result<Option<Vec<f64>>>;
    fn same_source_prob(&self, a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<Option<f64>>;
}

/// Evaluation-mode predictions: decoders run free (no teacher forcing).
impl PretaskPredictor for ObfModel {
    fn reconstruct(&self, x: &[[f64; 2]]) -> Result<Option<Vec<[f64; 2]>>> {
        if !self.tasks.contains(Task::Rc) {
            return Ok(None);
        }
        let e = self.encode(x)?;
        self.decode_rc(&e, x.len(), None).map(Some)
    }

    fn predict_future(&self, x: &[[f64; 2]], horizon: usize) -> Result<Option<Vec<[f64; 2]>>> {
        if !self.tasks.contains(Task::Pc) {
            return Ok(None);
        }
        let e = self.encode(x)?;
        self.decode_pc(&e, horizon, None).map(Some)
    }

    fn fixation_probs(&self, x: &[[f64; 2]]) -> Result<Option<Vec<f64>>> {
        if !self.tasks.contains(Task::Fi) {
            return Ok(None);
        }
        let e = self.encode(x)?;
        self.decode_fi(&e, x).map(Some)
    }

    fn same_source_prob(&self, a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<Option<f64>> {
        if !self.tasks.contains(Task::Cl) {
            return Ok(None);
        }
        self.cl_head(&self.encode(a)?, &self.encode(b)?).map(Some)
    }
}

/// Predicts a constant point for every step; fixation and same-source
/// probabilities are 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanPredictor {
    pub mean: [f64; 2],
}

impl MeanPredictor {
    /// Mean of every input point in the validation set.
    pub fn fit(val: &ValidationSet) -> Self {
        let mut s = [0.0; 2];
        let mut n = 0.0;
        for p in val.items.iter().flat_map(|i| &i.x) {
            s[0] += p[0];
            s[1] += p[1];
            n += 1.0;
        }
        let n = if n == 0.0 { 1.0 } else { n };
        Self {
            mean: [s[0] / n, s[1] / n],
        }
    }
}

impl PretaskPredictor for MeanPredictor {
    fn reconstruct(&self, x: &[[f64; 2]]) -> Result<Option<Vec<[f64; 2]>>> {
        Ok(Some(alloc::vec![self.mean; x.len()]))
    }

    fn predict_future(&self, _: &[[f64; 2]], horizon: usize) -> Result<Option<Vec<[f64; 2]>>> {
        Ok(Some(alloc::vec![self.mean; horizon]))
    }

    fn fixation_probs(&self, x: &[[f64; 2]]) -> Result<Option<Vec<f64>>> {
        Ok(Some(alloc::vec![0.5; x.len()]))
    }

    fn same_source_prob(&self, _: &[[f64; 2]], _: &[[f64; 2]]) -> Result<Option<f64>> {
        Ok(Some(0.5))
    }
}

/// Validation metrics; `None` for tasks that were not evaluated (or, for
/// the AUC, when only one class occurs).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PretaskMetrics {
    pub rc_dist_deg: Option<f64>,
    pub pc_dist_deg: Option<f64>,
    pub fi_auc: Option<f64>,
    pub cl_acc: Option<f64>,
}

fn pooled_distance(sum: &mut (f64, usize), pred: &[[f64; 2]], target: &[[f64; 2]]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::Shape(alloc::format!(
            "{} predicted points for {} targets",
            pred.len(),
            target.len()
        )));
    }
    for (a, b) in pred.iter().zip(target) {
        sum.0 += distance(*a, *b);
    }
    sum.1 += pred.len();
    Ok(())
}

/// Mean Euclidean distances (pooled over all timepoints), the rank AUC of
/// fixation probabilities over all timepoints, and contrastive accuracy at
/// threshold 1/2.
pub fn evaluate_pretasks<P: PretaskPredictor + ?Sized>(
    model: &P,
    val: &ValidationSet,
) -> Result<PretaskMetrics> {
    if val.is_empty() {
        return Ok(PretaskMetrics::default());
    }
    let mut rc = (0.0, 0usize);
    let mut pc = (0.0, 0usize);
    let (mut has_rc, mut has_pc) = (true, true);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut has_fi = true;
    for item in &val.items {
        if has_rc {
            match model.reconstruct(&item.x)? {
                Some(r) => pooled_distance(&mut rc, &r, &item.x)?,
                None => has_rc = false,
            }
        }
        if has_pc {
            match model.predict_future(&item.x, item.future.len())? {
                Some(f) => pooled_distance(&mut pc, &f, &item.future)?,
                None => has_pc = false,
            }
        }
        if has_fi {
            match model.fixation_probs(&item.x)? {
                Some(p) => {
                    scores.extend(p);
                    labels.extend(item.labels.0.iter().map(|&l| l == 1));
                }
                None => has_fi = false,
            }
        }
    }
    let mut hits = 0usize;
    let mut has_cl = !val.cl_pairs.is_empty();
    for pair in &val.cl_pairs {
        match model.same_source_prob(&pair.x1, &pair.x2)? {
            Some(p) => hits += usize::from((p >= 0.5) == pair.same_source),
            None => {
                has_cl = false;
                break;
            }
        }
    }
    Ok(PretaskMetrics {
        rc_dist_deg: has_rc.then(|| rc.0 / rc.1.max(1) as f64),
        pc_dist_deg: has_pc.then(|| pc.0 / pc.1.max(1) as f64),
        fi_auc: if has_fi {
            metrics::auc(&scores, &labels)
        } else {
            None
        },
        cl_acc: has_cl.then(|| hits as f64 / val.cl_pairs.len() as f64),
    })
}

/// Reconstruction distance of always predicting the validation mean point.
pub fn educated_guess_distance(val: &ValidationSet) -> f64 {
    let m = MeanPredictor::fit(val).mean;
    let mut sum = 0.0;
    let mut n = 0usize;
    for p in val.items.iter().flat_map(|i| &i.x) {
        sum += distance(*p, m);
        n += 1;
    }
    sum / n.max(1) as f64
}
