//! Losses and gradients of one mini-batch, and the finite-difference check
//! of those gradients.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::Result;
use crate::math::{self, Mat};
use crate::model::{self, ObfModel, Task, COORD_SCALE};

use super::loss::{self, bce_logit_grad, PerTask};
use super::sampling::{ClPair, SegmentPair};
use super::{DecoderFeed, PretrainConfig};

/// What one scanpath contributes to a mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem {
    pub seg: SegmentPair,
    pub cl: ClPair,
}

/// Half mean squared error in degrees of network-unit outputs, and its
/// gradient scaled by `weight`.
fn regression(y: &Mat, target: &Mat, weight: f64) -> (f64, Mat) {
    let t = y.rows as f64;
    let s2 = COORD_SCALE * COORD_SCALE;
    let mut dy = Mat::zeros(y.rows, y.cols);
    let mut sum = 0.0;
    for ((d, a), b) in dy.data.iter_mut().zip(&y.data).zip(&target.data) {
        let r = a - b;
        sum += r * r;
        *d = weight * r / (t * s2);
    }
    (sum / (2.0 * t * s2), dy)
}

fn decoder_inputs(
    model: &ObfModel,
    task: Task,
    p: &[f64],
    emb: &[f64],
    target: &Mat,
    feed: DecoderFeed,
) -> Result<Mat> {
    Ok(match feed {
        DecoderFeed::Teacher => model::shifted_inputs(target),
        DecoderFeed::Free => model::shifted_inputs(&model.generate(task, p, emb, target.rows)?),
    })
}

/// Mean per-task losses over the batch. When `grads` is given, the gradient
/// of the weighted total is accumulated into it. `buffers` receives
/// batch-normalization running statistics when given.
pub fn batch_gradient(
    model: &ObfModel,
    p: &[f64],
    buffers: Option<&mut [f64]>,
    items: &[BatchItem],
    cfg: &PretrainConfig,
    mut grads: Option<&mut [f64]>,
) -> Result<PerTask> {
    let b = items.len() as f64;
    let w = cfg.weights;
    let active = |t: Task| model.tasks.contains(t) && w.get(t) != 0.0;
    let dim = model.embedding_dim();
    let mut losses = PerTask::default();

    let mut d_cl: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    if active(Task::Cl) {
        let mut diffs = Mat::zeros(items.len(), dim);
        let mut signs = Mat::zeros(items.len(), dim);
        for (i, item) in items.iter().enumerate() {
            let (e1, _) = model.encode_train(p, &model::to_network(&item.cl.x1))?;
            let (e2, _) = model.encode_train(p, &model::to_network(&item.cl.x2))?;
            for j in 0..dim {
                let d = e1[j] - e2[j];
                diffs.row_mut(i)[j] = d.abs();
                signs.row_mut(i)[j] = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
        }
        let (logits, cache) = model.cl_train(p, buffers, &diffs)?;
        let mut d_logits = vec![0.0; items.len()];
        for (i, item) in items.iter().enumerate() {
            let prob = math::sigmoid(logits[i]);
            losses.cl += loss::loss_cl(prob, item.cl.same_source) / b;
            d_logits[i] = w.cl * bce_logit_grad(prob, item.cl.same_source) / b;
        }
        if let Some(g) = grads.as_deref_mut() {
            let d_diffs = model.cl_backward(p, &cache, &d_logits, g)?;
            for i in 0..items.len() {
                let d1: Vec<f64> = (0..dim)
                    .map(|j| signs.row(i)[j] * d_diffs.row(i)[j])
                    .collect();
                let d2 = d1.iter().map(|v| -v).collect();
                d_cl.push((d1, d2));
            }
        }
    }

    for (i, item) in items.iter().enumerate() {
        let x = model::to_network(&item.seg.x);
        let (emb, enc_cache) = model.encode_train(p, &x)?;
        let mut d_emb = vec![0.0; dim];
        for (task, target) in [
            (Task::Rc, &x),
            (Task::Pc, &model::to_network(&item.seg.future)),
        ] {
            if !active(task) {
                continue;
            }
            let inputs = decoder_inputs(model, task, p, &emb, target, cfg.decoder_feed)?;
            let (y, cache) = model.decode_train(task, p, &emb, &inputs)?;
            let (l, dy) = regression(&y, target, w.get(task) / b);
            *losses.get_mut(task) += l / b;
            if let Some(g) = grads.as_deref_mut() {
                let d = model.decode_backward(task, p, &cache, &dy, g)?;
                math::axpy(1.0, &d, &mut d_emb);
            }
        }
        if active(Task::Fi) {
            let (y, cache) = model.decode_train(Task::Fi, p, &emb, &x)?;
            let probs: Vec<f64> = y.data.iter().map(|&v| math::sigmoid(v)).collect();
            losses.fi += loss::loss_fi(&probs, &item.seg.fi, &item.seg.mask)? / b;
            let n = item.seg.mask.count();
            if n > 0 {
                if let Some(g) = grads.as_deref_mut() {
                    let mut dy = Mat::zeros(y.rows, 1);
                    for k in 0..y.rows {
                        if item.seg.mask.0[k] == 1 {
                            dy.data[k] = w.fi * bce_logit_grad(probs[k], item.seg.fi.0[k] == 1)
                                / (n as f64 * b);
                        }
                    }
                    let d = model.decode_backward(Task::Fi, p, &cache, &dy, g)?;
                    math::axpy(1.0, &d, &mut d_emb);
                }
            }
        }
        if let Some(g) = grads.as_deref_mut() {
            model.encode_backward(p, &enc_cache, &d_emb, g);
            if let Some((d1, d2)) = d_cl.get(i) {
                let (_, c1) = model.encode_train(p, &model::to_network(&item.cl.x1))?;
                model.encode_backward(p, &c1, d1, g);
                let (_, c2) = model.encode_train(p, &model::to_network(&item.cl.x2))?;
                model.encode_backward(p, &c2, d2, g);
            }
        }
    }
    Ok(losses)
}

/// Weighted total loss of a batch at parameters `p` (no statistics update).
pub fn batch_total(
    model: &ObfModel,
    p: &[f64],
    items: &[BatchItem],
    cfg: &PretrainConfig,
) -> Result<f64> {
    let parts = batch_gradient(model, p, None, items, cfg, None)?;
    loss::total_loss(&parts, &cfg.weights)
}

/// Largest relative difference between the analytic gradient of the total
/// loss and central finite differences (step 1e-5) over `n_checks`
/// randomly chosen parameters.
///
/// The denominator is `max(|analytic|, |numeric|, 1e-3 * max_i |analytic_i|)`:
/// a central difference of a loss of size `L` carries round-off of order
/// `1e-16 * L / step`, which would otherwise dominate entries whose
/// gradient is many orders below the largest one.
pub fn grad_check<R: RngCore + ?Sized>(
    model: &ObfModel,
    items: &[BatchItem],
    cfg: &PretrainConfig,
    n_checks: usize,
    rng: &mut R,
) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let mut p = model.params.values.clone();
    let mut g = vec![0.0; p.len()];
    batch_gradient(model, &p, None, items, cfg, Some(&mut g))?;
    let picks: Vec<usize> = if n_checks >= p.len() {
        (0..p.len()).collect()
    } else {
        rand::seq::index::sample(rng, p.len(), n_checks).into_vec()
    };
    let floor = 1e-3 * g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for i in picks {
        let orig = p[i];
        p[i] = orig + STEP;
        let up = batch_total(model, &p, items, cfg)?;
        p[i] = orig - STEP;
        let down = batch_total(model, &p, items, cfg)?;
        p[i] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let scale = g[i].abs().max(numeric.abs()).max(floor);
        if scale > 0.0 {
            worst = worst.max((g[i] - numeric).abs() / scale);
        }
    }
    Ok(worst)
}
