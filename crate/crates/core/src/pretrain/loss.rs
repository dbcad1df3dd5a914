//! The four pre-task losses and their combination.

use alloc::format;

use crate::error::{Error, Result};
use crate::fixation::{FixationLabels, SampleMask};
use crate::math;
use crate::model::Task;

/// Probabilities are clipped to `[EPS, 1 - EPS]` inside cross-entropies.
pub const PROB_EPS: f64 = 1e-7;

fn check_same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!(
            "{what}: {a} predicted steps vs {b} targets"
        )));
    }
    Ok(())
}

fn half_mean_sq(pred: &[[f64; 2]], target: &[[f64; 2]]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, x)| (p[0] - x[0]) * (p[0] - x[0]) + (p[1] - x[1]) * (p[1] - x[1]))
        .sum();
    sum / (2.0 * pred.len() as f64)
}

/// `||recon - x||^2 / (2t)`.
pub fn loss_rc(recon: &[[f64; 2]], x: &[[f64; 2]]) -> Result<f64> {
    check_same_len(recon.len(), x.len(), "reconstruction")?;
    Ok(half_mean_sq(recon, x))
}

/// `||pred - future||^2 / (2t')`.
pub fn loss_pc(pred: &[[f64; 2]], future: &[[f64; 2]]) -> Result<f64> {
    check_same_len(pred.len(), future.len(), "prediction")?;
    Ok(half_mean_sq(pred, future))
}

fn clip(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Binary cross-entropy over the masked samples, half the weight on each
/// class. An all-zero mask gives 0.
pub fn loss_fi(probs: &[f64], labels: &FixationLabels, mask: &SampleMask) -> Result<f64> {
    check_same_len(probs.len(), labels.len(), "fixation probabilities")?;
    check_same_len(mask.0.len(), labels.len(), "fixation mask")?;
    if !mask.is_balanced(labels) {
        return Err(Error::Invalid("fixation mask is not class-balanced".into()));
    }
    let n = mask.count();
    if n == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for ((&p, &l), &m) in probs.iter().zip(&labels.0).zip(&mask.0) {
        if m == 1 {
            sum -= if l == 1 {
                math::ln(clip(p))
            } else {
                math::ln(1.0 - clip(p))
            };
        }
    }
    Ok(sum / n as f64)
}

/// `-[S ln p + (1 - S) ln(1 - p)]`.
pub fn loss_cl(p: f64, same_source: bool) -> f64 {
    let p = clip(p);
    if same_source {
        -math::ln(p)
    } else {
        -math::ln(1.0 - p)
    }
}

/// Gradient of a clipped cross-entropy with respect to the logit that
/// produced `p`; zero where clipping is active.
pub(crate) fn bce_logit_grad(p: f64, target: bool) -> f64 {
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
        return 0.0;
    }
    p - if target { 1.0 } else { 0.0 }
}

/// Per-task values (losses or weights), indexed by [`Task`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerTask {
    pub rc: f64,
    pub pc: f64,
    pub fi: f64,
    pub cl: f64,
}

impl PerTask {
    pub const fn uniform(v: f64) -> Self {
        Self {
            rc: v,
            pc: v,
            fi: v,
            cl: v,
        }
    }

    pub fn get(&self, t: Task) -> f64 {
        match t {
            Task::Rc => self.rc,
            Task::Pc => self.pc,
            Task::Fi => self.fi,
            Task::Cl => self.cl,
        }
    }

    pub fn get_mut(&mut self, t: Task) -> &mut f64 {
        match t {
            Task::Rc => &mut self.rc,
            Task::Pc => &mut self.pc,
            Task::Fi => &mut self.fi,
            Task::Cl => &mut self.cl,
        }
    }
}

/// Weighted sum of the task losses. Tasks with weight 0 are skipped
/// entirely; a non-finite loss of an active task is an error.
pub fn total_loss(parts: &PerTask, weights: &PerTask) -> Result<f64> {
    let mut total = 0.0;
    for t in Task::ALL {
        let w = weights.get(t);
        if w == 0.0 {
            continue;
        }
        let v = parts.get(t);
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss { task: t.name() });
        }
        total += w * v;
    }
    Ok(total)
}
