//! Classification head for the supervised stimulus task: hidden layers of
//! `Linear -> Dropout -> Sigmoid -> BatchNorm`, then a softmax output.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::math::{self, Mat};
use crate::nn::{BatchNorm, BatchNormCache, Builder, Linear, ParamStore};

#[derive(Debug, Clone, PartialEq)]
struct Hidden {
    lin: Linear,
    bn: BatchNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead {
    pub params: ParamStore,
    pub buffers: ParamStore,
    hidden: Vec<Hidden>,
    out: Linear,
    pub classes: usize,
    pub dropout: f64,
}

struct LayerCache {
    input: Mat,
    /// Dropout scale per entry (0 or 1/(1-p)).
    keep: Vec<f64>,
    act: Mat,
    bn: BatchNormCache,
}

pub struct MlpCache {
    layers: Vec<LayerCache>,
    top: Mat,
}

impl MlpHead {
    pub fn new(input: usize, widths: &[usize], classes: usize, dropout: f64, seed: u64) -> Self {
        let mut params = ParamStore::default();
        let mut buffers = ParamStore::default();
        let mut pb = Builder::new(&mut params, seed);
        let mut bb = Builder::new(&mut buffers, seed);
        let mut hidden = Vec::with_capacity(widths.len());
        let mut prev = input;
        for (i, &w) in widths.iter().enumerate() {
            let name = alloc::format!("hidden{i}");
            let lin = Linear::new(&mut pb, &name, prev, w);
            let bn = BatchNorm::new(&mut pb, &mut bb, &alloc::format!("{name}.bn"), w);
            hidden.push(Hidden { lin, bn });
            prev = w;
        }
        let out = Linear::new(&mut pb, "out", prev, classes);
        Self {
            params,
            buffers,
            hidden,
            out,
            classes,
            dropout,
        }
    }

    /// Training-mode logits with fresh dropout masks; updates the batch
    /// normalization running statistics.
    pub fn forward_train<R: RngCore + ?Sized>(&mut self, x: &Mat, rng: &mut R) -> (Mat, MlpCache) {
        let p = &self.params.values;
        let keep_scale = 1.0 / (1.0 - self.dropout);
        let mut h = x.clone();
        let mut layers = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let mut z = layer.lin.forward_rows(p, &h);
            let keep: Vec<f64> = (0..z.data.len())
                .map(|_| {
                    if rng.random::<f64>() < self.dropout {
                        0.0
                    } else {
                        keep_scale
                    }
                })
                .collect();
            for (v, k) in z.data.iter_mut().zip(&keep) {
                *v = math::sigmoid(*v * k);
            }
            let (y, bn) = layer
                .bn
                .forward_train(p, Some(&mut self.buffers.values), &z);
            layers.push(LayerCache {
                input: core::mem::replace(&mut h, y),
                keep,
                act: z,
                bn,
            });
        }
        let logits = self.out.forward_rows(p, &h);
        (logits, MlpCache { layers, top: h })
    }

    /// Accumulates parameter gradients for `d_logits`; returns the gradient
    /// with respect to the input rows.
    pub fn backward(&self, cache: &MlpCache, d_logits: &Mat, g: &mut [f64]) -> Mat {
        let p = &self.params.values;
        let mut dh = self
            .out
            .backward_rows(p, &cache.top, d_logits, g, true)
            .expect("dx requested");
        for (layer, c) in self.hidden.iter().zip(&cache.layers).rev() {
            let mut da = layer.bn.backward(p, &c.bn, &dh, g);
            for ((d, a), k) in da.data.iter_mut().zip(&c.act.data).zip(&c.keep) {
                *d *= a * (1.0 - a) * k;
            }
            dh = layer
                .lin
                .backward_rows(p, &c.input, &da, g, true)
                .expect("dx requested");
        }
        dh
    }

    /// Evaluation-mode class probabilities for each row.
    pub fn predict(&self, x: &Mat) -> Mat {
        let p = &self.params.values;
        let mut h = x.clone();
        for layer in &self.hidden {
            let mut z = layer.lin.forward_rows(p, &h);
            z.data.iter_mut().for_each(|v| *v = math::sigmoid(*v));
            h = layer.bn.forward_eval(p, &self.buffers.values, &z);
        }
        let mut logits = self.out.forward_rows(p, &h);
        for r in 0..logits.rows {
            softmax_in_place(logits.row_mut(r));
        }
        logits
    }
}

pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = math::exp(*x - max);
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &Mat, targets: &[usize]) -> (f64, Mat) {
    let n = logits.rows as f64;
    let mut d = logits.clone();
    let mut loss = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let row = d.row_mut(r);
        softmax_in_place(row);
        loss -= math::ln(row[t].max(1e-300));
        row[t] -= 1.0;
        row.iter_mut().for_each(|v| *v /= n);
    }
    (loss / n, d)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec;

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let logits = Mat::from_vec(2, 3, vec![0.2, -1.0, 0.5, 1.5, 0.0, -0.3]);
        let targets = [2, 0];
        let (_, d) = cross_entropy(&logits, &targets);
        for i in 0..logits.data.len() {
            let mut a = logits.clone();
            let mut b = logits.clone();
            a.data[i] += 1e-6;
            b.data[i] -= 1e-6;
            let num = (cross_entropy(&a, &targets).0 - cross_entropy(&b, &targets).0) / 2e-6;
            assert!((num - d.data[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn head_gradient_matches_finite_differences_without_dropout() {
        let mut head = MlpHead::new(3, &[5, 4], 3, 0.0, 1);
        let x = Mat::from_vec(
            4,
            3,
            vec![
                0.1, 0.5, -0.2, 1.0, -1.0, 0.3, 0.0, 0.2, 0.9, -0.4, 0.4, 0.1,
            ],
        );
        let targets = [0, 2, 1, 2];
        let mut r = rng::seeded(0);
        let loss_at = |h: &MlpHead| {
            let mut h = h.clone();
            let (logits, _) = h.forward_train(&x, &mut rng::seeded(0));
            cross_entropy(&logits, &targets).0
        };
        let mut probe = head.clone();
        let (logits, cache) = probe.forward_train(&x, &mut r);
        let (_, d) = cross_entropy(&logits, &targets);
        let mut g = vec![0.0; head.params.len()];
        probe.backward(&cache, &d, &mut g);
        for i in 0..head.params.len() {
            let orig = head.params.values[i];
            head.params.values[i] = orig + 1e-6;
            let up = loss_at(&head);
            head.params.values[i] = orig - 1e-6;
            let down = loss_at(&head);
            head.params.values[i] = orig;
            let num = (up - down) / 2e-6;
            assert!(
                (num - g[i]).abs() < 1e-6 * (1.0 + num.abs()),
                "param {i}: {num} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn predictions_are_distributions_over_classes() {
        let head = MlpHead::new(4, &[256, 512], 7, 0.5, 3);
        let x = Mat::from_vec(2, 4, vec![0.0, 1.0, 2.0, 3.0, -1.0, 0.5, 0.2, 0.0]);
        let probs = head.predict(&x);
        assert_eq!((probs.rows, probs.cols), (2, 7));
        for r in 0..2 {
            assert!((probs.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.3, 0.7, 0.7]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }
}
