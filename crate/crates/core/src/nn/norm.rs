use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, Mat};

use super::{Builder, Init, Slot};

pub const NORM_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-row layer normalization with a learned affine.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Slot,
    pub beta: Slot,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(b: &mut Builder<'_>, name: &str, dim: usize) -> Self {
        let mut s = b.scope(name);
        Self {
            gamma: s.add("weight", &[dim], Init::Const(1.0)),
            beta: s.add("bias", &[dim], Init::Const(0.0)),
            dim,
        }
    }

    pub fn forward_row(&self, p: &[f64], x: &[f64], y: &mut [f64]) -> f64 {
        let n = self.dim as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / math::sqrt(var + NORM_EPS);
        let (g, b) = (self.gamma.of(p), self.beta.of(p));
        for j in 0..self.dim {
            y[j] = g[j] * (x[j] - mean) * inv + b[j];
        }
        inv
    }

    pub fn forward(&self, p: &[f64], x: &Mat) -> (Mat, LayerNormCache) {
        let n = self.dim as f64;
        let (g, b) = (self.gamma.of(p), self.beta.of(p));
        let mut y = Mat::zeros(x.rows, x.cols);
        let mut xhat = Mat::zeros(x.rows, x.cols);
        let mut inv_std = Vec::with_capacity(x.rows);
        for r in 0..x.rows {
            let xr = x.row(r);
            let mean = xr.iter().sum::<f64>() / n;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / math::sqrt(var + NORM_EPS);
            for (o, v) in xhat.row_mut(r).iter_mut().zip(xr) {
                *o = (v - mean) * inv;
            }
            let xh = xhat.row(r);
            for (j, o) in y.row_mut(r).iter_mut().enumerate() {
                *o = g[j] * xh[j] + b[j];
            }
            inv_std.push(inv);
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, p: &[f64], cache: &LayerNormCache, dy: &Mat, g: &mut [f64]) -> Mat {
        let n = self.dim as f64;
        let gamma = self.gamma.of(p);
        let mut dx = Mat::zeros(dy.rows, dy.cols);
        let mut dgamma = vec![0.0; self.dim];
        let mut dbeta = vec![0.0; self.dim];
        let mut dxhat = vec![0.0; self.dim];
        for r in 0..dy.rows {
            let (d, xh) = (dy.row(r), cache.xhat.row(r));
            for j in 0..self.dim {
                dgamma[j] += d[j] * xh[j];
                dbeta[j] += d[j];
                dxhat[j] = d[j] * gamma[j];
            }
            let sum = dxhat.iter().sum::<f64>();
            let sum_x = math::dot(&dxhat, xh);
            let inv = cache.inv_std[r];
            for (j, o) in dx.row_mut(r).iter_mut().enumerate() {
                *o = inv / n * (n * dxhat[j] - sum - xh[j] * sum_x);
            }
        }
        math::axpy(1.0, &dgamma, self.gamma.of_mut(g));
        math::axpy(1.0, &dbeta, self.beta.of_mut(g));
        dx
    }
}

/// Batch normalization over the rows of a `(batch, features)` matrix.
/// Running statistics live in a separate, untrained buffer store.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Slot,
    pub beta: Slot,
    pub running_mean: Slot,
    pub running_var: Slot,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(
        params: &mut Builder<'_>,
        buffers: &mut Builder<'_>,
        name: &str,
        dim: usize,
    ) -> Self {
        let mut s = params.scope(name);
        let gamma = s.add("weight", &[dim], Init::Const(1.0));
        let beta = s.add("bias", &[dim], Init::Const(0.0));
        let mut bs = buffers.scope(name);
        Self {
            gamma,
            beta,
            running_mean: bs.add("running_mean", &[dim], Init::Const(0.0)),
            running_var: bs.add("running_var", &[dim], Init::Const(1.0)),
            dim,
        }
    }

    /// Batch statistics; updates the running averages when `buffers` is given.
    pub fn forward_train(
        &self,
        p: &[f64],
        buffers: Option<&mut [f64]>,
        x: &Mat,
    ) -> (Mat, BatchNormCache) {
        let b = x.rows as f64;
        let mut mean = vec![0.0; self.dim];
        for r in 0..x.rows {
            math::axpy(1.0 / b, x.row(r), &mut mean);
        }
        let mut var = vec![0.0; self.dim];
        for r in 0..x.rows {
            for (j, v) in x.row(r).iter().enumerate() {
                var[j] += (v - mean[j]) * (v - mean[j]) / b;
            }
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / math::sqrt(v + NORM_EPS)).collect();
        let (gamma, beta) = (self.gamma.of(p), self.beta.of(p));
        let mut xhat = Mat::zeros(x.rows, self.dim);
        let mut y = Mat::zeros(x.rows, self.dim);
        for r in 0..x.rows {
            let (xr, xh) = (x.row(r), xhat.row_mut(r));
            for j in 0..self.dim {
                xh[j] = (xr[j] - mean[j]) * inv_std[j];
            }
            let xh = xhat.row(r);
            for (j, o) in y.row_mut(r).iter_mut().enumerate() {
                *o = gamma[j] * xh[j] + beta[j];
            }
        }
        if let Some(buf) = buffers {
            let unbiased = if x.rows > 1 { b / (b - 1.0) } else { 1.0 };
            for j in 0..self.dim {
                let rm = &mut buf[self.running_mean.offset + j];
                *rm = (1.0 - BN_MOMENTUM) * *rm + BN_MOMENTUM * mean[j];
                let rv = &mut buf[self.running_var.offset + j];
                *rv = (1.0 - BN_MOMENTUM) * *rv + BN_MOMENTUM * var[j] * unbiased;
            }
        }
        (y, BatchNormCache { xhat, inv_std })
    }

    pub fn forward_eval_row(&self, p: &[f64], buffers: &[f64], x: &[f64], y: &mut [f64]) {
        let (gamma, beta) = (self.gamma.of(p), self.beta.of(p));
        let (rm, rv) = (self.running_mean.of(buffers), self.running_var.of(buffers));
        for j in 0..self.dim {
            y[j] = gamma[j] * (x[j] - rm[j]) / math::sqrt(rv[j] + NORM_EPS) + beta[j];
        }
    }

    pub fn forward_eval(&self, p: &[f64], buffers: &[f64], x: &Mat) -> Mat {
        let mut y = Mat::zeros(x.rows, self.dim);
        for r in 0..x.rows {
            let (xr, yr) = (x.row(r), &mut y.data[r * self.dim..(r + 1) * self.dim]);
            self.forward_eval_row(p, buffers, xr, yr);
        }
        y
    }

    pub fn backward(&self, p: &[f64], cache: &BatchNormCache, dy: &Mat, g: &mut [f64]) -> Mat {
        let b = dy.rows as f64;
        let gamma = self.gamma.of(p);
        let mut dgamma = vec![0.0; self.dim];
        let mut dbeta = vec![0.0; self.dim];
        for r in 0..dy.rows {
            let (d, xh) = (dy.row(r), cache.xhat.row(r));
            for j in 0..self.dim {
                dgamma[j] += d[j] * xh[j];
                dbeta[j] += d[j];
            }
        }
        let mut dx = Mat::zeros(dy.rows, self.dim);
        for r in 0..dy.rows {
            let (d, xh) = (dy.row(r), cache.xhat.row(r));
            for (j, o) in dx.row_mut(r).iter_mut().enumerate() {
                // dxhat sums over the batch are gamma * dbeta and gamma * dgamma
                *o = gamma[j] * cache.inv_std[j] / b * (b * d[j] - dbeta[j] - xh[j] * dgamma[j]);
            }
        }
        math::axpy(1.0, &dgamma, self.gamma.of_mut(g));
        math::axpy(1.0, &dbeta, self.beta.of_mut(g));
        dx
    }
}
