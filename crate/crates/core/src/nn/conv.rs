use crate::error::{Error, Result};
use crate::math::{self, Mat};

use super::{leaky_relu, Builder, Init, Slot, LEAKY_SLOPE};

/// Same-padded 1-D convolution over time, leaky ReLU, a residual connection
/// to the (zero-padded) input, then average pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub w: Slot,
    pub b: Slot,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub pool: usize,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    x: Mat,
    pre: Mat,
}

impl ConvBlock {
    pub fn new(
        b: &mut Builder<'_>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        pool: usize,
    ) -> Self {
        let bound = 1.0 / math::sqrt((in_ch * kernel) as f64);
        let mut s = b.scope(name);
        Self {
            w: s.add("weight", &[out_ch, in_ch, kernel], Init::Uniform(bound)),
            b: s.add("bias", &[out_ch], Init::Uniform(bound)),
            in_ch,
            out_ch,
            kernel,
            pool,
        }
    }

    pub fn output_len(&self, t: usize) -> usize {
        t / self.pool
    }

    pub fn forward(&self, p: &[f64], x: &Mat) -> Result<(Mat, ConvCache)> {
        if x.rows < self.kernel {
            return Err(Error::TooShort {
                needed: self.kernel,
                got: x.rows,
            });
        }
        if x.cols != self.in_ch {
            return Err(Error::Shape(alloc::format!(
                "conv expects {} channels, got {}",
                self.in_ch,
                x.cols
            )));
        }
        let (t, k, half) = (x.rows, self.kernel, self.kernel / 2);
        let (w, bias) = (self.w.of(p), self.b.of(p));
        let mut pre = Mat::zeros(t, self.out_ch);
        for ti in 0..t {
            let row = pre.row_mut(ti);
            row.copy_from_slice(bias);
            for kk in 0..k {
                let src = ti as isize + kk as isize - half as isize;
                if src < 0 || src >= t as isize {
                    continue;
                }
                let xr = x.row(src as usize);
                for (o, out) in row.iter_mut().enumerate() {
                    let wo = &w[o * self.in_ch * k..(o + 1) * self.in_ch * k];
                    let mut acc = 0.0;
                    for (i, xv) in xr.iter().enumerate() {
                        acc += wo[i * k + kk] * xv;
                    }
                    *out += acc;
                }
            }
        }
        let tp = self.output_len(t);
        let mut y = Mat::zeros(tp, self.out_ch);
        let inv = 1.0 / self.pool as f64;
        for tau in 0..tp {
            let yr = &mut y.data[tau * self.out_ch..(tau + 1) * self.out_ch];
            for ti in tau * self.pool..(tau + 1) * self.pool {
                let pr = pre.row(ti);
                let xr = x.row(ti);
                for o in 0..self.out_ch {
                    let residual = if o < self.in_ch { xr[o] } else { 0.0 };
                    yr[o] += inv * (leaky_relu(pr[o]) + residual);
                }
            }
        }
        Ok((y, ConvCache { x: x.clone(), pre }))
    }

    pub fn backward(&self, p: &[f64], cache: &ConvCache, dy: &Mat, g: &mut [f64]) -> Mat {
        let (x, pre) = (&cache.x, &cache.pre);
        let (t, k, half) = (x.rows, self.kernel, self.kernel / 2);
        let inv = 1.0 / self.pool as f64;
        let mut dx = Mat::zeros(t, self.in_ch);
        let mut dpre = Mat::zeros(t, self.out_ch);
        for tau in 0..dy.rows {
            let d = dy.row(tau);
            for ti in tau * self.pool..(tau + 1) * self.pool {
                let pr = pre.row(ti);
                let dp = dpre.row_mut(ti);
                for o in 0..self.out_ch {
                    let slope = if pr[o] > 0.0 { 1.0 } else { LEAKY_SLOPE };
                    dp[o] = inv * d[o] * slope;
                }
                let dxr = dx.row_mut(ti);
                for i in 0..self.in_ch.min(self.out_ch) {
                    dxr[i] += inv * d[i];
                }
            }
        }
        let w = self.w.of(p);
        let mut gw = alloc::vec![0.0; self.w.len];
        let mut gb = alloc::vec![0.0; self.out_ch];
        for ti in 0..t {
            let dp = dpre.row(ti);
            math::axpy(1.0, dp, &mut gb);
            for kk in 0..k {
                let src = ti as isize + kk as isize - half as isize;
                if src < 0 || src >= t as isize {
                    continue;
                }
                let src = src as usize;
                for (o, &d) in dp.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let base = o * self.in_ch * k;
                    for i in 0..self.in_ch {
                        gw[base + i * k + kk] += d * x.data[src * self.in_ch + i];
                        dx.data[src * self.in_ch + i] += d * w[base + i * k + kk];
                    }
                }
            }
        }
        math::axpy(1.0, &gw, self.w.of_mut(g));
        math::axpy(1.0, &gb, self.b.of_mut(g));
        dx
    }
}
