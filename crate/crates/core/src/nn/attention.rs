use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, Mat};

use super::{Builder, Linear};

/// Scaled dot-product attention with `heads` heads and separate q/k/v/out
/// projections.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub dim: usize,
    pub heads: usize,
}

#[derive(Debug, Clone)]
pub struct AttnCache {
    q_in: Mat,
    kv_in: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    /// Per-head attention weights, `n × m` each.
    attn: Vec<Mat>,
    concat: Mat,
}

impl MultiHeadAttention {
    pub fn new(b: &mut Builder<'_>, name: &str, dim: usize, heads: usize) -> Self {
        assert!(
            heads > 0 && dim % heads == 0,
            "heads must divide the model width"
        );
        let mut s = b.scope(name);
        Self {
            q: Linear::new(&mut s, "q_proj", dim, dim),
            k: Linear::new(&mut s, "k_proj", dim, dim),
            v: Linear::new(&mut s, "v_proj", dim, dim),
            o: Linear::new(&mut s, "out_proj", dim, dim),
            dim,
            heads,
        }
    }

    fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    /// Attention of one projected query row over projected key/value rows.
    pub fn attend(&self, q: &[f64], k: &Mat, v: &Mat, out: &mut [f64]) {
        let dh = self.head_dim();
        let scale = 1.0 / math::sqrt(dh as f64);
        let mut w = vec![0.0; k.rows];
        for h in 0..self.heads {
            let r = h * dh..(h + 1) * dh;
            for j in 0..k.rows {
                w[j] = scale * math::dot(&q[r.clone()], &k.row(j)[r.clone()]);
            }
            softmax_in_place(&mut w);
            let o = &mut out[r.clone()];
            o.iter_mut().for_each(|x| *x = 0.0);
            for j in 0..k.rows {
                math::axpy(w[j], &v.row(j)[r.clone()], o);
            }
        }
    }

    pub fn forward(&self, p: &[f64], q_in: &Mat, kv_in: &Mat, causal: bool) -> (Mat, AttnCache) {
        let (n, m) = (q_in.rows, kv_in.rows);
        let q = self.q.forward_rows(p, q_in);
        let k = self.k.forward_rows(p, kv_in);
        let v = self.v.forward_rows(p, kv_in);
        let dh = self.head_dim();
        let scale = 1.0 / math::sqrt(dh as f64);
        let mut concat = Mat::zeros(n, self.dim);
        let mut attn = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let r = h * dh..(h + 1) * dh;
            let mut a = Mat::zeros(n, m);
            for i in 0..n {
                let limit = if causal { (i + 1).min(m) } else { m };
                let row = a.row_mut(i);
                for j in 0..limit {
                    row[j] = scale * math::dot(&q.row(i)[r.clone()], &k.row(j)[r.clone()]);
                }
                softmax_in_place(&mut row[..limit]);
                let out = &mut concat.row_mut(i)[r.clone()];
                for j in 0..limit {
                    math::axpy(a.data[i * m + j], &v.row(j)[r.clone()], out);
                }
            }
            attn.push(a);
        }
        let y = self.o.forward_rows(p, &concat);
        (
            y,
            AttnCache {
                q_in: q_in.clone(),
                kv_in: kv_in.clone(),
                q,
                k,
                v,
                attn,
                concat,
            },
        )
    }

    /// Returns `(d q_in, d kv_in)`.
    pub fn backward(&self, p: &[f64], c: &AttnCache, dy: &Mat, g: &mut [f64]) -> (Mat, Mat) {
        let (n, m) = (c.q.rows, c.k.rows);
        let dconcat = self.o.backward_rows(p, &c.concat, dy, g, true).unwrap();
        let dh = self.head_dim();
        let scale = 1.0 / math::sqrt(dh as f64);
        let mut dq = Mat::zeros(n, self.dim);
        let mut dk = Mat::zeros(m, self.dim);
        let mut dv = Mat::zeros(m, self.dim);
        let mut da = vec![0.0; m];
        for h in 0..self.heads {
            let r = h * dh..(h + 1) * dh;
            let a = &c.attn[h];
            for i in 0..n {
                let d_out = &dconcat.row(i)[r.clone()];
                let arow = a.row(i);
                for j in 0..m {
                    da[j] = math::dot(d_out, &c.v.row(j)[r.clone()]);
                    if arow[j] != 0.0 {
                        math::axpy(arow[j], d_out, &mut dv.row_mut(j)[r.clone()]);
                    }
                }
                let s = math::dot(&da, arow);
                for j in 0..m {
                    let ds = arow[j] * (da[j] - s) * scale;
                    if ds != 0.0 {
                        math::axpy(ds, &c.k.row(j)[r.clone()], &mut dq.row_mut(i)[r.clone()]);
                        math::axpy(ds, &c.q.row(i)[r.clone()], &mut dk.row_mut(j)[r.clone()]);
                    }
                }
            }
        }
        let dq_in = self.q.backward_rows(p, &c.q_in, &dq, g, true).unwrap();
        let mut dkv_in = self.k.backward_rows(p, &c.kv_in, &dk, g, true).unwrap();
        dkv_in.add_assign(&self.v.backward_rows(p, &c.kv_in, &dv, g, true).unwrap());
        (dq_in, dkv_in)
    }
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = math::exp(*x - max);
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}
