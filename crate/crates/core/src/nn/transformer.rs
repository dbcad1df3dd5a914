use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, Mat};

use super::attention::AttnCache;
use super::{Builder, Init, LayerNorm, LayerNormCache, Linear, MultiHeadAttention, Slot};

/// Sinusoidal position code for row `pos`.
pub fn positional_encoding(pos: usize, dim: usize, out: &mut [f64]) {
    for i in 0..dim {
        let pair = (i / 2) as f64 * 2.0;
        let angle = pos as f64 / libm::pow(10_000.0, pair / dim as f64);
        out[i] = if i % 2 == 0 {
            libm::sin(angle)
        } else {
            libm::cos(angle)
        };
    }
}

fn add_positions(x: &mut Mat) {
    let mut pe = vec![0.0; x.cols];
    for r in 0..x.rows {
        positional_encoding(r, x.cols, &mut pe);
        math::axpy(1.0, &pe, x.row_mut(r));
    }
}

#[derive(Debug, Clone, PartialEq)]
struct FeedForward {
    up: Linear,
    down: Linear,
}

#[derive(Debug, Clone)]
struct FfCache {
    x: Mat,
    pre: Mat,
    act: Mat,
}

impl FeedForward {
    fn new(b: &mut Builder<'_>, dim: usize, ff: usize) -> Self {
        Self {
            up: Linear::new(b, "linear1", dim, ff),
            down: Linear::new(b, "linear2", ff, dim),
        }
    }

    fn forward(&self, p: &[f64], x: &Mat) -> (Mat, FfCache) {
        let pre = self.up.forward_rows(p, x);
        let mut act = pre.clone();
        act.data.iter_mut().for_each(|v| *v = v.max(0.0));
        let y = self.down.forward_rows(p, &act);
        (
            y,
            FfCache {
                x: x.clone(),
                pre,
                act,
            },
        )
    }

    fn forward_row(&self, p: &[f64], x: &[f64], out: &mut [f64]) {
        let mut h = vec![0.0; self.up.output];
        self.up.forward_vec(p, x, &mut h);
        h.iter_mut().for_each(|v| *v = v.max(0.0));
        self.down.forward_vec(p, &h, out);
    }

    fn backward(&self, p: &[f64], c: &FfCache, dy: &Mat, g: &mut [f64]) -> Mat {
        let mut dact = self.down.backward_rows(p, &c.act, dy, g, true).unwrap();
        for (d, pre) in dact.data.iter_mut().zip(&c.pre.data) {
            if *pre <= 0.0 {
                *d = 0.0;
            }
        }
        self.up.backward_rows(p, &c.x, &dact, g, true).unwrap()
    }
}

fn add(a: &Mat, b: &Mat) -> Mat {
    let mut c = a.clone();
    c.add_assign(b);
    c
}

#[derive(Debug, Clone, PartialEq)]
struct EncoderLayer {
    attn: MultiHeadAttention,
    ln1: LayerNorm,
    ff: FeedForward,
    ln2: LayerNorm,
}

#[derive(Debug, Clone)]
struct EncoderLayerCache {
    attn: AttnCache,
    ln1: LayerNormCache,
    ff: FfCache,
    ln2: LayerNormCache,
}

impl EncoderLayer {
    fn forward(&self, p: &[f64], x: &Mat) -> (Mat, EncoderLayerCache) {
        let (a, attn) = self.attn.forward(p, x, x, false);
        let (y1, ln1) = self.ln1.forward(p, &add(x, &a));
        let (f, ff) = self.ff.forward(p, &y1);
        let (y2, ln2) = self.ln2.forward(p, &add(&y1, &f));
        (y2, EncoderLayerCache { attn, ln1, ff, ln2 })
    }

    fn backward(&self, p: &[f64], c: &EncoderLayerCache, dy: &Mat, g: &mut [f64]) -> Mat {
        let dr2 = self.ln2.backward(p, &c.ln2, dy, g);
        let mut dy1 = self.ff.backward(p, &c.ff, &dr2, g);
        dy1.add_assign(&dr2);
        let dr1 = self.ln1.backward(p, &c.ln1, &dy1, g);
        let (dq, dkv) = self.attn.backward(p, &c.attn, &dr1, g);
        let mut dx = dr1;
        dx.add_assign(&dq);
        dx.add_assign(&dkv);
        dx
    }
}

/// Post-norm Transformer encoder with a learned end-of-sequence row
/// appended after the input projection.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerEncoder {
    input: Linear,
    eos: Slot,
    layers: Vec<EncoderLayer>,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    x: Mat,
    layers: Vec<EncoderLayerCache>,
}

impl TransformerEncoder {
    pub fn new(
        b: &mut Builder<'_>,
        name: &str,
        input: usize,
        dim: usize,
        n_layers: usize,
        heads: usize,
        ff: usize,
    ) -> Self {
        let mut s = b.scope(name);
        let inp = Linear::new(&mut s, "input_proj", input, dim);
        let eos = s.add("eos", &[dim], Init::Uniform(1.0 / math::sqrt(dim as f64)));
        let layers = (0..n_layers)
            .map(|l| {
                let mut ls = s.scope(&alloc::format!("layers.{l}"));
                EncoderLayer {
                    attn: MultiHeadAttention::new(&mut ls, "self_attn", dim, heads),
                    ln1: LayerNorm::new(&mut ls, "norm1", dim),
                    ff: FeedForward::new(&mut ls, dim, ff),
                    ln2: LayerNorm::new(&mut ls, "norm2", dim),
                }
            })
            .collect();
        Self {
            input: inp,
            eos,
            layers,
            dim,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Returns the top-layer latents (`(t + 1) × dim`, last row is the
    /// end-of-sequence position) and the end-of-sequence row of every layer
    /// concatenated.
    pub fn forward(&self, p: &[f64], x: &Mat) -> (Mat, Vec<f64>, EncoderCache) {
        let t = x.rows;
        let proj = self.input.forward_rows(p, x);
        let mut h = Mat::zeros(t + 1, self.dim);
        h.data[..t * self.dim].copy_from_slice(&proj.data);
        h.row_mut(t).copy_from_slice(self.eos.of(p));
        add_positions(&mut h);
        let mut eos_rows = Vec::with_capacity(self.layers.len() * self.dim);
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, c) = layer.forward(p, &h);
            eos_rows.extend_from_slice(y.row(t));
            caches.push(c);
            h = y;
        }
        (
            h,
            eos_rows,
            EncoderCache {
                x: x.clone(),
                layers: caches,
            },
        )
    }

    pub fn backward(
        &self,
        p: &[f64],
        cache: &EncoderCache,
        d_latents: Option<&Mat>,
        d_eos_rows: &[f64],
        g: &mut [f64],
    ) -> Mat {
        let t = cache.x.rows;
        let mut d = d_latents
            .cloned()
            .unwrap_or_else(|| Mat::zeros(t + 1, self.dim));
        for (l, layer) in self.layers.iter().enumerate().rev() {
            math::axpy(
                1.0,
                &d_eos_rows[l * self.dim..(l + 1) * self.dim],
                d.row_mut(t),
            );
            d = layer.backward(p, &cache.layers[l], &d, g);
        }
        math::axpy(1.0, d.row(t), self.eos.of_mut(g));
        let d_proj = Mat::from_vec(t, self.dim, d.data[..t * self.dim].to_vec());
        self.input
            .backward_rows(p, &cache.x, &d_proj, g, true)
            .unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DecoderLayer {
    self_attn: MultiHeadAttention,
    ln1: LayerNorm,
    cross_attn: MultiHeadAttention,
    ln2: LayerNorm,
    ff: FeedForward,
    ln3: LayerNorm,
}

#[derive(Debug, Clone)]
struct DecoderLayerCache {
    self_attn: AttnCache,
    ln1: LayerNormCache,
    cross_attn: AttnCache,
    ln2: LayerNormCache,
    ff: FfCache,
    ln3: LayerNormCache,
}

impl DecoderLayer {
    fn forward(&self, p: &[f64], y: &Mat, memory: &Mat) -> (Mat, DecoderLayerCache) {
        let (s, self_attn) = self.self_attn.forward(p, y, y, true);
        let (y1, ln1) = self.ln1.forward(p, &add(y, &s));
        let (c, cross_attn) = self.cross_attn.forward(p, &y1, memory, false);
        let (y2, ln2) = self.ln2.forward(p, &add(&y1, &c));
        let (f, ff) = self.ff.forward(p, &y2);
        let (y3, ln3) = self.ln3.forward(p, &add(&y2, &f));
        (
            y3,
            DecoderLayerCache {
                self_attn,
                ln1,
                cross_attn,
                ln2,
                ff,
                ln3,
            },
        )
    }

    fn backward(&self, p: &[f64], c: &DecoderLayerCache, dy: &Mat, g: &mut [f64]) -> (Mat, Mat) {
        let dr3 = self.ln3.backward(p, &c.ln3, dy, g);
        let mut dy2 = self.ff.backward(p, &c.ff, &dr3, g);
        dy2.add_assign(&dr3);
        let dr2 = self.ln2.backward(p, &c.ln2, &dy2, g);
        let (dq, dmem) = self.cross_attn.backward(p, &c.cross_attn, &dr2, g);
        let mut dy1 = dr2;
        dy1.add_assign(&dq);
        let dr1 = self.ln1.backward(p, &c.ln1, &dy1, g);
        let (dq, dkv) = self.self_attn.backward(p, &c.self_attn, &dr1, g);
        let mut dx = dr1;
        dx.add_assign(&dq);
        dx.add_assign(&dkv);
        (dx, dmem)
    }
}

/// Post-norm Transformer decoder: causal self-attention, cross-attention
/// to the encoder latents, feed-forward.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerDecoder {
    input: Linear,
    layers: Vec<DecoderLayer>,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct DecoderCache {
    x: Mat,
    layers: Vec<DecoderLayerCache>,
}

impl TransformerDecoder {
    pub fn new(
        b: &mut Builder<'_>,
        name: &str,
        input: usize,
        dim: usize,
        n_layers: usize,
        heads: usize,
        ff: usize,
    ) -> Self {
        let mut s = b.scope(name);
        let inp = Linear::new(&mut s, "input_proj", input, dim);
        let layers = (0..n_layers)
            .map(|l| {
                let mut ls = s.scope(&alloc::format!("layers.{l}"));
                DecoderLayer {
                    self_attn: MultiHeadAttention::new(&mut ls, "self_attn", dim, heads),
                    ln1: LayerNorm::new(&mut ls, "norm1", dim),
                    cross_attn: MultiHeadAttention::new(&mut ls, "multihead_attn", dim, heads),
                    ln2: LayerNorm::new(&mut ls, "norm2", dim),
                    ff: FeedForward::new(&mut ls, dim, ff),
                    ln3: LayerNorm::new(&mut ls, "norm3", dim),
                }
            })
            .collect();
        Self {
            input: inp,
            layers,
            dim,
        }
    }

    pub fn forward(&self, p: &[f64], x: &Mat, memory: &Mat) -> (Mat, DecoderCache) {
        let mut h = self.input.forward_rows(p, x);
        add_positions(&mut h);
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, c) = layer.forward(p, &h, memory);
            caches.push(c);
            h = y;
        }
        (
            h,
            DecoderCache {
                x: x.clone(),
                layers: caches,
            },
        )
    }

    /// Returns `(d x, d memory)`.
    pub fn backward(
        &self,
        p: &[f64],
        cache: &DecoderCache,
        dy: &Mat,
        mem_rows: usize,
        g: &mut [f64],
    ) -> (Mat, Mat) {
        let mut d = dy.clone();
        let mut dmem = Mat::zeros(mem_rows, self.dim);
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (dx, dm) = layer.backward(p, &cache.layers[l], &d, g);
            dmem.add_assign(&dm);
            d = dx;
        }
        let dx = self.input.backward_rows(p, &cache.x, &d, g, true).unwrap();
        (dx, dmem)
    }

    pub fn incremental<'a>(&'a self, p: &[f64], memory: &Mat) -> IncrementalDecoder<'a> {
        let cross = self
            .layers
            .iter()
            .map(|l| {
                (
                    l.cross_attn.k.forward_rows(p, memory),
                    l.cross_attn.v.forward_rows(p, memory),
                )
            })
            .collect();
        IncrementalDecoder {
            dec: self,
            cross,
            self_kv: vec![(Mat::zeros(0, self.dim), Mat::zeros(0, self.dim)); self.layers.len()],
            pos: 0,
        }
    }
}

/// Step-by-step decoding with cached keys and values; produces the same
/// rows as [`TransformerDecoder::forward`] under the causal mask.
pub struct IncrementalDecoder<'a> {
    dec: &'a TransformerDecoder,
    cross: Vec<(Mat, Mat)>,
    self_kv: Vec<(Mat, Mat)>,
    pos: usize,
}

impl IncrementalDecoder<'_> {
    pub fn step(&mut self, p: &[f64], x: &[f64], out: &mut [f64]) {
        let d = self.dec.dim;
        let mut h = vec![0.0; d];
        self.dec.input.forward_vec(p, x, &mut h);
        let mut pe = vec![0.0; d];
        positional_encoding(self.pos, d, &mut pe);
        math::axpy(1.0, &pe, &mut h);
        let mut q = vec![0.0; d];
        let mut kv = vec![0.0; d];
        let mut a = vec![0.0; d];
        let mut o = vec![0.0; d];
        let mut r = vec![0.0; d];
        for (l, layer) in self.dec.layers.iter().enumerate() {
            let (ks, vs) = &mut self.self_kv[l];
            layer.self_attn.k.forward_vec(p, &h, &mut kv);
            ks.data.extend_from_slice(&kv);
            ks.rows += 1;
            layer.self_attn.v.forward_vec(p, &h, &mut kv);
            vs.data.extend_from_slice(&kv);
            vs.rows += 1;
            layer.self_attn.q.forward_vec(p, &h, &mut q);
            layer.self_attn.attend(&q, ks, vs, &mut a);
            layer.self_attn.o.forward_vec(p, &a, &mut o);
            for j in 0..d {
                r[j] = h[j] + o[j];
            }
            layer.ln1.forward_row(p, &r, &mut h);
            let (ck, cv) = &self.cross[l];
            layer.cross_attn.q.forward_vec(p, &h, &mut q);
            layer.cross_attn.attend(&q, ck, cv, &mut a);
            layer.cross_attn.o.forward_vec(p, &a, &mut o);
            for j in 0..d {
                r[j] = h[j] + o[j];
            }
            layer.ln2.forward_row(p, &r, &mut h);
            layer.ff.forward_row(p, &h, &mut o);
            for j in 0..d {
                r[j] = h[j] + o[j];
            }
            layer.ln3.forward_row(p, &r, &mut h);
        }
        self.pos += 1;
        out.copy_from_slice(&h);
    }
}
