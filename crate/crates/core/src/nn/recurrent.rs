use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, sigmoid, tanh, Mat};

use super::{Builder, Init, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Rnn,
    Gru,
    Lstm,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Rnn => 1,
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }

    /// Vectors of size `hidden` carried between steps per layer.
    pub fn state_parts(self) -> usize {
        if self == CellKind::Lstm {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    w_ih: Slot,
    w_hh: Slot,
    b_ih: Slot,
    b_hh: Slot,
    input: usize,
}

/// Stacked recurrent cells with PyTorch gate conventions.
///
/// A state vector is laid out as `[h_0, .., h_{L-1}]` followed, for LSTM,
/// by `[c_0, .., c_{L-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentStack {
    pub kind: CellKind,
    pub hidden: usize,
    layers: Vec<Layer>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Mat,
    gh: Mat,
    acts: Mat,
    h: Mat,
    c: Mat,
}

#[derive(Debug, Clone)]
pub struct SeqCache {
    layers: Vec<LayerCache>,
    /// Top-layer hidden state at every step.
    pub outputs: Mat,
    pub final_state: Vec<f64>,
}

impl RecurrentStack {
    pub fn new(
        b: &mut Builder<'_>,
        name: &str,
        kind: CellKind,
        input: usize,
        hidden: usize,
        n_layers: usize,
    ) -> Self {
        let g = kind.gates() * hidden;
        let bound = 1.0 / math::sqrt(hidden as f64);
        let mut s = b.scope(name);
        let layers = (0..n_layers)
            .map(|l| {
                let inp = if l == 0 { input } else { hidden };
                let w_ih = s.add(
                    &alloc::format!("weight_ih_l{l}"),
                    &[g, inp],
                    Init::Uniform(bound),
                );
                let w_hh = s.add(
                    &alloc::format!("weight_hh_l{l}"),
                    &[g, hidden],
                    Init::Uniform(bound),
                );
                let b_ih = s.add(&alloc::format!("bias_ih_l{l}"), &[g], Init::Uniform(bound));
                let b_hh = s.add(&alloc::format!("bias_hh_l{l}"), &[g], Init::Uniform(bound));
                Layer {
                    w_ih,
                    w_hh,
                    b_ih,
                    b_hh,
                    input: inp,
                }
            })
            .collect();
        Self {
            kind,
            hidden,
            layers,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn state_len(&self) -> usize {
        self.kind.state_parts() * self.layers.len() * self.hidden
    }

    fn h_range(&self, l: usize) -> core::ops::Range<usize> {
        l * self.hidden..(l + 1) * self.hidden
    }

    fn c_range(&self, l: usize) -> core::ops::Range<usize> {
        let base = self.layers.len() * self.hidden;
        base + l * self.hidden..base + (l + 1) * self.hidden
    }

    /// One step of one layer. `gi` already holds `W_ih x + b_ih`.
    /// Writes the new `h` (and `c`) and stores `gh` / activations.
    #[allow(clippy::too_many_arguments)]
    fn cell(
        &self,
        p: &[f64],
        layer: &Layer,
        gi: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        gh: &mut [f64],
        acts: &mut [f64],
        h: &mut [f64],
        c: &mut [f64],
    ) {
        let n = self.hidden;
        math::matvec_bias(layer.w_hh.of(p), layer.b_hh.of(p), h_prev, gh);
        match self.kind {
            CellKind::Rnn => {
                for j in 0..n {
                    let v = tanh(gi[j] + gh[j]);
                    acts[j] = v;
                    h[j] = v;
                }
            }
            CellKind::Gru => {
                for j in 0..n {
                    let r = sigmoid(gi[j] + gh[j]);
                    let z = sigmoid(gi[n + j] + gh[n + j]);
                    let nn = tanh(gi[2 * n + j] + r * gh[2 * n + j]);
                    acts[j] = r;
                    acts[n + j] = z;
                    acts[2 * n + j] = nn;
                    h[j] = (1.0 - z) * nn + z * h_prev[j];
                }
            }
            CellKind::Lstm => {
                for j in 0..n {
                    let i = sigmoid(gi[j] + gh[j]);
                    let f = sigmoid(gi[n + j] + gh[n + j]);
                    let g = tanh(gi[2 * n + j] + gh[2 * n + j]);
                    let o = sigmoid(gi[3 * n + j] + gh[3 * n + j]);
                    acts[j] = i;
                    acts[n + j] = f;
                    acts[2 * n + j] = g;
                    acts[3 * n + j] = o;
                    c[j] = f * c_prev[j] + i * g;
                    h[j] = o * tanh(c[j]);
                }
            }
        }
    }

    /// Runs the stack over `inputs` (`t × input`) from `init` (zeros when
    /// `None`), keeping what the backward pass needs.
    pub fn forward_seq(&self, p: &[f64], inputs: &Mat, init: Option<&[f64]>) -> SeqCache {
        let t = inputs.rows;
        let n = self.hidden;
        let g = self.kind.gates() * n;
        let lstm = self.kind == CellKind::Lstm;
        let zero_state = vec![0.0; self.state_len()];
        let init = init.unwrap_or(&zero_state);
        let mut final_state = vec![0.0; self.state_len()];
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = inputs.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let gi = math::linear_rows(layer.w_ih.of(p), layer.b_ih.of(p), &x, g);
            let mut gh = Mat::zeros(t, g);
            let mut acts = Mat::zeros(t, g);
            let mut h = Mat::zeros(t + 1, n);
            let mut c = Mat::zeros(if lstm { t + 1 } else { 0 }, n);
            h.row_mut(0).copy_from_slice(&init[self.h_range(l)]);
            if lstm {
                c.row_mut(0).copy_from_slice(&init[self.c_range(l)]);
            }
            let mut dummy = [0.0; 0];
            for s in 0..t {
                let (h_prev, h_next) = h.data[s * n..(s + 2) * n].split_at_mut(n);
                let (c_prev, c_next): (&[f64], &mut [f64]) = if lstm {
                    let (a, b) = c.data[s * n..(s + 2) * n].split_at_mut(n);
                    (a, b)
                } else {
                    (&[], &mut dummy)
                };
                self.cell(
                    p,
                    layer,
                    gi.row(s),
                    h_prev,
                    c_prev,
                    &mut gh.data[s * g..(s + 1) * g],
                    &mut acts.data[s * g..(s + 1) * g],
                    h_next,
                    c_next,
                );
            }
            final_state[self.h_range(l)].copy_from_slice(h.row(t));
            if lstm {
                final_state[self.c_range(l)].copy_from_slice(c.row(t));
            }
            let out = Mat::from_vec(t, n, h.data[n..].to_vec());
            caches.push(LayerCache {
                input: core::mem::replace(&mut x, out),
                gh,
                acts,
                h,
                c,
            });
        }
        SeqCache {
            layers: caches,
            outputs: x,
            final_state,
        }
    }

    /// Backpropagation through time. `d_outputs` is the gradient w.r.t. the
    /// top-layer output at each step, `d_final` w.r.t. the final state.
    /// Returns gradients w.r.t. the inputs and the initial state.
    pub fn backward_seq(
        &self,
        p: &[f64],
        cache: &SeqCache,
        d_outputs: Option<&Mat>,
        d_final: Option<&[f64]>,
        grads: &mut [f64],
    ) -> (Mat, Vec<f64>) {
        let n = self.hidden;
        let g = self.kind.gates() * n;
        let lstm = self.kind == CellKind::Lstm;
        let mut d_init = vec![0.0; self.state_len()];
        let mut d_above: Option<Mat> = d_outputs.cloned();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let lc = &cache.layers[l];
            let t = lc.input.rows;
            let mut dgi = Mat::zeros(t, g);
            let mut dh = vec![0.0; n];
            let mut dc = vec![0.0; n];
            if let Some(df) = d_final {
                dh.copy_from_slice(&df[self.h_range(l)]);
                if lstm {
                    dc.copy_from_slice(&df[self.c_range(l)]);
                }
            }
            let w_hh = layer.w_hh.of(p);
            let mut dgh = vec![0.0; g];
            let mut dh_prev = vec![0.0; n];
            let mut gw_hh = vec![0.0; layer.w_hh.len];
            let mut gb_hh = vec![0.0; g];
            for s in (0..t).rev() {
                if let Some(da) = d_above.as_ref() {
                    math::axpy(1.0, da.row(s), &mut dh);
                }
                let acts = lc.acts.row(s);
                let h_prev = lc.h.row(s);
                let h_cur = lc.h.row(s + 1);
                dh_prev.iter_mut().for_each(|v| *v = 0.0);
                match self.kind {
                    CellKind::Rnn => {
                        for j in 0..n {
                            dgh[j] = dh[j] * (1.0 - h_cur[j] * h_cur[j]);
                        }
                    }
                    CellKind::Gru => {
                        let gh = lc.gh.row(s);
                        for j in 0..n {
                            let (r, z, nn) = (acts[j], acts[n + j], acts[2 * n + j]);
                            let dz = dh[j] * (h_prev[j] - nn);
                            let dn = dh[j] * (1.0 - z);
                            let dan = dn * (1.0 - nn * nn);
                            let dr = dan * gh[2 * n + j];
                            let dar = dr * r * (1.0 - r);
                            let daz = dz * z * (1.0 - z);
                            dgh[j] = dar;
                            dgh[n + j] = daz;
                            dgh[2 * n + j] = dan * r;
                            let row = dgi.row_mut(s);
                            row[j] = dar;
                            row[n + j] = daz;
                            row[2 * n + j] = dan;
                            dh_prev[j] = dh[j] * z;
                        }
                    }
                    CellKind::Lstm => {
                        let c_prev = lc.c.row(s);
                        let c_cur = lc.c.row(s + 1);
                        for j in 0..n {
                            let (i, f, gg, o) =
                                (acts[j], acts[n + j], acts[2 * n + j], acts[3 * n + j]);
                            let tc = tanh(c_cur[j]);
                            let d_o = dh[j] * tc;
                            let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
                            dgh[j] = dct * gg * i * (1.0 - i);
                            dgh[n + j] = dct * c_prev[j] * f * (1.0 - f);
                            dgh[2 * n + j] = dct * i * (1.0 - gg * gg);
                            dgh[3 * n + j] = d_o * o * (1.0 - o);
                            dc[j] = dct * f;
                        }
                    }
                }
                if self.kind != CellKind::Gru {
                    dgi.row_mut(s).copy_from_slice(&dgh);
                }
                math::matvec_t_acc(w_hh, &dgh, &mut dh_prev);
                math::outer_acc(&dgh, h_prev, &mut gw_hh);
                math::axpy(1.0, &dgh, &mut gb_hh);
                core::mem::swap(&mut dh, &mut dh_prev);
            }
            d_init[self.h_range(l)].copy_from_slice(&dh);
            if lstm {
                d_init[self.c_range(l)].copy_from_slice(&dc);
            }
            math::axpy(1.0, &gw_hh, layer.w_hh.of_mut(grads));
            math::axpy(1.0, &gb_hh, layer.b_hh.of_mut(grads));
            let (w_off, b_off) = (layer.w_ih.offset, layer.b_ih.offset);
            let mut gw_ih = vec![0.0; layer.w_ih.len];
            let mut gb_ih = vec![0.0; g];
            let dx = math::linear_rows_backward(
                layer.w_ih.of(p),
                &lc.input,
                &dgi,
                &mut gw_ih,
                &mut gb_ih,
                true,
            );
            math::axpy(1.0, &gw_ih, &mut grads[w_off..w_off + layer.w_ih.len]);
            math::axpy(1.0, &gb_ih, &mut grads[b_off..b_off + g]);
            d_above = dx;
        }
        (d_above.unwrap(), d_init)
    }

    /// Single inference step; `state` is updated in place and the top-layer
    /// hidden vector is written to `out`.
    pub fn step(&self, p: &[f64], x: &[f64], state: &mut [f64], out: &mut [f64]) {
        let n = self.hidden;
        let g = self.kind.gates() * n;
        let lstm = self.kind == CellKind::Lstm;
        let mut input: Vec<f64> = x.to_vec();
        let mut gi = vec![0.0; g];
        let mut gh = vec![0.0; g];
        let mut acts = vec![0.0; g];
        let mut h = vec![0.0; n];
        let mut c = vec![0.0; n];
        for (l, layer) in self.layers.iter().enumerate() {
            math::matvec_bias(layer.w_ih.of(p), layer.b_ih.of(p), &input, &mut gi);
            let h_prev = state[self.h_range(l)].to_vec();
            let c_prev = if lstm {
                state[self.c_range(l)].to_vec()
            } else {
                Vec::new()
            };
            self.cell(
                p, layer, &gi, &h_prev, &c_prev, &mut gh, &mut acts, &mut h, &mut c,
            );
            state[self.h_range(l)].copy_from_slice(&h);
            if lstm {
                state[self.c_range(l)].copy_from_slice(&c);
            }
            input.clear();
            input.extend_from_slice(&h);
        }
        out.copy_from_slice(&input);
    }
}
