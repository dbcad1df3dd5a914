use crate::math::{self, Mat};

use super::{Builder, Init, Slot};

/// Affine map `y = W x + b`, `W` stored `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Slot,
    pub b: Slot,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(b: &mut Builder<'_>, name: &str, input: usize, output: usize) -> Self {
        let bound = 1.0 / math::sqrt(input as f64);
        let mut s = b.scope(name);
        Self {
            w: s.add("weight", &[output, input], Init::Uniform(bound)),
            b: s.add("bias", &[output], Init::Uniform(bound)),
            input,
            output,
        }
    }

    pub fn forward_vec(&self, p: &[f64], x: &[f64], y: &mut [f64]) {
        math::matvec_bias(self.w.of(p), self.b.of(p), x, y);
    }

    pub fn forward_rows(&self, p: &[f64], x: &Mat) -> Mat {
        math::linear_rows(self.w.of(p), self.b.of(p), x, self.output)
    }

    /// Accumulates parameter gradients into `g`; returns `dX` if asked.
    pub fn backward_rows(
        &self,
        p: &[f64],
        x: &Mat,
        dy: &Mat,
        g: &mut [f64],
        want_dx: bool,
    ) -> Option<Mat> {
        let (w_off, b_off) = (self.w.offset, self.b.offset);
        debug_assert!(w_off + self.w.len == b_off, "weight and bias are adjacent");
        let (gw, gb) = g[w_off..b_off + self.b.len].split_at_mut(self.w.len);
        math::linear_rows_backward(self.w.of(p), x, dy, gw, gb, want_dx)
    }

    pub fn backward_vec(
        &self,
        p: &[f64],
        x: &[f64],
        dy: &[f64],
        g: &mut [f64],
        dx: Option<&mut [f64]>,
    ) {
        math::outer_acc(dy, x, self.w.of_mut(g));
        math::axpy(1.0, dy, self.b.of_mut(g));
        if let Some(dx) = dx {
            math::matvec_t_acc(self.w.of(p), dy, dx);
        }
    }
}
