//! Dense row-major matrices and the handful of scalar kernels the network
//! layers are built on.

use alloc::vec;
use alloc::vec::Vec;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `y = W x + b` for a row-major `W` of shape `(y.len(), x.len())`.
#[inline]
pub fn matvec_bias(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let n = x.len();
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = b[i] + dot(&w[i * n..(i + 1) * n], x);
    }
}

/// `dx += Wᵀ dy`
#[inline]
pub fn matvec_t_acc(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let n = dx.len();
    for (i, &d) in dy.iter().enumerate() {
        if d != 0.0 {
            axpy(d, &w[i * n..(i + 1) * n], dx);
        }
    }
}

/// `dW += dy xᵀ`
#[inline]
pub fn outer_acc(dy: &[f64], x: &[f64], dw: &mut [f64]) {
    let n = x.len();
    for (i, &d) in dy.iter().enumerate() {
        if d != 0.0 {
            axpy(d, x, &mut dw[i * n..(i + 1) * n]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_points(points: &[[f64; 2]]) -> Self {
        let mut data = Vec::with_capacity(points.len() * 2);
        for p in points {
            data.extend_from_slice(p);
        }
        Self {
            rows: points.len(),
            cols: 2,
            data,
        }
    }

    pub fn to_points(&self) -> Vec<[f64; 2]> {
        assert_eq!(self.cols, 2);
        self.data.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `Y = X Wᵀ + b` row by row; `W` is `(out, in)`.
pub fn linear_rows(w: &[f64], b: &[f64], x: &Mat, out: usize) -> Mat {
    let mut y = Mat::zeros(x.rows, out);
    for r in 0..x.rows {
        let (xs, ys) = (x.row(r), &mut y.data[r * out..(r + 1) * out]);
        matvec_bias(w, b, xs, ys);
    }
    y
}

/// Backward of [`linear_rows`]: accumulates `dW`, `db` and returns `dX`
/// when requested.
pub fn linear_rows_backward(
    w: &[f64],
    x: &Mat,
    dy: &Mat,
    dw: &mut [f64],
    db: &mut [f64],
    want_dx: bool,
) -> Option<Mat> {
    let mut dx = want_dx.then(|| Mat::zeros(x.rows, x.cols));
    for r in 0..x.rows {
        let d = dy.row(r);
        outer_acc(d, x.row(r), dw);
        axpy(1.0, d, db);
        if let Some(dx) = dx.as_mut() {
            matvec_t_acc(w, d, dx.row_mut(r));
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_on_odd_lengths() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_rows_shapes() {
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [0.5, -0.5, 0.0];
        let x = Mat::from_vec(1, 2, alloc::vec![1.0, 1.0]);
        let y = linear_rows(&w, &b, &x, 3);
        assert_eq!(y.data, alloc::vec![3.5, 6.5, 11.0]);
    }
}
