//! L1-regularized logistic regression and the stratified cross-validation
//! protocol used for participant classification.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::{math, metrics, rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    pub folds: usize,
    /// Folds of the regularization search inside each training fold.
    pub inner_folds: usize,
    pub n_lambdas: usize,
    /// Smallest grid value relative to the value that zeroes all weights.
    pub lambda_ratio: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            inner_folds: 3,
            n_lambdas: 10,
            lambda_ratio: 1e-3,
            max_iter: 1000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Logistic model with an L1 penalty on standardized features. Features
/// that are constant on the training rows get weight 0.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Logistic {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

/// Row-major standardized design matrix.
struct Design {
    z: Vec<f64>,
    n: usize,
    d: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Design {
    fn new(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        let mut mean = vec![0.0; d];
        for r in rows {
            math::axpy(1.0 / n as f64, r, &mut mean);
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                var[j] += (r[j] - mean[j]) * (r[j] - mean[j]) / n as f64;
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .map(|&v| if v > 1e-24 { 1.0 / math::sqrt(v) } else { 0.0 })
            .collect();
        let mut z = Vec::with_capacity(n * d);
        for r in rows {
            z.extend((0..d).map(|j| (r[j] - mean[j]) * scale[j]));
        }
        Self {
            z,
            n,
            d,
            mean,
            scale,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.d..(i + 1) * self.d]
    }

    /// Largest eigenvalue of `ZᵀZ / n` by power iteration.
    fn spectral_bound(&self) -> f64 {
        if self.d == 0 {
            return 0.0;
        }
        let mut v = vec![1.0 / math::sqrt(self.d as f64); self.d];
        let mut est = 0.0;
        for _ in 0..50 {
            let mut w = vec![0.0; self.d];
            for i in 0..self.n {
                let r = self.row(i);
                math::axpy(math::dot(r, &v) / self.n as f64, r, &mut w);
            }
            let norm = math::sqrt(math::dot(&w, &w));
            if norm == 0.0 {
                return 0.0;
            }
            est = norm;
            w.iter_mut().for_each(|x| *x /= norm);
            v = w;
        }
        est
    }

    /// `λ` above which every weight is 0.
    fn lambda_max(&self, y: &[f64]) -> f64 {
        let ybar = y.iter().sum::<f64>() / self.n as f64;
        let mut g = vec![0.0; self.d];
        for i in 0..self.n {
            math::axpy((y[i] - ybar) / self.n as f64, self.row(i), &mut g);
        }
        g.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Gradient of the mean log-loss at `(w, b)`.
    fn gradient(&self, y: &[f64], w: &[f64], b: f64, gw: &mut [f64]) -> f64 {
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for i in 0..self.n {
            let r = self.row(i);
            let resid = (math::sigmoid(math::dot(r, w) + b) - y[i]) / self.n as f64;
            math::axpy(resid, r, gw);
            gb += resid;
        }
        gb
    }

    /// Accelerated proximal gradient from a warm start.
    fn solve(
        &self,
        y: &[f64],
        lambda: f64,
        step: f64,
        w: &mut Vec<f64>,
        b: &mut f64,
        cfg: &LassoConfig,
    ) {
        let mut yw = w.clone();
        let mut yb = *b;
        let mut t = 1.0f64;
        let mut gw = vec![0.0; self.d];
        for _ in 0..cfg.max_iter {
            let gb = self.gradient(y, &yw, yb, &mut gw);
            let mut next = vec![0.0; self.d];
            for j in 0..self.d {
                let v = yw[j] - step * gw[j];
                next[j] = v.signum() * (v.abs() - step * lambda).max(0.0);
            }
            let next_b = yb - step * gb;
            let t_next = (1.0 + math::sqrt(1.0 + 4.0 * t * t)) / 2.0;
            let momentum = (t - 1.0) / t_next;
            let mut delta: f64 = (next_b - *b).abs();
            for j in 0..self.d {
                delta = delta.max((next[j] - w[j]).abs());
                yw[j] = next[j] + momentum * (next[j] - w[j]);
            }
            yb = next_b + momentum * (next_b - *b);
            let size = next.iter().fold(next_b.abs(), |m, v| m.max(v.abs()));
            *w = next;
            *b = next_b;
            t = t_next;
            if delta <= cfg.tol * (1.0 + size) {
                break;
            }
        }
    }
}

fn as_targets(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect()
}

fn base_intercept(y: &[f64]) -> f64 {
    let p = (y.iter().sum::<f64>() / y.len() as f64).clamp(1e-6, 1.0 - 1e-6);
    math::ln(p / (1.0 - p))
}

impl L1Logistic {
    /// Fits at each `lambdas` value in the given order with warm starts and
    /// returns one model per value.
    pub fn fit_path(
        rows: &[&[f64]],
        labels: &[bool],
        lambdas: &[f64],
        cfg: &LassoConfig,
    ) -> Vec<Self> {
        let design = Design::new(rows);
        let y = as_targets(labels);
        let mut w = vec![0.0; design.d];
        let mut b = base_intercept(&y);
        // the log-loss gradient is Lipschitz with constant ≤ (‖ZᵀZ/n‖ + 1) / 4
        let step = 1.0 / (0.25 * (design.spectral_bound() + 1.0) * 1.01);
        lambdas
            .iter()
            .map(|&lambda| {
                design.solve(&y, lambda, step, &mut w, &mut b, cfg);
                Self {
                    mean: design.mean.clone(),
                    scale: design.scale.clone(),
                    weights: w.clone(),
                    intercept: b,
                    lambda,
                }
            })
            .collect()
    }

    pub fn fit(rows: &[&[f64]], labels: &[bool], lambda: f64, cfg: &LassoConfig) -> Self {
        Self::fit_path(rows, labels, &[lambda], cfg).remove(0)
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut eta = self.intercept;
        for j in 0..self.weights.len() {
            if self.weights[j] != 0.0 {
                eta += self.weights[j] * (x[j] - self.mean[j]) * self.scale[j];
            }
        }
        math::sigmoid(eta)
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }
}

/// Geometric grid from the all-zero `λ` down by `ratio`, largest first.
fn lambda_grid(rows: &[&[f64]], labels: &[bool], cfg: &LassoConfig) -> Vec<f64> {
    let design = Design::new(rows);
    let top = design.lambda_max(&as_targets(labels)).max(1e-12);
    let n = cfg.n_lambdas.max(1);
    (0..n)
        .map(|i| {
            let frac = if n == 1 {
                0.0
            } else {
                i as f64 / (n - 1) as f64
            };
            top * libm::pow(cfg.lambda_ratio, frac)
        })
        .collect()
}

/// Fold number of each item; each class is dealt round-robin after a
/// seeded shuffle so every fold gets a near-equal share of both classes.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::derived(seed, "folds");
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut r);
        for i in idx {
            assignment[i] = next % k;
            next += 1;
        }
    }
    assignment
}

fn log_loss(p: f64, y: bool) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    -math::ln(if y { p } else { 1.0 - p })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub lambda: f64,
    pub accuracy: f64,
    /// Absent when the test fold holds a single class.
    pub auc: Option<f64>,
    pub f1: f64,
}

/// Pooled out-of-fold metrics; the positive class is `true`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub auc: f64,
    pub f1: f64,
    pub folds: Vec<FoldReport>,
    pub seed: u64,
}

/// Picks `λ` on a training fold by inner stratified cross-validation of the
/// held-out log-loss; ties keep the stronger penalty. With fewer than two
/// minority examples per inner fold the grid's middle value is used.
fn select_lambda(
    rows: &[&[f64]],
    labels: &[bool],
    grid: &[f64],
    cfg: &LassoConfig,
    seed: u64,
) -> f64 {
    let minority = labels
        .iter()
        .filter(|&&l| l)
        .count()
        .min(labels.iter().filter(|&&l| !l).count());
    let k = cfg.inner_folds.min(minority);
    if k < 2 {
        return grid[grid.len() / 2];
    }
    let folds = stratified_folds(labels, k, seed);
    let mut score = vec![0.0; grid.len()];
    for f in 0..k {
        let (tr, va): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| folds[i] != f);
        let tr_rows: Vec<&[f64]> = tr.iter().map(|&i| rows[i]).collect();
        let tr_labels: Vec<bool> = tr.iter().map(|&i| labels[i]).collect();
        for (s, m) in score
            .iter_mut()
            .zip(L1Logistic::fit_path(&tr_rows, &tr_labels, grid, cfg))
        {
            *s += va
                .iter()
                .map(|&i| log_loss(m.predict_proba(rows[i]), labels[i]))
                .sum::<f64>();
        }
    }
    let mut best = 0;
    for (i, &s) in score.iter().enumerate() {
        if s < score[best] {
            best = i;
        }
    }
    grid[best]
}

/// Stratified k-fold evaluation of [`L1Logistic`] with a nested search
/// for the regularization strength.
pub fn lasso_cv(vectors: &[Vec<f64>], labels: &[bool], cfg: &LassoConfig) -> Result<EvalReport> {
    if vectors.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} vectors, {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    let d = vectors.first().map_or(0, |v| v.len());
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::Shape("feature vectors differ in length".into()));
    }
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature vectors"));
    }
    if cfg.folds < 2 {
        return Err(Error::Config("need at least 2 folds".into()));
    }
    let folds = stratified_folds(labels, cfg.folds, cfg.seed);
    let mut pooled = vec![0.0; labels.len()];
    let mut reports = Vec::with_capacity(cfg.folds);
    for f in 0..cfg.folds {
        let (tr, te): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| folds[i] != f);
        let tr_rows: Vec<&[f64]> = tr.iter().map(|&i| vectors[i].as_slice()).collect();
        let tr_labels: Vec<bool> = tr.iter().map(|&i| labels[i]).collect();
        if tr_labels.iter().all(|&l| l) || tr_labels.iter().all(|&l| !l) {
            return Err(Error::SingleClassFold { fold: f });
        }
        let grid = lambda_grid(&tr_rows, &tr_labels, cfg);
        let inner_seed = cfg.seed ^ rng::label_hash(&format!("inner/{f}"));
        let lambda = select_lambda(&tr_rows, &tr_labels, &grid, cfg, inner_seed);
        let upto: Vec<f64> = grid.iter().copied().filter(|&l| l >= lambda).collect();
        let model = L1Logistic::fit_path(&tr_rows, &tr_labels, &upto, cfg)
            .pop()
            .expect("grid is nonempty");
        let probs: Vec<f64> = te
            .iter()
            .map(|&i| model.predict_proba(&vectors[i]))
            .collect();
        let te_labels: Vec<bool> = te.iter().map(|&i| labels[i]).collect();
        let pred: Vec<bool> = probs.iter().map(|&p| p >= 0.5).collect();
        for (&i, &p) in te.iter().zip(&probs) {
            pooled[i] = p;
        }
        reports.push(FoldReport {
            fold: f,
            n_train: tr.len(),
            n_test: te.len(),
            lambda,
            accuracy: metrics::accuracy(&pred, &te_labels),
            auc: metrics::auc(&probs, &te_labels),
            f1: metrics::f1(&pred, &te_labels),
        });
    }
    let pred: Vec<bool> = pooled.iter().map(|&p| p >= 0.5).collect();
    Ok(EvalReport {
        accuracy: metrics::accuracy(&pred, labels),
        auc: metrics::auc(&pooled, labels).ok_or(Error::SingleClassFold { fold: 0 })?,
        f1: metrics::f1(&pred, labels),
        folds: reports,
        seed: cfg.seed,
    })
}
