//! Parameter updates: element-wise gradient clipping, the step learning-rate
//! schedule, and SGD / Adam.

use alloc::vec::Vec;

use crate::math;

/// Clamps every gradient entry to `[-limit, limit]`.
pub fn clip_elementwise(grads: &mut [f64], limit: f64) {
    for g in grads.iter_mut() {
        *g = g.clamp(-limit, limit);
    }
}

/// Learning rate for a 1-based epoch, halved every `halving_every` epochs.
pub fn step_lr(base: f64, epoch: usize, halving_every: usize) -> f64 {
    if halving_every == 0 {
        return base;
    }
    let halvings = epoch.saturating_sub(1) / halving_every;
    base * libm::pow(0.5, halvings as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Self {
        let state = if kind == OptimizerKind::Adam {
            n_params
        } else {
            0
        };
        Self {
            kind,
            m: alloc::vec![0.0; state],
            v: alloc::vec![0.0; state],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => math::axpy(-lr, grads, params),
            OptimizerKind::Adam => {
                let bc1 = 1.0 - libm::pow(BETA1, self.t as f64);
                let bc2 = 1.0 - libm::pow(BETA2, self.t as f64);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
                    let mhat = self.m[i] / bc1;
                    let vhat = self.v[i] / bc2;
                    params[i] -= lr * mhat / (math::sqrt(vhat) + ADAM_EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_halves_every_hundred() {
        assert_eq!(step_lr(0.001, 1, 100), 0.001);
        assert_eq!(step_lr(0.001, 100, 100), 0.001);
        assert_eq!(step_lr(0.001, 101, 100), 0.0005);
        assert_eq!(step_lr(0.001, 250, 100), 0.001 / 4.0);
    }

    #[test]
    fn clipping_bounds_every_entry() {
        let mut g = [3.0, -0.2, -7.5, 0.5];
        clip_elementwise(&mut g, 0.5);
        assert_eq!(g, [0.5, -0.2, -0.5, 0.5]);
    }

    #[test]
    fn adam_minimizes_a_bowl() {
        let mut x = [3.0, -2.0];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 2);
        for _ in 0..2000 {
            let g = [2.0 * x[0], 2.0 * x[1]];
            opt.step(&mut x, &g, 0.01);
        }
        assert!(x[0].abs() < 1e-3 && x[1].abs() < 1e-3);
    }
}
