//! Minimal neural-network layers with explicit forward caches and
//! hand-written backward passes.
//!
//! Every trainable value of a model lives in one flat [`ParamStore`]; layers
//! only hold [`Slot`]s into it. Gradients are flat vectors of the same
//! length, which keeps optimizers, clipping, checkpoints and finite
//! difference checks trivial.

use alloc::string::String;
use alloc::vec::Vec;

use crate::rng;

mod attention;
mod conv;
mod linear;
mod norm;
mod recurrent;
mod transformer;

pub use attention::{AttnCache, MultiHeadAttention};
pub use conv::{ConvBlock, ConvCache};
pub use linear::Linear;
pub use norm::{BatchNorm, BatchNormCache, LayerNorm, LayerNormCache};
pub use recurrent::{CellKind, RecurrentStack, SeqCache};
pub use transformer::{
    positional_encoding, DecoderCache, EncoderCache, IncrementalDecoder, TransformerDecoder,
    TransformerEncoder,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub len: usize,
}

impl Slot {
    #[inline]
    pub fn of<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.offset..self.offset + self.len]
    }

    #[inline]
    pub fn of_mut<'a>(&self, p: &'a mut [f64]) -> &'a mut [f64] {
        &mut p[self.offset..self.offset + self.len]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub slot: Slot,
}

/// Named arrays packed into one contiguous vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub specs: Vec<ParamSpec>,
    pub values: Vec<f64>,
}

impl ParamStore {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ParamSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    /// Number of values whose name starts with `prefix`.
    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.specs
            .iter()
            .filter(|s| s.name.starts_with(prefix))
            .map(|s| s.slot.len)
            .sum()
    }

    pub fn zeros_like(&self) -> Vec<f64> {
        alloc::vec![0.0; self.values.len()]
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Uniform(f64),
    Const(f64),
}

/// Registers parameters; each array is initialized from its own random
/// stream derived from `(seed, name)` so adding or removing a module never
/// changes the initial values of another.
pub struct Builder<'a> {
    store: &'a mut ParamStore,
    seed: u64,
    prefix: String,
}

impl<'a> Builder<'a> {
    pub fn new(store: &'a mut ParamStore, seed: u64) -> Self {
        Self {
            store,
            seed,
            prefix: String::new(),
        }
    }

    pub fn scope(&mut self, name: &str) -> Builder<'_> {
        let mut prefix = self.prefix.clone();
        prefix.push_str(name);
        prefix.push('.');
        Builder {
            store: self.store,
            seed: self.seed,
            prefix,
        }
    }

    pub fn add(&mut self, name: &str, shape: &[usize], init: Init) -> Slot {
        let mut full = self.prefix.clone();
        full.push_str(name);
        let len: usize = shape.iter().product();
        let slot = Slot {
            offset: self.store.values.len(),
            len,
        };
        let mut r = rng::derived(self.seed, &full);
        match init {
            Init::Uniform(bound) => {
                for _ in 0..len {
                    let v = rng::uniform(&mut r, -bound, bound);
                    self.store.values.push(v);
                }
            }
            Init::Const(c) => self.store.values.extend(core::iter::repeat_n(c, len)),
        }
        self.store.specs.push(ParamSpec {
            name: full,
            shape: shape.to_vec(),
            slot,
        });
        slot
    }
}

#[inline]
pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

pub const LEAKY_SLOPE: f64 = 0.01;
