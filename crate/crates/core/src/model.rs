//! The encoder (optional conv block + sequential block), the three sequence
//! decoders and the contrastive head.
//!
//! Coordinates enter the networks divided by [`COORD_SCALE`]'s inverse (so a
//! typical gaze position is of order one) and decoder outputs are scaled
//! back to degrees; every public method speaks degrees.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{self, Mat};
use crate::nn::{
    BatchNorm, BatchNormCache, Builder, CellKind, ConvBlock, ConvCache, EncoderCache, Linear,
    ParamStore, RecurrentStack, SeqCache, TransformerDecoder, TransformerEncoder,
};

/// Network units per visual degree.
pub const COORD_SCALE: f64 = 0.1;

/// Fixed-length scanpath summary.
pub type Embedding = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backbone {
    Rnn,
    Gru,
    Lstm,
    Transformer,
}

impl Backbone {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rnn => "RNN",
            Self::Gru => "GRU",
            Self::Lstm => "LSTM",
            Self::Transformer => "TRANSFORMER",
        }
    }

    fn cell(self) -> Option<CellKind> {
        match self {
            Self::Rnn => Some(CellKind::Rnn),
            Self::Gru => Some(CellKind::Gru),
            Self::Lstm => Some(CellKind::Lstm),
            Self::Transformer => None,
        }
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RNN" => Ok(Self::Rnn),
            "GRU" => Ok(Self::Gru),
            "LSTM" => Ok(Self::Lstm),
            "TRANSFORMER" => Ok(Self::Transformer),
            _ => Err(Error::Config(format!("unknown backbone `{s}`"))),
        }
    }
}

/// The four pre-training tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Rc,
    Pc,
    Fi,
    Cl,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Rc, Task::Pc, Task::Fi, Task::Cl];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rc => "rc",
            Self::Pc => "pc",
            Self::Fi => "fi",
            Self::Cl => "cl",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown task `{s}`")))
    }
}

/// Which task heads a model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaskSet([bool; 4]);

impl TaskSet {
    pub fn all() -> Self {
        Self([true; 4])
    }

    pub fn none() -> Self {
        Self([false; 4])
    }

    pub fn contains(self, t: Task) -> bool {
        self.0[t.index()]
    }

    pub fn with(mut self, t: Task) -> Self {
        self.0[t.index()] = true;
        self
    }

    pub fn without(mut self, t: Task) -> Self {
        self.0[t.index()] = false;
        self
    }

    pub fn iter(self) -> impl Iterator<Item = Task> {
        Task::ALL.into_iter().filter(move |t| self.contains(*t))
    }

    pub fn is_empty(self) -> bool {
        self.0.iter().all(|b| !b)
    }
}

impl Default for TaskSet {
    fn default() -> Self {
        Self::all()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub backbone: Backbone,
    pub n_layers: usize,
    pub hidden: usize,
    pub use_conv: bool,
    pub conv_kernel: usize,
    pub conv_channels: usize,
    pub pool: usize,
    pub cl_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            backbone: Backbone::Gru,
            n_layers: 2,
            hidden: 128,
            use_conv: true,
            conv_kernel: 7,
            conv_channels: 30,
            pool: 2,
            cl_hidden: 128,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_layers", self.n_layers),
            ("hidden", self.hidden),
            ("conv_kernel", self.conv_kernel),
            ("conv_channels", self.conv_channels),
            ("pool", self.pool),
            ("cl_hidden", self.cl_hidden),
        ];
        if let Some((k, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("`{k}` must be positive")));
        }
        if self.conv_kernel % 2 == 0 {
            return Err(Error::Config("`conv_kernel` must be odd".into()));
        }
        if self.use_conv && self.conv_channels < 2 {
            return Err(Error::Config("`conv_channels` must be at least 2".into()));
        }
        Ok(())
    }

    pub fn embedding_dim(&self) -> usize {
        match self.backbone {
            Backbone::Lstm => 2 * self.n_layers * self.hidden,
            _ => self.n_layers * self.hidden,
        }
    }

    /// Attention heads of the Transformer backbone: 4 when the width allows
    /// it, otherwise the largest smaller divisor.
    pub fn heads(&self) -> usize {
        (1..=4).rev().find(|h| self.hidden % h == 0).unwrap_or(1)
    }

    /// Feed-forward width of the Transformer layers.
    pub fn ff_width(&self) -> usize {
        3 * self.hidden
    }

    /// Shortest input the encoder accepts.
    pub fn min_input_len(&self) -> usize {
        if self.use_conv {
            self.conv_kernel.max(self.pool)
        } else {
            1
        }
    }

    fn seq_input(&self) -> usize {
        if self.use_conv {
            self.conv_channels
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum EncoderBody {
    Recurrent(RecurrentStack),
    Transformer(TransformerEncoder),
}

#[derive(Debug, Clone, PartialEq)]
struct Encoder {
    conv: Option<ConvBlock>,
    body: EncoderBody,
}

#[derive(Debug, Clone)]
enum EncoderBodyCache {
    Recurrent(SeqCache),
    Transformer(EncoderCache),
}

#[derive(Debug, Clone)]
pub struct EncodeCache {
    conv: Option<ConvCache>,
    body: EncoderBodyCache,
}

impl Encoder {
    fn new(b: &mut Builder<'_>, cfg: &ModelConfig) -> Self {
        let mut s = b.scope("encoder");
        let conv = cfg.use_conv.then(|| {
            ConvBlock::new(
                &mut s,
                "conv",
                2,
                cfg.conv_channels,
                cfg.conv_kernel,
                cfg.pool,
            )
        });
        let body = match cfg.backbone.cell() {
            Some(kind) => EncoderBody::Recurrent(RecurrentStack::new(
                &mut s,
                "rnn",
                kind,
                cfg.seq_input(),
                cfg.hidden,
                cfg.n_layers,
            )),
            None => EncoderBody::Transformer(TransformerEncoder::new(
                &mut s,
                "transformer",
                cfg.seq_input(),
                cfg.hidden,
                cfg.n_layers,
                cfg.heads(),
                cfg.ff_width(),
            )),
        };
        Self { conv, body }
    }

    fn forward(&self, p: &[f64], x: &Mat) -> Result<(Embedding, EncodeCache)> {
        let (h, conv) = match &self.conv {
            Some(c) => {
                let (h, cache) = c.forward(p, x)?;
                (h, Some(cache))
            }
            None => (x.clone(), None),
        };
        let (emb, body) = match &self.body {
            EncoderBody::Recurrent(stack) => {
                let cache = stack.forward_seq(p, &h, None);
                (
                    cache.final_state.clone(),
                    EncoderBodyCache::Recurrent(cache),
                )
            }
            EncoderBody::Transformer(enc) => {
                let (_, eos, cache) = enc.forward(p, &h);
                (eos, EncoderBodyCache::Transformer(cache))
            }
        };
        Ok((emb, EncodeCache { conv, body }))
    }

    fn backward(&self, p: &[f64], cache: &EncodeCache, d_emb: &[f64], g: &mut [f64]) {
        let dh = match (&self.body, &cache.body) {
            (EncoderBody::Recurrent(stack), EncoderBodyCache::Recurrent(c)) => {
                stack.backward_seq(p, c, None, Some(d_emb), g).0
            }
            (EncoderBody::Transformer(enc), EncoderBodyCache::Transformer(c)) => {
                enc.backward(p, c, None, d_emb, g)
            }
            _ => unreachable!("cache matches its encoder"),
        };
        if let (Some(conv), Some(c)) = (&self.conv, &cache.conv) {
            conv.backward(p, c, &dh, g);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum DecoderBody {
    Recurrent(RecurrentStack),
    Transformer(TransformerDecoder),
}

/// A sequential block mirroring the encoder's, conditioned on the embedding,
/// followed by a per-step linear read-out.
#[derive(Debug, Clone, PartialEq)]
struct SeqDecoder {
    body: DecoderBody,
    out: Linear,
    n_layers: usize,
    hidden: usize,
}

#[derive(Debug, Clone)]
enum DecoderBodyCache {
    Recurrent(SeqCache),
    Transformer(crate::nn::DecoderCache),
}

#[derive(Debug, Clone)]
pub struct DecodeCache {
    body: DecoderBodyCache,
    hidden: Mat,
}

impl SeqDecoder {
    fn new(b: &mut Builder<'_>, name: &str, cfg: &ModelConfig, out: usize) -> Self {
        let mut s = b.scope(name);
        let body = match cfg.backbone.cell() {
            Some(kind) => DecoderBody::Recurrent(RecurrentStack::new(
                &mut s,
                "rnn",
                kind,
                2,
                cfg.hidden,
                cfg.n_layers,
            )),
            None => DecoderBody::Transformer(TransformerDecoder::new(
                &mut s,
                "transformer",
                2,
                cfg.hidden,
                cfg.n_layers,
                cfg.heads(),
                cfg.ff_width(),
            )),
        };
        Self {
            body,
            out: Linear::new(&mut s, "out", cfg.hidden, out),
            n_layers: cfg.n_layers,
            hidden: cfg.hidden,
        }
    }

    fn memory(&self, emb: &[f64]) -> Mat {
        Mat::from_vec(self.n_layers, self.hidden, emb.to_vec())
    }

    /// Runs over given step inputs (already in network units).
    fn forward(&self, p: &[f64], emb: &[f64], inputs: &Mat) -> (Mat, DecodeCache) {
        let (hidden, body) = match &self.body {
            DecoderBody::Recurrent(stack) => {
                let c = stack.forward_seq(p, inputs, Some(emb));
                (c.outputs.clone(), DecoderBodyCache::Recurrent(c))
            }
            DecoderBody::Transformer(dec) => {
                let (h, c) = dec.forward(p, inputs, &self.memory(emb));
                (h, DecoderBodyCache::Transformer(c))
            }
        };
        let y = self.out.forward_rows(p, &hidden);
        (y, DecodeCache { body, hidden })
    }

    /// Gradient with respect to the embedding.
    fn backward(&self, p: &[f64], cache: &DecodeCache, dy: &Mat, g: &mut [f64]) -> Vec<f64> {
        let dh = self
            .out
            .backward_rows(p, &cache.hidden, dy, g, true)
            .unwrap();
        match (&self.body, &cache.body) {
            (DecoderBody::Recurrent(stack), DecoderBodyCache::Recurrent(c)) => {
                stack.backward_seq(p, c, Some(&dh), None, g).1
            }
            (DecoderBody::Transformer(dec), DecoderBodyCache::Transformer(c)) => {
                dec.backward(p, c, &dh, self.n_layers, g).1.data
            }
            _ => unreachable!("cache matches its decoder"),
        }
    }

    /// Free-running decoding: step 0 sees zeros, later steps see the
    /// previous output. Everything in network units.
    fn generate(&self, p: &[f64], emb: &[f64], steps: usize) -> Mat {
        let mut y = Mat::zeros(steps, self.out.output);
        let mut x = vec![0.0; self.out.output];
        let mut h = vec![0.0; self.hidden];
        match &self.body {
            DecoderBody::Recurrent(stack) => {
                let mut state = emb.to_vec();
                for s in 0..steps {
                    stack.step(p, &x, &mut state, &mut h);
                    self.out.forward_vec(p, &h, y.row_mut(s));
                    x.copy_from_slice(y.row(s));
                }
            }
            DecoderBody::Transformer(dec) => {
                let mut inc = dec.incremental(p, &self.memory(emb));
                for s in 0..steps {
                    inc.step(p, &x, &mut h);
                    self.out.forward_vec(p, &h, y.row_mut(s));
                    x.copy_from_slice(y.row(s));
                }
            }
        }
        y
    }
}

/// `|e1 - e2| -> Linear -> sigmoid -> BatchNorm -> Linear -> sigmoid`.
#[derive(Debug, Clone, PartialEq)]
struct ClHead {
    hidden: Linear,
    bn: BatchNorm,
    out: Linear,
}

#[derive(Debug, Clone)]
pub struct ClCache {
    diffs: Mat,
    act: Mat,
    bn: BatchNormCache,
    normed: Mat,
}

impl ClHead {
    fn new(p: &mut Builder<'_>, buf: &mut Builder<'_>, emb: usize, hidden: usize) -> Self {
        let mut s = p.scope("cl_head");
        let mut bs = buf.scope("cl_head");
        Self {
            hidden: Linear::new(&mut s, "hidden", emb, hidden),
            bn: BatchNorm::new(&mut s, &mut bs, "bn", hidden),
            out: Linear::new(&mut s, "out", hidden, 1),
        }
    }

    fn forward_train(
        &self,
        p: &[f64],
        buffers: Option<&mut [f64]>,
        diffs: &Mat,
    ) -> (Vec<f64>, ClCache) {
        let mut act = self.hidden.forward_rows(p, diffs);
        act.data.iter_mut().for_each(|v| *v = math::sigmoid(*v));
        let (normed, bn) = self.bn.forward_train(p, buffers, &act);
        let logits = self.out.forward_rows(p, &normed).data;
        let cache = ClCache {
            diffs: diffs.clone(),
            act,
            bn,
            normed,
        };
        (logits, cache)
    }

    fn backward(&self, p: &[f64], c: &ClCache, d_logits: &[f64], g: &mut [f64]) -> Mat {
        let dy = Mat::from_vec(d_logits.len(), 1, d_logits.to_vec());
        let dn = self.out.backward_rows(p, &c.normed, &dy, g, true).unwrap();
        let mut da = self.bn.backward(p, &c.bn, &dn, g);
        for (d, a) in da.data.iter_mut().zip(&c.act.data) {
            *d *= a * (1.0 - a);
        }
        self.hidden
            .backward_rows(p, &c.diffs, &da, g, true)
            .unwrap()
    }

    fn eval_logit(&self, p: &[f64], buffers: &[f64], diff: &[f64]) -> f64 {
        let mut a = vec![0.0; self.hidden.output];
        self.hidden.forward_vec(p, diff, &mut a);
        a.iter_mut().for_each(|v| *v = math::sigmoid(*v));
        let mut n = vec![0.0; a.len()];
        self.bn.forward_eval_row(p, buffers, &a, &mut n);
        let mut y = [0.0];
        self.out.forward_vec(p, &n, &mut y);
        y[0]
    }
}

/// Encoder plus the task heads selected at construction. Parameters of a
/// task that was not selected do not exist.
#[derive(Debug, Clone, PartialEq)]
pub struct ObfModel {
    pub config: ModelConfig,
    pub tasks: TaskSet,
    pub params: ParamStore,
    /// Batch-normalization running statistics (not trained by gradients).
    pub buffers: ParamStore,
    encoder: Encoder,
    rc: Option<SeqDecoder>,
    pc: Option<SeqDecoder>,
    fi: Option<SeqDecoder>,
    cl: Option<ClHead>,
}

/// Scales degree points into a network-unit matrix.
pub fn to_network(points: &[[f64; 2]]) -> Mat {
    let mut m = Mat::from_points(points);
    m.scale(COORD_SCALE);
    m
}

/// Decoder inputs for teacher forcing: zeros, then the target shifted by one.
pub fn shifted_inputs(target: &Mat) -> Mat {
    let mut x = Mat::zeros(target.rows, target.cols);
    if target.rows > 1 {
        x.data[target.cols..].copy_from_slice(&target.data[..(target.rows - 1) * target.cols]);
    }
    x
}

impl ObfModel {
    pub fn new(config: ModelConfig, tasks: TaskSet, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::default();
        let mut buffers = ParamStore::default();
        let mut b = Builder::new(&mut params, seed);
        let encoder = Encoder::new(&mut b, &config);
        let rc = tasks
            .contains(Task::Rc)
            .then(|| SeqDecoder::new(&mut b, "decoder_rc", &config, 2));
        let pc = tasks
            .contains(Task::Pc)
            .then(|| SeqDecoder::new(&mut b, "decoder_pc", &config, 2));
        let fi = tasks
            .contains(Task::Fi)
            .then(|| SeqDecoder::new(&mut b, "decoder_fi", &config, 1));
        let cl = tasks.contains(Task::Cl).then(|| {
            let mut bb = Builder::new(&mut buffers, seed);
            ClHead::new(&mut b, &mut bb, config.embedding_dim(), config.cl_hidden)
        });
        Ok(Self {
            config,
            tasks,
            params,
            buffers,
            encoder,
            rc,
            pc,
            fi,
            cl,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim()
    }

    pub fn encoder_param_count(&self) -> usize {
        self.params.count_prefix("encoder.")
    }

    pub(crate) fn check_input(&self, points: &[[f64; 2]]) -> Result<()> {
        let needed = self.config.min_input_len();
        if points.len() < needed {
            return Err(Error::TooShort {
                needed,
                got: points.len(),
            });
        }
        if points
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::NonFinite("encoder input"));
        }
        Ok(())
    }

    /// Embedding of a segment given in degrees.
    pub fn encode(&self, points: &[[f64; 2]]) -> Result<Embedding> {
        self.check_input(points)?;
        let (e, _) = self
            .encoder
            .forward(&self.params.values, &to_network(points))?;
        Ok(e)
    }

    /// Training-mode encode of a network-unit matrix, keeping the cache.
    pub fn encode_train(&self, p: &[f64], x: &Mat) -> Result<(Embedding, EncodeCache)> {
        self.encoder.forward(p, x)
    }

    pub fn encode_backward(&self, p: &[f64], cache: &EncodeCache, d_emb: &[f64], g: &mut [f64]) {
        self.encoder.backward(p, cache, d_emb, g);
    }

    fn decoder(&self, task: Task) -> Result<&SeqDecoder> {
        let d = match task {
            Task::Rc => self.rc.as_ref(),
            Task::Pc => self.pc.as_ref(),
            Task::Fi => self.fi.as_ref(),
            Task::Cl => None,
        };
        d.ok_or_else(|| Error::Config(format!("model has no {task} decoder")))
    }

    fn cl(&self) -> Result<&ClHead> {
        self.cl
            .as_ref()
            .ok_or_else(|| Error::Config("model has no cl head".into()))
    }

    fn check_emb(&self, e: &[f64]) -> Result<()> {
        if e.len() != self.embedding_dim() {
            return Err(Error::Shape(format!(
                "embedding has {} values, model expects {}",
                e.len(),
                self.embedding_dim()
            )));
        }
        Ok(())
    }

    /// Training-mode decoder pass over network-unit step inputs.
    pub fn decode_train(
        &self,
        task: Task,
        p: &[f64],
        emb: &[f64],
        inputs: &Mat,
    ) -> Result<(Mat, DecodeCache)> {
        Ok(self.decoder(task)?.forward(p, emb, inputs))
    }

    pub fn decode_backward(
        &self,
        task: Task,
        p: &[f64],
        cache: &DecodeCache,
        dy: &Mat,
        g: &mut [f64],
    ) -> Result<Vec<f64>> {
        Ok(self.decoder(task)?.backward(p, cache, dy, g))
    }

    /// Free-running decoder output in network units.
    pub fn generate(&self, task: Task, p: &[f64], emb: &[f64], steps: usize) -> Result<Mat> {
        Ok(self.decoder(task)?.generate(p, emb, steps))
    }

    fn decode_points(
        &self,
        task: Task,
        e: &[f64],
        t: usize,
        teacher: Option<&[[f64; 2]]>,
    ) -> Result<Vec<[f64; 2]>> {
        self.check_emb(e)?;
        let dec = self.decoder(task)?;
        let p = &self.params.values;
        let mut y = match teacher {
            Some(tch) => {
                if tch.len() != t {
                    return Err(Error::Shape(format!(
                        "teacher has {} steps, expected {t}",
                        tch.len()
                    )));
                }
                dec.forward(p, e, &shifted_inputs(&to_network(tch))).0
            }
            None => dec.generate(p, e, t),
        };
        y.scale(1.0 / COORD_SCALE);
        Ok(y.to_points())
    }

    /// Reconstruction of `t` steps; free-running unless a teacher sequence
    /// is given.
    pub fn decode_rc(
        &self,
        e: &[f64],
        t: usize,
        teacher: Option<&[[f64; 2]]>,
    ) -> Result<Vec<[f64; 2]>> {
        self.decode_points(Task::Rc, e, t, teacher)
    }

    /// Forecast of the next `t` steps.
    pub fn decode_pc(
        &self,
        e: &[f64],
        t: usize,
        teacher: Option<&[[f64; 2]]>,
    ) -> Result<Vec<[f64; 2]>> {
        self.decode_points(Task::Pc, e, t, teacher)
    }

    /// Per-sample fixation probability of the segment `x` that produced `e`.
    pub fn decode_fi(&self, e: &[f64], x: &[[f64; 2]]) -> Result<Vec<f64>> {
        self.check_emb(e)?;
        if x.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        let (y, _) = self
            .decoder(Task::Fi)?
            .forward(&self.params.values, e, &to_network(x));
        Ok(y.data.iter().map(|&v| math::sigmoid(v)).collect())
    }

    /// Probability that two embeddings come from the same scanpath
    /// (evaluation mode batch normalization).
    pub fn cl_head(&self, e1: &[f64], e2: &[f64]) -> Result<f64> {
        self.check_emb(e1)?;
        self.check_emb(e2)?;
        let diff: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| (a - b).abs()).collect();
        let logit = self
            .cl()?
            .eval_logit(&self.params.values, &self.buffers.values, &diff);
        Ok(math::sigmoid(logit))
    }

    /// Training-mode head over a batch of `|e1 - e2|` rows; returns logits.
    /// Running statistics are updated when `buffers` is given.
    pub fn cl_train(
        &self,
        p: &[f64],
        buffers: Option<&mut [f64]>,
        diffs: &Mat,
    ) -> Result<(Vec<f64>, ClCache)> {
        Ok(self.cl()?.forward_train(p, buffers, diffs))
    }

    pub fn cl_backward(
        &self,
        p: &[f64],
        cache: &ClCache,
        d_logits: &[f64],
        g: &mut [f64],
    ) -> Result<Mat> {
        Ok(self.cl()?.backward(p, cache, d_logits, g))
    }

    /// Replaces all values (parameters then buffers) from named arrays.
    pub fn load_arrays<'a>(
        &mut self,
        arrays: impl IntoIterator<Item = (&'a str, &'a [f64])>,
    ) -> Result<()> {
        let mut seen = 0;
        for (name, vals) in arrays {
            let (store, spec) = if let Some(s) = self.params.get(name).map(|s| s.slot) {
                (&mut self.params.values, s)
            } else if let Some(s) = self.buffers.get(name).map(|s| s.slot) {
                (&mut self.buffers.values, s)
            } else {
                return Err(Error::Shape(format!("unexpected array `{name}`")));
            };
            if vals.len() != spec.len {
                return Err(Error::Shape(format!(
                    "array `{name}` has {} values, expected {}",
                    vals.len(),
                    spec.len
                )));
            }
            spec.of_mut(store).copy_from_slice(vals);
            seen += 1;
        }
        let expected = self.params.specs.len() + self.buffers.specs.len();
        if seen != expected {
            return Err(Error::Shape(format!(
                "got {seen} arrays, expected {expected}"
            )));
        }
        Ok(())
    }

    /// Names of all stored arrays, parameters first.
    pub fn array_names(&self) -> Vec<String> {
        self.params
            .specs
            .iter()
            .chain(&self.buffers.specs)
            .map(|s| s.name.clone())
            .collect()
    }
}
