//! Run configuration: every section mirrors a core configuration type and
//! its field names. Absent keys keep the defaults.
//!
//! ```text
//! [model]            ModelConfig
//! [pretrain]         PretrainConfig scalars and ranges (`a, b`)
//! [pretrain.weights] rc, pc, fi, cl
//! [pretrain.augment] AugmentConfig
//! [pretrain.ivt]     IvtParams
//! [synth]            SynthConfig
//! [synth.geometry]   ScreenGeometry of the synthetic screen
//! [head]             supervised stimulus head
//! [protonet]         prototypical network
//! [lasso]            participant classifier
//! ```

use std::fmt::Write as _;

use obf_core::downstream::{HeadConfig, LassoConfig, ProtoConfig};
use obf_core::model::{Backbone, ModelConfig, Task, TaskSet};
use obf_core::optim::OptimizerKind;
use obf_core::pretrain::{DecoderFeed, PretrainConfig};
use obf_core::synth::SynthConfig;
use sha2::{Digest, Sha256};

use crate::kv::{push_line, KvError, KvFile};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub pretrain: PretrainConfig,
    pub synth: SynthConfig,
    pub head: HeadConfig,
    pub protonet: ProtoConfig,
    pub lasso: LassoConfig,
}

fn set_backbone(kv: &KvFile, key: &str, slot: &mut Backbone) -> Result<(), KvError> {
    kv.set(key, "one of RNN, GRU, LSTM, Transformer", slot)
}

fn parse_optimizer(kv: &KvFile, key: &str, slot: &mut OptimizerKind) -> Result<(), KvError> {
    if let Some(v) = kv.get_str(key)? {
        *slot = match v.to_ascii_lowercase().as_str() {
            "sgd" => OptimizerKind::Sgd,
            "adam" => OptimizerKind::Adam,
            _ => return Err(type_error(kv, key, "sgd or adam", v)),
        };
    }
    Ok(())
}

fn parse_feed(kv: &KvFile, key: &str, slot: &mut DecoderFeed) -> Result<(), KvError> {
    if let Some(v) = kv.get_str(key)? {
        *slot = match v.to_ascii_lowercase().as_str() {
            "teacher" => DecoderFeed::Teacher,
            "free" => DecoderFeed::Free,
            _ => return Err(type_error(kv, key, "teacher or free", v)),
        };
    }
    Ok(())
}

fn type_error(kv: &KvFile, key: &str, expected: &'static str, value: &str) -> KvError {
    let line = kv.all(key).first().map_or(0, |e| e.line);
    KvError::Type {
        key: key.into(),
        line,
        expected,
        value: value.into(),
    }
}

/// Reads the `[model]` section.
pub fn read_model(kv: &KvFile, m: &mut ModelConfig) -> Result<(), KvError> {
    set_backbone(kv, "model.backbone", &mut m.backbone)?;
    kv.set_usize("model.n_layers", &mut m.n_layers)?;
    kv.set_usize("model.hidden", &mut m.hidden)?;
    kv.set_bool("model.use_conv", &mut m.use_conv)?;
    kv.set_usize("model.conv_kernel", &mut m.conv_kernel)?;
    kv.set_usize("model.conv_channels", &mut m.conv_channels)?;
    kv.set_usize("model.pool", &mut m.pool)?;
    kv.set_usize("model.cl_hidden", &mut m.cl_hidden)
}

fn read_pretrain(kv: &KvFile, p: &mut PretrainConfig) -> Result<(), KvError> {
    kv.set_usize("pretrain.epochs", &mut p.epochs)?;
    kv.set_f64("pretrain.lr", &mut p.lr)?;
    kv.set_usize("pretrain.lr_halving_every", &mut p.lr_halving_every)?;
    kv.set_f64("pretrain.grad_clip", &mut p.grad_clip)?;
    kv.set_usize("pretrain.batch", &mut p.batch)?;
    kv.set_pair("pretrain.input_len_s", &mut p.input_len_s)?;
    kv.set_f64("pretrain.pc_horizon_ms", &mut p.pc_horizon_ms)?;
    kv.set_pair("pretrain.cl_frac", &mut p.cl_frac)?;
    kv.set_f64("pretrain.train_frac", &mut p.train_frac)?;
    kv.set("pretrain.seed", "a non-negative integer", &mut p.seed)?;
    parse_optimizer(kv, "pretrain.optimizer", &mut p.optimizer)?;
    parse_feed(kv, "pretrain.decoder_feed", &mut p.decoder_feed)?;
    kv.set_f64("pretrain.weights.rc", &mut p.weights.rc)?;
    kv.set_f64("pretrain.weights.pc", &mut p.weights.pc)?;
    kv.set_f64("pretrain.weights.fi", &mut p.weights.fi)?;
    kv.set_f64("pretrain.weights.cl", &mut p.weights.cl)?;
    let a = &mut p.augment;
    kv.set_pair("pretrain.augment.offset_range_deg", &mut a.offset_range_deg)?;
    kv.set_pair("pretrain.augment.scale_range", &mut a.scale_range)?;
    kv.set_pair(
        "pretrain.augment.rotation_range_rad",
        &mut a.rotation_range_rad,
    )?;
    kv.set_pair("pretrain.augment.shear_range", &mut a.shear_range)?;
    kv.set_f64(
        "pretrain.augment.point_noise_sd_deg",
        &mut a.point_noise_sd_deg,
    )?;
    kv.set_f64("pretrain.augment.point_noise_prob", &mut a.point_noise_prob)?;
    kv.set_f64(
        "pretrain.ivt.velocity_threshold_degps",
        &mut p.ivt.velocity_threshold_degps,
    )?;
    kv.set_f64("pretrain.ivt.min_fixation_ms", &mut p.ivt.min_fixation_ms)
}

fn read_synth(kv: &KvFile, s: &mut SynthConfig) -> Result<(), KvError> {
    kv.set_usize("synth.n_participants", &mut s.n_participants)?;
    kv.set_usize("synth.n_stimuli", &mut s.n_stimuli)?;
    kv.set_usize("synth.scanpaths_per_pair", &mut s.scanpaths_per_pair)?;
    kv.set_f64("synth.duration_s", &mut s.duration_s)?;
    kv.set_pair("synth.fixation_ms", &mut s.fixation_ms)?;
    kv.set_pair("synth.saccade_ms", &mut s.saccade_ms)?;
    kv.set_pair("synth.amplitude_deg", &mut s.amplitude_deg)?;
    kv.set_f64("synth.jitter_sd_deg", &mut s.jitter_sd_deg)?;
    kv.set_f64("synth.target_spread_deg", &mut s.target_spread_deg)?;
    kv.set_usize("synth.clusters_per_stimulus", &mut s.clusters_per_stimulus)?;
    kv.set_pair("synth.jitter_scale_range", &mut s.jitter_scale_range)?;
    kv.set_pair("synth.dwell_bias_range", &mut s.dwell_bias_range)?;
    kv.set_f64(
        "synth.participant_offset_deg",
        &mut s.participant_offset_deg,
    )?;
    kv.set_f64("synth.class_dwell_factor", &mut s.class_dwell_factor)?;
    kv.set_f64("synth.positive_fraction", &mut s.positive_fraction)?;
    kv.set("synth.source_tag", "text", &mut s.source_tag)?;
    kv.set("synth.seed", "a non-negative integer", &mut s.seed)?;
    let g = &mut s.geometry;
    kv.set("synth.geometry.width_px", "a pixel count", &mut g.width_px)?;
    kv.set(
        "synth.geometry.height_px",
        "a pixel count",
        &mut g.height_px,
    )?;
    kv.set_f64("synth.geometry.width_mm", &mut g.width_mm)?;
    kv.set_f64("synth.geometry.height_mm", &mut g.height_mm)?;
    kv.set_f64(
        "synth.geometry.viewing_distance_mm",
        &mut g.viewing_distance_mm,
    )
}

fn read_downstream(kv: &KvFile, c: &mut RunConfig) -> Result<(), KvError> {
    if let Some(v) = kv.get_str("head.widths")? {
        let widths: Result<Vec<usize>, _> = v.split(',').map(|w| w.trim().parse()).collect();
        c.head.widths =
            widths.map_err(|_| type_error(kv, "head.widths", "comma-separated integers", v))?;
    }
    kv.set_f64("head.dropout", &mut c.head.dropout)?;
    kv.set_usize("head.epochs", &mut c.head.epochs)?;
    kv.set_usize("head.batch", &mut c.head.batch)?;
    kv.set_f64("head.lr", &mut c.head.lr)?;
    kv.set_bool("head.fine_tune", &mut c.head.fine_tune)?;
    kv.set("head.seed", "a non-negative integer", &mut c.head.seed)?;
    kv.set_usize("protonet.dim", &mut c.protonet.dim)?;
    kv.set_usize("protonet.epochs", &mut c.protonet.epochs)?;
    kv.set_usize("protonet.iterations", &mut c.protonet.iterations)?;
    kv.set_f64("protonet.lr", &mut c.protonet.lr)?;
    kv.set_bool("protonet.fine_tune", &mut c.protonet.fine_tune)?;
    kv.set(
        "protonet.seed",
        "a non-negative integer",
        &mut c.protonet.seed,
    )?;
    kv.set_usize("lasso.folds", &mut c.lasso.folds)?;
    kv.set_usize("lasso.inner_folds", &mut c.lasso.inner_folds)?;
    kv.set_usize("lasso.n_lambdas", &mut c.lasso.n_lambdas)?;
    kv.set_f64("lasso.lambda_ratio", &mut c.lasso.lambda_ratio)?;
    kv.set_usize("lasso.max_iter", &mut c.lasso.max_iter)?;
    kv.set_f64("lasso.tol", &mut c.lasso.tol)?;
    kv.set("lasso.seed", "a non-negative integer", &mut c.lasso.seed)
}

pub fn parse_config(text: &str) -> Result<RunConfig, KvError> {
    let kv = KvFile::parse(text)?;
    let mut c = RunConfig::default();
    read_model(&kv, &mut c.model)?;
    read_pretrain(&kv, &mut c.pretrain)?;
    read_synth(&kv, &mut c.synth)?;
    read_downstream(&kv, &mut c)?;
    kv.finish()?;
    Ok(c)
}

fn pair(p: (f64, f64)) -> String {
    format!("{}, {}", p.0, p.1)
}

/// `[model]` section text; stored inside checkpoints.
pub fn model_text(m: &ModelConfig) -> String {
    let mut s = String::from("[model]\n");
    push_line(&mut s, "backbone", m.backbone);
    push_line(&mut s, "n_layers", m.n_layers);
    push_line(&mut s, "hidden", m.hidden);
    push_line(&mut s, "use_conv", m.use_conv);
    push_line(&mut s, "conv_kernel", m.conv_kernel);
    push_line(&mut s, "conv_channels", m.conv_channels);
    push_line(&mut s, "pool", m.pool);
    push_line(&mut s, "cl_hidden", m.cl_hidden);
    s
}

pub fn tasks_text(tasks: TaskSet) -> String {
    tasks.iter().map(Task::name).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Full canonical text; parsing it gives back the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = model_text(&self.model);
        let p = &self.pretrain;
        s.push_str("\n[pretrain]\n");
        push_line(&mut s, "epochs", p.epochs);
        push_line(&mut s, "lr", p.lr);
        push_line(&mut s, "lr_halving_every", p.lr_halving_every);
        push_line(&mut s, "grad_clip", p.grad_clip);
        push_line(&mut s, "batch", p.batch);
        push_line(&mut s, "input_len_s", pair(p.input_len_s));
        push_line(&mut s, "pc_horizon_ms", p.pc_horizon_ms);
        push_line(&mut s, "cl_frac", pair(p.cl_frac));
        push_line(&mut s, "train_frac", p.train_frac);
        push_line(&mut s, "seed", p.seed);
        push_line(&mut s, "optimizer", p.optimizer.name());
        push_line(&mut s, "decoder_feed", p.decoder_feed.name());
        s.push_str("\n[pretrain.weights]\n");
        for t in Task::ALL {
            push_line(&mut s, t.name(), p.weights.get(t));
        }
        let a = &p.augment;
        s.push_str("\n[pretrain.augment]\n");
        push_line(&mut s, "offset_range_deg", pair(a.offset_range_deg));
        push_line(&mut s, "scale_range", pair(a.scale_range));
        push_line(&mut s, "rotation_range_rad", pair(a.rotation_range_rad));
        push_line(&mut s, "shear_range", pair(a.shear_range));
        push_line(&mut s, "point_noise_sd_deg", a.point_noise_sd_deg);
        push_line(&mut s, "point_noise_prob", a.point_noise_prob);
        s.push_str("\n[pretrain.ivt]\n");
        push_line(
            &mut s,
            "velocity_threshold_degps",
            p.ivt.velocity_threshold_degps,
        );
        push_line(&mut s, "min_fixation_ms", p.ivt.min_fixation_ms);
        let y = &self.synth;
        s.push_str("\n[synth]\n");
        push_line(&mut s, "n_participants", y.n_participants);
        push_line(&mut s, "n_stimuli", y.n_stimuli);
        push_line(&mut s, "scanpaths_per_pair", y.scanpaths_per_pair);
        push_line(&mut s, "duration_s", y.duration_s);
        push_line(&mut s, "fixation_ms", pair(y.fixation_ms));
        push_line(&mut s, "saccade_ms", pair(y.saccade_ms));
        push_line(&mut s, "amplitude_deg", pair(y.amplitude_deg));
        push_line(&mut s, "jitter_sd_deg", y.jitter_sd_deg);
        push_line(&mut s, "target_spread_deg", y.target_spread_deg);
        push_line(&mut s, "clusters_per_stimulus", y.clusters_per_stimulus);
        push_line(&mut s, "jitter_scale_range", pair(y.jitter_scale_range));
        push_line(&mut s, "dwell_bias_range", pair(y.dwell_bias_range));
        push_line(&mut s, "participant_offset_deg", y.participant_offset_deg);
        push_line(&mut s, "class_dwell_factor", y.class_dwell_factor);
        push_line(&mut s, "positive_fraction", y.positive_fraction);
        push_line(&mut s, "source_tag", format!("\"{}\"", y.source_tag));
        push_line(&mut s, "seed", y.seed);
        let g = &y.geometry;
        s.push_str("\n[synth.geometry]\n");
        push_line(&mut s, "width_px", g.width_px);
        push_line(&mut s, "height_px", g.height_px);
        push_line(&mut s, "width_mm", g.width_mm);
        push_line(&mut s, "height_mm", g.height_mm);
        push_line(&mut s, "viewing_distance_mm", g.viewing_distance_mm);
        let h = &self.head;
        s.push_str("\n[head]\n");
        let widths: Vec<String> = h.widths.iter().map(|w| w.to_string()).collect();
        push_line(&mut s, "widths", widths.join(", "));
        push_line(&mut s, "dropout", h.dropout);
        push_line(&mut s, "epochs", h.epochs);
        push_line(&mut s, "batch", h.batch);
        push_line(&mut s, "lr", h.lr);
        push_line(&mut s, "fine_tune", h.fine_tune);
        push_line(&mut s, "seed", h.seed);
        let q = &self.protonet;
        s.push_str("\n[protonet]\n");
        push_line(&mut s, "dim", q.dim);
        push_line(&mut s, "epochs", q.epochs);
        push_line(&mut s, "iterations", q.iterations);
        push_line(&mut s, "lr", q.lr);
        push_line(&mut s, "fine_tune", q.fine_tune);
        push_line(&mut s, "seed", q.seed);
        let l = &self.lasso;
        s.push_str("\n[lasso]\n");
        push_line(&mut s, "folds", l.folds);
        push_line(&mut s, "inner_folds", l.inner_folds);
        push_line(&mut s, "n_lambdas", l.n_lambdas);
        push_line(&mut s, "lambda_ratio", l.lambda_ratio);
        push_line(&mut s, "max_iter", l.max_iter);
        push_line(&mut s, "tol", l.tol);
        push_line(&mut s, "seed", l.seed);
        s
    }

    /// Sets every seed in the configuration.
    pub fn set_seed(&mut self, seed: u64) {
        self.pretrain.seed = seed;
        self.synth.seed = seed;
        self.head.seed = seed;
        self.protonet.seed = seed;
        self.lasso.seed = seed;
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::to_text`].
    pub fn hash(&self) -> String {
        short_hash(self.to_text().as_bytes())
    }
}

pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(16);
    for b in &digest[..8] {
        let _ = write!(s, "{b:02x}");
    }
    s
}
